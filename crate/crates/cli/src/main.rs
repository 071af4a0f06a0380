use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heom_cli::commands::{
    compare_files, decompose_config, oracle_verdict, print_summary, print_sweep, resources_report, run_config, sweep,
};
use heom_cli::{CliError, Config, Result};
use heom_core::heom::ResourceInput;

#[derive(Parser)]
#[command(name = "heom", version, about = "HEOM and chain-mapping open-system dynamics")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, env = "HEOM_THREADS", global = true)]
    threads: Option<usize>,
    /// Reserved; nothing in the pipeline is stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        config: PathBuf,
        /// Override `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Exit non-zero if max |D - D_oracle| exceeds this.
        #[arg(long)]
        check: Option<f64>,
    },
    /// Run a configuration at several hierarchy depths.
    Sweep {
        config: PathBuf,
        /// Comma-separated depths; overrides `[sweep] depths`.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<usize>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Pairwise deviation report across result CSV files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Restrict to these columns.
        #[arg(long, value_delimiter = ',')]
        observables: Option<Vec<String>>,
        /// Write the aligned multi-column plot data here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// Also write a gnuplot script for the plot data.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Storage estimates for the standard, tensor-train and chain formats.
    Resources {
        #[arg(long, default_value_t = 2)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        l: u64,
        /// Tensor-train rank.
        #[arg(long, default_value_t = 0)]
        r: u64,
        /// Local tensor-train dimension (defaults to L + 1).
        #[arg(long = "local-dim")]
        big_n: Option<u64>,
        /// Chain Fock dimension.
        #[arg(long, default_value_t = 0)]
        d: u64,
        #[arg(long, default_value_t = 0)]
        n_ch: u64,
        #[arg(long, default_value_t = 0)]
        r_chain: u64,
    },
    /// Write mode lists, pole sets or chain coefficients without propagating.
    Decompose {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load(path: &PathBuf, out_dir: Option<PathBuf>) -> Result<Config> {
    let mut cfg = Config::load(path)?;
    if let Some(d) = out_dir {
        cfg.output.dir = d;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let _ = cli.seed;
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out_dir, check } => {
            let out = run_config(load(&config, out_dir)?)?;
            print_summary(&out.summary);
            if let Some(tol) = check {
                match oracle_verdict(&out.summary, tol) {
                    Some(true) => println!("oracle check: PASS (<= {tol:e})"),
                    Some(false) => {
                        println!("oracle check: FAIL (> {tol:e})");
                        return Ok(ExitCode::from(2));
                    }
                    None => return Err(CliError::Usage("--check applies to pure-dephasing models only".into())),
                }
            }
        }
        Command::Sweep { config, depths, out_dir } => {
            let cfg = load(&config, out_dir)?;
            let depths = depths
                .or_else(|| cfg.sweep.as_ref().map(|s| s.depths.clone()))
                .unwrap_or_default();
            let (rows, path) = sweep(cfg, &depths)?;
            print_sweep(&rows);
            println!("wrote {}", path.display());
            if rows.iter().any(|r| r.status != "ok") {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Compare {
            files,
            observables,
            plot_data,
            script,
        } => {
            let c = compare_files(&files, observables.as_deref(), plot_data.as_deref(), script.as_deref())?;
            print!("{}", c.report());
        }
        Command::Resources {
            n,
            k,
            l,
            r,
            big_n,
            d,
            n_ch,
            r_chain,
        } => {
            let input = ResourceInput {
                n,
                k,
                l,
                r,
                big_n: big_n.unwrap_or(l + 1),
                d,
                n_ch,
                r_chain,
            };
            print!("{}", resources_report(&input).1);
        }
        Command::Decompose { config, out_dir } => {
            for p in decompose_config(load(&config, out_dir)?)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
