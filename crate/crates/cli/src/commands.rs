//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use heom_core::heom::{estimate_resources, ResourceEstimate, ResourceInput, Trajectory};
use rayon::prelude::*;

use crate::compare::{compare, load_all, Comparison};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::output::{gnuplot_script, header_lines, sibling, write_atomic, write_observables, write_table};
use crate::pipeline::{build_problem, decompose, observables, prepare, propagate, Decomposition, Engine, Observables};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub hash: String,
    pub observables_path: PathBuf,
    pub trajectory_path: PathBuf,
    pub modes_per_bath: Vec<usize>,
    pub ados: usize,
    pub steps: usize,
    /// max |D − D_oracle| for pure-dephasing runs.
    pub oracle_deviation: Option<f64>,
    pub max_trace_error: f64,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub observables: Observables,
}

fn method_comments(cfg: &Config, decomposition: &Decomposition, engine: &Engine) -> Vec<String> {
    let mut v = vec![
        format!("preset={}", cfg.model.preset),
        format!("temperature={}", cfg.model.temperature),
        format!("method={}", cfg.method.name()),
    ];
    match decomposition {
        Decomposition::Modes(m) => {
            let counts: Vec<String> = m.iter().map(|b| b.modes.len().to_string()).collect();
            v.push(format!("modes_per_bath={}", counts.join(";")));
        }
        Decomposition::Chain(c) => v.push(format!("chain_sites={}", c.len())),
    }
    if let Engine::Heom(h, _) = engine {
        v.push(format!("depth={} ados={}", cfg.hierarchy.depth, h.hierarchy().len()));
    }
    v
}

/// Runs a loaded config and writes its outputs under `output.dir`.
pub fn run_config(cfg: Config) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    let cfg = &prepared.config;
    let hash = cfg.hash();
    let name = cfg.output_name();
    let dir = cfg.output.dir.clone();
    let traj = propagate(&prepared)?;
    let obs = observables(&prepared.problem, &traj)?;
    let mut comments = header_lines(&hash, &method_comments(cfg, &prepared.decomposition, &prepared.engine));

    let resolved = sibling(&dir, &name, ".resolved.toml");
    let toml_text = cfg.to_toml();
    write_atomic(&resolved, |w| {
        writeln!(w, "# config_sha256={hash}")?;
        w.write_all(toml_text.as_bytes())
    })?;

    let trajectory_path = sibling(&dir, &name, ".trajectory.csv");
    write_atomic(&trajectory_path, |w| traj.write_csv(w, &comments))?;

    let oracle_deviation = obs.column("D_abs_dev").map(|d| d.into_iter().fold(0.0, f64::max));
    if let Some(d) = oracle_deviation {
        comments.push(format!("max_abs_D_deviation={d:.6e}"));
    }
    let observables_path = sibling(&dir, &name, ".observables.csv");
    write_observables(&observables_path, &comments, &obs)?;
    if cfg.output.gnuplot {
        let cols: Vec<String> = obs.names.iter().filter(|n| !n.starts_with("t_")).cloned().collect();
        let script = gnuplot_script(&observables_path, "t_fs", &cols, &name);
        write_atomic(&sibling(&dir, &name, ".gp"), |w| w.write_all(script.as_bytes()))?;
    }
    let max_trace_error = obs
        .column("trace")
        .unwrap_or_default()
        .iter()
        .map(|t| (t - 1.0).abs())
        .fold(0.0, f64::max);
    let (modes_per_bath, ados) = match (&prepared.decomposition, &prepared.engine) {
        (Decomposition::Modes(m), Engine::Heom(h, _)) => (m.iter().map(|b| b.modes.len()).collect(), h.hierarchy().len()),
        (Decomposition::Chain(c), _) => (vec![c.len()], 0),
        _ => (Vec::new(), 0),
    };
    Ok(RunOutput {
        summary: RunSummary {
            name,
            hash,
            observables_path,
            trajectory_path,
            modes_per_bath,
            ados,
            steps: traj.steps,
            oracle_deviation,
            max_trace_error,
        },
        trajectory: traj,
        observables: obs,
    })
}

pub fn print_summary(s: &RunSummary) {
    println!("run {}  config_sha256={}", s.name, s.hash);
    println!("  modes per bath: {:?}  ADOs: {}  steps: {}", s.modes_per_bath, s.ados, s.steps);
    if let Some(d) = s.oracle_deviation {
        println!("  max |D - D_oracle| = {d:.3e}");
    }
    println!("  max |Tr rho - 1| = {:.3e}", s.max_trace_error);
    println!("  wrote {} and {}", s.trajectory_path.display(), s.observables_path.display());
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub depth: usize,
    pub ados: usize,
    pub steps: usize,
    /// max |ρ_L − ρ_previous| over root elements; NaN for the first entry.
    pub change_from_previous: f64,
    pub oracle_deviation: f64,
    pub status: String,
}

fn max_root_change(a: &Trajectory, b: &Trajectory) -> f64 {
    a.rho
        .iter()
        .zip(&b.rho)
        .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Runs the config once per depth in a worker pool and writes a
/// convergence table.
pub fn sweep(cfg: Config, depths: &[usize]) -> Result<(Vec<SweepRow>, PathBuf)> {
    if depths.is_empty() {
        return Err(CliError::Usage("sweep needs at least one depth ([sweep] depths or --depths)".into()));
    }
    let mut depths = depths.to_vec();
    depths.sort_unstable();
    depths.dedup();
    let base = cfg.output_name();
    let runs: Vec<(usize, Result<RunOutput>)> = depths
        .par_iter()
        .map(|&d| {
            let mut c = cfg.clone();
            c.hierarchy.depth = d;
            c.sweep = None;
            c.output.name = Some(format!("{base}_L{d}"));
            (d, run_config(c))
        })
        .collect();
    let mut rows = Vec::new();
    let mut prev: Option<&Trajectory> = None;
    for (d, r) in &runs {
        match r {
            Ok(out) => {
                let change = prev.map_or(f64::NAN, |p| max_root_change(&out.trajectory, p));
                rows.push(SweepRow {
                    depth: *d,
                    ados: out.summary.ados,
                    steps: out.summary.steps,
                    change_from_previous: change,
                    oracle_deviation: out.summary.oracle_deviation.unwrap_or(f64::NAN),
                    status: "ok".into(),
                });
                prev = Some(&out.trajectory);
            }
            Err(e) => rows.push(SweepRow {
                depth: *d,
                ados: 0,
                steps: 0,
                change_from_previous: f64::NAN,
                oracle_deviation: f64::NAN,
                status: e.to_string().replace(',', ";"),
            }),
        }
    }
    let path = sibling(&cfg.output.dir, &base, ".sweep.csv");
    write_atomic(&path, |w| {
        writeln!(w, "# config_sha256={}", cfg.hash())?;
        writeln!(w, "depth,ados,steps,max_change_from_previous,max_oracle_deviation,status")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{:.6e},{:.6e},{}",
                r.depth, r.ados, r.steps, r.change_from_previous, r.oracle_deviation, r.status
            )?;
        }
        Ok(())
    })?;
    Ok((rows, path))
}

pub fn print_sweep(rows: &[SweepRow]) {
    println!("{:>5}  {:>10}  {:>8}  {:>14}  {:>14}  status", "L", "ADOs", "steps", "change", "oracle dev");
    for r in rows {
        println!(
            "{:>5}  {:>10}  {:>8}  {:>14.3e}  {:>14.3e}  {}",
            r.depth, r.ados, r.steps, r.change_from_previous, r.oracle_deviation, r.status
        );
    }
}

pub fn compare_files(
    paths: &[PathBuf],
    only: Option<&[String]>,
    plot: Option<&Path>,
    script: Option<&Path>,
) -> Result<Comparison> {
    let tables = load_all(paths)?;
    let c = compare(&tables, only)?;
    if let Some(p) = plot {
        let (names, rows) = c.plot_rows();
        let comments = vec![format!(
            "sources={}",
            paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(";")
        )];
        write_atomic(p, |w| write_table(w, &comments, &names, &rows))?;
        if let Some(s) = script {
            let text = gnuplot_script(p, "t_fs", &c.plot_columns(), "comparison");
            write_atomic(s, |w| w.write_all(text.as_bytes()))?;
        }
    } else if script.is_some() {
        return Err(CliError::Usage("--script needs --plot-data".into()));
    }
    Ok(c)
}

pub fn resources_report(input: &ResourceInput) -> (ResourceEstimate, String) {
    let e = estimate_resources(input);
    let rows: [(&str, String); 4] = [
        ("standard_total_depth", e.standard_total_depth.to_string()),
        ("standard_per_mode", e.standard_per_mode.to_string()),
        ("mps", e.mps.to_string()),
        ("tedopa", e.tedopa.to_string()),
    ];
    let mut s = format!(
        "inputs: n={} K={} L={} r={} N={} d={} N_ch={} r_chain={}\n",
        input.n, input.k, input.l, input.r, input.big_n, input.d, input.n_ch, input.r_chain
    );
    for (k, v) in &rows {
        s.push_str(&format!("  {k:<22}{v:>24}\n"));
    }
    s.push_str("\nquantity,value\n");
    for (k, v) in &rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    (e, s)
}

/// Writes mode lists, pole sets or chain coefficients without
/// propagating. Returns the files written.
pub fn decompose_config(mut cfg: Config) -> Result<Vec<PathBuf>> {
    let problem = build_problem(&mut cfg)?;
    let d = decompose(&mut cfg, &problem)?;
    let hash = cfg.hash();
    let name = cfg.output_name();
    let dir = cfg.output.dir.clone();
    let comments = header_lines(&hash, &[format!("method={}", cfg.method.name())]);
    let mut written = Vec::new();
    match &d {
        Decomposition::Modes(baths) => {
            for (i, b) in baths.iter().enumerate() {
                let p = sibling(&dir, &name, &format!(".bath{i}.modes.csv"));
                write_atomic(&p, |w| {
                    for c in &comments {
                        writeln!(w, "# {c}")?;
                    }
                    if let Some(dev) = b.fit_deviation {
                        writeln!(w, "# fit_rel_deviation={dev:.6e}")?;
                    }
                    writeln!(w, "index,family,re_alpha,im_alpha,re_gamma,im_gamma,re_alpha_tilde,im_alpha_tilde")?;
                    for (k, m) in b.modes.iter().enumerate() {
                        writeln!(
                            w,
                            "{k},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                            m.family.name(),
                            m.alpha.re,
                            m.alpha.im,
                            m.gamma.re,
                            m.gamma.im,
                            m.alpha_tilde.re,
                            m.alpha_tilde.im
                        )?;
                    }
                    Ok(())
                })?;
                written.push(p);
                if let Some(poles) = &b.poles {
                    let p = sibling(&dir, &name, &format!(".bath{i}.poles.csv"));
                    write_atomic(&p, |w| {
                        for c in &comments {
                            writeln!(w, "# {c}")?;
                        }
                        poles.write_csv(w)
                    })?;
                    written.push(p);
                }
            }
        }
        Decomposition::Chain(chain) => {
            let p = sibling(&dir, &name, ".chain.csv");
            write_atomic(&p, |w| chain.write_csv(w, &comments))?;
            written.push(p);
        }
    }
    let resolved = sibling(&dir, &name, ".resolved.toml");
    let text = cfg.to_toml();
    write_atomic(&resolved, |w| {
        writeln!(w, "# config_sha256={hash}")?;
        w.write_all(text.as_bytes())
    })?;
    written.push(resolved);
    Ok(written)
}

/// Pure-dephasing check used by `run --check`.
pub fn oracle_verdict(s: &RunSummary, tol: f64) -> Option<bool> {
    s.oracle_deviation.map(|d| d <= tol)
}
