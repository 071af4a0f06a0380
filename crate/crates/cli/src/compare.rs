//! Pairwise deviation of observables across result files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{io, CliError, Result};

const TIME: &str = "t_au";
/// Columns that are coordinates rather than observables.
const AXES: [&str; 2] = ["t_au", "t_fs"];

#[derive(Debug, Clone)]
pub struct Table {
    pub label: String,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(label: &str, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| CliError::Compare(format!("{label}: no header")))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| CliError::Compare(format!("{label}: row {}: {e}", i + 1)))?;
            if row.len() != names.len() {
                return Err(CliError::Compare(format!(
                    "{label}: row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    names.len()
                )));
            }
            rows.push(row);
        }
        if !names.iter().any(|n| n == TIME) {
            return Err(CliError::Compare(format!("{label}: no {TIME} column")));
        }
        if rows.is_empty() {
            return Err(CliError::Compare(format!("{label}: no data rows")));
        }
        Ok(Self {
            label: label.to_string(),
            names,
            rows,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::parse(&label, &text)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    fn observables(&self) -> BTreeSet<&str> {
        self.names
            .iter()
            .map(String::as_str)
            .filter(|n| !AXES.contains(n))
            .collect()
    }
}

/// Linear interpolation of (xs, ys) at x; xs increasing, x inside.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v < x);
    if i == 0 {
        return ys[0];
    }
    if i >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 == x0 {
        return ys[i];
    }
    let f = (x - x0) / (x1 - x0);
    ys[i - 1] + f * (ys[i] - ys[i - 1])
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub observables: Vec<String>,
    /// Common grid (a.u.).
    pub times: Vec<f64>,
    /// values[file][observable][time].
    pub values: Vec<Vec<Vec<f64>>>,
    /// max[observable][i][j], mean likewise.
    pub max: Vec<Vec<Vec<f64>>>,
    pub mean: Vec<Vec<Vec<f64>>>,
}

/// Aligns every table on the first one's time grid (restricted to the
/// common time window) and computes pairwise max/mean |a − b|.
pub fn compare(tables: &[Table], only: Option<&[String]>) -> Result<Comparison> {
    if tables.len() < 2 {
        return Err(CliError::Compare("need at least two files".into()));
    }
    let mut common: BTreeSet<&str> = tables[0].observables();
    for t in &tables[1..] {
        common = common.intersection(&t.observables()).copied().collect();
    }
    let observables: Vec<String> = match only {
        Some(list) => {
            for o in list {
                for t in tables {
                    if !t.names.contains(o) {
                        return Err(CliError::Compare(format!("{}: no column '{o}'", t.label)));
                    }
                }
            }
            list.to_vec()
        }
        None => common.iter().map(|s| s.to_string()).collect(),
    };
    if observables.is_empty() {
        return Err(CliError::Compare(
            "incompatible observables: the files share no columns besides time".into(),
        ));
    }
    let grids: Vec<Vec<f64>> = tables.iter().map(|t| t.column(TIME).expect("checked at parse")).collect();
    for (t, g) in tables.iter().zip(&grids) {
        if g.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Compare(format!("{}: time column is not increasing", t.label)));
        }
    }
    let lo = grids.iter().map(|g| g[0]).fold(f64::NEG_INFINITY, f64::max);
    let hi = grids.iter().map(|g| g[g.len() - 1]).fold(f64::INFINITY, f64::min);
    let slack = 1e-9 * hi.abs().max(1.0);
    let times: Vec<f64> = grids[0]
        .iter()
        .copied()
        .filter(|&t| t >= lo - slack && t <= hi + slack)
        .collect();
    if times.is_empty() {
        return Err(CliError::Compare("time windows do not overlap".into()));
    }
    let values: Vec<Vec<Vec<f64>>> = tables
        .iter()
        .zip(&grids)
        .map(|(t, g)| {
            observables
                .iter()
                .map(|o| {
                    let ys = t.column(o).expect("observable present");
                    times.iter().map(|&x| interp(g, &ys, x)).collect()
                })
                .collect()
        })
        .collect();
    let nf = tables.len();
    let mut max = vec![vec![vec![0.0; nf]; nf]; observables.len()];
    let mut mean = max.clone();
    for o in 0..observables.len() {
        for i in 0..nf {
            for j in 0..nf {
                let d: Vec<f64> = values[i][o].iter().zip(&values[j][o]).map(|(a, b)| (a - b).abs()).collect();
                max[o][i][j] = d.iter().copied().fold(0.0, f64::max);
                mean[o][i][j] = d.iter().sum::<f64>() / d.len() as f64;
            }
        }
    }
    Ok(Comparison {
        labels: tables.iter().map(|t| t.label.clone()).collect(),
        observables,
        times,
        values,
        max,
        mean,
    })
}

impl Comparison {
    pub fn report(&self) -> String {
        let w = self.labels.iter().map(String::len).max().unwrap_or(4).max(10);
        let mut s = String::new();
        for (o, name) in self.observables.iter().enumerate() {
            for (kind, m) in [("max", &self.max[o]), ("mean", &self.mean[o])] {
                s.push_str(&format!("{name} ({kind} |a-b|)\n{:w$}", ""));
                for l in &self.labels {
                    s.push_str(&format!("  {l:>w$}"));
                }
                s.push('\n');
                for (i, l) in self.labels.iter().enumerate() {
                    s.push_str(&format!("{l:w$}"));
                    for v in &m[i] {
                        s.push_str(&format!("  {:>w$}", format!("{v:.3e}")));
                    }
                    s.push('\n');
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn plot_columns(&self) -> Vec<String> {
        let mut c = Vec::new();
        for l in &self.labels {
            for o in &self.observables {
                c.push(format!("{l}:{o}"));
            }
        }
        c
    }

    /// `t_au,t_fs,<label>:<obs>...`.
    pub fn plot_rows(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let units = heom_core::UnitSystem::default();
        let mut names = vec!["t_au".to_string(), "t_fs".to_string()];
        names.extend(self.plot_columns());
        let rows = self
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let mut r = vec![t, units.au_to_fs(t)];
                for f in &self.values {
                    for o in f {
                        r.push(o[k]);
                    }
                }
                r
            })
            .collect();
        (names, rows)
    }
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<Table>> {
    paths.iter().map(|p| Table::load(p)).collect()
}
