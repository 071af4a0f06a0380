//! Atomic file output and CSV formatting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{io, Result};
use crate::pipeline::Observables;

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut buf = Vec::new();
    body(&mut buf).map_err(io(path))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(&buf).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io(path))?;
    Ok(())
}

pub fn header_lines(hash: &str, extra: &[String]) -> Vec<String> {
    let mut v = vec![
        format!("config_sha256={hash}"),
        format!("generator=heom {}", env!("CARGO_PKG_VERSION")),
    ];
    v.extend(extra.iter().cloned());
    v
}

pub fn write_table<W: Write>(w: &mut W, comments: &[String], names: &[String], rows: &[Vec<f64>]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", names.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_observables(path: &Path, comments: &[String], obs: &Observables) -> Result<()> {
    write_atomic(path, |w| write_table(w, comments, &obs.names, &obs.rows))
}

/// gnuplot script plotting every column of `data` against column `x`.
pub fn gnuplot_script(data: &Path, x: &str, columns: &[String], title: &str) -> String {
    let file = data.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    s.push_str(&format!("set title '{title}'\nset xlabel '{x}'\n"));
    let plots: Vec<String> = columns
        .iter()
        .map(|c| format!("'{file}' using '{x}':'{c}' with lines title '{c}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

pub fn sibling(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}{suffix}"))
}
