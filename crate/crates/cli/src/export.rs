//! Gnuplot-ready two- and three-column files from run series.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::failure::Failure;
use crate::output::Artifacts;

/// Series files recognized inside a run directory.
const KNOWN: [&str; 4] = ["decay_series.csv", "trace.csv", "cells.csv", "overlay.csv"];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, Failure> {
        let bad = |e: csv::Error| Failure::missing(format!("{}: {e}", path.display()));
        let mut reader = csv::Reader::from_path(path).map_err(bad)?;
        let header = reader.headers().map_err(bad)?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
            .collect::<Result<_, _>>()
            .map_err(bad)?;
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str, path: &Path) -> Result<usize, Failure> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::missing(format!("{} has no `{name}` column", path.display())))
    }

    fn pick(&self, names: &[&str], path: &Path) -> Result<Vec<Vec<String>>, Failure> {
        let idx = names.iter().map(|n| self.column(n, path)).collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r.get(i).cloned().unwrap_or_default()).collect())
            .collect())
    }
}

fn write_plot(out: &mut Artifacts, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    out.write(name, |w| {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        for r in rows {
            writeln!(w, "{}", r.join(" "))?;
        }
        Ok(())
    })
}

fn export_file(path: &Path, out: &mut Artifacts) -> Result<(), Failure> {
    let table = Table::read(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    match table.header.first().map(String::as_str) {
        Some("t") if table.header.iter().any(|h| h == "log_norm") => write_plot(
            out,
            &format!("{stem}.dat"),
            &[
                "decay of the semigroup norm",
                "column 1: log t (t in units of the model time)",
                "column 2: log ||S(t)u0||_q (norm in units of the data)",
            ],
            &table.pick(&["log_t", "log_norm"], path)?,
        ),
        Some("t") => write_plot(
            out,
            &format!("{stem}.dat"),
            &[
                "solution trace",
                "column 1: t (model time)",
                "column 2: sup norm of u (units of the data)",
            ],
            &table.pick(&["t", "sup_norm"], path)?,
        ),
        Some("p1") => write_plot(
            out,
            &format!("{stem}.dat"),
            &[
                "phase-scan outcomes",
                "column 1: p1 (dimensionless)",
                "column 2: p2 (dimensionless)",
                "column 3: status code (0 completed, 1 blowup_detected, 2 nan_abort, 3 inconclusive)",
            ],
            &table.pick(&["p1", "p2", "code"], path)?,
        ),
        Some("curve") => {
            let mut curves: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
            for row in table.pick(&["curve", "p1", "p2"], path)? {
                curves.entry(row[0].clone()).or_default().push(row[1..].to_vec());
            }
            for (name, rows) in curves {
                let title = format!("regime boundary {name}");
                write_plot(
                    out,
                    &format!("{stem}_{name}.dat"),
                    &[&title, "column 1: p1 (dimensionless)", "column 2: p2 (dimensionless)"],
                    &rows,
                )?;
            }
            Ok(())
        }
        _ => Err(Failure::missing(format!("{} is not a known series", path.display()))),
    }
}

/// Expands directories to the known series they contain.
fn collect(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let found: Vec<PathBuf> = KNOWN.iter().map(|n| input.join(n)).filter(|p| p.is_file()).collect();
            if found.is_empty() {
                return Err(Failure::missing(format!("no series in {}", input.display())));
            }
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(Failure::missing(format!("{} does not exist", input.display())));
        }
    }
    Ok(files)
}

/// Returns the written file names.
pub fn export(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<String>, Failure> {
    let files = collect(inputs)?;
    let mut out = Artifacts::new(out_dir)?;
    for f in &files {
        export_file(f, &mut out)?;
    }
    Ok(out.names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn trace_becomes_time_sup_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("trace.csv");
        fs::write(&src, "t,sup_norm,lq_norm\n0,1,2\n0.5,0.8,1\n").unwrap();
        let names = export(&[src], &dir.path().join("plot")).unwrap();
        assert_eq!(names, ["trace.dat"]);
        let body = fs::read_to_string(dir.path().join("plot/trace.dat")).unwrap();
        assert!(body.starts_with("# solution trace"));
        assert!(body.ends_with("0 1\n0.5 0.8\n"));
    }

    #[test]
    fn missing_inputs_fail() {
        let dir = tempfile::tempdir().unwrap();
        let err = export(&[dir.path().join("nope.csv")], dir.path()).unwrap_err();
        assert_eq!(err.kind, "missing_series");
        assert!(export(&[dir.path().to_path_buf()], &dir.path().join("p")).is_err());
    }
}
