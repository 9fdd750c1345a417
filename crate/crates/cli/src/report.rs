//! CSV output. Floats are written with 17 significant digits.

use std::path::{Path, PathBuf};

use scacsp_core::subspace::EmpiricalGrid;
use scacsp_core::{CvReport, Subspace};

use crate::error::{CliError, CliResult};
use crate::io::write_atomic;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `x.csv` with suffix `cv` becomes `x.cv.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Atomically writes a header and rows as RFC-4180 CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

/// One row per `(point, fold)`: `alpha, beta, fold, accuracy`.
pub fn write_cv(path: &Path, report: &CvReport) -> CliResult<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![num(r.alpha), num(r.beta), r.fold.to_string(), num(r.accuracy)])
        .collect();
    write_csv(path, &["alpha", "beta", "fold", "accuracy"], &rows)
}

/// One row per point with its mean fold accuracy; `best` marks the chosen point.
pub fn write_cv_summary(path: &Path, report: &CvReport) -> CliResult<()> {
    let rows: Vec<Vec<String>> = report
        .summaries
        .iter()
        .map(|s| {
            let best = s.alpha == report.best.alpha && s.beta == report.best.beta;
            vec![num(s.alpha), num(s.beta), num(s.mean_accuracy), best.to_string()]
        })
        .collect();
    write_csv(path, &["alpha", "beta", "mean_accuracy", "best"], &rows)
}

/// Rows are filter subspaces, columns the component subspaces (`none` first);
/// absent cells are empty.
pub fn write_grid(path: &Path, grid: &EmpiricalGrid, test: bool) -> CliResult<()> {
    let comps = EmpiricalGrid::components();
    let mut header = vec!["filter_source"];
    header.extend(comps.iter().map(|c| c.map(Subspace::label).unwrap_or("none")));
    let rows: Vec<Vec<String>> = Subspace::ALL
        .iter()
        .map(|&src| {
            let mut row = vec![src.label().to_string()];
            for c in &comps {
                let cell = grid.cell(src, *c);
                let v = cell.and_then(|c| if test { c.test_accuracy } else { c.train_accuracy });
                row.push(v.map(num).unwrap_or_default());
            }
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}
