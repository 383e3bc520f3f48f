//! CSV and JSON artifacts. Every file is UTF-8 with LF line endings; floats
//! use Rust's shortest round-trip formatting, which is locale independent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sqvi::{ProjectionMode, Report};

use crate::error::{BenchError, Result};
use crate::experiment::{ModeRuns, RateStudy};
use crate::problems::Built;
use crate::report::SummaryReport;

pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOTDATA_FILE: &str = "plotdata.csv";
pub const RATE_FILE: &str = "rate_study.csv";

pub fn trajectory_name(mode: ProjectionMode, replication: usize) -> String {
    format!("trajectory_{mode}_r{replication}.csv")
}

/// Creates the directory and checks it accepts writes.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let probe = dir.join(".sqvi-write-probe");
    File::create(&probe).map_err(|e| BenchError::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| BenchError::io(&probe, e))?;
    Ok(())
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trajectory_header(n_players: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "N_k", "t_k", "wall_ns", "residual", "err_to_ref"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=n_players).map(|i| format!("U_{i}")));
    h
}

pub fn write_trajectory(path: &Path, report: &Report) -> Result<()> {
    let n_players = report
        .records
        .first()
        .and_then(|r| r.utilities.as_ref())
        .map_or(0, Vec::len);
    let mut w = writer(path)?;
    w.write_record(trajectory_header(n_players))?;
    for r in &report.records {
        let mut row = vec![
            r.k.to_string(),
            r.batch_size.to_string(),
            r.inner_budget.to_string(),
            r.wall_nanos.to_string(),
            opt(r.residual),
            opt(r.error_to_reference),
        ];
        if let Some(u) = &r.utilities {
            row.extend(u.iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// Relative suboptimality against `reference` versus cumulative wall time,
/// for the first replication of each mode. Markets report
/// `|U_i(Q_k) - U_i(Q*)| / |U_i(Q*)|`, other problems `‖x_k - x*‖ / ‖x*‖`.
pub fn write_plotdata(path: &Path, built: &Built, runs: &[ModeRuns], reference: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let reference_utilities = match &built.problem.payoffs {
        Some(p) => Some(p.utilities(reference)?),
        None => None,
    };
    let mut header = vec!["mode".to_string(), "k".into(), "wall_s".into()];
    match &reference_utilities {
        Some(u) => header.extend((1..=u.len()).map(|i| format!("rel_subopt_U_{i}"))),
        None => header.push("rel_err".into()),
    }
    w.write_record(&header)?;
    let ref_norm = reference.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for r in runs {
        for rec in &r.reports[0].records {
            let mut row = vec![
                r.mode.to_string(),
                rec.k.to_string(),
                (rec.wall_nanos as f64 * 1e-9).to_string(),
            ];
            match (&reference_utilities, &rec.utilities) {
                (Some(star), Some(u)) => {
                    row.extend(u.iter().zip(star).map(|(u, s)| ((u - s).abs() / s.abs()).to_string()))
                }
                _ => row.push((sqvi::scalar::distance(&rec.x, reference) / ref_norm).to_string()),
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

pub fn write_rate_study(path: &Path, study: &RateStudy) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["T", "mean_err", "bound"])?;
    for r in &study.rows {
        w.write_record([r.horizon.to_string(), r.mean_error.to_string(), opt(r.bound)])?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

pub fn write_summary(path: &Path, summary: &SummaryReport) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n").map_err(|e| BenchError::io(path, e))?;
    out.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}
