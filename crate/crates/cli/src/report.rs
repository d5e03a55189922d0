//! Benchmark output files.
//!
//! `records.csv` holds every record; `summary_by_fraction.csv` and
//! `summary_by_vertices.csv` hold elapsed-time statistics per algorithm and
//! group; `ztest.txt` compares the algorithms at the largest fraction.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{Algorithm, BenchRecord};
use crate::stats::{summarize, z_test_means, ZTest};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records to report")]
    NoRecords,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    /// Percent for the by-fraction table, vertex count for the by-vertices table.
    pub group: u32,
    pub n: usize,
    pub mean_elapsed: f64,
    pub std_elapsed: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_peak_alloc: f64,
    pub mean_matches: f64,
}

fn summarize_by(records: &[BenchRecord], key: impl Fn(&BenchRecord) -> u32) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Algorithm, u32), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.algorithm, key(r))).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((algorithm, group), rs)| {
            let elapsed: Vec<f64> = rs.iter().map(|r| r.elapsed).collect();
            let s = summarize(&elapsed);
            let n = rs.len() as f64;
            SummaryRow {
                algorithm,
                group,
                n: s.n,
                mean_elapsed: s.mean,
                std_elapsed: s.std,
                ci95_low: s.ci95_low,
                ci95_high: s.ci95_high,
                mean_peak_alloc: rs.iter().map(|r| r.peak_alloc as f64).sum::<f64>() / n,
                mean_matches: rs.iter().map(|r| r.n_matches as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn summary_by_fraction(records: &[BenchRecord]) -> Vec<SummaryRow> {
    summarize_by(records, |r| r.dataset_fraction)
}

pub fn summary_by_vertices(records: &[BenchRecord]) -> Vec<SummaryRow> {
    summarize_by(records, |r| r.n_vertices as u32)
}

/// QQESPM against QQ-simple elapsed times at the largest fraction present,
/// or `None` when either algorithm has no records there.
pub fn largest_fraction_ztest(records: &[BenchRecord]) -> Option<(u32, ZTest)> {
    let fraction = records.iter().map(|r| r.dataset_fraction).max()?;
    let times = |a: Algorithm| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.algorithm == a && r.dataset_fraction == fraction)
            .map(|r| r.elapsed)
            .collect()
    };
    let t = z_test_means(&times(Algorithm::Qqespm), &times(Algorithm::Qqsimple)).ok()?;
    Some((fraction, t))
}

#[derive(Debug, Clone)]
pub struct Emitted {
    pub records: PathBuf,
    pub by_fraction: PathBuf,
    pub by_vertices: PathBuf,
    pub ztest: PathBuf,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: Option<&[&str]>) -> Result<(), ReportError> {
    let csv_err = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_path(path)
        .map_err(csv_err)?;
    if let Some(h) = header {
        w.write_record(h).map_err(csv_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const SUMMARY_COLUMNS: [&str; 7] = [
    "n",
    "mean_elapsed",
    "std_elapsed",
    "ci95_low",
    "ci95_high",
    "mean_peak_alloc",
    "mean_matches",
];

fn summary_header(group: &'static str) -> Vec<&'static str> {
    ["algorithm", group].into_iter().chain(SUMMARY_COLUMNS).collect()
}

pub fn ztest_text(records: &[BenchRecord]) -> String {
    match largest_fraction_ztest(records) {
        None => "z-test not applicable: need qqespm and qqsimple records at the same fraction\n".to_string(),
        Some((fraction, t)) => {
            let mut s = format!(
                "two-sided z-test on mean elapsed time, qqespm vs qqsimple, dataset_fraction {fraction}%\n\
                 n_qqespm: {}\nn_qqsimple: {}\nmean_qqespm_seconds: {:.9}\nmean_qqsimple_seconds: {:.9}\nz: {:.6}\np_value: {:.6e}\n",
                t.n_a, t.n_b, t.mean_a, t.mean_b, t.z, t.p_value
            );
            if let Some(w) = &t.warning {
                s.push_str(&format!("warning: {w}\n"));
            }
            s
        }
    }
}

pub fn emit_results(records: &[BenchRecord], out_dir: impl AsRef<Path>) -> Result<Emitted, ReportError> {
    if records.is_empty() {
        return Err(ReportError::NoRecords);
    }
    let dir = out_dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let out = Emitted {
        records: dir.join("records.csv"),
        by_fraction: dir.join("summary_by_fraction.csv"),
        by_vertices: dir.join("summary_by_vertices.csv"),
        ztest: dir.join("ztest.txt"),
    };
    write_csv(&out.records, records, None)?;
    write_csv(
        &out.by_fraction,
        &summary_by_fraction(records),
        Some(&summary_header("dataset_fraction")),
    )?;
    write_csv(
        &out.by_vertices,
        &summary_by_vertices(records),
        Some(&summary_header("n_vertices")),
    )?;
    let mut f = fs::File::create(&out.ztest).map_err(io_err(&out.ztest))?;
    f.write_all(ztest_text(records).as_bytes()).map_err(io_err(&out.ztest))?;
    Ok(out)
}
