//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 data error, 3 the
//! algorithms disagreed during a benchmark.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use qqspm::index::default_root_region;
use qqspm::{brute_force_query, build_ilq, parse_pattern, IndexConfig, MatchTuple, Poi, SpatialPattern};
use serde_json::json;
use thiserror::Error;

use crate::bench::{run_bench_with, Algorithm, BenchConfig, BenchError};
use crate::ingest::{load_pois_csv, write_pois_csv};
use crate::report::{emit_results, ztest_text};
use crate::synth::{generate_dataset, keywords_by_frequency, SynthConfig};
use crate::workload::{generate_patterns, GeneratedPattern, WorkloadConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::CrossCheck(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qqspm", version, about = "Spatial pattern matching over keyword-tagged POIs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryAlgo {
    Qqespm,
    Qqsimple,
    Bruteforce,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one pattern over a POI CSV file.
    Query {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long, value_enum, default_value_t = QueryAlgo::Qqespm)]
        algo: QueryAlgo,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = IndexConfig::default().capacity)]
        capacity: usize,
        #[arg(long, default_value_t = IndexConfig::default().max_depth)]
        max_depth: u8,
    },
    /// Time both algorithms over a generated workload.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed in the workload file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Write the workload's patterns as JSON documents.
    Genpatterns {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic POI dataset, and optionally a matching workload file.
    Gendata {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 33_877)]
        n_pois: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON generator settings; replaces the regional preset (and ignores
        /// --n-pois and --seed).
        #[arg(long)]
        synth: Option<PathBuf>,
        /// Workload file using the dataset's keywords.
        #[arg(long)]
        workload_out: Option<PathBuf>,
        /// Number of keywords in the workload pool.
        #[arg(long, default_value_t = WORKLOAD_POOL.1)]
        pool_size: usize,
        /// Frequency rank of the first pooled keyword (0 is the most frequent).
        #[arg(long, default_value_t = WORKLOAD_POOL.0)]
        pool_skip: usize,
    },
}

/// Default (skip, size) of the workload keyword pool by frequency rank.
pub const WORKLOAD_POOL: (usize, usize) = (0, 60);

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Query {
            data,
            pattern,
            algo,
            out,
            capacity,
            max_depth,
        } => query(&data, &pattern, algo, &out, IndexConfig { capacity, max_depth }),
        Command::Bench {
            data,
            config,
            out_dir,
            seed,
            quiet,
        } => bench(&data, &config, &out_dir, seed, quiet),
        Command::Genpatterns { config, out_dir, seed } => {
            let cfg = read_workload(&config, seed)?;
            let patterns = generate_patterns(&cfg).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
            write_patterns(&patterns, &out_dir)
        }
        Command::Gendata {
            out,
            n_pois,
            seed,
            synth,
            workload_out,
            pool_size,
            pool_skip,
        } => {
            let synth_cfg = match synth {
                Some(path) => serde_json::from_str(&read_text(&path)?)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                None => SynthConfig::regional(n_pois, seed),
            };
            let pois = generate_dataset(&synth_cfg);
            write_pois_csv(&out, &pois).map_err(|e| CliError::Data(e.to_string()))?;
            if let Some(path) = workload_out {
                let cfg = WorkloadConfig::standard(workload_pool(&pois, pool_skip, pool_size), seed);
                write_file(&path, &serde_json::to_string_pretty(&cfg).expect("serializable"))?;
            }
            Ok(())
        }
    }
}

/// Keywords at frequency ranks `skip .. skip + size`.
pub fn workload_pool(pois: &[Poi], skip: usize, size: usize) -> Vec<String> {
    keywords_by_frequency(pois).into_iter().skip(skip).take(size).map(|(k, _)| k).collect()
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_workload(path: &Path, seed: Option<u64>) -> Result<WorkloadConfig, CliError> {
    let mut cfg: WorkloadConfig =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn load_data(path: &Path) -> Result<Vec<Poi>, CliError> {
    load_pois_csv(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn matches_document(pattern: &SpatialPattern, pois: &[Poi], matches: &[MatchTuple], elapsed: f64) -> serde_json::Value {
    let matches: Vec<serde_json::Value> = matches
        .iter()
        .map(|t| {
            let bindings: Vec<serde_json::Value> = t
                .pois
                .iter()
                .enumerate()
                .map(|(vertex, p)| json!({"vertex": vertex, "poi_id": pois[p.get()].id}))
                .collect();
            json!({ "bindings": bindings })
        })
        .collect();
    json!({
        "pattern": pattern.to_json(),
        "matches": matches,
        "elapsed_seconds": elapsed,
    })
}

fn query(data: &Path, pattern_path: &Path, algo: QueryAlgo, out: &Path, index: IndexConfig) -> Result<(), CliError> {
    let pattern = parse_pattern(&read_text(pattern_path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", pattern_path.display())))?;
    let pois = load_data(data)?;
    let region = default_root_region(&pois).ok_or_else(|| CliError::Data(format!("{}: no POIs", data.display())))?;
    let ilq = build_ilq(pois, region, index).map_err(|e| CliError::Data(format!("{}: {e}", data.display())))?;

    let start = Instant::now();
    let matches = match algo {
        QueryAlgo::Qqespm => Algorithm::Qqespm.run(&ilq, &pattern),
        QueryAlgo::Qqsimple => Algorithm::Qqsimple.run(&ilq, &pattern),
        QueryAlgo::Bruteforce => brute_force_query(ilq.pois(), &pattern).map_err(|e| CliError::Data(e.to_string()))?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let doc = matches_document(&pattern, ilq.pois(), &matches, elapsed);
    write_file(out, &serde_json::to_string_pretty(&doc).expect("serializable"))
}

fn write_patterns(patterns: &[GeneratedPattern], out_dir: &Path) -> Result<(), CliError> {
    let mut manifest = Vec::new();
    for gp in patterns {
        let file = format!("{}.json", gp.id);
        write_file(&out_dir.join(&file), &gp.pattern.to_json_string())?;
        manifest.push(json!({"id": gp.id, "structure": gp.structure.to_string(), "file": file}));
    }
    write_file(
        &out_dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("serializable"),
    )
}

fn bench(data: &Path, config: &Path, out_dir: &Path, seed: Option<u64>, quiet: bool) -> Result<(), CliError> {
    let cfg = read_workload(config, seed)?;
    let patterns = generate_patterns(&cfg).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let pois = load_data(data)?;
    write_patterns(&patterns, &out_dir.join("patterns"))?;

    let bench_cfg = BenchConfig::from(&cfg);
    let total = bench_cfg.fractions.len() * patterns.len() * bench_cfg.repeats * bench_cfg.algorithms.len();
    let mut done = 0usize;
    let records = run_bench_with(&pois, &patterns, &bench_cfg, |r| {
        done += 1;
        if !quiet && (done.is_multiple_of(100) || done == total) {
            eprintln!("{done}/{total} runs ({}% slice, pattern {})", r.dataset_fraction, r.pattern_id);
        }
    })
    .map_err(|e| match e {
        BenchError::Mismatch { .. } => CliError::CrossCheck(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    emit_results(&records, out_dir).map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", ztest_text(&records));
    Ok(())
}
