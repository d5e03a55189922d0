//! Timed query runs over nested dataset slices.

use std::fmt;
use std::time::Instant;

use qqspm::index::{default_root_region, IndexError};
use qqspm::{build_ilq, qq_simple_query, qqespm_query, IlQuadtree, IndexConfig, MatchTuple, Poi, SpatialPattern};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc;
use crate::workload::{GeneratedPattern, WorkloadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Qqespm,
    Qqsimple,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Qqespm => "qqespm",
            Algorithm::Qqsimple => "qqsimple",
        }
    }

    pub fn run(self, ilq: &IlQuadtree, pattern: &SpatialPattern) -> Vec<MatchTuple> {
        match self {
            Algorithm::Qqespm => qqespm_query(ilq, pattern).matches,
            Algorithm::Qqsimple => qq_simple_query(ilq, pattern).matches,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub pattern_id: String,
    pub structure: String,
    pub n_vertices: usize,
    /// Percent of the shuffled dataset used.
    pub dataset_fraction: u32,
    pub repetition: usize,
    /// Wall-clock query time in seconds, index build excluded.
    pub elapsed: f64,
    /// Peak heap growth during the query, in bytes.
    pub peak_alloc: u64,
    pub n_matches: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub fractions: Vec<u32>,
    pub repeats: usize,
    pub algorithms: Vec<Algorithm>,
    pub index: IndexConfig,
    pub seed: u64,
}

impl From<&WorkloadConfig> for BenchConfig {
    fn from(w: &WorkloadConfig) -> Self {
        BenchConfig {
            fractions: w.fractions.clone(),
            repeats: w.repeats,
            algorithms: w.algorithms.clone(),
            index: w.index_config(),
            seed: w.seed,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("pattern `{pattern_id}` at {fraction}%: {detail}")]
    Mismatch {
        pattern_id: String,
        fraction: u32,
        detail: String,
    },
    #[error("{fraction}% slice: {source}")]
    Index { fraction: u32, source: IndexError },
    #[error("{fraction}% of {n} POIs is an empty slice")]
    EmptySlice { fraction: u32, n: usize },
    #[error("{0}")]
    Invalid(String),
}

/// The dataset in one seeded random order. Slices are prefixes of it, so
/// every smaller slice is contained in every larger one.
pub fn shuffled(data: &[Poi], seed: u64) -> Vec<Poi> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.into_iter().map(|i| data[i].clone()).collect()
}

pub fn slice_len(n: usize, fraction: u32) -> usize {
    (n * fraction as usize).div_ceil(100)
}

pub fn run_bench(data: &[Poi], patterns: &[GeneratedPattern], cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    run_bench_with(data, patterns, cfg, |_| {})
}

/// Runs every (fraction, pattern, repetition, algorithm) cell, calling
/// `progress` after each record. The algorithm order rotates with the
/// repetition so that neither algorithm always runs first. Every result is
/// compared with the first one obtained for its (fraction, pattern) cell.
pub fn run_bench_with(
    data: &[Poi],
    patterns: &[GeneratedPattern],
    cfg: &BenchConfig,
    mut progress: impl FnMut(&BenchRecord),
) -> Result<Vec<BenchRecord>, BenchError> {
    if cfg.repeats == 0 || cfg.algorithms.is_empty() {
        return Err(BenchError::Invalid("need at least one repetition and one algorithm".into()));
    }
    if cfg.fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Invalid("fractions must be strictly ascending".into()));
    }
    let order = shuffled(data, cfg.seed);
    let mut records = Vec::new();
    for &fraction in &cfg.fractions {
        let slice = &order[..slice_len(order.len(), fraction)];
        let region = default_root_region(slice).ok_or(BenchError::EmptySlice { fraction, n: data.len() })?;
        let ilq = build_ilq(slice.to_vec(), region, cfg.index).map_err(|source| BenchError::Index { fraction, source })?;
        for gp in patterns {
            let mut reference: Option<(Algorithm, Vec<MatchTuple>)> = None;
            for repetition in 0..cfg.repeats {
                let k = cfg.algorithms.len();
                for i in 0..k {
                    let algorithm = cfg.algorithms[(i + repetition) % k];
                    let baseline = alloc::reset_peak();
                    let start = Instant::now();
                    let matches = algorithm.run(&ilq, &gp.pattern);
                    let elapsed = start.elapsed().as_secs_f64();
                    let peak = alloc::peak_since(baseline);
                    match &reference {
                        None => reference = Some((algorithm, matches.clone())),
                        Some((first, expected)) if *expected != matches => {
                            return Err(BenchError::Mismatch {
                                pattern_id: gp.id.clone(),
                                fraction,
                                detail: format!(
                                    "{first} returned {} matches, {algorithm} returned {}{}",
                                    expected.len(),
                                    matches.len(),
                                    if expected.len() == matches.len() { " with different tuples" } else { "" }
                                ),
                            });
                        }
                        Some(_) => {}
                    }
                    let rec = BenchRecord {
                        algorithm,
                        pattern_id: gp.id.clone(),
                        structure: gp.structure.to_string(),
                        n_vertices: gp.pattern.len(),
                        dataset_fraction: fraction,
                        repetition,
                        elapsed,
                        peak_alloc: peak as u64,
                        n_matches: matches.len(),
                        seed: cfg.seed,
                    };
                    progress(&rec);
                    records.push(rec);
                }
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, SynthConfig};
    use crate::workload::{generate_patterns, Shape, Structure};
    use std::collections::HashSet;

    fn pool() -> Vec<String> {
        (0..6).map(crate::synth::keyword_name).collect()
    }

    #[test]
    fn slices_are_nested_prefixes() {
        let data = generate_dataset(&SynthConfig::small(101, 6, 1));
        let order = shuffled(&data, 5);
        assert_eq!(order, shuffled(&data, 5));
        let ids = |f| -> HashSet<String> { order[..slice_len(order.len(), f)].iter().map(|p| p.id.clone()).collect() };
        assert_eq!(slice_len(101, 20), 21);
        assert_eq!(slice_len(101, 100), 101);
        for w in [20, 40, 60, 80, 100].windows(2) {
            assert!(ids(w[0]).is_subset(&ids(w[1])));
        }
        assert_eq!(ids(100).len(), data.len());
    }

    #[test]
    fn single_cell_gives_two_equal_records() {
        let data = generate_dataset(&SynthConfig::small(200, 6, 2));
        let wl = crate::workload::WorkloadConfig {
            structures: vec![Structure::new(Shape::Path, 3)],
            patterns_per_structure: 1,
            ..crate::workload::WorkloadConfig::standard(pool(), 3)
        };
        let pats = generate_patterns(&wl).unwrap();
        let cfg = BenchConfig {
            fractions: vec![100],
            repeats: 1,
            ..BenchConfig::from(&wl)
        };
        let recs = run_bench(&data, &pats, &cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].n_matches, recs[1].n_matches);
        assert_ne!(recs[0].algorithm, recs[1].algorithm);
        assert!(recs.iter().all(|r| r.elapsed >= 0.0 && r.n_vertices == 3 && r.structure == "path3"));
    }

    #[test]
    fn repeated_runs_agree_on_match_counts() {
        let data = generate_dataset(&SynthConfig::small(250, 6, 4));
        let wl = crate::workload::WorkloadConfig {
            structures: vec![Structure::new(Shape::Star, 3), Structure::new(Shape::Cycle, 3)],
            patterns_per_structure: 2,
            fractions: vec![50, 100],
            repeats: 2,
            ..crate::workload::WorkloadConfig::standard(pool(), 8)
        };
        let pats = generate_patterns(&wl).unwrap();
        let cfg = BenchConfig::from(&wl);
        let a = run_bench(&data, &pats, &cfg).unwrap();
        let b = run_bench(&data, &pats, &cfg).unwrap();
        assert_eq!(a.len(), 2 * 4 * 2 * 2);
        let key = |r: &BenchRecord| (r.algorithm, r.pattern_id.clone(), r.dataset_fraction, r.repetition, r.n_matches);
        assert_eq!(a.iter().map(key).collect::<Vec<_>>(), b.iter().map(key).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_unordered_fractions() {
        let cfg = BenchConfig {
            fractions: vec![60, 20],
            repeats: 1,
            algorithms: vec![Algorithm::Qqespm],
            index: IndexConfig::default(),
            seed: 0,
        };
        assert!(matches!(run_bench(&[], &[], &cfg), Err(BenchError::Invalid(_))));
    }
}
