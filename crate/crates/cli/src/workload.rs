//! Random pattern workloads.

use std::fmt;
use std::str::FromStr;

use qqspm::index::IndexConfig;
use qqspm::pattern::PatternError;
use qqspm::{ExclusionSign, PatternEdge, SpatialPattern, TopoPredicate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::Algorithm;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("keyword pool has {pool} keywords but structure `{structure}` needs {needed}")]
    PoolTooSmall {
        pool: usize,
        needed: usize,
        structure: Structure,
    },
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("{name} must be a non-negative, ordered interval, got [{lo}, {hi}]")]
    Range { name: &'static str, lo: f64, hi: f64 },
    #[error("unknown structure `{0}` (expected path<n>, cycle<n> or star<n>)")]
    UnknownStructure(String),
    #[error("structure `{0}` is too small")]
    Degenerate(Structure),
    #[error("{0}")]
    Invalid(String),
    #[error("generated pattern is invalid: {0}")]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Path,
    Cycle,
    Star,
}

/// A pattern graph shape with a vertex count, written `path4`, `cycle3`, `star6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Structure {
    pub shape: Shape,
    pub n: usize,
}

impl Structure {
    pub fn new(shape: Shape, n: usize) -> Self {
        Structure { shape, n }
    }

    /// Vertex pairs of the structure's edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        match self.shape {
            Shape::Path => (1..n).map(|i| (i - 1, i)).collect(),
            Shape::Cycle => (1..n).map(|i| (i - 1, i)).chain([(n - 1, 0)]).collect(),
            Shape::Star => (1..n).map(|i| (0, i)).collect(),
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let min = if self.shape == Shape::Cycle { 3 } else { 2 };
        if self.n < min {
            return Err(WorkloadError::Degenerate(*self));
        }
        Ok(())
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            Shape::Path => "path",
            Shape::Cycle => "cycle",
            Shape::Star => "star",
        };
        write!(f, "{shape}{}", self.n)
    }
}

impl FromStr for Structure {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || WorkloadError::UnknownStructure(s.to_string());
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
        let shape = match &s[..split] {
            "path" => Shape::Path,
            "cycle" => Shape::Cycle,
            "star" => Shape::Star,
            _ => return Err(unknown()),
        };
        let n = s[split..].parse().map_err(|_| unknown())?;
        Ok(Structure { shape, n })
    }
}

impl Serialize for Structure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Structure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// path, cycle and star with 3 to 6 vertices.
pub fn default_structures() -> Vec<Structure> {
    let mut out = Vec::new();
    for shape in [Shape::Path, Shape::Cycle, Shape::Star] {
        for n in 3..=6 {
            out.push(Structure::new(shape, n));
        }
    }
    out
}

fn default_fractions() -> Vec<u32> {
    vec![20, 40, 60, 80, 100]
}

fn default_repeats() -> usize {
    5
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Qqespm, Algorithm::Qqsimple]
}

fn default_capacity() -> usize {
    IndexConfig::default().capacity
}

fn default_max_depth() -> u8 {
    IndexConfig::default().max_depth
}

/// Pattern generation and benchmark parameters, read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    #[serde(default = "default_structures")]
    pub structures: Vec<Structure>,
    pub patterns_per_structure: usize,
    pub l_range: [f64; 2],
    pub u_offset_range: [f64; 2],
    pub qualitative_edge_probability: f64,
    pub keyword_pool: Vec<String>,
    pub seed: u64,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<u32>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_capacity")]
    pub index_capacity: usize,
    #[serde(default = "default_max_depth")]
    pub index_max_depth: u8,
}

impl WorkloadConfig {
    /// 12 structures, 5 patterns each, l in [0, 0.005], u = l + [0, 0.02],
    /// connectivity predicate on half the edges.
    pub fn standard(keyword_pool: Vec<String>, seed: u64) -> Self {
        WorkloadConfig {
            structures: default_structures(),
            patterns_per_structure: 5,
            l_range: [0.0, 0.005],
            u_offset_range: [0.0, 0.02],
            qualitative_edge_probability: 0.5,
            keyword_pool,
            seed,
            fractions: default_fractions(),
            repeats: default_repeats(),
            algorithms: default_algorithms(),
            index_capacity: default_capacity(),
            index_max_depth: default_max_depth(),
        }
    }

    pub fn n_structures(&self) -> usize {
        self.structures.len()
    }

    pub fn index_config(&self) -> IndexConfig {
        IndexConfig {
            capacity: self.index_capacity,
            max_depth: self.index_max_depth,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let p = self.qualitative_edge_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(WorkloadError::Probability {
                name: "qualitative_edge_probability",
                value: p,
            });
        }
        for (name, [lo, hi]) in [("l_range", self.l_range), ("u_offset_range", self.u_offset_range)] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(WorkloadError::Range { name, lo, hi });
            }
        }
        for s in &self.structures {
            s.validate()?;
            if self.keyword_pool.len() < s.n {
                return Err(WorkloadError::PoolTooSmall {
                    pool: self.keyword_pool.len(),
                    needed: s.n,
                    structure: *s,
                });
            }
        }
        let mut pool = self.keyword_pool.clone();
        pool.sort();
        pool.dedup();
        if pool.len() != self.keyword_pool.len() {
            return Err(WorkloadError::Invalid("keyword_pool contains duplicates".into()));
        }
        if self.repeats == 0 {
            return Err(WorkloadError::Invalid("repeats must be at least 1".into()));
        }
        if self.fractions.is_empty()
            || self.fractions.windows(2).any(|w| w[0] >= w[1])
            || self.fractions.iter().any(|&f| f == 0 || f > 100)
        {
            return Err(WorkloadError::Invalid(
                "fractions must be strictly ascending percentages in 1..=100".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(WorkloadError::Invalid("algorithms must not be empty".into()));
        }
        if self.index_capacity == 0 || self.index_max_depth > IndexConfig::DEPTH_LIMIT {
            return Err(WorkloadError::Invalid(format!(
                "index capacity must be positive and max depth at most {}",
                IndexConfig::DEPTH_LIMIT
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPattern {
    /// `<structure>-<repetition>`, e.g. `star4-2`.
    pub id: String,
    pub structure: Structure,
    pub pattern: SpatialPattern,
}

pub fn generate_patterns(cfg: &WorkloadConfig) -> Result<Vec<GeneratedPattern>, WorkloadError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.structures.len() * cfg.patterns_per_structure);
    for s in &cfg.structures {
        for rep in 0..cfg.patterns_per_structure {
            let keywords: Vec<&String> = cfg.keyword_pool.choose_multiple(&mut rng, s.n).collect();
            let edges = s
                .edges()
                .into_iter()
                .map(|(from, to)| {
                    let l = uniform(&mut rng, cfg.l_range);
                    let u = l + uniform(&mut rng, cfg.u_offset_range);
                    let sign = *ExclusionSign::ALL.choose(&mut rng).expect("non-empty");
                    let edge = PatternEdge::distance(from, to, l, u, sign);
                    if rng.random_bool(cfg.qualitative_edge_probability) {
                        edge.with_relation(*TopoPredicate::ALL.choose(&mut rng).expect("non-empty"))
                    } else {
                        edge
                    }
                })
                .collect();
            out.push(GeneratedPattern {
                id: format!("{s}-{rep}"),
                structure: *s,
                pattern: SpatialPattern::new(&keywords, edges)?,
            });
        }
    }
    Ok(out)
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}
