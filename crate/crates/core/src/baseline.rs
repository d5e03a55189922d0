//! Reference solvers.
//!
//! [`qq_simple_query`] answers with distance constraints only and filters the
//! connectivity predicates at the very end. [`brute_force_query`] enumerates
//! assignments directly from the POI list and serves as the test oracle.

use thiserror::Error;

use crate::engine::{qqespm_query_with, MatchTuple, QueryOptions, QueryOutcome};
use crate::geometry::holds;
use crate::index::{IlQuadtree, Poi, PoiIdx};
use crate::pattern::{PatternEdge, SpatialPattern};

#[derive(Debug, Clone)]
pub struct SimpleOutcome {
    /// Final answer after the connectivity filter.
    pub matches: Vec<MatchTuple>,
    /// Size of the distance-only answer before filtering.
    pub unfiltered: usize,
    pub engine: QueryOutcome,
}

pub fn qq_simple_query(ilq: &IlQuadtree, pattern: &SpatialPattern) -> SimpleOutcome {
    qq_simple_query_with(ilq, pattern, &QueryOptions::default())
}

/// Runs the engine with connectivity predicates ignored, then drops tuples
/// violating any edge's predicate. `opts.check_relations` is overridden.
pub fn qq_simple_query_with(ilq: &IlQuadtree, pattern: &SpatialPattern, opts: &QueryOptions) -> SimpleOutcome {
    let opts = QueryOptions {
        check_relations: false,
        ..opts.clone()
    };
    let mut engine = qqespm_query_with(ilq, pattern, &opts);
    let spm = std::mem::take(&mut engine.matches);
    let unfiltered = spm.len();
    let matches = spm
        .into_iter()
        .filter(|t| {
            pattern.edges().iter().all(|e| match e.relation {
                Some(rel) => holds(
                    rel,
                    &ilq.poi(t.pois[e.from]).geometry,
                    &ilq.poi(t.pois[e.to]).geometry,
                ),
                None => true,
            })
        })
        .collect();
    SimpleOutcome {
        matches,
        unfiltered,
        engine,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("brute force would enumerate {candidates} assignments (limit {limit})")]
    TooLarge { candidates: u128, limit: u128 },
}

/// Default enumeration bound for [`brute_force_query`].
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

pub fn brute_force_query(pois: &[Poi], pattern: &SpatialPattern) -> Result<Vec<MatchTuple>, OracleError> {
    brute_force_query_bounded(pois, pattern, BRUTE_FORCE_LIMIT)
}

/// Enumerates every keyword-consistent assignment of distinct POIs and keeps
/// those satisfying every edge. Each edge is tested as soon as both of its
/// vertices are bound. Exclusion is checked by scanning every POI with the
/// excluded keyword.
pub fn brute_force_query_bounded(
    pois: &[Poi],
    pattern: &SpatialPattern,
    limit: u128,
) -> Result<Vec<MatchTuple>, OracleError> {
    let candidates: Vec<Vec<usize>> = pattern
        .vertices()
        .iter()
        .map(|v| (0..pois.len()).filter(|&i| pois[i].has_keyword(&v.keyword)).collect())
        .collect();
    let product = candidates
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if product > limit {
        return Err(OracleError::TooLarge {
            candidates: product,
            limit,
        });
    }

    let n = pattern.len();
    // edges to test once vertex `v` is bound: those whose other end is < v
    let mut closing: Vec<Vec<&PatternEdge>> = vec![Vec::new(); n];
    for e in pattern.edges() {
        closing[e.from.max(e.to)].push(e);
    }

    let mut out = Vec::new();
    let mut binding: Vec<usize> = Vec::with_capacity(n);
    enumerate(pois, pattern, &candidates, &closing, &mut binding, &mut out);
    out.sort_unstable();
    Ok(out)
}

fn enumerate(
    pois: &[Poi],
    pattern: &SpatialPattern,
    candidates: &[Vec<usize>],
    closing: &[Vec<&PatternEdge>],
    binding: &mut Vec<usize>,
    out: &mut Vec<MatchTuple>,
) {
    let v = binding.len();
    if v == candidates.len() {
        out.push(MatchTuple {
            pois: binding.iter().map(|&i| PoiIdx(i as u32)).collect(),
        });
        return;
    }
    for &c in &candidates[v] {
        if binding.contains(&c) {
            continue;
        }
        binding.push(c);
        if closing[v]
            .iter()
            .all(|e| edge_satisfied(pois, pattern, e, binding[e.from], binding[e.to]))
        {
            enumerate(pois, pattern, candidates, closing, binding, out);
        }
        binding.pop();
    }
}

fn edge_satisfied(pois: &[Poi], pattern: &SpatialPattern, e: &PatternEdge, i: usize, j: usize) -> bool {
    let (a, b) = (&pois[i], &pois[j]);
    let dx = a.location.x - b.location.x;
    let dy = a.location.y - b.location.y;
    let d = (dx * dx + dy * dy).sqrt();
    if let Some(iv) = e.interval {
        if d < iv.lower || d > iv.upper {
            return false;
        }
    }
    if let Some(rel) = e.relation {
        if !holds(rel, &a.geometry, &b.geometry) {
            return false;
        }
    }
    if let Some(iv) = e.interval {
        if e.sign.from_excludes() && !clear_around(pois, i, pattern.keyword(e.to), iv.lower) {
            return false;
        }
        if e.sign.to_excludes() && !clear_around(pois, j, pattern.keyword(e.from), iv.lower) {
            return false;
        }
    }
    true
}

/// No POI other than `subject` carrying `keyword` lies strictly within `radius`.
fn clear_around(pois: &[Poi], subject: usize, keyword: &str, radius: f64) -> bool {
    let c = pois[subject].location;
    pois.iter().enumerate().all(|(k, q)| {
        if k == subject || !q.has_keyword(keyword) {
            return true;
        }
        let dx = q.location.x - c.x;
        let dy = q.location.y - c.y;
        (dx * dx + dy * dy).sqrt() >= radius
    })
}
