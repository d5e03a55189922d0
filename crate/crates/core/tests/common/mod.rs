#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qqspm::index::default_root_region;
use qqspm::{
    build_ilq, ExclusionSign, Geometry, IlQuadtree, IndexConfig, MatchTuple, PatternEdge, Point, Poi, Rect,
    SpatialPattern, TopoPredicate,
};

pub const EXTENT: f64 = 0.05;
const GRID: f64 = 0.001;

fn snap(v: f64) -> f64 {
    (v / GRID).round() * GRID
}

/// POIs on a coarse grid so that touching, equal and nested rectangles occur.
pub fn random_pois(rng: &mut impl Rng, n: usize, keywords: &[&str]) -> Vec<Poi> {
    let mut out: Vec<Poi> = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.random_range(1..=2);
        let kws: Vec<&str> = keywords.choose_multiple(rng, k).copied().collect();
        let id = format!("p{i}");
        let rects: Vec<Rect> = out
            .iter()
            .filter_map(|p| match p.geometry {
                Geometry::Rect(r) => Some(r),
                _ => None,
            })
            .collect();
        let poi = match rng.random_range(0..10) {
            0..=4 => {
                let p = Point::new(snap(rng.random_range(0.0..EXTENT)), snap(rng.random_range(0.0..EXTENT))).unwrap();
                Poi::point(id, kws, p).unwrap()
            }
            5 if !rects.is_empty() => {
                // a copy, a neighbour or a nested piece of an existing rectangle
                let base = *rects.choose(rng).unwrap();
                let r = match rng.random_range(0..3) {
                    0 => base,
                    1 => Rect::new(base.max_x, base.min_y, base.max_x + 0.002, base.max_y).unwrap(),
                    _ => Rect::new(base.min_x, base.min_y, base.center().x, base.center().y).unwrap(),
                };
                Poi::rect(id, kws, r).unwrap()
            }
            6 if !rects.is_empty() => {
                // a point on an existing rectangle's corner
                let base = *rects.choose(rng).unwrap();
                let p = Point::new(base.min_x, base.max_y).unwrap();
                Poi::point(id, kws, p).unwrap()
            }
            _ => {
                let x = snap(rng.random_range(0.0..EXTENT));
                let y = snap(rng.random_range(0.0..EXTENT));
                let w = GRID * rng.random_range(0..6) as f64;
                let h = GRID * rng.random_range(1..6) as f64;
                Poi::rect(id, kws, Rect::new(x, y, x + w, y + h).unwrap()).unwrap()
            }
        };
        out.push(poi);
    }
    out
}

pub fn random_pattern(rng: &mut impl Rng, keywords: &[&str], n_vertices: usize) -> SpatialPattern {
    let kws: Vec<&str> = if rng.random_bool(0.15) {
        (0..n_vertices).map(|_| *keywords.choose(rng).unwrap()).collect()
    } else {
        keywords.choose_multiple(rng, n_vertices).copied().collect()
    };
    let mut pairs: Vec<(usize, usize)> = (1..n_vertices).map(|v| (rng.random_range(0..v), v)).collect();
    // occasionally close a cycle
    if n_vertices >= 3 && rng.random_bool(0.4) {
        let (a, b) = (0, n_vertices - 1);
        if !pairs.iter().any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b)) {
            pairs.push((a, b));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| {
            let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let relation = rng
                .random_bool(0.5)
                .then(|| *TopoPredicate::ALL.choose(rng).unwrap());
            if let Some(rel) = relation {
                if rng.random_bool(0.2) {
                    return PatternEdge::qualitative(from, to, rel);
                }
            }
            let l = rng.random_range(0.0..0.005);
            let u = l + rng.random_range(0.0..0.02);
            let sign = *ExclusionSign::ALL.choose(rng).unwrap();
            let e = PatternEdge::distance(from, to, l, u, sign);
            match relation {
                Some(r) => e.with_relation(r),
                None => e,
            }
        })
        .collect();
    SpatialPattern::new(&kws, edges).unwrap()
}

pub struct Case {
    pub seed: u64,
    pub pois: Vec<Poi>,
    pub pattern: SpatialPattern,
    pub ilq: IlQuadtree,
}

pub const KEYWORDS: [&str; 6] = ["school", "park", "cafe", "gym", "bank", "shop"];

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(50..=300);
    let pois = random_pois(&mut rng, n, &KEYWORDS);
    let nv = rng.random_range(2..=4);
    let pattern = random_pattern(&mut rng, &KEYWORDS, nv);
    let capacity = *[1usize, 2, 4, 8].choose(&mut rng).unwrap();
    let ilq = build_ilq(
        pois.clone(),
        default_root_region(&pois).unwrap(),
        IndexConfig { capacity, max_depth: 10 },
    )
    .unwrap();
    Case { seed, pois, pattern, ilq }
}

pub fn sorted(mut v: Vec<MatchTuple>) -> Vec<MatchTuple> {
    v.sort();
    v
}
