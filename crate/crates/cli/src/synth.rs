//! Synthetic POI datasets.
//!
//! POIs cluster around towns of Zipf-distributed size; keywords follow a Zipf
//! law over a fixed vocabulary. A share of the POIs are rectangles, and some
//! rectangles and points are placed relative to existing rectangles (inside,
//! adjacent, identical, overlapping, on the boundary) so that every
//! connectivity predicate has instances.

use std::collections::HashMap;

use qqspm::{Point, Poi, Rect};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Zipf};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_pois: usize,
    pub n_keywords: usize,
    pub zipf_exponent: f64,
    pub second_keyword_probability: f64,
    pub rect_fraction: f64,
    /// Share of rectangles and points placed relative to an earlier rectangle.
    pub derived_fraction: f64,
    pub n_towns: usize,
    /// Bounds of the per-town standard deviation, in coordinate units.
    pub town_spread: [f64; 2],
    pub bbox: [f64; 4],
    pub seed: u64,
}

impl SynthConfig {
    /// A state-sized region in degrees with one dominant city.
    pub fn regional(n_pois: usize, seed: u64) -> Self {
        SynthConfig {
            n_pois,
            n_keywords: 315,
            zipf_exponent: 0.8,
            second_keyword_probability: 0.2,
            rect_fraction: 0.3,
            derived_fraction: 0.15,
            n_towns: 80,
            town_spread: [0.003, 0.04],
            bbox: [-38.8559, -8.3610, -34.7415, -5.9275],
            seed,
        }
    }

    /// A few hundred POIs in a square of side 0.05.
    pub fn small(n_pois: usize, n_keywords: usize, seed: u64) -> Self {
        SynthConfig {
            n_pois,
            n_keywords,
            zipf_exponent: 0.5,
            second_keyword_probability: 0.25,
            rect_fraction: 0.4,
            derived_fraction: 0.3,
            n_towns: 4,
            town_spread: [0.004, 0.012],
            bbox: [0.0, 0.0, 0.05, 0.05],
            seed,
        }
    }
}

pub fn keyword_name(rank: usize) -> String {
    format!("kw{rank:03}")
}

pub fn generate_dataset(cfg: &SynthConfig) -> Vec<Poi> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [x0, y0, x1, y1] = cfg.bbox;
    let (w, h) = (x1 - x0, y1 - y0);

    let n_towns = cfg.n_towns.max(1);
    let towns: Vec<(Point, f64)> = (0..n_towns)
        .map(|i| {
            let c = Point {
                x: x0 + w * rng.random_range(0.1..0.9),
                y: y0 + h * rng.random_range(0.1..0.9),
            };
            let spread = if i == 0 {
                cfg.town_spread[1]
            } else {
                rng.random_range(cfg.town_spread[0]..=cfg.town_spread[1])
            };
            (c, spread)
        })
        .collect();
    let town_pick = WeightedIndex::new((0..n_towns).map(|i| 1.0 / (i + 1) as f64)).expect("positive weights");
    let zipf = Zipf::new(cfg.n_keywords as f64, cfg.zipf_exponent).expect("valid zipf parameters");
    let clamp = |p: Point| Point {
        x: p.x.clamp(x0, x1),
        y: p.y.clamp(y0, y1),
    };

    let mut rects: Vec<Rect> = Vec::new();
    let mut out = Vec::with_capacity(cfg.n_pois);
    for i in 0..cfg.n_pois {
        let mut keywords = vec![keyword_name(zipf.sample(&mut rng) as usize - 1)];
        if rng.random_bool(cfg.second_keyword_probability) {
            keywords.push(keyword_name(zipf.sample(&mut rng) as usize - 1));
        }
        let id = format!("p{i}");
        let derived = !rects.is_empty() && rng.random_bool(cfg.derived_fraction);
        let poi = if rng.random_bool(cfg.rect_fraction) {
            let r = if derived {
                let base = rects[rng.random_range(0..rects.len())];
                derived_rect(&mut rng, &base)
            } else {
                let (c, spread) = towns[town_pick.sample(&mut rng)];
                let n = Normal::new(0.0, spread).expect("positive spread");
                let at = clamp(Point {
                    x: c.x + n.sample(&mut rng),
                    y: c.y + n.sample(&mut rng),
                });
                let rw = rng.random_range(0.0001..0.0015);
                let rh = rng.random_range(0.0001..0.0015);
                Rect::new(at.x, at.y, at.x + rw, at.y + rh).expect("finite and ordered")
            };
            rects.push(r);
            Poi::rect(id, keywords, r)
        } else {
            let p = if derived {
                let base = rects[rng.random_range(0..rects.len())];
                match rng.random_range(0..3) {
                    0 => base.center(),
                    1 => Point { x: base.min_x, y: base.max_y },
                    _ => Point { x: base.center().x, y: base.min_y },
                }
            } else {
                let (c, spread) = towns[town_pick.sample(&mut rng)];
                let n = Normal::new(0.0, spread).expect("positive spread");
                clamp(Point {
                    x: c.x + n.sample(&mut rng),
                    y: c.y + n.sample(&mut rng),
                })
            };
            Poi::point(id, keywords, p)
        };
        out.push(poi.expect("generated POIs are valid"));
    }
    out
}

fn derived_rect(rng: &mut impl Rng, base: &Rect) -> Rect {
    let (w, h) = (base.width(), base.height());
    let (x0, y0, x1, y1) = match rng.random_range(0..5) {
        // identical footprint
        0 => (base.min_x, base.min_y, base.max_x, base.max_y),
        // inside
        1 => {
            let fx = rng.random_range(0.0..0.5);
            let fy = rng.random_range(0.0..0.5);
            (
                base.min_x + fx * w,
                base.min_y + fy * h,
                base.min_x + (fx + 0.5) * w,
                base.min_y + (fy + 0.5) * h,
            )
        }
        // sharing the east edge
        2 => (base.max_x, base.min_y, base.max_x + w, base.max_y),
        // overlapping, shifted by half
        3 => (base.min_x + w / 2.0, base.min_y + h / 2.0, base.max_x + w / 2.0, base.max_y + h / 2.0),
        // enclosing
        _ => (base.min_x - w / 4.0, base.min_y - h / 4.0, base.max_x + w / 4.0, base.max_y + h / 4.0),
    };
    Rect::new(x0, y0, x1, y1).expect("finite and ordered")
}

/// Keywords with their POI counts, most frequent first; ties by name.
pub fn keywords_by_frequency(pois: &[Poi]) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in pois {
        for k in &p.keywords {
            *counts.entry(k.as_str()).or_default() += 1;
        }
    }
    let mut v: Vec<(String, usize)> = counts.into_iter().map(|(k, c)| (k.to_string(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use qqspm::geometry::satisfied_predicates;
    use qqspm::{Geometry, TopoPredicate};
    use std::collections::HashSet;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig::regional(2000, 7);
        assert_eq!(generate_dataset(&cfg), generate_dataset(&cfg));
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate_dataset(&cfg), generate_dataset(&other));
    }

    #[test]
    fn sizes_shares_and_bounds() {
        let cfg = SynthConfig::regional(5000, 1);
        let pois = generate_dataset(&cfg);
        assert_eq!(pois.len(), 5000);
        let rects = pois.iter().filter(|p| matches!(p.geometry, Geometry::Rect(_))).count();
        assert!((1200..1800).contains(&rects), "{rects} rectangles");
        let ids: HashSet<&str> = pois.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), pois.len());
        let [x0, y0, x1, y1] = cfg.bbox;
        for p in &pois {
            assert!(p.location.x >= x0 - 0.01 && p.location.x <= x1 + 0.01);
            assert!(p.location.y >= y0 - 0.01 && p.location.y <= y1 + 0.01);
        }
        let freq = keywords_by_frequency(&pois);
        assert_eq!(freq[0].0, "kw000");
        assert!(freq[0].1 > freq[10].1);
    }

    #[test]
    fn every_predicate_has_instances() {
        let pois = generate_dataset(&SynthConfig::small(300, 6, 3));
        let mut seen: HashSet<TopoPredicate> = HashSet::new();
        for a in &pois {
            for b in &pois {
                if a.id != b.id {
                    seen.extend(satisfied_predicates(&a.geometry, &b.geometry));
                }
            }
        }
        assert_eq!(seen.len(), TopoPredicate::ALL.len(), "{seen:?}");
    }
}
