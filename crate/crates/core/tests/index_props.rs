//! Structural properties of the keyword quadtrees.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qqspm::geometry::euclidean_distance;
use qqspm::index::{default_root_region, LinearQuadtree, NodeId};
use qqspm::{build_ilq, IlQuadtree, IndexConfig, Point, PoiIdx};

fn build(seed: u64, n: usize, capacity: usize, max_depth: u8) -> IlQuadtree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pois = common::random_pois(&mut rng, n, &common::KEYWORDS);
    let region = default_root_region(&pois).unwrap();
    build_ilq(pois, region, IndexConfig { capacity, max_depth }).unwrap()
}

fn all_nodes(tree: &LinearQuadtree) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = vec![tree.root()];
    while let Some(id) = stack.pop() {
        out.push(id);
        stack.extend(tree.node(id).children());
    }
    out
}

fn check_tree(ilq: &IlQuadtree, tree: &LinearQuadtree) -> Result<(), TestCaseError> {
    let cfg = ilq.config();
    let expected: BTreeSet<PoiIdx> = (0..ilq.pois().len() as u32)
        .map(PoiIdx)
        .filter(|&p| ilq.poi(p).has_keyword(tree.keyword()))
        .collect();
    let stored: Vec<PoiIdx> = tree.pois_in_node(tree.root());
    prop_assert_eq!(stored.len(), expected.len(), "each POI stored once");
    prop_assert_eq!(stored.iter().copied().collect::<BTreeSet<_>>(), expected.clone());

    for &p in &expected {
        let leaf = tree.locate_leaf(&ilq.poi(p).location);
        prop_assert!(tree.node(leaf).is_leaf());
        prop_assert!(tree.node(leaf).bucket().contains(&p), "descent by location finds {:?}", p);
    }

    for id in all_nodes(tree) {
        let node = tree.node(id);
        let members = tree.pois_in_node(id);
        prop_assert_eq!(node.len(), members.len());
        prop_assert!(!members.is_empty());
        let tight = members
            .iter()
            .map(|&p| ilq.poi(p).geometry.mbr())
            .reduce(|a, b| a.union(&b))
            .unwrap();
        prop_assert_eq!(*node.content_mbr(), tight);
        for &p in &members {
            prop_assert!(node.region().contains_point(&ilq.poi(p).location));
        }
        prop_assert_eq!(node.code().len(), 2 * node.depth() as usize);
        if node.is_leaf() {
            prop_assert!(members.len() <= cfg.capacity || node.depth() == cfg.max_depth);
        } else {
            prop_assert!(members.len() > cfg.capacity && node.depth() < cfg.max_depth);
        }
        for child in node.children() {
            let c = tree.node(child);
            prop_assert_eq!(c.parent(), Some(id));
            prop_assert_eq!(c.depth(), node.depth() + 1);
            let code = c.code();
            prop_assert!(code.starts_with(&node.code()));
            let (r, pr, mid) = (c.region(), node.region(), node.region().center());
            // first bit of the appended pair is north, second east
            let (north, east) = (&code[code.len() - 2..code.len() - 1] == "1", code.ends_with('1'));
            prop_assert_eq!(r.min_x, if east { mid.x } else { pr.min_x });
            prop_assert_eq!(r.max_x, if east { pr.max_x } else { mid.x });
            prop_assert_eq!(r.min_y, if north { mid.y } else { pr.min_y });
            prop_assert_eq!(r.max_y, if north { pr.max_y } else { mid.y });
        }
    }

    let leaves: BTreeSet<NodeId> = all_nodes(tree).into_iter().filter(|&id| tree.node(id).is_leaf()).collect();
    let deepest: BTreeSet<NodeId> = tree.nodes_at_level(tree.depth()).into_iter().collect();
    prop_assert_eq!(deepest, leaves);
    for level in 0..=tree.depth() {
        let nodes = tree.nodes_at_level(level);
        let total: usize = nodes.iter().map(|&id| tree.node(id).len()).sum();
        prop_assert_eq!(total, expected.len(), "level {} partitions the POIs", level);
        for &id in &nodes {
            let d = tree.node(id).depth();
            prop_assert!(d == level || (d < level && tree.node(id).is_leaf()));
        }
        if level < tree.depth() {
            let down: Vec<NodeId> = nodes.iter().flat_map(|&id| tree.children_or_self(id)).collect();
            prop_assert_eq!(down, tree.nodes_at_level(level + 1));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadtree_structure(seed in any::<u64>(), n in 1usize..250, capacity in 1usize..10, max_depth in 1u8..12) {
        let ilq = build(seed, n, capacity, max_depth);
        for (_, tree) in ilq.trees() {
            check_tree(&ilq, tree)?;
        }
        prop_assert!(ilq.trees().all(|(_, t)| t.depth() <= max_depth));
    }

    #[test]
    fn open_disk_emptiness_matches_linear_scan(seed in any::<u64>(), capacity in 1usize..6) {
        let ilq = build(seed, 150, capacity, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..1000 {
            let kw = common::KEYWORDS[rng.random_range(0..common::KEYWORDS.len())];
            let Some(tree) = ilq.tree(kw) else { continue };
            let center = if rng.random_bool(0.5) {
                ilq.pois()[rng.random_range(0..ilq.pois().len())].location
            } else {
                Point::new(rng.random_range(-0.01..0.06), rng.random_range(-0.01..0.06)).unwrap()
            };
            let radius = rng.random_range(0.0..0.02);
            let ignore: Vec<PoiIdx> = if rng.random_bool(0.5) {
                vec![PoiIdx(rng.random_range(0..ilq.pois().len() as u32))]
            } else {
                Vec::new()
            };
            let scan = ilq.pois().iter().enumerate().all(|(i, p)| {
                ignore.contains(&PoiIdx(i as u32))
                    || !p.has_keyword(kw)
                    || euclidean_distance(&p.location, &center) >= radius
            });
            prop_assert_eq!(tree.is_open_disk_empty(center, radius, &ignore), scan);
        }
    }
}

#[test]
fn building_twice_gives_identical_trees() {
    let a = build(11, 200, 3, 8);
    let b = build(11, 200, 3, 8);
    for ((ka, ta), (kb, tb)) in a.trees().zip(b.trees()) {
        assert_eq!(ka, kb);
        assert_eq!(ta.node_count(), tb.node_count());
        for id in all_nodes(ta) {
            assert_eq!(ta.node(id).code(), tb.node(id).code());
            assert_eq!(ta.node(id).bucket(), tb.node(id).bucket());
        }
    }
}
