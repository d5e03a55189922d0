//! Inverted linear quadtree (IL-Quadtree).
//!
//! One region quadtree per distinct keyword. POIs are routed to quadrants by
//! their representative point; each node additionally keeps a tight MBR of
//! the geometries below it, which is what the query engine prunes with.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{euclidean_distance, min_distance, Geometry, Point, Rect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("POI `{id}` lies outside the root region")]
    OutsideRoot { id: String },
    #[error("duplicate POI id `{0}`")]
    DuplicateId(String),
    #[error("POI `{id}` has no keywords")]
    NoKeywords { id: String },
    #[error("POI `{id}`: location is not inside its geometry")]
    LocationOutsideGeometry { id: String },
    #[error("invalid index configuration: {0}")]
    Config(String),
}

/// Trims and lowercases a keyword. Index build and pattern parsing both go
/// through this so that `School ` and `school` name the same tree.
pub fn normalize_keyword(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Position of a POI in the dataset the index (or oracle) was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PoiIdx(pub u32);

impl PoiIdx {
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub id: String,
    pub name: Option<String>,
    /// Normalized, sorted, deduplicated.
    pub keywords: Vec<String>,
    pub location: Point,
    pub geometry: Geometry,
}

impl Poi {
    pub fn new<I, S>(
        id: impl Into<String>,
        keywords: I,
        location: Point,
        geometry: Geometry,
    ) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let id = id.into();
        let mut keywords: Vec<String> = keywords
            .into_iter()
            .map(|k| normalize_keyword(k.as_ref()))
            .filter(|k| !k.is_empty())
            .collect();
        keywords.sort();
        keywords.dedup();
        let poi = Poi {
            id,
            name: None,
            keywords,
            location,
            geometry,
        };
        poi.validate()?;
        Ok(poi)
    }

    /// A POI whose geometry is its location.
    pub fn point<I, S>(id: impl Into<String>, keywords: I, location: Point) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(id, keywords, location, Geometry::Point(location))
    }

    /// A rectangle POI represented by the rectangle's center.
    pub fn rect<I, S>(id: impl Into<String>, keywords: I, rect: Rect) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(id, keywords, rect.center(), Geometry::Rect(rect))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn has_keyword(&self, keyword: &str) -> bool {
        self.keywords.binary_search_by(|k| k.as_str().cmp(keyword)).is_ok()
    }

    fn validate(&self) -> Result<(), IndexError> {
        if self.keywords.is_empty() {
            return Err(IndexError::NoKeywords { id: self.id.clone() });
        }
        if !self.geometry.mbr().contains_point(&self.location) {
            return Err(IndexError::LocationOutsideGeometry { id: self.id.clone() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexConfig {
    /// A leaf splits once it holds more than this many POIs.
    pub capacity: usize,
    /// Leaves at this depth never split.
    pub max_depth: u8,
}

impl IndexConfig {
    /// Node codes are packed two bits per level into a `u64`.
    pub const DEPTH_LIMIT: u8 = 32;
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            capacity: 64,
            max_depth: 16,
        }
    }
}

/// Dataset MBR grown by 1% of its larger side on every edge.
pub fn default_root_region(pois: &[Poi]) -> Option<Rect> {
    let mut it = pois.iter().map(|p| p.location.to_rect());
    let first = it.next()?;
    let bounds = it.fold(first, |acc, r| acc.union(&r));
    let margin = (0.01 * bounds.width().max(bounds.height())).max(1e-9);
    Some(bounds.expand(margin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// Quadrant order is the directional code: 00=SW, 01=SE, 10=NW, 11=NE.
const QUADRANTS: usize = 4;

#[derive(Debug, Clone)]
pub struct QuadNode {
    code: u64,
    depth: u8,
    region: Rect,
    content_mbr: Rect,
    count: u32,
    parent: Option<NodeId>,
    pois: Vec<PoiIdx>,
    children: Option<[Option<NodeId>; QUADRANTS]>,
}

impl QuadNode {
    /// Directional code as text, two characters per level (`""` for the root).
    pub fn code(&self) -> String {
        (0..self.depth)
            .map(|level| {
                let shift = 2 * (self.depth - 1 - level);
                match (self.code >> shift) & 0b11 {
                    0 => "00",
                    1 => "01",
                    2 => "10",
                    _ => "11",
                }
            })
            .collect()
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn region(&self) -> &Rect {
        &self.region
    }

    pub fn content_mbr(&self) -> &Rect {
        &self.content_mbr
    }

    /// Number of POIs in this subtree.
    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    /// Bucket contents; empty for split nodes.
    pub fn bucket(&self) -> &[PoiIdx] {
        &self.pois
    }

    /// Materialized (non-empty) children, in directional-code order.
    pub fn children(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.iter().flatten().flatten().copied()
    }

    /// The single POI of a one-element subtree.
    pub fn sole_poi(&self) -> Option<PoiIdx> {
        (self.count == 1).then(|| self.pois[0])
    }
}

/// Quadtree over the POIs carrying one keyword. Nodes live in an arena;
/// the root is always [`NodeId::ROOT`].
#[derive(Debug, Clone)]
pub struct LinearQuadtree {
    keyword: String,
    nodes: Vec<QuadNode>,
    capacity: usize,
    depth: u8,
    dataset: Arc<[Poi]>,
}

impl LinearQuadtree {
    fn build(
        keyword: String,
        members: Vec<PoiIdx>,
        region: Rect,
        config: IndexConfig,
        dataset: Arc<[Poi]>,
    ) -> Self {
        let mut tree = LinearQuadtree {
            keyword,
            nodes: Vec::new(),
            capacity: config.capacity,
            depth: 0,
            dataset,
        };
        tree.build_node(members, region, 0, 0, None, config.max_depth);
        tree.depth = tree.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        tree
    }

    fn build_node(
        &mut self,
        members: Vec<PoiIdx>,
        region: Rect,
        code: u64,
        depth: u8,
        parent: Option<NodeId>,
        max_depth: u8,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(QuadNode {
            code,
            depth,
            region,
            content_mbr: region,
            count: members.len() as u32,
            parent,
            pois: Vec::new(),
            children: None,
        });

        if members.len() <= self.capacity || depth >= max_depth {
            let content = members
                .iter()
                .map(|&p| self.dataset[p.get()].geometry.mbr())
                .reduce(|a, b| a.union(&b))
                .unwrap_or(region);
            let node = &mut self.nodes[id.get()];
            node.content_mbr = content;
            node.pois = members;
            return id;
        }

        let mid = region.center();
        let mut buckets: [Vec<PoiIdx>; QUADRANTS] = Default::default();
        for p in members {
            let loc = self.dataset[p.get()].location;
            let quadrant = ((loc.y >= mid.y) as usize) << 1 | (loc.x >= mid.x) as usize;
            buckets[quadrant].push(p);
        }

        let mut children = [None; QUADRANTS];
        let mut content: Option<Rect> = None;
        for (quadrant, bucket) in buckets.into_iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let child_region = quadrant_region(&region, &mid, quadrant);
            let child_code = code << 2 | quadrant as u64;
            let child = self.build_node(bucket, child_region, child_code, depth + 1, Some(id), max_depth);
            let child_mbr = self.nodes[child.get()].content_mbr;
            content = Some(content.map_or(child_mbr, |c| c.union(&child_mbr)));
            children[quadrant] = Some(child);
        }
        let node = &mut self.nodes[id.get()];
        node.children = Some(children);
        node.content_mbr = content.expect("split node has members");
        id
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn node(&self, id: NodeId) -> &QuadNode {
        &self.nodes[id.get()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dataset(&self) -> &[Poi] {
        &self.dataset
    }

    /// All nodes present at `level`. A leaf shallower than `level` stands in
    /// for its own subtree at every deeper level, so trees of unequal depth
    /// expose a complete frontier at any level.
    pub fn nodes_at_level(&self, level: u8) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![NodeId::ROOT];
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            if node.depth == level || node.is_leaf() {
                out.push(id);
            } else {
                // reversed so the output follows directional-code order
                let kids: Vec<_> = node.children().collect();
                stack.extend(kids.into_iter().rev());
            }
        }
        out
    }

    /// The node's children, or the node itself when it is a leaf.
    pub fn children_or_self(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let node = self.node(id);
        let slots = match &node.children {
            Some(children) => *children,
            None => [Some(id), None, None, None],
        };
        slots.into_iter().flatten()
    }

    /// All POIs below `id`.
    pub fn pois_in_node(&self, id: NodeId) -> Vec<PoiIdx> {
        let mut out = Vec::with_capacity(self.node(id).len());
        self.for_each_poi(id, |p| out.push(p));
        out
    }

    pub fn for_each_poi(&self, id: NodeId, mut f: impl FnMut(PoiIdx)) {
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            node.pois.iter().copied().for_each(&mut f);
            stack.extend(node.children());
        }
    }

    /// True iff no POI of this tree, other than those in `ignore`, lies
    /// strictly closer than `radius` to `center`.
    pub fn is_open_disk_empty(&self, center: Point, radius: f64, ignore: &[PoiIdx]) -> bool {
        if radius <= 0.0 {
            return true;
        }
        let probe = center.to_rect();
        let mut stack = vec![NodeId::ROOT];
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            if min_distance(&node.content_mbr, &probe) >= radius {
                continue;
            }
            for &p in &node.pois {
                if ignore.contains(&p) {
                    continue;
                }
                if euclidean_distance(&self.dataset[p.get()].location, &center) < radius {
                    return false;
                }
            }
            stack.extend(node.children());
        }
        true
    }

    /// Descends by location to the leaf whose region holds `p`.
    pub fn locate_leaf(&self, p: &Point) -> NodeId {
        let mut id = NodeId::ROOT;
        loop {
            let node = self.node(id);
            let Some(children) = &node.children else {
                return id;
            };
            let mid = node.region.center();
            let quadrant = ((p.y >= mid.y) as usize) << 1 | (p.x >= mid.x) as usize;
            match children[quadrant] {
                Some(child) => id = child,
                None => return id,
            }
        }
    }
}

fn quadrant_region(region: &Rect, mid: &Point, quadrant: usize) -> Rect {
    let (min_x, max_x) = if quadrant & 1 == 1 {
        (mid.x, region.max_x)
    } else {
        (region.min_x, mid.x)
    };
    let (min_y, max_y) = if quadrant & 2 == 2 {
        (mid.y, region.max_y)
    } else {
        (region.min_y, mid.y)
    };
    Rect::from_bounds(min_x, min_y, max_x, max_y)
}

/// Keyword → quadtree map over one immutable dataset.
#[derive(Debug, Clone)]
pub struct IlQuadtree {
    root_region: Rect,
    config: IndexConfig,
    pois: Arc<[Poi]>,
    trees: BTreeMap<String, LinearQuadtree>,
}

impl IlQuadtree {
    pub fn root_region(&self) -> &Rect {
        &self.root_region
    }

    pub fn config(&self) -> IndexConfig {
        self.config
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn poi(&self, idx: PoiIdx) -> &Poi {
        &self.pois[idx.get()]
    }

    pub fn tree(&self, keyword: &str) -> Option<&LinearQuadtree> {
        self.trees.get(keyword)
    }

    pub fn trees(&self) -> impl Iterator<Item = (&str, &LinearQuadtree)> {
        self.trees.iter().map(|(k, t)| (k.as_str(), t))
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.trees.keys().map(String::as_str)
    }
}

/// Builds one quadtree per distinct keyword over `pois`.
///
/// POI order is preserved: `PoiIdx(i)` refers to `pois[i]` in the returned
/// index.
pub fn build_ilq(pois: Vec<Poi>, root_region: Rect, config: IndexConfig) -> Result<IlQuadtree, IndexError> {
    if config.capacity == 0 {
        return Err(IndexError::Config("capacity must be at least 1".into()));
    }
    if config.max_depth == 0 || config.max_depth > IndexConfig::DEPTH_LIMIT {
        return Err(IndexError::Config(format!(
            "max_depth must be in 1..={}",
            IndexConfig::DEPTH_LIMIT
        )));
    }
    if pois.len() > u32::MAX as usize {
        return Err(IndexError::Config("too many POIs".into()));
    }

    let mut seen = HashSet::with_capacity(pois.len());
    let mut members: BTreeMap<String, Vec<PoiIdx>> = BTreeMap::new();
    for (i, poi) in pois.iter().enumerate() {
        poi.validate()?;
        if !seen.insert(poi.id.as_str()) {
            return Err(IndexError::DuplicateId(poi.id.clone()));
        }
        if !root_region.contains_point(&poi.location) {
            return Err(IndexError::OutsideRoot { id: poi.id.clone() });
        }
        for kw in &poi.keywords {
            members.entry(kw.clone()).or_default().push(PoiIdx(i as u32));
        }
    }

    let pois: Arc<[Poi]> = pois.into();
    let trees = members
        .into_iter()
        .map(|(kw, idx)| {
            let tree = LinearQuadtree::build(kw.clone(), idx, root_region, config, Arc::clone(&pois));
            (kw, tree)
        })
        .collect();

    Ok(IlQuadtree {
        root_region,
        config,
        pois,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y).unwrap()
    }

    fn unit() -> Rect {
        Rect::new(0., 0., 1., 1.).unwrap()
    }

    fn cfg(capacity: usize, max_depth: u8) -> IndexConfig {
        IndexConfig { capacity, max_depth }
    }

    fn two_schools() -> IlQuadtree {
        let pois = vec![
            Poi::point("A", ["school"], p(0.1, 0.1)).unwrap(),
            Poi::point("B", ["school"], p(0.9, 0.9)).unwrap(),
        ];
        build_ilq(pois, unit(), cfg(1, 16)).unwrap()
    }

    #[test]
    fn two_poi_split_uses_directional_codes() {
        let ilq = two_schools();
        let tree = ilq.tree("school").unwrap();
        assert_eq!(tree.depth(), 1);
        let root = tree.node(tree.root());
        assert!(!root.is_leaf());
        assert_eq!(root.code(), "");
        let a = tree.locate_leaf(&p(0.1, 0.1));
        let b = tree.locate_leaf(&p(0.9, 0.9));
        assert_eq!(tree.node(a).code(), "00");
        assert_eq!(tree.node(b).code(), "11");
        assert_eq!(tree.node(a).bucket(), &[PoiIdx(0)]);
        assert_eq!(tree.node(b).bucket(), &[PoiIdx(1)]);
    }

    #[test]
    fn single_poi_tree_is_a_leaf_root() {
        let pois = vec![Poi::point("A", ["cafe"], p(0.3, 0.3)).unwrap()];
        let ilq = build_ilq(pois, unit(), cfg(1, 16)).unwrap();
        let tree = ilq.tree("cafe").unwrap();
        assert_eq!(tree.depth(), 0);
        assert!(tree.node(tree.root()).is_leaf());
        assert_eq!(tree.nodes_at_level(2), vec![tree.root()]);
        assert_eq!(tree.nodes_at_level(0), vec![tree.root()]);
    }

    #[test]
    fn depth_cap_stops_splitting() {
        let pois = (0..5)
            .map(|i| Poi::point(format!("p{i}"), ["bank"], p(0.2, 0.2)).unwrap())
            .collect();
        let ilq = build_ilq(pois, unit(), cfg(1, 3)).unwrap();
        let tree = ilq.tree("bank").unwrap();
        assert_eq!(tree.depth(), 3);
        let leaf = tree.locate_leaf(&p(0.2, 0.2));
        assert_eq!(tree.node(leaf).depth(), 3);
        assert_eq!(tree.node(leaf).bucket().len(), 5);
    }

    #[test]
    fn level_enumeration_and_descent() {
        let ilq = two_schools();
        let tree = ilq.tree("school").unwrap();
        let codes: Vec<_> = tree.nodes_at_level(1).iter().map(|&n| tree.node(n).code()).collect();
        assert_eq!(codes, ["00", "11"]);
        let kids: Vec<_> = tree.children_or_self(tree.root()).map(|n| tree.node(n).code()).collect();
        assert_eq!(kids, ["00", "11"]);
        let leaf = tree.nodes_at_level(1)[0];
        assert_eq!(tree.children_or_self(leaf).collect::<Vec<_>>(), vec![leaf]);
        // a deeper level returns the persisted leaves
        assert_eq!(tree.nodes_at_level(5), tree.nodes_at_level(1));
    }

    #[test]
    fn split_node_with_two_nonempty_children() {
        let pois = vec![
            Poi::point("a", ["x"], p(0.1, 0.1)).unwrap(),
            Poi::point("b", ["x"], p(0.2, 0.2)).unwrap(),
            Poi::point("c", ["x"], p(0.8, 0.2)).unwrap(),
        ];
        let ilq = build_ilq(pois, unit(), cfg(2, 16)).unwrap();
        let tree = ilq.tree("x").unwrap();
        let kids: Vec<_> = tree.children_or_self(tree.root()).collect();
        assert_eq!(kids.len(), 2);
        assert_eq!(tree.node(kids[0]).code(), "00");
        assert_eq!(tree.node(kids[1]).code(), "01");
    }

    #[test]
    fn pois_in_node_collects_subtree() {
        let ilq = two_schools();
        let tree = ilq.tree("school").unwrap();
        let mut all = tree.pois_in_node(tree.root());
        all.sort();
        assert_eq!(all, vec![PoiIdx(0), PoiIdx(1)]);
        let leaf = tree.locate_leaf(&p(0.1, 0.1));
        assert_eq!(tree.pois_in_node(leaf), vec![PoiIdx(0)]);
    }

    #[test]
    fn disk_emptiness() {
        let pois = vec![Poi::point("h", ["hospital"], p(0., 0.)).unwrap()];
        let ilq = build_ilq(pois, unit(), cfg(4, 16)).unwrap();
        let tree = ilq.tree("hospital").unwrap();
        assert!(tree.is_open_disk_empty(p(0., 0.), 0.0, &[]));
        assert!(!tree.is_open_disk_empty(p(0., 0.), 0.1, &[]));
        assert!(tree.is_open_disk_empty(p(0., 0.), 0.1, &[PoiIdx(0)]));
        // open disk: a POI exactly at the radius does not count
        assert!(tree.is_open_disk_empty(p(0.1, 0.), 0.1, &[]));
    }

    #[test]
    fn multi_keyword_poi_lands_in_each_tree() {
        let pois = vec![
            Poi::point("m", ["Mall", " parking "], p(0.5, 0.5)).unwrap(),
            Poi::point("s", ["school"], p(0.2, 0.5)).unwrap(),
        ];
        let ilq = build_ilq(pois, unit(), IndexConfig::default()).unwrap();
        assert_eq!(ilq.keywords().collect::<Vec<_>>(), ["mall", "parking", "school"]);
        assert_eq!(ilq.tree("mall").unwrap().len(), 1);
        assert_eq!(ilq.tree("parking").unwrap().len(), 1);
    }

    #[test]
    fn build_errors() {
        let outside = vec![Poi::point("far", ["x"], p(2., 2.)).unwrap()];
        assert_eq!(
            build_ilq(outside, unit(), IndexConfig::default()).unwrap_err(),
            IndexError::OutsideRoot { id: "far".into() }
        );
        let dup = vec![
            Poi::point("d", ["x"], p(0.1, 0.1)).unwrap(),
            Poi::point("d", ["y"], p(0.2, 0.1)).unwrap(),
        ];
        assert!(matches!(
            build_ilq(dup, unit(), IndexConfig::default()),
            Err(IndexError::DuplicateId(_))
        ));
        assert!(build_ilq(vec![], unit(), cfg(0, 4)).is_err());
        let empty = build_ilq(vec![], unit(), IndexConfig::default()).unwrap();
        assert_eq!(empty.keywords().count(), 0);
        assert!(Poi::point("k", ["  "], p(0., 0.)).is_err());
        let r = Rect::new(0., 0., 1., 1.).unwrap();
        assert!(Poi::new("o", ["x"], p(3., 3.), Geometry::Rect(r)).is_err());
    }

    #[test]
    fn content_mbr_covers_spilling_geometry() {
        let big = Rect::new(0.4, 0.4, 0.6, 0.6).unwrap();
        let pois = vec![
            Poi::new("r", ["park"], p(0.45, 0.45), Geometry::Rect(big)).unwrap(),
            Poi::point("q", ["park"], p(0.9, 0.9)).unwrap(),
        ];
        let ilq = build_ilq(pois, unit(), cfg(1, 8)).unwrap();
        let tree = ilq.tree("park").unwrap();
        let leaf = tree.locate_leaf(&p(0.45, 0.45));
        assert_eq!(tree.node(leaf).code(), "00");
        assert_eq!(*tree.node(leaf).content_mbr(), big);
        assert!(!tree.node(leaf).region().contains_rect(&big));
    }
}
