//! Level-wise QQ-SPM query evaluation.
//!
//! For every pattern edge the engine walks the two keyword quadtrees in
//! lockstep, one level at a time, keeping only node pairs whose MBRs could
//! still hold a matching POI pair (qq-n-matches). At the deepest level the
//! surviving node pairs are opened and their POI pairs checked exactly
//! (qq-e-matches). Edge results are then joined into full match tuples.
//!
//! Besides the per-edge pair checks, the engine narrows candidates per vertex:
//! at each level a node survives for a vertex only if it appears in the
//! qq-n-matches of every edge incident to that vertex, and at the object stage
//! a POI stays a candidate only if it occurs in the qq-e-matches already
//! computed for incident edges.

use std::collections::{HashMap, HashSet};

use crate::geometry::{holds, max_distance, min_distance, Rect, TopoPredicate};
use crate::index::{IlQuadtree, LinearQuadtree, NodeId, PoiIdx};
use crate::pattern::{ExclusionSign, PatternEdge, SpatialPattern};

/// A node pair that survived pruning for one edge at one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QqnMatch {
    pub edge: usize,
    pub from: NodeId,
    pub to: NodeId,
}

/// A POI pair satisfying every constraint of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QqeMatch {
    pub edge: usize,
    pub from: PoiIdx,
    pub to: PoiIdx,
}

/// One solution; `pois[i]` binds pattern vertex `i`. Indices refer to the
/// dataset the query ran against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchTuple {
    pub pois: Vec<PoiIdx>,
}

impl MatchTuple {
    pub fn ids<'a>(&self, pois: &'a [crate::index::Poi]) -> Vec<&'a str> {
        self.pois.iter().map(|p| pois[p.get()].id.as_str()).collect()
    }
}

/// Order in which edges are processed at each level, at the object stage and
/// during the join.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum EdgeOrder {
    /// Fewest previous matches first; ties by edge index.
    #[default]
    Heuristic,
    /// A fixed priority list: every edge index exactly once.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum SkipPolicy {
    /// Greedy by descending final-level qq-n-match count.
    #[default]
    Greedy,
    /// Greedy over the given candidate order.
    Ordered(Vec<usize>),
    /// Compute qq-e-matches for every edge.
    Disabled,
}

#[derive(Debug, Clone)]
pub struct QueryOptions {
    pub edge_order: EdgeOrder,
    pub skip: SkipPolicy,
    /// When false, connectivity predicates are ignored everywhere (pure
    /// distance semantics). The QQ-simple baseline runs in this mode.
    pub check_relations: bool,
    /// Record every level's qq-n-matches.
    pub record_trace: bool,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            edge_order: EdgeOrder::Heuristic,
            skip: SkipPolicy::Greedy,
            check_relations: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Deepest level visited (the maximum depth of the pattern's trees).
    pub levels: u8,
    /// `qqn_counts[level][edge]` after vertex narrowing.
    pub qqn_counts: Vec<Vec<usize>>,
    /// qq-e-match count per edge; `None` for skip edges and edges never reached.
    pub qqe_counts: Vec<Option<usize>>,
    pub skip_edges: Vec<usize>,
    /// Level at which some edge ran out of node pairs.
    pub exhausted_at_level: Option<u8>,
}

/// Every level's recorded qq-n-matches, for checking the level invariants.
#[derive(Debug, Clone, Default)]
pub struct QueryTrace {
    pub check_relations: bool,
    /// `levels[level][edge]`; level 0 holds the root pair.
    pub levels: Vec<Vec<Vec<QqnMatch>>>,
}

#[derive(Debug, Clone, Default)]
pub struct QueryOutcome {
    pub matches: Vec<MatchTuple>,
    pub notes: Vec<String>,
    pub stats: QueryStats,
    pub trace: Option<QueryTrace>,
}

/// All non-empty nodes of one keyword tree at one level, indexed for
/// exclusion lookups.
#[derive(Debug, Clone)]
pub struct Frontier<'a> {
    tree: &'a LinearQuadtree,
    level: u8,
    nodes: Vec<NodeId>,
    by_min_x: Vec<(f64, NodeId)>,
}

impl<'a> Frontier<'a> {
    pub fn new(tree: &'a LinearQuadtree, level: u8, nodes: Vec<NodeId>) -> Self {
        let mut by_min_x: Vec<(f64, NodeId)> = nodes
            .iter()
            .map(|&n| (tree.node(n).content_mbr().min_x, n))
            .collect();
        by_min_x.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self {
            tree,
            level,
            nodes,
            by_min_x,
        }
    }

    pub fn at_level(tree: &'a LinearQuadtree, level: u8) -> Self {
        Self::new(tree, level, tree.nodes_at_level(level))
    }

    /// The frontier one level down: every node replaced by its children,
    /// leaves kept as they are.
    pub fn descend(&self) -> Frontier<'a> {
        let nodes = self
            .nodes
            .iter()
            .flat_map(|&n| self.tree.children_or_self(n))
            .collect();
        Frontier::new(self.tree, self.level + 1, nodes)
    }

    pub fn tree(&self) -> &'a LinearQuadtree {
        self.tree
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Whether POIs in this frontier are certain to lie closer than `radius`
    /// to every point of `b`, counting only POIs that cannot be the subject
    /// itself (the POI at `b`, which carries `subject_keyword`).
    ///
    /// Nodes whose farthest point from `b` is below `radius` contribute their
    /// POIs. Two or more such POIs always include one that is not the
    /// subject; a single one counts only if it lacks the subject's keyword.
    /// The counted set only grows when `b` shrinks or the frontier is
    /// refined, so a verdict of `true` at one level stays `true` below.
    pub fn certainly_excludes(&self, b: &Rect, radius: f64, subject_keyword: &str, skip: Option<NodeId>) -> bool {
        if radius <= 0.0 {
            return false;
        }
        // max_distance < radius needs |x - b.min_x| < radius and |x - b.max_x| < radius
        // for every x of the candidate, in particular its min_x.
        let lo = b.max_x - radius;
        let hi = b.min_x + radius;
        let start = self.by_min_x.partition_point(|&(x, _)| x <= lo);
        let dataset = self.tree.dataset();
        let mut total = 0usize;
        for &(x, id) in &self.by_min_x[start..] {
            if x >= hi {
                break;
            }
            if Some(id) == skip {
                continue;
            }
            let node = self.tree.node(id);
            if max_distance(b, node.content_mbr()) >= radius {
                continue;
            }
            if let Some(sole) = node.sole_poi() {
                if !dataset[sole.get()].has_keyword(subject_keyword) {
                    return true;
                }
            }
            total += node.len();
            if total >= 2 {
                return true;
            }
        }
        false
    }
}

fn distance_and_overlap_ok(edge: &PatternEdge, b_from: &Rect, b_to: &Rect) -> bool {
    let iv = edge.effective_interval();
    if !iv.below_upper(min_distance(b_from, b_to)) || max_distance(b_from, b_to) < iv.lower {
        return false;
    }
    match edge.relation {
        Some(rel) if rel != TopoPredicate::Disjoint => b_from.intersects(b_to),
        _ => true,
    }
}

/// Node-level test for one edge: the MBR distance bounds admit the interval,
/// no frontier node certainly violates an exclusion sign, and for
/// intersecting relations the MBRs meet.
pub fn node_pair_qualifies(
    edge: &PatternEdge,
    from: NodeId,
    to: NodeId,
    frontier_from: &Frontier<'_>,
    frontier_to: &Frontier<'_>,
) -> bool {
    let b_from = frontier_from.tree.node(from).content_mbr();
    let b_to = frontier_to.tree.node(to).content_mbr();
    if !distance_and_overlap_ok(edge, b_from, b_to) {
        return false;
    }
    let lower = edge.effective_interval().lower;
    if edge.sign.from_excludes()
        && frontier_to.certainly_excludes(b_from, lower, frontier_from.tree.keyword(), Some(to))
    {
        return false;
    }
    if edge.sign.to_excludes()
        && frontier_from.certainly_excludes(b_to, lower, frontier_to.tree.keyword(), Some(from))
    {
        return false;
    }
    true
}

/// Expands every previous-level pair into child pairs and keeps the ones
/// that qualify at the frontiers' level.
pub fn compute_level_qqn(
    edge: &PatternEdge,
    edge_index: usize,
    prev: &[QqnMatch],
    frontier_from: &Frontier<'_>,
    frontier_to: &Frontier<'_>,
) -> Vec<QqnMatch> {
    LevelPass::new(edge, edge_index, frontier_from, frontier_to).run(prev, None, None)
}

/// Per-edge, per-level evaluation with exclusion verdicts cached per node.
struct LevelPass<'e, 'f, 't> {
    edge: &'e PatternEdge,
    edge_index: usize,
    ff: &'f Frontier<'t>,
    ft: &'f Frontier<'t>,
    from_excluded: HashMap<NodeId, bool>,
    to_excluded: HashMap<NodeId, bool>,
}

impl<'e, 'f, 't> LevelPass<'e, 'f, 't> {
    fn new(edge: &'e PatternEdge, edge_index: usize, ff: &'f Frontier<'t>, ft: &'f Frontier<'t>) -> Self {
        Self {
            edge,
            edge_index,
            ff,
            ft,
            from_excluded: HashMap::new(),
            to_excluded: HashMap::new(),
        }
    }

    fn qualifies(&mut self, from: NodeId, to: NodeId) -> bool {
        let b_from = self.ff.tree.node(from).content_mbr();
        let b_to = self.ft.tree.node(to).content_mbr();
        if !distance_and_overlap_ok(self.edge, b_from, b_to) {
            return false;
        }
        // Past the distance test max_distance(b_from, b_to) >= lower, so the
        // partner node can never be among the excluders and the verdict only
        // depends on one side.
        let lower = self.edge.effective_interval().lower;
        if self.edge.sign.from_excludes() {
            let (ft, ff) = (self.ft, self.ff);
            let excluded = *self
                .from_excluded
                .entry(from)
                .or_insert_with(|| ft.certainly_excludes(b_from, lower, ff.tree.keyword(), None));
            if excluded {
                return false;
            }
        }
        if self.edge.sign.to_excludes() {
            let (ft, ff) = (self.ft, self.ff);
            let excluded = *self
                .to_excluded
                .entry(to)
                .or_insert_with(|| ff.certainly_excludes(b_to, lower, ft.tree.keyword(), None));
            if excluded {
                return false;
            }
        }
        true
    }

    fn run(&mut self, prev: &[QqnMatch], allowed_from: Option<&[bool]>, allowed_to: Option<&[bool]>) -> Vec<QqnMatch> {
        let ok = |mask: Option<&[bool]>, n: NodeId| mask.is_none_or(|m| m[n.get()]);
        let mut out = Vec::new();
        for m in prev {
            for cf in self.ff.tree.children_or_self(m.from) {
                if !ok(allowed_from, cf) {
                    continue;
                }
                for ct in self.ft.tree.children_or_self(m.to) {
                    if ok(allowed_to, ct) && self.qualifies(cf, ct) {
                        out.push(QqnMatch {
                            edge: self.edge_index,
                            from: cf,
                            to: ct,
                        });
                    }
                }
            }
        }
        // Distinct parents have disjoint children, so this only matters if
        // `prev` itself had repeats.
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Object-level test of one POI pair against one edge (distance, relation and
/// exclusion), with exclusion verdicts cached per POI.
struct PairCheck<'a> {
    edge: &'a PatternEdge,
    ilq: &'a IlQuadtree,
    from_tree: &'a LinearQuadtree,
    to_tree: &'a LinearQuadtree,
    from_clear: HashMap<PoiIdx, bool>,
    to_clear: HashMap<PoiIdx, bool>,
}

impl<'a> PairCheck<'a> {
    fn new(edge: &'a PatternEdge, ilq: &'a IlQuadtree, from_tree: &'a LinearQuadtree, to_tree: &'a LinearQuadtree) -> Self {
        Self {
            edge,
            ilq,
            from_tree,
            to_tree,
            from_clear: HashMap::new(),
            to_clear: HashMap::new(),
        }
    }

    fn check(&mut self, p: PoiIdx, q: PoiIdx) -> bool {
        if p == q {
            return false;
        }
        let (pp, qq) = (self.ilq.poi(p), self.ilq.poi(q));
        let iv = self.edge.effective_interval();
        if !iv.admits(pp.location.distance(&qq.location)) {
            return false;
        }
        if let Some(rel) = self.edge.relation {
            if !holds(rel, &pp.geometry, &qq.geometry) {
                return false;
            }
        }
        let l = iv.lower;
        if self.edge.sign.from_excludes() {
            let to_tree = self.to_tree;
            let clear = *self
                .from_clear
                .entry(p)
                .or_insert_with(|| to_tree.is_open_disk_empty(pp.location, l, &[p]));
            if !clear {
                return false;
            }
        }
        if self.edge.sign.to_excludes() {
            let from_tree = self.from_tree;
            let clear = *self
                .to_clear
                .entry(q)
                .or_insert_with(|| from_tree.is_open_disk_empty(qq.location, l, &[q]));
            if !clear {
                return false;
            }
        }
        true
    }
}

/// qq-e-matches of one edge inside its final-level node pairs, optionally
/// restricted to candidate POIs for either end.
#[allow(clippy::too_many_arguments)]
pub fn compute_qqe_matches(
    edge: &PatternEdge,
    edge_index: usize,
    final_qqn: &[QqnMatch],
    candidates_from: Option<&HashSet<PoiIdx>>,
    candidates_to: Option<&HashSet<PoiIdx>>,
    ilq: &IlQuadtree,
    from_tree: &LinearQuadtree,
    to_tree: &LinearQuadtree,
) -> Vec<QqeMatch> {
    let mut check = PairCheck::new(edge, ilq, from_tree, to_tree);
    let keep = |c: Option<&HashSet<PoiIdx>>, p: &PoiIdx| c.is_none_or(|set| set.contains(p));
    let mut out = Vec::new();
    let mut froms = Vec::new();
    let mut tos = Vec::new();
    for m in final_qqn {
        froms.clear();
        tos.clear();
        from_tree.for_each_poi(m.from, |p| {
            if keep(candidates_from, &p) {
                froms.push(p)
            }
        });
        if froms.is_empty() {
            continue;
        }
        to_tree.for_each_poi(m.to, |q| {
            if keep(candidates_to, &q) {
                tos.push(q)
            }
        });
        for &p in &froms {
            for &q in &tos {
                if check.check(p, q) {
                    out.push(QqeMatch {
                        edge: edge_index,
                        from: p,
                        to: q,
                    });
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn connected_without(n_vertices: usize, edges: &[PatternEdge], dropped: &[bool]) -> bool {
    if n_vertices <= 1 {
        return true;
    }
    let mut seen = vec![false; n_vertices];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for (i, e) in edges.iter().enumerate() {
            if dropped[i] || !e.touches_vertex(v) {
                continue;
            }
            let w = if e.from == v { e.to } else { e.from };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Inclusive, purely quantitative edges may be skipped.
fn skippable(edge: &PatternEdge) -> bool {
    edge.interval.is_some() && edge.sign == ExclusionSign::Inclusive && edge.relation.is_none()
}

/// Greedily drops skippable edges in `candidate_order` while the remaining
/// edges still connect (and so cover) every vertex.
pub fn select_skip_edges(n_vertices: usize, edges: &[PatternEdge], candidate_order: &[usize]) -> Vec<usize> {
    let mut dropped = vec![false; edges.len()];
    for &i in candidate_order {
        if dropped[i] || !skippable(&edges[i]) {
            continue;
        }
        dropped[i] = true;
        if !connected_without(n_vertices, edges, &dropped) {
            dropped[i] = false;
        }
    }
    let mut out: Vec<usize> = (0..edges.len()).filter(|&i| dropped[i]).collect();
    out.sort_unstable();
    out
}

/// Skip edges chosen without cost information: candidates by descending
/// edge index.
pub fn identify_skip_edges(p: &SpatialPattern) -> Vec<usize> {
    let order: Vec<usize> = (0..p.edges().len()).rev().collect();
    select_skip_edges(p.len(), p.edges(), &order)
}

/// Full edge check used for skip edges during the join. Skip edges are
/// inclusive, so no exclusion test is needed.
fn edge_holds(edge: &PatternEdge, ilq: &IlQuadtree, p: PoiIdx, q: PoiIdx) -> bool {
    let (pp, qq) = (ilq.poi(p), ilq.poi(q));
    edge.effective_interval().admits(pp.location.distance(&qq.location))
        && edge.relation.is_none_or(|rel| holds(rel, &pp.geometry, &qq.geometry))
}

const UNBOUND: u32 = u32::MAX;

/// Joins per-edge qq-e-matches into match tuples.
///
/// `per_edge[i]` must be populated for every edge not in `skips`. Edges are
/// joined in `join_order` when given, otherwise by ascending match count,
/// always preferring an edge that shares a vertex with what is already
/// joined. Skip edges are verified on the finished tuples.
pub fn join_qq_e_matches(
    per_edge: &[Option<Vec<QqeMatch>>],
    skips: &[usize],
    edges: &[PatternEdge],
    n_vertices: usize,
    ilq: &IlQuadtree,
    join_order: Option<&[usize]>,
) -> Vec<MatchTuple> {
    let mut pending: Vec<usize> = match join_order {
        Some(order) => order.iter().copied().filter(|i| !skips.contains(i)).collect(),
        None => {
            let mut v: Vec<usize> = (0..edges.len()).filter(|i| !skips.contains(i)).collect();
            v.sort_by_key(|&i| (per_edge[i].as_ref().map_or(0, Vec::len), i));
            v
        }
    };
    let mut bound = vec![false; n_vertices];
    let mut rows: Vec<u32> = Vec::new();
    let width = n_vertices;
    let mut started = false;

    while !pending.is_empty() {
        let pos = if started {
            pending
                .iter()
                .position(|&i| bound[edges[i].from] || bound[edges[i].to])
                .unwrap_or(0)
        } else {
            0
        };
        let ei = pending.remove(pos);
        let edge = &edges[ei];
        let matches = per_edge[ei].as_deref().expect("non-skip edge has qq-e-matches");
        let (f, t) = (edge.from, edge.to);

        if !started {
            rows.reserve(matches.len() * width);
            for m in matches {
                let start = rows.len();
                rows.resize(start + width, UNBOUND);
                rows[start + f] = m.from.0;
                rows[start + t] = m.to.0;
            }
            bound[f] = true;
            bound[t] = true;
            started = true;
        } else if bound[f] && bound[t] {
            let set: HashSet<(u32, u32)> = matches.iter().map(|m| (m.from.0, m.to.0)).collect();
            rows = rows
                .chunks_exact(width)
                .filter(|row| set.contains(&(row[f], row[t])))
                .flatten()
                .copied()
                .collect();
        } else {
            // extend from the bound end to the free one
            let (anchor, free, flip) = if bound[f] { (f, t, false) } else { (t, f, true) };
            let mut adjacency: HashMap<u32, Vec<u32>> = HashMap::new();
            for m in matches {
                let (a, b) = if flip { (m.to.0, m.from.0) } else { (m.from.0, m.to.0) };
                adjacency.entry(a).or_default().push(b);
            }
            let mut next = Vec::new();
            if bound[anchor] {
                for row in rows.chunks_exact(width) {
                    let Some(partners) = adjacency.get(&row[anchor]) else {
                        continue;
                    };
                    for &b in partners {
                        if row.contains(&b) {
                            continue;
                        }
                        next.extend_from_slice(row);
                        let len = next.len();
                        next[len - width + free] = b;
                    }
                }
            } else {
                // Only reachable with a fixed order that skips ahead of the
                // joined component: plain product.
                for row in rows.chunks_exact(width) {
                    for m in matches {
                        if row.contains(&m.from.0) || row.contains(&m.to.0) {
                            continue;
                        }
                        next.extend_from_slice(row);
                        let len = next.len();
                        next[len - width + f] = m.from.0;
                        next[len - width + t] = m.to.0;
                    }
                }
                bound[anchor] = true;
            }
            bound[free] = true;
            rows = next;
        }
        if rows.is_empty() {
            return Vec::new();
        }
    }

    let mut out: Vec<MatchTuple> = rows
        .chunks_exact(width)
        .filter(|row| {
            skips
                .iter()
                .all(|&si| edge_holds(&edges[si], ilq, PoiIdx(row[edges[si].from]), PoiIdx(row[edges[si].to])))
        })
        .map(|row| MatchTuple {
            pois: row.iter().map(|&x| PoiIdx(x)).collect(),
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Answers `pattern` with default options.
pub fn qqespm_query(ilq: &IlQuadtree, pattern: &SpatialPattern) -> QueryOutcome {
    qqespm_query_with(ilq, pattern, &QueryOptions::default())
}

fn ordered(order: &EdgeOrder, counts: &[usize]) -> Vec<usize> {
    match order {
        EdgeOrder::Fixed(v) => v.clone(),
        EdgeOrder::Heuristic => {
            let mut v: Vec<usize> = (0..counts.len()).collect();
            v.sort_by_key(|&i| (counts[i], i));
            v
        }
    }
}

pub fn qqespm_query_with(ilq: &IlQuadtree, pattern: &SpatialPattern, opts: &QueryOptions) -> QueryOutcome {
    let mut outcome = QueryOutcome::default();
    let n = pattern.len();
    let edges: Vec<PatternEdge> = pattern
        .edges()
        .iter()
        .map(|e| PatternEdge {
            relation: if opts.check_relations { e.relation } else { None },
            ..e.clone()
        })
        .collect();
    let m = edges.len();
    if let EdgeOrder::Fixed(order) = &opts.edge_order {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert!(sorted == (0..m).collect::<Vec<_>>(), "edge order must be a permutation of the edges");
    }

    let mut trees = Vec::with_capacity(n);
    for v in pattern.vertices() {
        match ilq.tree(&v.keyword) {
            Some(t) => trees.push(t),
            None => {
                outcome.notes.push(format!("keyword `{}` does not occur in the index", v.keyword));
            }
        }
    }
    if trees.len() < n {
        return outcome;
    }

    if m == 0 {
        outcome.matches = trees[0]
            .pois_in_node(trees[0].root())
            .into_iter()
            .map(|p| MatchTuple { pois: vec![p] })
            .collect();
        outcome.matches.sort_unstable();
        return outcome;
    }

    let depth = trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    outcome.stats.levels = depth;
    let mut trace = opts.record_trace.then(|| QueryTrace {
        check_relations: opts.check_relations,
        levels: Vec::new(),
    });

    // Frontiers are per keyword, shared by vertices with the same keyword.
    let mut kw_slot: HashMap<&str, usize> = HashMap::new();
    let mut frontiers: Vec<Frontier<'_>> = Vec::new();
    let vertex_slot: Vec<usize> = pattern
        .vertices()
        .iter()
        .enumerate()
        .map(|(vid, v)| {
            *kw_slot.entry(v.keyword.as_str()).or_insert_with(|| {
                frontiers.push(Frontier::new(trees[vid], 0, vec![trees[vid].root()]));
                frontiers.len() - 1
            })
        })
        .collect();

    let mut current: Vec<Vec<QqnMatch>> = (0..m)
        .map(|i| {
            vec![QqnMatch {
                edge: i,
                from: NodeId::ROOT,
                to: NodeId::ROOT,
            }]
        })
        .collect();
    outcome.stats.qqn_counts.push(vec![1; m]);
    if let Some(t) = trace.as_mut() {
        t.levels.push(current.clone());
    }

    for level in 1..=depth {
        frontiers = frontiers.iter().map(Frontier::descend).collect();
        let counts: Vec<usize> = current.iter().map(Vec::len).collect();
        let mut allowed: Vec<Option<Vec<bool>>> = vec![None; n];
        let mut next: Vec<Vec<QqnMatch>> = vec![Vec::new(); m];

        for ei in ordered(&opts.edge_order, &counts) {
            let e = &edges[ei];
            let ff = &frontiers[vertex_slot[e.from]];
            let ft = &frontiers[vertex_slot[e.to]];
            let found = LevelPass::new(e, ei, ff, ft).run(&current[ei], allowed[e.from].as_deref(), allowed[e.to].as_deref());
            if found.is_empty() {
                outcome.stats.exhausted_at_level = Some(level);
                outcome.stats.qqn_counts.push(vec![0; m]);
                return outcome;
            }
            narrow(&mut allowed[e.from], trees[e.from].node_count(), found.iter().map(|q| q.from));
            narrow(&mut allowed[e.to], trees[e.to].node_count(), found.iter().map(|q| q.to));
            next[ei] = found;
        }
        // Edges processed early did not see the later narrowing.
        for (ei, list) in next.iter_mut().enumerate() {
            let e = &edges[ei];
            let (af, at) = (allowed[e.from].as_deref(), allowed[e.to].as_deref());
            list.retain(|q| af.is_none_or(|a| a[q.from.get()]) && at.is_none_or(|a| a[q.to.get()]));
            if list.is_empty() {
                outcome.stats.exhausted_at_level = Some(level);
                outcome.stats.qqn_counts.push(vec![0; m]);
                return outcome;
            }
        }
        outcome.stats.qqn_counts.push(next.iter().map(Vec::len).collect());
        if let Some(t) = trace.as_mut() {
            t.levels.push(next.clone());
        }
        current = next;
    }
    outcome.trace = trace;

    let final_counts: Vec<usize> = current.iter().map(Vec::len).collect();
    let skips = match &opts.skip {
        SkipPolicy::Disabled => Vec::new(),
        SkipPolicy::Ordered(order) => select_skip_edges(n, &edges, order),
        SkipPolicy::Greedy => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|&i| (std::cmp::Reverse(final_counts[i]), i));
            select_skip_edges(n, &edges, &order)
        }
    };
    outcome.stats.skip_edges = skips.clone();
    outcome.stats.qqe_counts = vec![None; m];

    let mut candidates: Vec<Option<HashSet<PoiIdx>>> = vec![None; n];
    let mut per_edge: Vec<Option<Vec<QqeMatch>>> = vec![None; m];
    let mut computed_order = Vec::with_capacity(m);
    for ei in ordered(&opts.edge_order, &final_counts) {
        if skips.contains(&ei) {
            continue;
        }
        let e = &edges[ei];
        let found = compute_qqe_matches(
            e,
            ei,
            &current[ei],
            candidates[e.from].as_ref(),
            candidates[e.to].as_ref(),
            ilq,
            trees[e.from],
            trees[e.to],
        );
        outcome.stats.qqe_counts[ei] = Some(found.len());
        if found.is_empty() {
            return outcome;
        }
        restrict(&mut candidates[e.from], found.iter().map(|q| q.from));
        restrict(&mut candidates[e.to], found.iter().map(|q| q.to));
        per_edge[ei] = Some(found);
        computed_order.push(ei);
    }

    let join_order = match &opts.edge_order {
        EdgeOrder::Fixed(order) => Some(order.as_slice()),
        EdgeOrder::Heuristic => None,
    };
    outcome.matches = join_qq_e_matches(&per_edge, &skips, &edges, n, ilq, join_order);
    outcome
}

fn narrow(slot: &mut Option<Vec<bool>>, size: usize, present: impl Iterator<Item = NodeId>) {
    let mut mask = vec![false; size];
    for id in present {
        mask[id.get()] = true;
    }
    match slot {
        Some(existing) => existing.iter_mut().zip(mask).for_each(|(a, b)| *a &= b),
        None => *slot = Some(mask),
    }
}

fn restrict(slot: &mut Option<HashSet<PoiIdx>>, present: impl Iterator<Item = PoiIdx>) {
    let found: HashSet<PoiIdx> = present.collect();
    match slot {
        Some(existing) => existing.retain(|p| found.contains(p)),
        None => *slot = Some(found),
    }
}

/// A recorded qq-n-match whose parent pair fails the node test one level up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentViolation {
    pub level: u8,
    pub qqn: QqnMatch,
}

/// Re-checks every recorded pair at level ≥ 1 against its parents at the
/// previous level. Parents of leaves carried down unchanged are the leaves
/// themselves. The root pair at level 0 is accepted unconditionally, so
/// level-1 pairs are checked against it too.
pub fn parent_pair_violations(ilq: &IlQuadtree, pattern: &SpatialPattern, trace: &QueryTrace) -> Vec<ParentViolation> {
    let mut out = Vec::new();
    let edges: Vec<PatternEdge> = pattern
        .edges()
        .iter()
        .map(|e| PatternEdge {
            relation: if trace.check_relations { e.relation } else { None },
            ..e.clone()
        })
        .collect();
    let trees: Vec<&LinearQuadtree> = pattern
        .vertices()
        .iter()
        .map(|v| ilq.tree(&v.keyword).expect("traced query had every keyword"))
        .collect();
    for level in 1..trace.levels.len() {
        let prev_level = (level - 1) as u8;
        let parent = |tree: &LinearQuadtree, id: NodeId| {
            let node = tree.node(id);
            if (node.depth() as usize) < level {
                id
            } else {
                node.parent().expect("non-root node has a parent")
            }
        };
        for (ei, list) in trace.levels[level].iter().enumerate() {
            let e = &edges[ei];
            let ff = Frontier::at_level(trees[e.from], prev_level);
            let ft = Frontier::at_level(trees[e.to], prev_level);
            for q in list {
                let pf = parent(trees[e.from], q.from);
                let pt = parent(trees[e.to], q.to);
                if !node_pair_qualifies(e, pf, pt, &ff, &ft) {
                    out.push(ParentViolation {
                        level: level as u8,
                        qqn: *q,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::index::{build_ilq, IndexConfig, Poi};
    use crate::pattern::ExclusionSign::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y).unwrap()
    }

    fn r(a: f64, b: f64, c: f64, d: f64) -> Rect {
        Rect::new(a, b, c, d).unwrap()
    }

    fn index(pois: Vec<Poi>, region: Rect, capacity: usize) -> IlQuadtree {
        build_ilq(pois, region, IndexConfig { capacity, max_depth: 16 }).unwrap()
    }

    #[test]
    fn unconstrained_edge_accepts_any_pair() {
        let ilq = index(
            vec![
                Poi::point("a", ["a"], p(0.1, 0.1)).unwrap(),
                Poi::point("b", ["b"], p(0.9, 0.9)).unwrap(),
            ],
            r(0., 0., 1., 1.),
            1,
        );
        let (ta, tb) = (ilq.tree("a").unwrap(), ilq.tree("b").unwrap());
        let (fa, fb) = (Frontier::at_level(ta, 0), Frontier::at_level(tb, 0));
        let e = PatternEdge::distance(0, 1, 0.0, f64::MAX, Inclusive);
        assert!(node_pair_qualifies(&e, ta.root(), tb.root(), &fa, &fb));
    }

    #[test]
    fn intersecting_relation_needs_overlapping_mbrs() {
        let ilq = index(
            vec![
                Poi::rect("a", ["a"], r(0., 0., 1., 1.)).unwrap(),
                Poi::rect("b", ["b"], r(5., 5., 6., 6.)).unwrap(),
            ],
            r(0., 0., 8., 8.),
            1,
        );
        let (ta, tb) = (ilq.tree("a").unwrap(), ilq.tree("b").unwrap());
        let (fa, fb) = (Frontier::at_level(ta, 0), Frontier::at_level(tb, 0));
        let touches = PatternEdge::qualitative(0, 1, TopoPredicate::Touches);
        assert!(!node_pair_qualifies(&touches, ta.root(), tb.root(), &fa, &fb));
        let disjoint = PatternEdge::qualitative(0, 1, TopoPredicate::Disjoint);
        assert!(node_pair_qualifies(&disjoint, ta.root(), tb.root(), &fa, &fb));
    }

    #[test]
    fn frontier_node_close_enough_excludes() {
        // b' = [0.4,0.5]² against b_from = [0,1]²: the 16 corner pairs peak at
        // (1,1)–(0.4,0.4) = 0.6·√2 ≈ 0.849 < l = 1.
        let near = r(0.4, 0.4, 0.5, 0.5);
        let corner_max = r(0., 0., 1., 1.)
            .corners()
            .iter()
            .flat_map(|a| near.corners().into_iter().map(move |b| a.distance(&b)))
            .fold(0.0, f64::max);
        assert!((corner_max - 0.6 * 2f64.sqrt()).abs() < 1e-12 && corner_max < 1.0);

        let ilq = index(
            vec![
                Poi::rect("from", ["a"], r(0., 0., 1., 1.)).unwrap(),
                Poi::rect("near", ["b"], near).unwrap(),
                Poi::point("far", ["b"], p(3., 3.)).unwrap(),
            ],
            r(0., 0., 4., 4.),
            1,
        );
        let (ta, tb) = (ilq.tree("a").unwrap(), ilq.tree("b").unwrap());
        let (fa, fb) = (Frontier::at_level(ta, 1), Frontier::at_level(tb, 1));
        assert_eq!(fb.nodes().len(), 2);
        let e = PatternEdge::distance(0, 1, 1.0, 10.0, Forward);
        for &to in fb.nodes() {
            assert!(!node_pair_qualifies(&e, ta.root(), to, &fa, &fb));
        }
        // the same pair is fine without the exclusion sign
        let far = tb.locate_leaf(&p(3., 3.));
        let inclusive = PatternEdge::distance(0, 1, 1.0, 10.0, Inclusive);
        assert!(node_pair_qualifies(&inclusive, ta.root(), far, &fa, &fb));
    }

    #[test]
    fn sole_poi_carrying_both_keywords_is_not_its_own_excluder() {
        // One POI tagged both school and hospital: its hospital node sits at
        // distance zero from its school node, but it cannot exclude itself.
        let ilq = index(
            vec![
                Poi::point("both", ["school", "hospital"], p(0.1, 0.1)).unwrap(),
                Poi::point("h", ["hospital"], p(0.9, 0.9)).unwrap(),
            ],
            r(0., 0., 1., 1.),
            1,
        );
        let pattern = SpatialPattern::new(
            &["school", "hospital"],
            vec![PatternEdge::distance(0, 1, 0.5, 2.0, Forward)],
        )
        .unwrap();
        let out = qqespm_query(&ilq, &pattern);
        assert_eq!(out.matches.len(), 1);
        assert_eq!(out.matches[0].ids(ilq.pois()), ["both", "h"]);
    }

    #[test]
    fn empty_previous_level_stays_empty() {
        let ilq = index(vec![Poi::point("a", ["a"], p(0.1, 0.1)).unwrap()], r(0., 0., 1., 1.), 1);
        let t = ilq.tree("a").unwrap();
        let f = Frontier::at_level(t, 1);
        let e = PatternEdge::distance(0, 1, 0.0, 1.0, Inclusive);
        assert!(compute_level_qqn(&e, 0, &[], &f, &f).is_empty());
    }

    #[test]
    fn leaf_trees_persist_across_levels() {
        let ilq = index(
            vec![
                Poi::point("a", ["a"], p(0.1, 0.1)).unwrap(),
                Poi::point("b", ["b"], p(0.2, 0.1)).unwrap(),
            ],
            r(0., 0., 1., 1.),
            4,
        );
        let (ta, tb) = (ilq.tree("a").unwrap(), ilq.tree("b").unwrap());
        let e = PatternEdge::distance(0, 1, 0.0, 1.0, Inclusive);
        let root = [QqnMatch {
            edge: 0,
            from: NodeId::ROOT,
            to: NodeId::ROOT,
        }];
        let l1 = compute_level_qqn(&e, 0, &root, &Frontier::at_level(ta, 1), &Frontier::at_level(tb, 1));
        assert_eq!(l1, root);
    }

    #[test]
    fn qqe_examples() {
        let region = r(-1., -1., 1., 1.);
        let s1 = Poi::point("s1", ["school"], p(0., 0.)).unwrap();
        let h1 = Poi::point("h1", ["hospital"], p(0.5, 0.)).unwrap();
        let h2 = Poi::point("h2", ["hospital"], p(0.1, 0.)).unwrap();
        let pattern = |sign| {
            SpatialPattern::new(&["school", "hospital"], vec![PatternEdge::distance(0, 1, 0.2, 1.0, sign)]).unwrap()
        };

        let ilq = index(vec![s1.clone(), h1.clone()], region, 1);
        let out = qqespm_query(&ilq, &pattern(Inclusive));
        assert_eq!(out.matches.iter().map(|t| t.ids(ilq.pois())).collect::<Vec<_>>(), [["s1", "h1"]]);

        let ilq = index(vec![s1, h1, h2], region, 1);
        assert_eq!(qqespm_query(&ilq, &pattern(Inclusive)).matches.len(), 1);
        assert!(qqespm_query(&ilq, &pattern(Forward)).matches.is_empty());
    }

    #[test]
    fn covered_by_gym_in_building() {
        let ilq = index(
            vec![
                Poi::rect("building", ["building"], r(0., 0., 10., 10.)).unwrap(),
                Poi::rect("gym", ["gym"], r(2., 2., 3., 3.)).unwrap(),
            ],
            r(0., 0., 10., 10.),
            1,
        );
        let pattern = SpatialPattern::new(
            &["building", "gym"],
            vec![PatternEdge::qualitative(1, 0, TopoPredicate::CoveredBy)],
        )
        .unwrap();
        let out = qqespm_query(&ilq, &pattern);
        assert_eq!(out.matches.len(), 1);
        assert_eq!(out.matches[0].ids(ilq.pois()), ["building", "gym"]);
    }

    fn inclusive(from: usize, to: usize) -> PatternEdge {
        PatternEdge::distance(from, to, 0.0, 1.0, Inclusive)
    }

    #[test]
    fn skip_edge_selection() {
        let triangle = SpatialPattern::new(&["a", "b", "c"], vec![inclusive(0, 1), inclusive(1, 2), inclusive(0, 2)]).unwrap();
        assert_eq!(identify_skip_edges(&triangle), vec![2]);
        let path = SpatialPattern::new(&["a", "b", "c"], vec![inclusive(0, 1), inclusive(1, 2)]).unwrap();
        assert!(identify_skip_edges(&path).is_empty());
        let exclusive = SpatialPattern::new(
            &["a", "b", "c"],
            vec![
                PatternEdge::distance(0, 1, 0.0, 1.0, Forward),
                inclusive(1, 2).with_relation(TopoPredicate::Disjoint),
                PatternEdge::qualitative(0, 2, TopoPredicate::Touches),
            ],
        )
        .unwrap();
        assert!(identify_skip_edges(&exclusive).is_empty());
    }

    #[test]
    fn skip_selection_matches_subset_enumeration_on_triangle() {
        // Every subset S of the triangle's edges whose complement connects all
        // three vertices has exactly one element.
        let edges = [inclusive(0, 1), inclusive(1, 2), inclusive(0, 2)];
        let mut sizes = HashSet::new();
        for mask in 0u8..8 {
            let dropped: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
            if connected_without(3, &edges, &dropped) {
                sizes.insert(mask.count_ones());
            }
        }
        let max_valid = *sizes.iter().max().unwrap();
        assert_eq!(max_valid, 1);
        for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert_eq!(select_skip_edges(3, &edges, &order).len(), max_valid as usize);
        }
    }

    #[test]
    fn join_single_edge_and_disagreeing_vertex() {
        let ilq = index(
            vec![
                Poi::point("a", ["a"], p(0.1, 0.1)).unwrap(),
                Poi::point("b", ["b"], p(0.2, 0.1)).unwrap(),
                Poi::point("c", ["c"], p(0.3, 0.1)).unwrap(),
                Poi::point("b2", ["b"], p(0.4, 0.1)).unwrap(),
            ],
            r(0., 0., 1., 1.),
            1,
        );
        let edges = vec![inclusive(0, 1), inclusive(1, 2)];
        let e0 = vec![QqeMatch { edge: 0, from: PoiIdx(0), to: PoiIdx(1) }];
        let single = join_qq_e_matches(&[Some(e0.clone())], &[], &edges[..1], 2, &ilq, None);
        assert_eq!(single, vec![MatchTuple { pois: vec![PoiIdx(0), PoiIdx(1)] }]);
        let e1 = vec![QqeMatch { edge: 1, from: PoiIdx(3), to: PoiIdx(2) }];
        assert!(join_qq_e_matches(&[Some(e0), Some(e1)], &[], &edges, 3, &ilq, None).is_empty());
    }

    #[test]
    fn missing_keyword_gives_empty_result_with_note() {
        let ilq = index(vec![Poi::point("a", ["a"], p(0.1, 0.1)).unwrap()], r(0., 0., 1., 1.), 1);
        let pattern = SpatialPattern::new(&["a", "zoo"], vec![inclusive(0, 1)]).unwrap();
        let out = qqespm_query(&ilq, &pattern);
        assert!(out.matches.is_empty());
        assert!(out.notes[0].contains("zoo"));
    }

    #[test]
    fn single_vertex_pattern_lists_every_poi() {
        let ilq = index(
            (0..3)
                .map(|i| Poi::point(format!("s{i}"), ["school"], p(0.1 * i as f64, 0.5)).unwrap())
                .collect(),
            r(0., 0., 1., 1.),
            1,
        );
        let pattern = SpatialPattern::new(&["school"], vec![]).unwrap();
        assert_eq!(qqespm_query(&ilq, &pattern).matches.len(), 3);
    }

    #[test]
    fn same_keyword_vertices_bind_distinct_pois() {
        let ilq = index(
            vec![
                Poi::point("s1", ["school"], p(0.1, 0.1)).unwrap(),
                Poi::point("s2", ["school"], p(0.15, 0.1)).unwrap(),
            ],
            r(0., 0., 1., 1.),
            1,
        );
        let pattern = SpatialPattern::new(&["school", "school"], vec![inclusive(0, 1)]).unwrap();
        let got: Vec<_> = qqespm_query(&ilq, &pattern).matches.iter().map(|t| t.ids(ilq.pois())).collect();
        assert_eq!(got, [["s1", "s2"], ["s2", "s1"]]);
    }
}
