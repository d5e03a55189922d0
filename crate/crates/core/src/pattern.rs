//! Spatial pattern graphs: keyword vertices joined by edges carrying a
//! distance interval with an exclusion sign, a connectivity predicate, or
//! both.
//!
//! Patterns are exchanged as JSON:
//!
//! ```json
//! { "vertices": [ {"id": 0, "keyword": "school"}, {"id": 1, "keyword": "park"} ],
//!   "edges": [ {"from": 0, "to": 1, "lij": 0.001, "uij": 0.02, "sign": "->",
//!               "relation": "touches"} ] }
//! ```

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geometry::TopoPredicate;
use crate::index::normalize_keyword;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("malformed pattern document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("pattern has no vertices")]
    NoVertices,
    #[error("vertices[{index}]: id must be {index}, found {found}")]
    VertexId { index: usize, found: usize },
    #[error("vertices[{vertex}]: keyword is empty")]
    EmptyKeyword { vertex: usize },
    #[error("edges[{edge}]: unknown relation `{name}`")]
    UnknownRelation { edge: usize, name: String },
    #[error("edges[{edge}]: unknown sign `{sign}` (expected ->, <-, <-> or -)")]
    UnknownSign { edge: usize, sign: String },
    #[error("edges[{edge}]: vertex {vid} does not exist")]
    VertexOutOfRange { edge: usize, vid: usize },
    #[error("edges[{edge}]: self-loop on vertex {vid}")]
    SelfLoop { edge: usize, vid: usize },
    #[error("edges[{edge}]: lij and uij must be given together")]
    HalfInterval { edge: usize },
    #[error("edges[{edge}]: invalid interval [{lower}, {upper}]")]
    BadInterval { edge: usize, lower: f64, upper: f64 },
    #[error("edges[{edge}]: needs a distance interval or a relation")]
    Unconstrained { edge: usize },
    #[error("edges[{edge}]: an exclusion sign requires a distance interval")]
    SignWithoutInterval { edge: usize },
    #[error("edges[{edge}]: duplicates edges[{other}] between the same vertices")]
    DuplicateEdge { edge: usize, other: usize },
    #[error("pattern is disconnected: vertex {vertex} is unreachable from vertex 0")]
    Disconnected { vertex: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternVertex {
    pub vid: usize,
    pub keyword: String,
}

/// Which side of an edge forbids nearby POIs of the other side's keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExclusionSign {
    /// `->`: no POI with the `to` keyword may lie closer than `l` to the `from` POI.
    Forward,
    /// `<-`: no POI with the `from` keyword may lie closer than `l` to the `to` POI.
    Backward,
    /// `<->`: both of the above.
    Mutual,
    /// `-`: no exclusion.
    Inclusive,
}

impl ExclusionSign {
    pub const ALL: [ExclusionSign; 4] = [
        ExclusionSign::Forward,
        ExclusionSign::Backward,
        ExclusionSign::Mutual,
        ExclusionSign::Inclusive,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            ExclusionSign::Forward => "->",
            ExclusionSign::Backward => "<-",
            ExclusionSign::Mutual => "<->",
            ExclusionSign::Inclusive => "-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ExclusionSign::ALL.into_iter().find(|sign| sign.symbol() == s)
    }

    /// The `from` POI excludes `to`-keyword POIs.
    pub fn from_excludes(self) -> bool {
        matches!(self, ExclusionSign::Forward | ExclusionSign::Mutual)
    }

    /// The `to` POI excludes `from`-keyword POIs.
    pub fn to_excludes(self) -> bool {
        matches!(self, ExclusionSign::Backward | ExclusionSign::Mutual)
    }
}

impl fmt::Display for ExclusionSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Distance bounds an edge imposes; `upper == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveInterval {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl EffectiveInterval {
    pub fn admits(&self, distance: f64) -> bool {
        self.lower <= distance && self.upper.is_none_or(|u| distance <= u)
    }

    pub fn below_upper(&self, distance: f64) -> bool {
        self.upper.is_none_or(|u| distance <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeClass {
    pub quantitative: bool,
    pub qualitative: bool,
    pub exclusive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternEdge {
    pub from: usize,
    pub to: usize,
    pub interval: Option<DistanceInterval>,
    pub sign: ExclusionSign,
    /// Evaluated as `relation(geometry(from), geometry(to))`.
    pub relation: Option<TopoPredicate>,
}

impl PatternEdge {
    pub fn distance(from: usize, to: usize, lower: f64, upper: f64, sign: ExclusionSign) -> Self {
        Self {
            from,
            to,
            interval: Some(DistanceInterval { lower, upper }),
            sign,
            relation: None,
        }
    }

    pub fn qualitative(from: usize, to: usize, relation: TopoPredicate) -> Self {
        Self {
            from,
            to,
            interval: None,
            sign: ExclusionSign::Inclusive,
            relation: Some(relation),
        }
    }

    pub fn with_relation(mut self, relation: TopoPredicate) -> Self {
        self.relation = Some(relation);
        self
    }

    /// The edge's interval, or `[0, ∞)` for qualitative-only edges.
    pub fn effective_interval(&self) -> EffectiveInterval {
        match self.interval {
            Some(DistanceInterval { lower, upper }) => EffectiveInterval {
                lower,
                upper: Some(upper),
            },
            None => EffectiveInterval {
                lower: 0.0,
                upper: None,
            },
        }
    }

    pub fn classify(&self) -> EdgeClass {
        let quantitative = self.interval.is_some();
        EdgeClass {
            quantitative,
            qualitative: self.relation.is_some(),
            exclusive: quantitative && self.sign != ExclusionSign::Inclusive,
        }
    }

    pub fn touches_vertex(&self, vid: usize) -> bool {
        self.from == vid || self.to == vid
    }

    fn validate(&self, index: usize, n_vertices: usize) -> Result<(), PatternError> {
        for vid in [self.from, self.to] {
            if vid >= n_vertices {
                return Err(PatternError::VertexOutOfRange { edge: index, vid });
            }
        }
        if self.from == self.to {
            return Err(PatternError::SelfLoop {
                edge: index,
                vid: self.from,
            });
        }
        match self.interval {
            Some(DistanceInterval { lower, upper }) => {
                if !(lower.is_finite() && upper.is_finite() && 0.0 <= lower && lower <= upper) {
                    return Err(PatternError::BadInterval {
                        edge: index,
                        lower,
                        upper,
                    });
                }
            }
            None => {
                if self.relation.is_none() {
                    return Err(PatternError::Unconstrained { edge: index });
                }
                if self.sign != ExclusionSign::Inclusive {
                    return Err(PatternError::SignWithoutInterval { edge: index });
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`PatternEdge::effective_interval`].
pub fn effective_interval(edge: &PatternEdge) -> EffectiveInterval {
    edge.effective_interval()
}

pub fn classify_edge(edge: &PatternEdge) -> EdgeClass {
    edge.classify()
}

/// A validated, connected pattern graph. Vertex `i` binds position `i` of
/// every match tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPattern {
    vertices: Vec<PatternVertex>,
    edges: Vec<PatternEdge>,
}

impl SpatialPattern {
    /// Builds a pattern from vertex keywords (in vid order) and edges.
    pub fn new<S: AsRef<str>>(keywords: &[S], edges: Vec<PatternEdge>) -> Result<Self, PatternError> {
        let vertices = keywords
            .iter()
            .enumerate()
            .map(|(vid, k)| PatternVertex {
                vid,
                keyword: normalize_keyword(k.as_ref()),
            })
            .collect();
        Self::from_parts(vertices, edges)
    }

    fn from_parts(vertices: Vec<PatternVertex>, edges: Vec<PatternEdge>) -> Result<Self, PatternError> {
        if vertices.is_empty() {
            return Err(PatternError::NoVertices);
        }
        for (index, v) in vertices.iter().enumerate() {
            if v.vid != index {
                return Err(PatternError::VertexId { index, found: v.vid });
            }
            if v.keyword.is_empty() {
                return Err(PatternError::EmptyKeyword { vertex: index });
            }
        }
        let mut pairs = HashMap::new();
        for (index, e) in edges.iter().enumerate() {
            e.validate(index, vertices.len())?;
            let key = (e.from.min(e.to), e.from.max(e.to));
            if let Some(&other) = pairs.get(&key) {
                return Err(PatternError::DuplicateEdge { edge: index, other });
            }
            pairs.insert(key, index);
        }
        let pattern = Self { vertices, edges };
        if let Some(vertex) = pattern.first_unreachable(|_| true) {
            return Err(PatternError::Disconnected { vertex });
        }
        Ok(pattern)
    }

    pub fn vertices(&self) -> &[PatternVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[PatternEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn keyword(&self, vid: usize) -> &str {
        &self.vertices[vid].keyword
    }

    /// Some vertex not reachable from vertex 0 using only edges accepted by
    /// `keep`, or `None` when the kept edges connect every vertex.
    pub fn first_unreachable(&self, keep: impl Fn(usize) -> bool) -> Option<usize> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for (i, e) in self.edges.iter().enumerate() {
                if !keep(i) || !e.touches_vertex(v) {
                    continue;
                }
                let w = if e.from == v { e.to } else { e.from };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    /// The same pattern with every connectivity predicate removed.
    pub fn without_relations(&self) -> Result<Self, PatternError> {
        let edges = self
            .edges
            .iter()
            .map(|e| PatternEdge {
                relation: None,
                ..e.clone()
            })
            .collect();
        Self::from_parts(self.vertices.clone(), edges)
    }

    pub fn to_json(&self) -> Value {
        let vertices: Vec<Value> = self
            .vertices
            .iter()
            .map(|v| json!({"id": v.vid, "keyword": v.keyword}))
            .collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                let mut m = Map::new();
                m.insert("from".into(), e.from.into());
                m.insert("to".into(), e.to.into());
                if let Some(iv) = e.interval {
                    m.insert("lij".into(), iv.lower.into());
                    m.insert("uij".into(), iv.upper.into());
                    m.insert("sign".into(), e.sign.symbol().into());
                }
                if let Some(rel) = e.relation {
                    m.insert("relation".into(), rel.name().into());
                }
                Value::Object(m)
            })
            .collect();
        json!({"vertices": vertices, "edges": edges})
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("pattern serializes")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    vertices: Vec<RawVertex>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVertex {
    id: usize,
    keyword: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: usize,
    to: usize,
    lij: Option<f64>,
    uij: Option<f64>,
    sign: Option<String>,
    relation: Option<String>,
}

/// Parses and validates a pattern document.
pub fn parse_pattern(text: &str) -> Result<SpatialPattern, PatternError> {
    let raw: RawPattern = serde_json::from_str(text)?;
    from_raw(raw)
}

pub fn pattern_from_value(value: Value) -> Result<SpatialPattern, PatternError> {
    let raw: RawPattern = serde_json::from_value(value)?;
    from_raw(raw)
}

fn from_raw(raw: RawPattern) -> Result<SpatialPattern, PatternError> {
    let vertices = raw
        .vertices
        .into_iter()
        .map(|v| PatternVertex {
            vid: v.id,
            keyword: normalize_keyword(&v.keyword),
        })
        .collect();
    let edges = raw
        .edges
        .into_iter()
        .enumerate()
        .map(|(index, e)| {
            let interval = match (e.lij, e.uij) {
                (Some(lower), Some(upper)) => Some(DistanceInterval { lower, upper }),
                (None, None) => None,
                _ => return Err(PatternError::HalfInterval { edge: index }),
            };
            let sign = match e.sign {
                Some(s) => ExclusionSign::parse(s.trim())
                    .ok_or(PatternError::UnknownSign { edge: index, sign: s })?,
                None => ExclusionSign::Inclusive,
            };
            let relation = e
                .relation
                .map(|name| {
                    name.trim()
                        .parse::<TopoPredicate>()
                        .map_err(|_| PatternError::UnknownRelation { edge: index, name })
                })
                .transpose()?;
            Ok(PatternEdge {
                from: e.from,
                to: e.to,
                interval,
                sign,
                relation,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpatialPattern::from_parts(vertices, edges)
}
