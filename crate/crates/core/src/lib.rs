//! Spatial pattern matching with distance and connectivity constraints.
//!
//! A dataset of keyword-tagged POIs is indexed by an [`index::IlQuadtree`];
//! a [`pattern::SpatialPattern`] describes the wanted arrangement; and
//! [`engine::qqespm_query`] returns every tuple of POIs matching it.
//! [`baseline`] holds the filter-at-the-end solver and a brute-force oracle.

pub mod baseline;
pub mod engine;
pub mod geometry;
pub mod index;
pub mod pattern;

pub use baseline::{brute_force_query, qq_simple_query, OracleError};
pub use engine::{qqespm_query, qqespm_query_with, MatchTuple, QueryOptions, QueryOutcome};
pub use geometry::{Geometry, Point, Rect, TopoPredicate};
pub use index::{build_ilq, IlQuadtree, IndexConfig, Poi, PoiIdx};
pub use pattern::{parse_pattern, ExclusionSign, PatternEdge, SpatialPattern};
