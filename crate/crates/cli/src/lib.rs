//! Ingestion, workload generation, benchmarking and reporting around the
//! `qqspm` engine.

pub mod alloc;
pub mod app;
pub mod bench;
pub mod ingest;
pub mod report;
pub mod stats;
pub mod synth;
pub mod workload;

#[global_allocator]
static GLOBAL: alloc::CountingAlloc = alloc::CountingAlloc;
