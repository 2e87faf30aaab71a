//! Synthetic-scene simulation and benchmarking harness for the flying-object
//! detection and tracking library.
//!
//! The harness renders organized LiDAR scans against an analytic scene
//! (axis-aligned boxes, a finite ground slab, and a moving sphere or box
//! target), drives the full per-tick processing pipeline, computes
//! error/recall metrics against ground truth, and writes CSV/JSON outputs.
//! See [`config::ScenarioConfig`] for the declarative scenario schema.

pub mod config;
pub mod curves;
pub mod emit;
pub mod metrics;
pub mod pipeline;
pub mod scangen;
pub mod scene;
