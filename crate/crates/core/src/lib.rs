//! Detection and tracking of flying objects in streams of organized LiDAR
//! scans.
//!
//! The library builds a voxel occupancy map with a multi-state exponential
//! update rule, classifies per-scan point clusters into background, flying
//! and unknown, carves observed free space by exact ray traversal, removes
//! detached occupied residue left behind by departing objects, and tracks
//! detections with a constant-acceleration Kalman filter over a buffer of
//! recent scans. A separate analysis module propagates pose and range noise
//! to per-point covariances and to hit/detection probabilities.
//!
//! Modules:
//! - [`geometry`]: poses (intrinsic z-y-x angles), voxel indexing, grids.
//! - [`scan`]: organized range scans and their world-frame projection.
//! - [`occupancy`]: the multi-state map and a log-odds baseline.
//! - [`raycast`]: segment extraction and exact per-voxel lengths.
//! - [`detector`]: clustering, cluster classification, detections.
//! - [`bg_removal`]: demotion of separated occupied clusters.
//! - [`tracker`]: Kalman tracks with scan-buffer delay compensation.
//! - [`uncertainty`]: noise propagation and probability analysis.
//! - [`records`]: CSV / JSON-line output records.

pub mod bg_removal;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod occupancy;
pub mod raycast;
pub mod records;
pub mod scan;
pub mod tracker;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{GridSpec, Point3, Pose, Vec3, VoxelIndex};
pub use occupancy::{OccupancyGrid, VoxelState, WeightedUpdate};
