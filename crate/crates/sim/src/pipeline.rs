//! The per-tick processing pipeline and the scenario runner.
//!
//! Each tick: transform the scan to the world frame, run the cluster
//! classifier and the raycaster concurrently against the same read-only
//! map snapshot, consolidate their per-voxel evidence into one
//! conflict-free batch, apply it, then demote detached occupied clusters
//! on the updated map, and finally feed the tracker (serialized).

use crate::config::{GhostConfig, ScenarioConfig};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::scangen::{generate_scan, NoiseModel};
use crate::scene::{pose_at, position_at, prior_regions, Scene};
use aerovox_core::detector::{self, ClusterLabel, Detection, DetectorParams};
use aerovox_core::occupancy::{OccupancyGrid, WeightedUpdate};
use aerovox_core::records::TrackRecord;
use aerovox_core::scan::{transform_scan, OrganizedScan};
use aerovox_core::tracker::Tracker;
use aerovox_core::{bg_removal, raycast, Point3};
use anyhow::{ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

/// Wall time per stage in milliseconds. `generate` is the simulated sensor,
/// not part of the processing pipeline; `pipeline_ms` sums the rest.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimes {
    pub generate_ms: f64,
    pub transform_ms: f64,
    pub detect_ms: f64,
    pub raycast_ms: f64,
    pub bg_removal_ms: f64,
    pub apply_ms: f64,
    pub track_ms: f64,
}

impl StageTimes {
    pub fn pipeline_ms(&self) -> f64 {
        self.transform_ms
            + self.detect_ms
            + self.raycast_ms
            + self.bg_removal_ms
            + self.apply_ms
            + self.track_ms
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// What one tick produced, besides map and tracker mutations.
#[derive(Debug, Clone)]
pub struct TickOutput {
    /// Detections fed to the tracker this tick (injected ones included).
    pub detections: Vec<Detection>,
    pub out_of_grid_points: usize,
    /// Cluster counts by label: background, flying object, unknown.
    pub cluster_counts: [usize; 3],
    pub times: StageTimes,
}

pub struct Pipeline {
    grid: OccupancyGrid,
    tracker: Tracker,
    detector_params: DetectorParams,
    d_sep: f64,
    n_conf_min: usize,
    d_max: f64,
    raycast_chunks: usize,
    // Per-tick consolidation scratch: flat voxel index -> already claimed
    // by a stronger point class this tick.
    claimed: Vec<bool>,
}

impl Pipeline {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let scene = Scene::from_config(cfg);
        let grid = OccupancyGrid::init_from_prior(
            cfg.grid_spec()?,
            cfg.thresholds()?,
            cfg.coefficients()?,
            &prior_regions(cfg, &scene),
        )?;
        let claimed = vec![false; grid.spec().voxel_count()];
        Ok(Self {
            grid,
            tracker: Tracker::new(cfg.tracker_config())?,
            detector_params: cfg.detector_params(),
            d_sep: cfg.d_sep(),
            n_conf_min: cfg.bg_removal.n_conf_min,
            d_max: cfg.pipeline.d_max,
            raycast_chunks: cfg.pipeline.raycast_chunks,
            claimed,
        })
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Processes one scan. `injected` detections are appended to the
    /// detector's output before the tracker sees them.
    pub fn tick(&mut self, scan: &OrganizedScan, injected: &[Detection]) -> Result<TickOutput> {
        let start = Instant::now();
        let transformed = transform_scan(scan);
        let points: Vec<Point3> = transformed.world_points().collect();
        let transform_ms = ms_since(start);

        let grid = &self.grid;
        let params = &self.detector_params;
        let timestamp = scan.timestamp;
        let (detect_out, ray_out) = rayon::join(
            || {
                let t = Instant::now();
                let r = detector::process_scan(&points, timestamp, grid, params);
                (r, ms_since(t))
            },
            || {
                let t = Instant::now();
                let r = raycast::build_rays(scan, self.d_max).map(|segments| {
                    raycast::accumulate_chunked(&segments, grid.spec(), self.raycast_chunks)
                });
                (r, ms_since(t))
            },
        );
        let (classification, detect_ms) = detect_out;
        let classification = classification?;
        let (intersections, raycast_ms) = ray_out;
        let intersections = intersections?;

        // Consolidate the snapshot stages' evidence into one conflict-free
        // batch. A voxel can appear in several point classes when clusters
        // share it, and in the intersection set when a ray crosses it on
        // the way to a return elsewhere; the strongest class wins:
        // background points, then detected points, then unknown points,
        // then carved free space.
        let apply_start = Instant::now();
        let coefficients = *self.grid.coefficients();
        let spec = self.grid.spec();
        self.claimed.fill(false);
        let claimed = &mut self.claimed;
        let point_voxels = classification.background.len()
            + classification.detected.len()
            + classification.unknown.len();
        let mut batch: Vec<WeightedUpdate> =
            Vec::with_capacity(point_voxels + intersections.len());
        for (&voxel, &count) in &classification.background {
            claimed[spec.flat(voxel)] = true;
            batch.push(WeightedUpdate {
                voxel,
                coefficient: coefficients.occupied,
                weight: count,
            });
        }
        for &voxel in &classification.detected {
            let f = spec.flat(voxel);
            if !claimed[f] {
                claimed[f] = true;
                batch.push(WeightedUpdate {
                    voxel,
                    coefficient: coefficients.unknown,
                    weight: f64::INFINITY,
                });
            }
        }
        for (&voxel, &count) in &classification.unknown {
            let f = spec.flat(voxel);
            if !claimed[f] {
                claimed[f] = true;
                batch.push(WeightedUpdate {
                    voxel,
                    coefficient: coefficients.unknown,
                    weight: count,
                });
            }
        }
        for &(voxel, length) in intersections.entries() {
            if !claimed[spec.flat(voxel)] {
                batch.push(WeightedUpdate {
                    voxel,
                    coefficient: coefficients.free,
                    weight: length,
                });
            }
        }
        self.grid.apply_updates(&batch)?;
        let apply_ms = ms_since(apply_start);

        // Separation demotions run on the just-updated map so they hit the
        // very voxels this scan's background points re-asserted. Computing
        // them from the pre-update snapshot instead lets a slowly rising
        // object leapfrog the demotion forever: each tick it refreshes the
        // half of its voxels the previous demotion knocked out, and the
        // mixed-phase blob keeps reading as occupied background.
        let bg_start = Instant::now();
        let separation = bg_removal::separation_updates(&self.grid, self.d_sep, self.n_conf_min)?;
        self.grid.apply_updates(&separation)?;
        let bg_removal_ms = ms_since(bg_start);

        let track_start = Instant::now();
        let occupied = self.grid.occupied_centers();
        self.tracker.new_point_cloud(Arc::new(points), timestamp, &occupied)?;
        let mut detections = classification.detections.clone();
        detections.extend_from_slice(injected);
        self.tracker.new_detections(&detections, &occupied)?;
        let track_ms = ms_since(track_start);

        let mut cluster_counts = [0usize; 3];
        for c in &classification.clusters {
            let slot = match c.label {
                ClusterLabel::Background => 0,
                ClusterLabel::FlyingObject => 1,
                ClusterLabel::Unknown => 2,
            };
            cluster_counts[slot] += 1;
        }

        Ok(TickOutput {
            detections,
            out_of_grid_points: classification.out_of_grid_points,
            cluster_counts,
            times: StageTimes {
                generate_ms: 0.0,
                transform_ms,
                detect_ms,
                raycast_ms,
                bg_removal_ms,
                apply_ms,
                track_ms,
            },
        })
    }
}

/// Everything recorded about one tick, for metrics and the CSV log.
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub tick: usize,
    pub t: f64,
    pub observer: Point3,
    pub gt_target: Option<Point3>,
    pub detections: Vec<Detection>,
    pub tracks: Vec<TrackRecord>,
    pub out_of_grid_points: usize,
    pub cluster_counts: [usize; 3],
    pub times: StageTimes,
}

fn ghost_for_tick(ghost: &Option<GhostConfig>, tick: usize, t: f64) -> Vec<Detection> {
    match ghost {
        Some(g) if g.inject_at_tick == tick => vec![Detection {
            position: Point3::from(g.position),
            point_count: 1,
            timestamp: t,
        }],
        _ => Vec::new(),
    }
}

/// Runs a configured scenario end to end. When `dump_scans` is set, every
/// rendered scan is also serialized there for later replay.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    dump_scans: Option<&Path>,
) -> Result<(Vec<TickRecord>, MetricsReport)> {
    cfg.validate()?;
    let layout = cfg.sensor_layout()?;
    let directions = layout.direction_table();
    let masked = cfg.masked_table();
    let scene = Scene::from_config(cfg);
    let noise = NoiseModel::from_config(cfg);
    let mut pipeline = Pipeline::from_config(cfg)?;
    let tracker_config = cfg.tracker_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(dir) = dump_scans {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating scan dump directory {}", dir.display()))?;
    }

    let n_ticks = cfg.n_ticks();
    let dt = cfg.tick_dt();
    let mut records = Vec::with_capacity(n_ticks);
    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        let observer = pose_at(&cfg.observer.trajectory, t)?;
        let target_pos = match &cfg.target {
            Some(tc) => Some(position_at(&tc.trajectory, t)?),
            None => None,
        };
        let target = cfg.target.as_ref().zip(target_pos).map(|(tc, p)| (&tc.shape, p));

        let gen_start = Instant::now();
        let scan = generate_scan(
            &scene,
            target,
            &directions,
            &masked,
            cfg.sensor.max_range_m,
            &observer,
            &noise,
            &mut rng,
            cfg.sensor.rows,
            cfg.sensor.cols,
            t,
        )?;
        let generate_ms = ms_since(gen_start);
        if let Some(dir) = dump_scans {
            let path = dir.join(format!("{:06}.scan", tick));
            let mut f = std::io::BufWriter::new(
                std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?,
            );
            scan.write_binary(&mut f)?;
        }

        let injected = ghost_for_tick(&cfg.ghost, tick, t);
        let mut out = pipeline.tick(&scan, &injected)?;
        out.times.generate_ms = generate_ms;

        let tracks = pipeline
            .tracker()
            .tracks()
            .iter()
            .map(|track| TrackRecord::from_track(track, &tracker_config, t))
            .collect();
        records.push(TickRecord {
            tick,
            t,
            observer: Point3::from(observer.translation),
            gt_target: target_pos,
            detections: out.detections,
            tracks,
            out_of_grid_points: out.out_of_grid_points,
            cluster_counts: out.cluster_counts,
            times: out.times,
        });
    }

    let report = compute_metrics(&records, &cfg.metrics);
    Ok((records, report))
}

/// Re-runs the pipeline over serialized scan fixtures (sorted by file
/// name). Ground truth is unavailable, so the report carries counts only.
pub fn replay_scenario(
    cfg: &ScenarioConfig,
    scans_dir: &Path,
) -> Result<(Vec<TickRecord>, MetricsReport)> {
    cfg.validate()?;
    let mut paths: Vec<_> = std::fs::read_dir(scans_dir)
        .with_context(|| format!("reading scan directory {}", scans_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "scan"))
        .collect();
    paths.sort();
    ensure!(!paths.is_empty(), "no .scan files in {}", scans_dir.display());

    let mut pipeline = Pipeline::from_config(cfg)?;
    let tracker_config = cfg.tracker_config();
    let mut records = Vec::with_capacity(paths.len());
    for (tick, path) in paths.iter().enumerate() {
        let mut f = std::io::BufReader::new(
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
        );
        let scan = OrganizedScan::read_binary(&mut f)
            .with_context(|| format!("decoding {}", path.display()))?;
        let out = pipeline.tick(&scan, &[])?;
        let tracks = pipeline
            .tracker()
            .tracks()
            .iter()
            .map(|track| TrackRecord::from_track(track, &tracker_config, scan.timestamp))
            .collect();
        records.push(TickRecord {
            tick,
            t: scan.timestamp,
            observer: Point3::from(scan.sensor_pose.translation),
            gt_target: None,
            detections: out.detections,
            tracks,
            out_of_grid_points: out.out_of_grid_points,
            cluster_counts: out.cluster_counts,
            times: out.times,
        });
    }
    let report = compute_metrics(&records, &cfg.metrics);
    Ok((records, report))
}
