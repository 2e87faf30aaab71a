//! Declarative scenario configuration: one TOML file describes the scene,
//! the trajectories, the sensor, the noise model, and every algorithm
//! parameter. All algorithm keys default to the standard parameter set, so
//! a minimal config only names the grid, the observer, and a duration.

use aerovox_core::detector::DetectorParams;
use aerovox_core::occupancy::{Coefficients, Thresholds};
use aerovox_core::scan::SensorLayout;
use aerovox_core::tracker::{RadiusMode, TrackerConfig};
use aerovox_core::GridSpec;
use anyhow::{bail, Context, Result};
use nalgebra::Vector3;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Scenario length in seconds; the tick count is `duration_s * scan_rate_hz`.
    pub duration_s: f64,
    /// Overrides the duration-derived tick count when set (also settable
    /// from the command line).
    #[serde(default)]
    pub ticks: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sensor: SensorConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub occupancy: OccupancyConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub bg_removal: BgRemovalConfig,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    pub observer: ObserverConfig,
    #[serde(default)]
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub ghost: Option<GhostConfig>,
    #[serde(default)]
    pub curves: CurvesConfig,
}

fn default_name() -> String {
    "scenario".into()
}

/// Sensor model: ray layout, rate and range per the reference spinning
/// LiDAR (128 x 1024 rays, ±45° vertical field of view, 10 Hz, 50 m).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub rows: usize,
    pub cols: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub scan_rate_hz: f64,
    pub max_range_m: f64,
    /// One-sigma range accuracy; also the default range-noise sigma.
    pub range_precision_m: f64,
    /// Rows fully masked as vehicle self-hits.
    pub masked_rows: Vec<usize>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 1024,
            elevation_min_deg: -45.0,
            elevation_max_deg: 45.0,
            scan_rate_hz: 10.0,
            max_range_m: 50.0,
            range_precision_m: 0.05,
            masked_rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// World coordinates of the grid's minimum corner.
    pub origin: [f64; 3],
    #[serde(default = "default_voxel_size")]
    pub voxel_size: f64,
    /// Voxel counts along x, y, z.
    pub dims: [u32; 3],
}

fn default_voxel_size() -> f64 {
    0.25
}

/// Classification thresholds and update coefficients of the occupancy map.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccupancyConfig {
    pub confident: f64,
    pub tentative: f64,
    pub uncertain: f64,
    pub g_occupied: f64,
    pub g_unknown: f64,
    pub g_free: f64,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        let c = Coefficients::default();
        Self {
            confident: t.confident,
            tentative: t.tentative,
            uncertain: t.uncertain,
            g_occupied: c.occupied,
            g_unknown: c.unknown,
            g_free: c.free,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub d_cluster: f64,
    pub d_close: f64,
    pub d_search: f64,
    pub min_cluster_points: usize,
    pub near_value_floor: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let p = DetectorParams::default();
        Self {
            d_cluster: p.d_cluster,
            d_close: p.d_close,
            d_search: p.d_search,
            min_cluster_points: p.min_cluster_points,
            near_value_floor: p.near_value_floor,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BgRemovalConfig {
    /// Separation distance for occupied-voxel clustering; defaults to
    /// `sqrt(3) * voxel_size` (diagonal connectivity).
    pub d_sep: Option<f64>,
    /// Clusters with fewer confident voxels than this are demoted.
    pub n_conf_min: usize,
}

impl Default for BgRemovalConfig {
    fn default() -> Self {
        Self { d_sep: None, n_conf_min: 24 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub n_buf: usize,
    pub c_r: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub d_min: f64,
    pub d_cluster: f64,
    pub z_sigma: f64,
    pub xi: [f64; 3],
    pub p0: [f64; 3],
    pub radius_mode: RadiusModeConfig,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let c = TrackerConfig::default();
        Self {
            n_buf: c.n_buf,
            c_r: c.c_r,
            r_min: c.r_min,
            r_max: c.r_max,
            d_min: c.d_min,
            d_cluster: c.d_cluster,
            z_sigma: c.z_sigma,
            xi: c.xi,
            p0: c.p0,
            radius_mode: RadiusModeConfig::CubeRoot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusModeConfig {
    CubeRoot,
    SixthRoot,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Raycast segment cap in meters (empty beams carve up to this length).
    pub d_max: f64,
    /// Contiguous segment chunks raycast in parallel; fixed so results do
    /// not depend on the thread count.
    pub raycast_chunks: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { d_max: 20.0, raycast_chunks: 8 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub ground: Option<GroundConfig>,
    #[serde(default)]
    pub boxes: Vec<BoxConfig>,
}

/// Finite ground slab. Its footprint defaults to the grid footprint so the
/// ground surface does not extend past the mapped volume.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundConfig {
    /// Elevation of the walkable top face.
    pub z_top: f64,
    pub thickness: f64,
    pub min_xy: Option<[f64; 2]>,
    pub max_xy: Option<[f64; 2]>,
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self { z_top: 0.0, thickness: 0.5, min_xy: None, max_xy: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub shape: ShapeConfig,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeConfig {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
}

/// Time-parameterized pose. Orientation angles are intrinsic z-y-x
/// (yaw, pitch, roll) in degrees; an orbit always yaws toward its center.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Trajectory {
    Static {
        position: [f64; 3],
        #[serde(default)]
        yaw_deg: f64,
        #[serde(default)]
        pitch_deg: f64,
        #[serde(default)]
        roll_deg: f64,
    },
    Orbit {
        center: [f64; 3],
        radius: f64,
        angular_rate_deg_s: f64,
        #[serde(default)]
        phase_deg: f64,
    },
    Line {
        from: [f64; 3],
        to: [f64; 3],
        start_s: f64,
        end_s: f64,
        #[serde(default)]
        yaw_deg: f64,
        #[serde(default)]
        pitch_deg: f64,
        #[serde(default)]
        roll_deg: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Per-axis translation sigma, meters.
    pub sigma_translation: [f64; 3],
    /// Roll/pitch/yaw sigma, degrees.
    pub sigma_angles_deg: [f64; 3],
    /// Range sigma, meters; defaults to `sensor.range_precision_m`.
    pub sigma_range: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            sigma_translation: [0.0; 3],
            sigma_angles_deg: [0.0; 3],
            sigma_range: None,
        }
    }
}

/// A-priori map initialization. By default the scene geometry starts
/// occupied and everything else starts confidently free, standing in for a
/// surveyed environment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub air: PriorAir,
    pub scene_occupied: bool,
    pub regions: Vec<PriorRegionConfig>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { air: PriorAir::Free, scene_occupied: true, regions: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorAir {
    Free,
    Unknown,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorRegionConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub state: PriorStateConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorStateConfig {
    Occupied,
    Free,
    PinnedOccupied,
    PinnedFree,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Detections farther than this from ground truth do not count as
    /// recall matches. Reported in the summary.
    pub match_radius_m: f64,
    pub bin_width_m: f64,
    /// Ticks excluded from metrics while the map converges.
    pub warmup_ticks: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { match_radius_m: 2.0, bin_width_m: 5.0, warmup_ticks: 0 }
    }
}

/// Injects one fabricated detection with no supporting points, for
/// exercising track suppression.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhostConfig {
    pub inject_at_tick: usize,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvesConfig {
    pub distance_start: f64,
    pub distance_stop: f64,
    pub distance_step: f64,
    /// Voxel edge for the hit-probability curve; defaults to the grid's.
    pub voxel_size: Option<f64>,
    /// Target radius for the detection-probability curve; defaults to the
    /// scenario's sphere target radius.
    pub target_radius: Option<f64>,
    pub detection_samples: usize,
    /// Sensor-frame ray direction for the hit-probability curve.
    pub ray: [f64; 3],
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self {
            distance_start: 1.0,
            distance_stop: 50.0,
            distance_step: 1.0,
            voxel_size: None,
            target_radius: None,
            detection_samples: 200_000,
            ray: [1.0, 0.0, 0.0],
        }
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .with_context(|| format!("parsing config file {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Checks every field, collecting all problems with their config paths.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        macro_rules! check {
            ($ok:expr, $path:expr, $msg:expr $(,)?) => {
                if !$ok {
                    problems.push(format!("{}: {}", $path, $msg));
                }
            };
        }

        check!(
            self.duration_s.is_finite() && self.duration_s > 0.0,
            "duration_s",
            "must be positive and finite",
        );
        if let Some(t) = self.ticks {
            check!(t >= 1, "ticks", "must be at least 1");
        }

        let s = &self.sensor;
        check!(s.rows >= 1, "sensor.rows", "must be at least 1");
        check!(s.cols >= 1, "sensor.cols", "must be at least 1");
        check!(
            s.elevation_min_deg <= s.elevation_max_deg
                && s.elevation_min_deg >= -90.0
                && s.elevation_max_deg <= 90.0,
            "sensor.elevation_min_deg/elevation_max_deg",
            "need min <= max within ±90",
        );
        check!(
            s.scan_rate_hz.is_finite() && s.scan_rate_hz > 0.0,
            "sensor.scan_rate_hz",
            "must be positive and finite",
        );
        check!(
            s.max_range_m.is_finite() && s.max_range_m > 0.0,
            "sensor.max_range_m",
            "must be positive and finite",
        );
        check!(
            s.range_precision_m.is_finite() && s.range_precision_m >= 0.0,
            "sensor.range_precision_m",
            "must be nonnegative and finite",
        );
        for r in &s.masked_rows {
            check!(*r < s.rows, "sensor.masked_rows", "row index out of range");
        }

        let g = &self.grid;
        check!(
            g.voxel_size.is_finite() && g.voxel_size > 0.0,
            "grid.voxel_size",
            "must be positive and finite",
        );
        check!(g.dims.iter().all(|&d| d >= 1), "grid.dims", "each axis needs at least 1 voxel");
        check!(g.origin.iter().all(|v| v.is_finite()), "grid.origin", "must be finite");

        if let Err(e) = Thresholds::new(self.occupancy.confident, self.occupancy.tentative, self.occupancy.uncertain)
        {
            check!(false, "occupancy.confident/tentative/uncertain", &e.to_string());
        }
        if let Err(e) =
            Coefficients::new(self.occupancy.g_occupied, self.occupancy.g_unknown, self.occupancy.g_free)
        {
            check!(false, "occupancy.g_occupied/g_unknown/g_free", &e.to_string());
        }

        if let Err(e) = self.detector_params().validate() {
            check!(false, "detector", &e.to_string());
        }
        check!(
            self.detector.min_cluster_points >= 1,
            "detector.min_cluster_points",
            "must be at least 1",
        );

        if let Some(d) = self.bg_removal.d_sep {
            check!(d.is_finite() && d > 0.0, "bg_removal.d_sep", "must be positive and finite");
        }
        check!(self.bg_removal.n_conf_min >= 1, "bg_removal.n_conf_min", "must be at least 1");

        if let Err(e) = self.tracker_config().validate() {
            check!(false, "tracker", &e.to_string());
        }

        check!(
            self.pipeline.d_max.is_finite() && self.pipeline.d_max > 0.0,
            "pipeline.d_max",
            "must be positive and finite",
        );
        check!(self.pipeline.raycast_chunks >= 1, "pipeline.raycast_chunks", "must be at least 1");

        if let Some(gr) = &self.scene.ground {
            check!(
                gr.thickness.is_finite() && gr.thickness > 0.0,
                "scene.ground.thickness",
                "must be positive and finite",
            );
            check!(gr.z_top.is_finite(), "scene.ground.z_top", "must be finite");
            if let (Some(lo), Some(hi)) = (gr.min_xy, gr.max_xy) {
                check!(
                    lo[0] < hi[0] && lo[1] < hi[1],
                    "scene.ground.min_xy/max_xy",
                    "need min < max on both axes",
                );
            }
        }
        for (i, b) in self.scene.boxes.iter().enumerate() {
            let path = format!("scene.boxes[{i}]");
            check!(
                b.min.iter().chain(&b.max).all(|v| v.is_finite())
                    && (0..3).all(|a| b.min[a] < b.max[a]),
                &path,
                "needs finite min < max per axis",
            );
        }

        validate_trajectory(&self.observer.trajectory, "observer.trajectory", &mut problems);
        if let Some(t) = &self.target {
            validate_trajectory(&t.trajectory, "target.trajectory", &mut problems);
            match &t.shape {
                ShapeConfig::Sphere { radius } => {
                    if !(radius.is_finite() && *radius > 0.0) {
                        problems
                            .push("target.shape.radius: must be positive and finite".to_string());
                    }
                }
                ShapeConfig::Box { half_extents } => {
                    if !half_extents.iter().all(|v| v.is_finite() && *v > 0.0) {
                        problems.push(
                            "target.shape.half_extents: must be positive and finite".to_string(),
                        );
                    }
                }
            }
        }

        let n = &self.noise;
        check!(
            n.sigma_translation.iter().all(|v| v.is_finite() && *v >= 0.0),
            "noise.sigma_translation",
            "must be nonnegative and finite",
        );
        check!(
            n.sigma_angles_deg.iter().all(|v| v.is_finite() && *v >= 0.0),
            "noise.sigma_angles_deg",
            "must be nonnegative and finite",
        );
        if let Some(r) = n.sigma_range {
            check!(r.is_finite() && r >= 0.0, "noise.sigma_range", "must be nonnegative and finite");
        }

        for (i, r) in self.prior.regions.iter().enumerate() {
            let path = format!("prior.regions[{i}]");
            check!(
                r.min.iter().chain(&r.max).all(|v| v.is_finite())
                    && (0..3).all(|a| r.min[a] <= r.max[a]),
                &path,
                "needs finite min <= max per axis",
            );
        }

        let m = &self.metrics;
        check!(
            m.match_radius_m.is_finite() && m.match_radius_m > 0.0,
            "metrics.match_radius_m",
            "must be positive and finite",
        );
        check!(
            m.bin_width_m.is_finite() && m.bin_width_m > 0.0,
            "metrics.bin_width_m",
            "must be positive and finite",
        );

        if let Some(gh) = &self.ghost {
            check!(
                gh.position.iter().all(|v| v.is_finite()),
                "ghost.position",
                "must be finite",
            );
        }

        let c = &self.curves;
        check!(
            c.distance_start.is_finite() && c.distance_start > 0.0,
            "curves.distance_start",
            "must be positive and finite",
        );
        check!(
            c.distance_stop.is_finite() && c.distance_stop >= c.distance_start,
            "curves.distance_stop",
            "must be at least distance_start",
        );
        check!(
            c.distance_step.is_finite() && c.distance_step > 0.0,
            "curves.distance_step",
            "must be positive and finite",
        );
        check!(c.detection_samples >= 1, "curves.detection_samples", "must be at least 1");
        check!(
            Vector3::from(c.ray).norm() > 0.0 && c.ray.iter().all(|v| v.is_finite()),
            "curves.ray",
            "must be a nonzero finite vector",
        );
        if let Some(v) = c.voxel_size {
            check!(v.is_finite() && v > 0.0, "curves.voxel_size", "must be positive and finite");
        }
        if let Some(a) = c.target_radius {
            check!(a.is_finite() && a > 0.0, "curves.target_radius", "must be positive and finite");
        }

        if problems.is_empty() {
            Ok(())
        } else {
            let mut msg = String::from("invalid config:");
            for p in &problems {
                let _ = write!(msg, "\n  {p}");
            }
            bail!(msg);
        }
    }

    pub fn sensor_layout(&self) -> Result<SensorLayout> {
        Ok(SensorLayout::new(
            self.sensor.rows,
            self.sensor.cols,
            self.sensor.elevation_min_deg.to_radians(),
            self.sensor.elevation_max_deg.to_radians(),
        )?)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(Vector3::from(self.grid.origin), self.grid.voxel_size, self.grid.dims)?)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Ok(Thresholds::new(
            self.occupancy.confident,
            self.occupancy.tentative,
            self.occupancy.uncertain,
        )?)
    }

    pub fn coefficients(&self) -> Result<Coefficients> {
        Ok(Coefficients::new(
            self.occupancy.g_occupied,
            self.occupancy.g_unknown,
            self.occupancy.g_free,
        )?)
    }

    pub fn detector_params(&self) -> DetectorParams {
        DetectorParams {
            d_cluster: self.detector.d_cluster,
            d_close: self.detector.d_close,
            d_search: self.detector.d_search,
            min_cluster_points: self.detector.min_cluster_points,
            near_value_floor: self.detector.near_value_floor,
        }
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        let t = &self.tracker;
        TrackerConfig {
            n_buf: t.n_buf,
            c_r: t.c_r,
            r_min: t.r_min,
            r_max: t.r_max,
            d_min: t.d_min,
            d_cluster: t.d_cluster,
            z_sigma: t.z_sigma,
            xi: t.xi,
            p0: t.p0,
            radius_mode: match t.radius_mode {
                RadiusModeConfig::CubeRoot => RadiusMode::CubeRootOfDeterminant,
                RadiusModeConfig::SixthRoot => RadiusMode::SixthRootOfDeterminant,
            },
        }
    }

    pub fn d_sep(&self) -> f64 {
        self.bg_removal
            .d_sep
            .unwrap_or_else(|| aerovox_core::bg_removal::default_d_sep(self.grid.voxel_size))
    }

    pub fn tick_dt(&self) -> f64 {
        1.0 / self.sensor.scan_rate_hz
    }

    pub fn n_ticks(&self) -> usize {
        self.ticks
            .unwrap_or_else(|| ((self.duration_s * self.sensor.scan_rate_hz).round() as usize).max(1))
    }

    /// Row-major per-element mask table.
    pub fn masked_table(&self) -> Vec<bool> {
        let mut m = vec![false; self.sensor.rows * self.sensor.cols];
        for &r in &self.sensor.masked_rows {
            if r < self.sensor.rows {
                m[r * self.sensor.cols..(r + 1) * self.sensor.cols].fill(true);
            }
        }
        m
    }
}

fn validate_trajectory(t: &Trajectory, path: &str, problems: &mut Vec<String>) {
    match t {
        Trajectory::Static { position, .. } => {
            if !position.iter().all(|v| v.is_finite()) {
                problems.push(format!("{path}.position: must be finite"));
            }
        }
        Trajectory::Orbit { center, radius, angular_rate_deg_s, phase_deg } => {
            if !center.iter().all(|v| v.is_finite()) {
                problems.push(format!("{path}.center: must be finite"));
            }
            if !(radius.is_finite() && *radius > 0.0) {
                problems.push(format!("{path}.radius: must be positive and finite"));
            }
            if !angular_rate_deg_s.is_finite() || !phase_deg.is_finite() {
                problems.push(format!("{path}.angular_rate_deg_s/phase_deg: must be finite"));
            }
        }
        Trajectory::Line { from, to, start_s, end_s, .. } => {
            if !from.iter().chain(to).all(|v| v.is_finite()) {
                problems.push(format!("{path}.from/to: must be finite"));
            }
            if !(start_s.is_finite() && end_s.is_finite() && end_s > start_s) {
                problems.push(format!("{path}.start_s/end_s: need start_s < end_s"));
            }
        }
    }
}
