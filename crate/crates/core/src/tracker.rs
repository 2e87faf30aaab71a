//! Multi-target tracking over buffered scans.
//!
//! Tracks carry a 9-dimensional state (position, velocity, acceleration)
//! filtered by a constant-acceleration Kalman model. New tracks start from
//! detections and are immediately re-run through every buffered scan newer
//! than the detection's timestamp, which compensates the latency of the
//! detection pipeline. Tracks whose position uncertainty radius outgrows a
//! ceiling are dropped, which suppresses tracks born from sporadic false
//! positives: without supporting points the covariance only grows.

use crate::detector::{extract_clusters, Detection};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use nalgebra::{Matrix3, SMatrix, SVector};
use std::collections::VecDeque;
use std::sync::Arc;

pub type StateVector = SVector<f64, 9>;
pub type StateCov = SMatrix<f64, 9, 9>;

/// How the scalar uncertainty radius is read off the position covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusMode {
    /// `c_r * cbrt(det)`: the formula as printed in the source material,
    /// dimensionally m² but kept as the default for fidelity.
    CubeRootOfDeterminant,
    /// `c_r * det^(1/6)`: dimensionally a length.
    SixthRootOfDeterminant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Scan buffer depth.
    pub n_buf: usize,
    /// Scale of the uncertainty radius.
    pub c_r: f64,
    /// Lower clamp of the uncertainty radius, meters.
    pub r_min: f64,
    /// Radius beyond which a track is dropped, meters.
    pub r_max: f64,
    /// Clusters closer than this to an occupied voxel center are not used
    /// as measurements, meters.
    pub d_min: f64,
    /// Clustering reach for measurement extraction, meters.
    pub d_cluster: f64,
    /// Measurement noise standard deviation, meters.
    pub z_sigma: f64,
    /// Process noise standard deviations for position, velocity and
    /// acceleration blocks.
    pub xi: [f64; 3],
    /// Initial standard deviations for position, velocity and acceleration.
    pub p0: [f64; 3],
    pub radius_mode: RadiusMode,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_buf: 10,
            c_r: 0.5,
            r_min: 1.5,
            r_max: 3.0,
            d_min: 0.7,
            d_cluster: 0.25,
            z_sigma: 1.0,
            xi: [0.5, 0.5, 0.1],
            p0: [0.5, 3.0, 3.0],
            radius_mode: RadiusMode::CubeRootOfDeterminant,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_buf < 1 {
            return Err(Error::InvalidInput("n_buf must be at least 1".into()));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min) {
            return Err(Error::InvalidInput("need r_max > r_min > 0".into()));
        }
        for (name, v) in [
            ("c_r", self.c_r),
            ("d_min", self.d_min),
            ("d_cluster", self.d_cluster),
            ("z_sigma", self.z_sigma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite")));
            }
        }
        for v in self.xi.iter().chain(&self.p0) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidInput("xi and p0 entries must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn process_noise(&self) -> StateCov {
        let mut q = StateCov::zeros();
        for b in 0..3 {
            let s = self.xi[b] * self.xi[b];
            for k in 0..3 {
                q[(3 * b + k, 3 * b + k)] = s;
            }
        }
        q
    }

    fn initial_cov(&self) -> StateCov {
        let mut p = StateCov::zeros();
        for b in 0..3 {
            let s = self.p0[b] * self.p0[b];
            for k in 0..3 {
                p[(3 * b + k, 3 * b + k)] = s;
            }
        }
        p
    }
}

/// One live track.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: StateVector,
    pub cov: StateCov,
    /// Number of detections associated with this track.
    pub n_det: u32,
    /// Time this track was last advanced to, seconds.
    pub last_update_time: f64,
}

impl Track {
    pub fn position(&self) -> Point3 {
        Point3::new(self.state[0], self.state[1], self.state[2])
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.state[3], self.state[4], self.state[5])
    }

    pub fn acceleration(&self) -> Vec3 {
        Vec3::new(self.state[6], self.state[7], self.state[8])
    }
}

fn transition(dt: f64) -> StateCov {
    let mut a = StateCov::identity();
    let half = 0.5 * dt * dt;
    for k in 0..3 {
        a[(k, 3 + k)] = dt;
        a[(k, 6 + k)] = half;
        a[(3 + k, 6 + k)] = dt;
    }
    a
}

fn measurement_matrix() -> SMatrix<f64, 3, 9> {
    SMatrix::<f64, 3, 9>::identity()
}

/// Advances the state by `dt` under the constant-acceleration model and
/// inflates the covariance by the configured process noise.
pub fn predict(track: &mut Track, dt: f64, config: &TrackerConfig) -> Result<()> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::InvalidInput(format!("predict needs dt >= 0, got {dt}")));
    }
    let a = transition(dt);
    track.state = a * track.state;
    track.cov = a * track.cov * a.transpose() + config.process_noise();
    Ok(())
}

/// Standard Kalman correction of the position block with measurement
/// covariance `z_cov`. Uses the Joseph form and re-symmetrizes, so the
/// covariance stays symmetric positive semi-definite.
pub fn correct_with_cov(track: &mut Track, z: &Point3, z_cov: &Matrix3<f64>) -> Result<()> {
    let h = measurement_matrix();
    let s = h * track.cov * h.transpose() + z_cov;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?;
    let k = track.cov * h.transpose() * s_inv;
    let innovation = z.coords - h * track.state;
    track.state += k * innovation;
    let ikh = StateCov::identity() - k * h;
    track.cov = ikh * track.cov * ikh.transpose() + k * z_cov * k.transpose();
    track.cov = (track.cov + track.cov.transpose()) * 0.5;
    Ok(())
}

/// Correction with the configured scalar measurement noise.
pub fn correct(track: &mut Track, z: &Point3, config: &TrackerConfig) -> Result<()> {
    let z_cov = Matrix3::identity() * (config.z_sigma * config.z_sigma);
    correct_with_cov(track, z, &z_cov)
}

/// Scalar uncertainty radius derived from the position covariance block.
pub fn uncertainty_radius(cov: &StateCov, config: &TrackerConfig) -> f64 {
    let p = cov.fixed_view::<3, 3>(0, 0);
    let det = p.determinant().max(0.0);
    let scale = match config.radius_mode {
        RadiusMode::CubeRootOfDeterminant => det.cbrt(),
        RadiusMode::SixthRootOfDeterminant => det.powf(1.0 / 6.0),
    };
    (config.c_r * scale).max(config.r_min)
}

/// One buffered scan: its acquisition time and world-frame points.
#[derive(Debug, Clone)]
pub struct BufferedScan {
    pub timestamp: f64,
    pub points: Arc<Vec<Point3>>,
}

/// Predicts the track to the scan time, extracts a measurement from the
/// points within the track's uncertainty radius and corrects with it.
/// Clusters whose centroid lies within `d_min` of an occupied voxel center
/// are ignored; with several candidates the one nearest the predicted
/// position wins. Without candidates the track coasts on prediction.
pub fn update_track(
    track: &mut Track,
    points: &[Point3],
    occupied_centers: &[Point3],
    timestamp: f64,
    config: &TrackerConfig,
) -> Result<()> {
    let dt = timestamp - track.last_update_time;
    predict(track, dt, config)?;
    track.last_update_time = timestamp;

    let r_unc = uncertainty_radius(&track.cov, config);
    let center = track.position();
    let selected: Vec<Point3> =
        points.iter().filter(|p| (*p - center).norm() <= r_unc).copied().collect();
    if selected.is_empty() {
        return Ok(());
    }

    let mut best: Option<(f64, Point3)> = None;
    for ids in extract_clusters(&selected, config.d_cluster)? {
        let mut sum = Vec3::zeros();
        for &i in &ids {
            sum += selected[i as usize].coords;
        }
        let centroid = Point3::from(sum / ids.len() as f64);
        let near_structure =
            occupied_centers.iter().any(|o| (centroid - o).norm() < config.d_min);
        if near_structure {
            continue;
        }
        let dist = (centroid - center).norm();
        if best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, centroid));
        }
    }
    if let Some((_, z)) = best {
        correct(track, &z, config)?;
    }
    Ok(())
}

/// The tracker: scan buffer plus live track set.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    buffer: VecDeque<BufferedScan>,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, buffer: VecDeque::new(), tracks: Vec::new(), next_id: 0 })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    fn fresh_track(&self, det: &Detection) -> Track {
        let mut state = StateVector::zeros();
        state[0] = det.position.x;
        state[1] = det.position.y;
        state[2] = det.position.z;
        Track {
            id: u64::MAX, // assigned if the track is kept
            state,
            cov: self.config.initial_cov(),
            n_det: 1,
            last_update_time: det.timestamp,
        }
    }

    /// Buffers a scan and advances every track to its time, pruning tracks
    /// whose uncertainty radius exceeds the ceiling. Scans must arrive in
    /// strictly increasing time order.
    pub fn new_point_cloud(
        &mut self,
        points: Arc<Vec<Point3>>,
        timestamp: f64,
        occupied_centers: &[Point3],
    ) -> Result<()> {
        if !timestamp.is_finite() {
            return Err(Error::InvalidInput("scan timestamp must be finite".into()));
        }
        if let Some(last) = self.buffer.back() {
            if timestamp <= last.timestamp {
                return Err(Error::InvalidInput(format!(
                    "scans must arrive in increasing time order: got {timestamp} after {}",
                    last.timestamp
                )));
            }
        }
        self.buffer.push_back(BufferedScan { timestamp, points });
        while self.buffer.len() > self.config.n_buf {
            self.buffer.pop_front();
        }
        let scan = self.buffer.back().cloned().expect("just pushed");
        for track in &mut self.tracks {
            update_track(track, &scan.points, occupied_centers, timestamp, &self.config)?;
        }
        let config = &self.config;
        self.tracks.retain(|t| uncertainty_radius(&t.cov, config) <= config.r_max);
        Ok(())
    }

    /// Folds in detections, which usually refer to a scan some ticks in the
    /// past. Each spawns a tentative track that is re-run through all
    /// buffered scans newer than the detection, then either discarded (too
    /// uncertain), merged into a similar existing track (its detection
    /// count increments), or added.
    pub fn new_detections(
        &mut self,
        detections: &[Detection],
        occupied_centers: &[Point3],
    ) -> Result<()> {
        for det in detections {
            if !det.timestamp.is_finite() {
                return Err(Error::InvalidInput("detection timestamp must be finite".into()));
            }
            let mut track = self.fresh_track(det);
            let before_buffer =
                self.buffer.front().map_or(false, |oldest| det.timestamp < oldest.timestamp);
            if before_buffer {
                log::warn!(
                    "detection at t={} predates the scan buffer; skipping delay compensation",
                    det.timestamp
                );
            } else {
                for scan in &self.buffer {
                    if scan.timestamp > det.timestamp {
                        update_track(
                            &mut track,
                            &scan.points,
                            occupied_centers,
                            scan.timestamp,
                            &self.config,
                        )?;
                    }
                }
            }
            if uncertainty_radius(&track.cov, &self.config) > self.config.r_max {
                continue;
            }
            match self.nearest_similar(&track) {
                Some(i) => self.tracks[i].n_det += 1,
                None => {
                    track.id = self.next_id;
                    self.next_id += 1;
                    self.tracks.push(track);
                }
            }
        }
        Ok(())
    }

    /// Index of the closest track whose distance to `candidate` is within
    /// the sum of their uncertainty radii.
    fn nearest_similar(&self, candidate: &Track) -> Option<usize> {
        let rc = uncertainty_radius(&candidate.cov, &self.config);
        let pc = candidate.position();
        let mut best: Option<(f64, usize)> = None;
        for (i, t) in self.tracks.iter().enumerate() {
            let d = (t.position() - pc).norm();
            if d <= rc + uncertainty_radius(&t.cov, &self.config)
                && best.map_or(true, |(bd, _)| d < bd)
            {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }
}
