//! Multi-state occupancy mapping with exponential value updates.
//!
//! Each voxel carries a real occupancy value `G`. One update moves the value
//! toward a coefficient `g` with a real weight `n >= 0`:
//!
//! ```text
//! G' = 2^(-n) * G + (1 - 2^(-n)) * g
//! ```
//!
//! which equals `n` successive halving steps `G' = (G + g) / 2` when `n` is a
//! whole number, but admits fractional weights (ray lengths) and `n = +inf`
//! (jump straight to `g`). Values of exactly `+inf`/`-inf` pin a voxel to
//! permanently occupied/free; pinned voxels ignore all updates.
//!
//! The value maps to one of four states via three thresholds
//! `G_conf > G_tent > G_unc`, with lower-inclusive bands:
//!
//! * `G >= G_conf`          → confident occupied
//! * `G in [G_tent, G_conf)` → tentatively occupied
//! * `G in [G_unc, G_tent)`  → uncertain
//! * `G < G_unc`            → confident free
//!
//! A conventional clamped log-odds grid ([`LogOddsGrid`]) is included as a
//! comparison baseline; it reacts symmetrically to hits and pass-throughs and
//! therefore lets transient objects burn into the map, which is exactly what
//! the exponential update with a free-ward `g_unk` avoids.

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Point3, VoxelIndex};
use std::io::{Read, Write};

/// Discrete occupancy state of one voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoxelState {
    ConfidentOccupied,
    TentativeOccupied,
    Uncertain,
    ConfidentFree,
}

/// State thresholds; must satisfy `confident > tentative > uncertain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub confident: f64,
    pub tentative: f64,
    pub uncertain: f64,
}

impl Thresholds {
    pub fn new(confident: f64, tentative: f64, uncertain: f64) -> Result<Self> {
        if !(confident > tentative && tentative > uncertain) {
            return Err(Error::InvalidInput(
                "thresholds must be strictly ordered confident > tentative > uncertain".into(),
            ));
        }
        if ![confident, tentative, uncertain].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("thresholds must be finite".into()));
        }
        Ok(Self { confident, tentative, uncertain })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { confident: -0.1, tentative: -300.0, uncertain: -750.0 }
    }
}

/// Update coefficients for the three point/ray classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Target value for voxels holding background points.
    pub occupied: f64,
    /// Target value for voxels holding unknown or detected points; also the
    /// initialization value of an unmapped voxel.
    pub unknown: f64,
    /// Target value for voxels crossed by rays.
    pub free: f64,
}

impl Coefficients {
    pub fn new(occupied: f64, unknown: f64, free: f64) -> Result<Self> {
        if ![occupied, unknown, free].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(Self { occupied, unknown, free })
    }
}

impl Default for Coefficients {
    fn default() -> Self {
        Self { occupied: 0.0, unknown: -740.0, free: -1000.0 }
    }
}

/// One weighted update: move `voxel` toward `coefficient` with weight
/// `weight` (may be `+inf` to jump all the way).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedUpdate {
    pub voxel: VoxelIndex,
    pub coefficient: f64,
    pub weight: f64,
}

/// Applies one weighted update to a value. Pinned values (`±inf`) pass
/// through unchanged; `weight = 0` is a no-op; `weight = +inf` returns the
/// coefficient exactly.
pub fn update_value(prev: f64, coefficient: f64, weight: f64) -> Result<f64> {
    if weight.is_nan() || weight < 0.0 {
        return Err(Error::InvalidInput(format!("update weight must be >= 0, got {weight}")));
    }
    if coefficient.is_nan() {
        return Err(Error::InvalidInput("update coefficient must not be NaN".into()));
    }
    if prev.is_infinite() {
        return Ok(prev);
    }
    if weight.is_infinite() {
        return Ok(coefficient);
    }
    let keep = (-weight).exp2();
    Ok(keep * prev + (1.0 - keep) * coefficient)
}

/// Maps a value to its state band (see module docs for the intervals).
pub fn classify(value: f64, thresholds: &Thresholds) -> VoxelState {
    if value >= thresholds.confident {
        VoxelState::ConfidentOccupied
    } else if value >= thresholds.tentative {
        VoxelState::TentativeOccupied
    } else if value >= thresholds.uncertain {
        VoxelState::Uncertain
    } else {
        VoxelState::ConfidentFree
    }
}

/// A-priori knowledge for map initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorState {
    /// Start at the occupied coefficient.
    Occupied,
    /// Start at the free coefficient.
    Free,
    /// Pin to `+inf`: permanently occupied.
    PinnedOccupied,
    /// Pin to `-inf`: permanently free.
    PinnedFree,
}

/// An axis-aligned world-space region with a prior state. Voxels whose
/// centers fall inside `[min, max]` are initialized accordingly.
#[derive(Debug, Clone)]
pub struct PriorRegion {
    pub min: Point3,
    pub max: Point3,
    pub state: PriorState,
}

/// Dense multi-state occupancy grid.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    spec: GridSpec,
    values: Vec<f64>,
    thresholds: Thresholds,
    coefficients: Coefficients,
    // Batch-conflict scratch: epoch stamp plus the coefficient first seen for
    // the voxel in the current batch.
    stamp: Vec<u32>,
    stamp_coeff: Vec<f64>,
    epoch: u32,
}

impl OccupancyGrid {
    /// Creates a grid with every voxel at the unknown coefficient.
    pub fn new(spec: GridSpec, thresholds: Thresholds, coefficients: Coefficients) -> Self {
        let n = spec.voxel_count();
        Self {
            spec,
            values: vec![coefficients.unknown; n],
            thresholds,
            coefficients,
            stamp: vec![0; n],
            stamp_coeff: vec![0.0; n],
            epoch: 0,
        }
    }

    /// Creates a grid initialized to unknown, then overrides voxels covered
    /// by the prior regions (later regions win on overlap).
    pub fn init_from_prior(
        spec: GridSpec,
        thresholds: Thresholds,
        coefficients: Coefficients,
        prior: &[PriorRegion],
    ) -> Result<Self> {
        let mut grid = Self::new(spec, thresholds, coefficients);
        for (ri, region) in prior.iter().enumerate() {
            if !(region.min.iter().all(|v| v.is_finite()) && region.max.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidInput(format!("prior region {ri} has non-finite bounds")));
            }
            if (0..3).any(|a| region.min[a] > region.max[a]) {
                return Err(Error::InvalidInput(format!("prior region {ri} has min > max")));
            }
            let value = match region.state {
                PriorState::Occupied => grid.coefficients.occupied,
                PriorState::Free => grid.coefficients.free,
                PriorState::PinnedOccupied => f64::INFINITY,
                PriorState::PinnedFree => f64::NEG_INFINITY,
            };
            let h = grid.spec.voxel_size();
            let o = grid.spec.origin();
            let dims = grid.spec.dims();
            // Index range whose centers can fall inside the region: center of
            // index i along axis a is o[a] + (i + 0.5) h.
            let mut lo = [0u32; 3];
            let mut hi = [0u32; 3];
            let mut overlaps = true;
            for a in 0..3 {
                let lo_i = ((region.min[a] - o[a]) / h - 0.5).ceil().max(0.0) as i64;
                let hi_i =
                    ((((region.max[a] - o[a]) / h - 0.5).floor()) as i64).min(dims[a] as i64 - 1);
                if hi_i < lo_i {
                    overlaps = false;
                    break;
                }
                lo[a] = lo_i as u32;
                hi[a] = hi_i as u32;
            }
            if !overlaps {
                continue;
            }
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let idx = VoxelIndex::new(x, y, z);
                        let c = grid.spec.voxel_center(idx);
                        if (0..3).all(|a| c[a] >= region.min[a] && c[a] <= region.max[a]) {
                            let flat = grid.spec.flat(idx);
                            grid.values[flat] = value;
                        }
                    }
                }
            }
        }
        Ok(grid)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn value(&self, v: VoxelIndex) -> f64 {
        self.values[self.spec.flat(v)]
    }

    pub fn state(&self, v: VoxelIndex) -> VoxelState {
        classify(self.value(v), &self.thresholds)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies a batch of updates atomically: the whole batch is validated
    /// before any value changes.
    ///
    /// Precondition: at most one coefficient class per voxel per batch.
    /// Repeated entries for a voxel with the *same* coefficient are allowed
    /// and compose exactly (weights add, since
    /// `2^(-n2) (2^(-n1) G + (1-2^(-n1)) g) + (1-2^(-n2)) g
    ///  = 2^(-(n1+n2)) G + (1-2^(-(n1+n2))) g`);
    /// entries with different coefficients are a contract violation.
    pub fn apply_updates(&mut self, batch: &[WeightedUpdate]) -> Result<()> {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            // Wrapped: stale stamps could collide with the new epoch.
            self.stamp.fill(0);
            self.epoch = 1;
        }
        for (i, u) in batch.iter().enumerate() {
            if !self.spec.contains_index(u.voxel) {
                return Err(Error::InvalidInput(format!(
                    "update {i} targets voxel outside the grid: {:?}",
                    u.voxel
                )));
            }
            if u.weight.is_nan() || u.weight < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "update {i} has invalid weight {}",
                    u.weight
                )));
            }
            if u.coefficient.is_nan() {
                return Err(Error::InvalidInput(format!("update {i} has NaN coefficient")));
            }
            let flat = self.spec.flat(u.voxel);
            if self.stamp[flat] == self.epoch {
                if self.stamp_coeff[flat] != u.coefficient {
                    return Err(Error::Contract(format!(
                        "conflicting coefficients {} and {} for voxel {:?} in one batch",
                        self.stamp_coeff[flat], u.coefficient, u.voxel
                    )));
                }
            } else {
                self.stamp[flat] = self.epoch;
                self.stamp_coeff[flat] = u.coefficient;
            }
        }
        for u in batch {
            let flat = self.spec.flat(u.voxel);
            self.values[flat] = update_value(self.values[flat], u.coefficient, u.weight)?;
        }
        Ok(())
    }

    /// Centers of all voxels at or above the tentative threshold.
    pub fn occupied_centers(&self) -> Vec<Point3> {
        self.occupied_indices().into_iter().map(|v| self.spec.voxel_center(v)).collect()
    }

    /// Indices of all voxels at or above the tentative threshold, in flat
    /// (deterministic) order.
    pub fn occupied_indices(&self) -> Vec<VoxelIndex> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &g)| g >= self.thresholds.tentative)
            .map(|(flat, _)| self.spec.from_flat(flat))
            .collect()
    }

    /// Serializes the grid (header + values). With `rle`, runs of the same
    /// bit pattern are collapsed, which is compact for mostly-unknown maps.
    pub fn write_snapshot<W: Write>(&self, w: &mut W, rle: bool) -> Result<()> {
        w.write_all(b"AVXG")?;
        w.write_all(&1u32.to_le_bytes())?;
        for v in self.spec.origin().iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.spec.voxel_size().to_le_bytes())?;
        for d in self.spec.dims() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in [self.thresholds.confident, self.thresholds.tentative, self.thresholds.uncertain] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.coefficients.occupied, self.coefficients.unknown, self.coefficients.free] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[rle as u8])?;
        if rle {
            let mut runs: Vec<(u64, u64)> = Vec::new();
            for &v in &self.values {
                let bits = v.to_bits();
                match runs.last_mut() {
                    Some((count, b)) if *b == bits => *count += 1,
                    _ => runs.push((1, bits)),
                }
            }
            w.write_all(&(runs.len() as u64).to_le_bytes())?;
            for (count, bits) in runs {
                w.write_all(&count.to_le_bytes())?;
                w.write_all(&bits.to_le_bytes())?;
            }
        } else {
            for v in &self.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"AVXG" {
            return Err(Error::Format("bad grid magic".into()));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported grid version {version}")));
        }
        let origin = crate::geometry::Vec3::new(read_f64(r)?, read_f64(r)?, read_f64(r)?);
        let voxel_size = read_f64(r)?;
        let mut dims = [0u32; 3];
        for d in &mut dims {
            let v = read_u64(r)?;
            *d = u32::try_from(v).map_err(|_| Error::Format("grid dimension overflow".into()))?;
        }
        let spec = GridSpec::new(origin, voxel_size, dims)
            .map_err(|e| Error::Format(format!("bad grid spec: {e}")))?;
        let thresholds = Thresholds::new(read_f64(r)?, read_f64(r)?, read_f64(r)?)
            .map_err(|e| Error::Format(format!("bad thresholds: {e}")))?;
        let coefficients = Coefficients::new(read_f64(r)?, read_f64(r)?, read_f64(r)?)
            .map_err(|e| Error::Format(format!("bad coefficients: {e}")))?;
        let mut grid = Self::new(spec, thresholds, coefficients);
        let n = grid.values.len();
        let mut enc = [0u8; 1];
        r.read_exact(&mut enc)?;
        match enc[0] {
            0 => {
                for v in grid.values.iter_mut() {
                    *v = read_f64(r)?;
                }
            }
            1 => {
                let runs = read_u64(r)? as usize;
                let mut at = 0usize;
                for _ in 0..runs {
                    let count = read_u64(r)? as usize;
                    let value = read_f64(r)?;
                    if at + count > n {
                        return Err(Error::Format("run-length data overflows grid".into()));
                    }
                    grid.values[at..at + count].fill(value);
                    at += count;
                }
                if at != n {
                    return Err(Error::Format(format!(
                        "run-length data covers {at} of {n} voxels"
                    )));
                }
            }
            e => return Err(Error::Format(format!("unknown snapshot encoding {e}"))),
        }
        Ok(grid)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_bits(u64::from_le_bytes(b)))
}

/// Parameters of the clamped log-odds baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogOddsParams {
    /// Added per hit.
    pub l_occ: f64,
    /// Added per pass-through.
    pub l_free: f64,
    /// Occupied iff `L >= l_occ_threshold`.
    pub l_occ_threshold: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self { l_occ: 0.85, l_free: -0.4, l_occ_threshold: 0.0, l_min: -2.0, l_max: 3.5 }
    }
}

/// Conventional clamped log-odds occupancy grid (comparison baseline).
#[derive(Debug, Clone)]
pub struct LogOddsGrid {
    spec: GridSpec,
    values: Vec<f64>,
    pub params: LogOddsParams,
}

impl LogOddsGrid {
    /// All voxels start at `L = 0` (odds 1:1).
    pub fn new(spec: GridSpec, params: LogOddsParams) -> Self {
        let n = spec.voxel_count();
        Self { spec, values: vec![0.0; n], params }
    }

    pub fn value(&self, v: VoxelIndex) -> f64 {
        self.values[self.spec.flat(v)]
    }

    pub fn is_occupied(&self, v: VoxelIndex) -> bool {
        self.value(v) >= self.params.l_occ_threshold
    }

    /// Applies one scan's worth of evidence. A voxel listed in both sets
    /// counts as a hit.
    pub fn update(&mut self, hits: &[VoxelIndex], pass_through: &[VoxelIndex]) -> Result<()> {
        for v in hits.iter().chain(pass_through) {
            if !self.spec.contains_index(*v) {
                return Err(Error::InvalidInput(format!("voxel outside the grid: {v:?}")));
            }
        }
        // Both arguments are treated as sets: duplicates count once.
        let mut hit_mark = vec![false; self.values.len()];
        for v in hits {
            let flat = self.spec.flat(*v);
            if !hit_mark[flat] {
                hit_mark[flat] = true;
                self.values[flat] = (self.values[flat] + self.params.l_occ)
                    .clamp(self.params.l_min, self.params.l_max);
            }
        }
        let mut pass_mark = vec![false; self.values.len()];
        for v in pass_through {
            let flat = self.spec.flat(*v);
            if !hit_mark[flat] && !pass_mark[flat] {
                pass_mark[flat] = true;
                self.values[flat] = (self.values[flat] + self.params.l_free)
                    .clamp(self.params.l_min, self.params.l_max);
            }
        }
        Ok(())
    }
}
