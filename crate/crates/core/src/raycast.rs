//! Ray extraction from organized scans and exact voxel traversal.
//!
//! Every non-masked scan element yields one world-frame segment from the
//! sensor center: returns end at the measured point (truncated to the free
//! range cap `d_max`), empty elements end at the full cap. Traversal marches
//! the segment through the grid one voxel face at a time and reports the
//! exact in-voxel lengths, so per-voxel weights sum to the in-grid portion of
//! the segment.

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Point3, VoxelIndex};
use crate::scan::{CellKind, OrganizedScan};
use rayon::prelude::*;

/// Segments shorter than this are skipped outright.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-9;

/// One world-frame ray segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySegment {
    pub start: Point3,
    pub end: Point3,
}

impl RaySegment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// Builds the world-frame segment set for one scan. Masked elements are
/// skipped; empty elements produce full-length `d_max` segments; returns are
/// truncated to `min(range, d_max)`.
pub fn build_rays(scan: &OrganizedScan, d_max: f64) -> Result<Vec<RaySegment>> {
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(Error::InvalidInput("d_max must be positive and finite".into()));
    }
    let rot = *scan.sensor_pose.rotation();
    let start = Point3::from(scan.sensor_pose.translation);
    let mut out = Vec::with_capacity(scan.len());
    for i in 0..scan.len() {
        let reach = match scan.kind(i) {
            CellKind::Masked => continue,
            CellKind::Empty => d_max,
            CellKind::Return => scan.range(i).min(d_max),
        };
        if reach < MIN_SEGMENT_LENGTH {
            continue;
        }
        let dir = rot * scan.direction(i);
        out.push(RaySegment { start, end: start + reach * dir });
    }
    Ok(out)
}

/// Calls `emit(flat_index, length)` for every voxel the segment crosses, in
/// entry order. Lengths tile the in-grid portion of the segment exactly;
/// zero-length corner touches are not emitted.
fn traverse_into<F: FnMut(usize, f64)>(seg: &RaySegment, spec: &GridSpec, emit: &mut F) {
    let dir = seg.end - seg.start;
    let len = dir.norm();
    if len < MIN_SEGMENT_LENGTH {
        return;
    }
    let u = dir / len;
    let o = spec.origin();
    let h = spec.voxel_size();
    let dims = spec.dims();

    // Clip [0, len] against the grid box (half-open on the upper faces).
    let mut t0 = 0.0f64;
    let mut t1 = len;
    for a in 0..3 {
        let rel = seg.start[a] - o[a];
        let extent = dims[a] as f64 * h;
        if u[a] == 0.0 {
            if !(0.0..extent).contains(&rel) {
                return;
            }
        } else {
            let inv = 1.0 / u[a];
            let ta = -rel * inv;
            let tb = (extent - rel) * inv;
            let (near, far) = if ta < tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
    }
    if t1 - t0 < MIN_SEGMENT_LENGTH {
        return;
    }

    // Entry voxel, clamped to absorb boundary rounding.
    let entry = seg.start + t0 * u;
    let mut idx = [0i64; 3];
    for a in 0..3 {
        let i = ((entry[a] - o[a]) / h).floor() as i64;
        idx[a] = i.clamp(0, dims[a] as i64 - 1);
    }

    // Per-axis parameter of the next face crossing and its increment.
    let mut t_next = [f64::INFINITY; 3];
    let mut t_step = [f64::INFINITY; 3];
    let mut step = [0i64; 3];
    for a in 0..3 {
        if u[a] > 0.0 {
            let bound = o[a] + (idx[a] + 1) as f64 * h;
            t_next[a] = t0 + (bound - entry[a]) / u[a];
            t_step[a] = h / u[a];
            step[a] = 1;
        } else if u[a] < 0.0 {
            let bound = o[a] + idx[a] as f64 * h;
            t_next[a] = t0 + (bound - entry[a]) / u[a];
            t_step[a] = h / -u[a];
            step[a] = -1;
        }
    }

    let dx = dims[0] as i64;
    let dxy = dx * dims[1] as i64;
    let mut flat = (idx[2] * dims[1] as i64 + idx[1]) * dx + idx[0];

    // Scalarized per-axis state so the inner loop stays in registers:
    // remaining in-grid steps, next crossing parameter, its increment, and
    // the flat-index stride (zero stride never fires, t_next is infinite).
    let left = |a: usize| -> u32 {
        match step[a] {
            1 => (dims[a] as i64 - 1 - idx[a]) as u32,
            -1 => idx[a] as u32,
            _ => u32::MAX,
        }
    };
    let (mut lx, mut ly, mut lz) = (left(0), left(1), left(2));
    let (mut tnx, mut tny, mut tnz) = (t_next[0], t_next[1], t_next[2]);
    let (tsx, tsy, tsz) = (t_step[0], t_step[1], t_step[2]);
    let (fsx, fsy, fsz) = (step[0], step[1] * dx, step[2] * dxy);

    let mut t_cur = t0;
    // Smallest next crossing each iteration; ties broken x before y before z.
    loop {
        let (t_exit, axis) = if tnx <= tny && tnx <= tnz {
            (tnx, 0)
        } else if tny <= tnz {
            (tny, 1)
        } else {
            (tnz, 2)
        };
        if t_exit >= t1 {
            let piece = t1 - t_cur;
            if piece > 0.0 {
                emit(flat as usize, piece);
            }
            return;
        }
        let piece = t_exit - t_cur;
        if piece > 0.0 {
            emit(flat as usize, piece);
        }
        t_cur = t_exit;
        match axis {
            0 => {
                if lx == 0 {
                    return;
                }
                lx -= 1;
                flat += fsx;
                tnx += tsx;
            }
            1 => {
                if ly == 0 {
                    return;
                }
                ly -= 1;
                flat += fsy;
                tny += tsy;
            }
            _ => {
                if lz == 0 {
                    return;
                }
                lz -= 1;
                flat += fsz;
                tnz += tsz;
            }
        }
    }
}

/// Ordered voxel crossings of one segment with their in-voxel lengths.
pub fn traverse(seg: &RaySegment, spec: &GridSpec) -> Vec<(VoxelIndex, f64)> {
    let mut out = Vec::new();
    traverse_into(seg, spec, &mut |flat, piece| out.push((spec.from_flat(flat), piece)));
    out
}

/// Accumulated per-voxel pass-through lengths for a batch of segments.
///
/// Entries are sorted by voxel index, so iteration order is deterministic.
#[derive(Debug, Clone, Default)]
pub struct IntersectionSet {
    entries: Vec<(VoxelIndex, f64)>,
}

impl IntersectionSet {
    pub fn entries(&self) -> &[(VoxelIndex, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight_of(&self, v: VoxelIndex) -> Option<f64> {
        self.entries
            .binary_search_by(|(idx, _)| idx.cmp(&v))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}

struct DenseAccumulator {
    weights: Vec<f64>,
}

impl DenseAccumulator {
    fn new(n: usize) -> Self {
        Self { weights: vec![0.0; n] }
    }

    #[inline]
    fn add(&mut self, flat: usize, w: f64) {
        self.weights[flat] += w;
    }
}

/// Accumulates all segments sequentially.
pub fn accumulate(segments: &[RaySegment], spec: &GridSpec) -> IntersectionSet {
    accumulate_chunked(segments, spec, 1)
}

/// Accumulates segments in `chunks` contiguous slices (processed in
/// parallel), merging partial sums in fixed chunk order so the result is
/// reproducible for a given chunk count regardless of thread scheduling.
pub fn accumulate_chunked(segments: &[RaySegment], spec: &GridSpec, chunks: usize) -> IntersectionSet {
    let n = spec.voxel_count();
    if segments.is_empty() {
        return IntersectionSet::default();
    }
    let chunks = chunks.clamp(1, segments.len());
    let chunk_size = segments.len().div_ceil(chunks);
    let mut partials: Vec<DenseAccumulator> = segments
        .par_chunks(chunk_size.max(1))
        .map(|slice| {
            let mut acc = DenseAccumulator::new(n);
            for seg in slice {
                traverse_into(seg, spec, &mut |flat, piece| acc.add(flat, piece));
            }
            acc
        })
        .collect();

    // Sum partials into the first accumulator in chunk order, then collect
    // nonzero slots in one linear pass.
    let (base, rest) = partials.split_at_mut(1);
    let merged = &mut base[0].weights;
    for acc in rest.iter() {
        for (m, w) in merged.iter_mut().zip(&acc.weights) {
            *m += *w;
        }
    }
    let mut entries: Vec<(VoxelIndex, f64)> = merged
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(flat, &w)| (spec.from_flat(flat), w))
        .collect();
    // Flat order is (z, y, x)-major while VoxelIndex order is (x, y, z)
    // lexicographic; re-sort so binary search by index works.
    let dims = spec.dims();
    let (dy, dz) = (dims[1] as u64, dims[2] as u64);
    entries.sort_unstable_by_key(|(v, _)| (v.x as u64 * dy + v.y as u64) * dz + v.z as u64);
    IntersectionSet { entries }
}
