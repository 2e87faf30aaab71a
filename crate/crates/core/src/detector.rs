//! Per-scan point clustering and cluster classification.
//!
//! Points from one scan are grouped by Euclidean proximity, then each
//! cluster is labeled by three rules evaluated in order:
//!
//! 1. background: some point lies close to a voxel that is at least
//!    tentatively occupied, so the cluster is attached to known structure;
//! 2. flying object: the cluster floats, meaning the unknown region around
//!    it is fully enclosed by observed free space within a bounded search;
//! 3. unknown: anything else, including clusters touching unexplored space
//!    or leaving the mapped volume.
//!
//! The classification drives the per-voxel map updates: background points
//! reinforce occupancy, detected and unknown points pull their voxels
//! toward the unknown value (detections with infinite weight so the map is
//! not biased by objects passing through free space).

use crate::error::{Error, Result};
use crate::geometry::{Point3, VoxelIndex};
use crate::occupancy::{OccupancyGrid, VoxelState};
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::collections::{BTreeMap, VecDeque};

/// Tuning knobs for clustering and classification. Distances are meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Neighbor distance for clustering: two points chain-connect when
    /// their distance is at most this.
    pub d_cluster: f64,
    /// Rule 1 radius: a point this close to an at-least-tentative voxel
    /// center marks its cluster as background.
    pub d_close: f64,
    /// Rule 2 search reach, converted to a Manhattan voxel radius of
    /// `floor(d_search / voxel_size)`.
    pub d_search: f64,
    /// Clusters smaller than this are never reported as flying objects.
    pub min_cluster_points: usize,
    /// Occupancy value at or above which a voxel counts as structure for
    /// rule 1. Defaults to the grid's tentative threshold when `None`.
    pub near_value_floor: Option<f64>,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            d_cluster: 0.25,
            d_close: 0.7,
            d_search: 3.0,
            min_cluster_points: 1,
            near_value_floor: None,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_cluster", self.d_cluster),
            ("d_close", self.d_close),
            ("d_search", self.d_search),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite")));
            }
        }
        if let Some(g) = self.near_value_floor {
            if g.is_nan() {
                return Err(Error::InvalidInput("near_value_floor must not be NaN".into()));
            }
        }
        Ok(())
    }
}

/// Label assigned to a cluster by the classification rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterLabel {
    Background,
    FlyingObject,
    Unknown,
}

/// One cluster, as indices into the scan's point slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub point_ids: Vec<u32>,
    pub label: ClusterLabel,
}

/// One reported flying-object observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Arithmetic mean of the cluster's points.
    pub position: Point3,
    pub point_count: usize,
    pub timestamp: f64,
}

/// Everything one scan contributes to the map and to the tracker.
#[derive(Debug, Clone, Default)]
pub struct ScanClassification {
    /// Background voxels with their in-voxel point counts.
    pub background: BTreeMap<VoxelIndex, f64>,
    /// Voxels holding detected flying-object points (infinite weight).
    pub detected: Vec<VoxelIndex>,
    /// Unknown-cluster voxels with their in-voxel point counts.
    pub unknown: BTreeMap<VoxelIndex, f64>,
    pub detections: Vec<Detection>,
    pub clusters: Vec<Cluster>,
    /// Points that fell outside the mapped volume (they still take part in
    /// clustering but contribute no voxel weights).
    pub out_of_grid_points: usize,
}

struct Dsu {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let gp = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = gp;
            i = gp;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

fn bucket_key(p: &Point3, edge: f64) -> (i64, i64, i64) {
    (
        (p.x / edge).floor() as i64,
        (p.y / edge).floor() as i64,
        (p.z / edge).floor() as i64,
    )
}

/// Half of the 26-neighborhood; together with the same-bucket pass this
/// covers every bucket pair exactly once.
const FORWARD_OFFSETS: [(i64, i64, i64); 13] = [
    (1, 0, 0),
    (-1, 1, 0),
    (0, 1, 0),
    (1, 1, 0),
    (-1, -1, 1),
    (0, -1, 1),
    (1, -1, 1),
    (-1, 0, 1),
    (0, 0, 1),
    (1, 0, 1),
    (-1, 1, 1),
    (0, 1, 1),
    (1, 1, 1),
];

/// Groups points into clusters where membership is chain connectivity with
/// link length at most `d_cluster`. Output is canonical: each cluster's
/// indices ascend, and clusters are ordered by their smallest index.
pub fn extract_clusters(points: &[Point3], d_cluster: f64) -> Result<Vec<Vec<u32>>> {
    if !(d_cluster.is_finite() && d_cluster > 0.0) {
        return Err(Error::InvalidInput("d_cluster must be positive and finite".into()));
    }
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let d2 = d_cluster * d_cluster;

    // Sort point ids by bucket so each bucket is one contiguous run. Keys
    // ride along with the ids to keep the sort's memory access sequential.
    let mut keyed: Vec<((i64, i64, i64), u32)> =
        points.iter().enumerate().map(|(i, p)| (bucket_key(p, d_cluster), i as u32)).collect();
    keyed.sort_unstable();
    let order: Vec<u32> = keyed.iter().map(|&(_, i)| i).collect();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut by_key: HashMap<(i64, i64, i64), usize> = HashMap::default();
    let mut s = 0;
    while s < n {
        let k = keyed[s].0;
        let mut e = s + 1;
        while e < n && keyed[e].0 == k {
            e += 1;
        }
        by_key.insert(k, runs.len());
        runs.push((s, e));
        s = e;
    }

    // Points copied into bucket order so the pair loops scan contiguously.
    let sorted: Vec<Point3> = order.iter().map(|&i| points[i as usize]).collect();

    let mut dsu = Dsu::new(n);
    for &(s, e) in &runs {
        for a in s..e {
            let pa = sorted[a];
            for b in (a + 1)..e {
                if (sorted[b] - pa).norm_squared() <= d2 {
                    dsu.union(order[a], order[b]);
                }
            }
        }
    }

    // A run is uniform once all its points share one component; that can
    // only stay true under further unions, so `true` is never invalidated.
    let mut uniform: Vec<bool> = vec![false; runs.len()];
    let check_uniform = |dsu: &mut Dsu, uniform: &mut [bool], ri: usize| -> bool {
        if uniform[ri] {
            return true;
        }
        let (s, e) = runs[ri];
        let r0 = dsu.find(order[s]);
        let u = (s + 1..e).all(|a| dsu.find(order[a]) == r0);
        uniform[ri] = u;
        u
    };

    for (ri, &(s, e)) in runs.iter().enumerate() {
        let k = keyed[s].0;
        for off in FORWARD_OFFSETS {
            let nk = (k.0 + off.0, k.1 + off.1, k.2 + off.2);
            let Some(&rj) = by_key.get(&nk) else { continue };
            let (s2, e2) = runs[rj];
            debug_assert_ne!(ri, rj);
            // When both runs are single components, block edges either all
            // land inside one merged component (skip) or the first hit
            // merges the two components and the rest are no-ops (stop).
            let both_uniform =
                check_uniform(&mut dsu, &mut uniform, ri) & check_uniform(&mut dsu, &mut uniform, rj);
            if both_uniform && dsu.find(order[s]) == dsu.find(order[s2]) {
                continue;
            }
            'block: for a in s..e {
                let pa = sorted[a];
                for b in s2..e2 {
                    if (sorted[b] - pa).norm_squared() <= d2 {
                        dsu.union(order[a], order[b]);
                        if both_uniform {
                            break 'block;
                        }
                    }
                }
            }
        }
    }

    let mut groups: HashMap<u32, Vec<u32>> = HashMap::default();
    for i in 0..n as u32 {
        groups.entry(dsu.find(i)).or_default().push(i);
    }
    let mut out: Vec<Vec<u32>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort_unstable_by_key(|g| g[0]);
    Ok(out)
}

/// True when some voxel whose value is at least `value_floor` has its center
/// strictly within `d_close` of `p`. The scan is bounded to the cube of
/// half-width `ceil(d_close / voxel_size)` voxels around the point's voxel.
pub fn near_occupied(p: &Point3, grid: &OccupancyGrid, d_close: f64, value_floor: f64) -> bool {
    let spec = grid.spec();
    let h = spec.voxel_size();
    let o = spec.origin();
    let dims = spec.dims();
    let hw = (d_close / h).ceil() as i64;
    let c = [
        ((p.x - o.x) / h).floor() as i64,
        ((p.y - o.y) / h).floor() as i64,
        ((p.z - o.z) / h).floor() as i64,
    ];
    let d2 = d_close * d_close;
    let near_at = |x: i64, y: i64, z: i64| -> bool {
        if x < 0 || y < 0 || z < 0 {
            return false;
        }
        let (x, y, z) = (x as u32, y as u32, z as u32);
        if x >= dims[0] || y >= dims[1] || z >= dims[2] {
            return false;
        }
        let v = VoxelIndex::new(x, y, z);
        if grid.value(v) < value_floor {
            return false;
        }
        (spec.voxel_center(v) - p).norm_squared() < d2
    };
    // The point's own voxel is the most common hit; test it first.
    if near_at(c[0], c[1], c[2]) {
        return true;
    }
    for dz in -hw..=hw {
        for dy in -hw..=hw {
            for dx in -hw..=hw {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                if near_at(c[0] + dx, c[1] + dy, c[2] + dz) {
                    return true;
                }
            }
        }
    }
    false
}

/// Breadth-first floating check. From each distinct voxel holding a cluster
/// point, the search expands through Uncertain voxels over 6-neighborhoods.
/// It fails (returns false) as soon as it visits a voxel that is at least
/// tentatively occupied, or any voxel whose Manhattan index distance from
/// the start reaches `floor(d_search / voxel_size)`. Confident-free voxels
/// are visited but never expanded, so observed free space bounds the
/// search. A cluster point outside the grid also fails the check.
pub fn is_floating(points: &[Point3], grid: &OccupancyGrid, d_search: f64) -> bool {
    let spec = grid.spec();
    let radius = (d_search / spec.voxel_size()).floor() as u64;
    let mut starts: Vec<VoxelIndex> = Vec::new();
    for p in points {
        match spec.voxel_of(p) {
            Some(v) => starts.push(v),
            None => return false,
        }
    }
    starts.sort_unstable();
    starts.dedup();

    let thresholds = *grid.thresholds();
    let mut seen: HashSet<VoxelIndex> = HashSet::default();
    let mut queue: VecDeque<VoxelIndex> = VecDeque::new();
    for &start in &starts {
        seen.clear();
        queue.clear();
        seen.insert(start);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let g = grid.value(v);
            if g >= thresholds.tentative {
                return false;
            }
            if v.manhattan(&start) >= radius {
                return false;
            }
            if classify_value(g, &thresholds) == VoxelState::Uncertain {
                for d in [[1i64, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] {
                    if let Some(nb) = spec.offset(v, d) {
                        if seen.insert(nb) {
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }
    }
    true
}

fn classify_value(g: f64, t: &crate::occupancy::Thresholds) -> VoxelState {
    crate::occupancy::classify(g, t)
}

/// Applies the three rules in order to one cluster's points.
pub fn classify_cluster(
    points: &[Point3],
    grid: &OccupancyGrid,
    params: &DetectorParams,
) -> ClusterLabel {
    let floor = params.near_value_floor.unwrap_or(grid.thresholds().tentative);
    if points.iter().any(|p| near_occupied(p, grid, params.d_close, floor)) {
        return ClusterLabel::Background;
    }
    if is_floating(points, grid, params.d_search) {
        return ClusterLabel::FlyingObject;
    }
    ClusterLabel::Unknown
}

/// Clusters and classifies one scan's world-frame points, producing the
/// per-voxel weight sets and the detections.
pub fn process_scan(
    points: &[Point3],
    timestamp: f64,
    grid: &OccupancyGrid,
    params: &DetectorParams,
) -> Result<ScanClassification> {
    params.validate()?;
    let spec = grid.spec();
    let mut out = ScanClassification::default();
    let groups = extract_clusters(points, params.d_cluster)?;
    let mut counted_out_of_grid = vec![false; points.len()];
    let mut background: HashMap<VoxelIndex, f64> = HashMap::default();
    let mut unknown: HashMap<VoxelIndex, f64> = HashMap::default();
    for ids in groups {
        let cluster_points: Vec<Point3> = ids.iter().map(|&i| points[i as usize]).collect();
        let mut label = classify_cluster(&cluster_points, grid, params);
        if label == ClusterLabel::FlyingObject && ids.len() < params.min_cluster_points {
            label = ClusterLabel::Unknown;
        }
        match label {
            ClusterLabel::FlyingObject => {
                let mut sum = nalgebra::Vector3::zeros();
                for p in &cluster_points {
                    sum += p.coords;
                }
                out.detections.push(Detection {
                    position: Point3::from(sum / cluster_points.len() as f64),
                    point_count: cluster_points.len(),
                    timestamp,
                });
                for p in &cluster_points {
                    // classify_cluster only returns FlyingObject when every
                    // point maps into the grid.
                    let v = spec.voxel_of(p).expect("flying cluster points are in-grid");
                    out.detected.push(v);
                }
            }
            ClusterLabel::Background | ClusterLabel::Unknown => {
                let map = if label == ClusterLabel::Background {
                    &mut background
                } else {
                    &mut unknown
                };
                for (&id, p) in ids.iter().zip(&cluster_points) {
                    match spec.voxel_of(p) {
                        Some(v) => *map.entry(v).or_insert(0.0) += 1.0,
                        None => {
                            if !counted_out_of_grid[id as usize] {
                                counted_out_of_grid[id as usize] = true;
                                out.out_of_grid_points += 1;
                            }
                        }
                    }
                }
            }
        }
        out.clusters.push(Cluster { point_ids: ids, label });
    }
    out.detected.sort_unstable();
    out.detected.dedup();
    out.background = background.into_iter().collect();
    out.unknown = unknown.into_iter().collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridSpec, Vec3};
    use crate::occupancy::{Coefficients, Thresholds, WeightedUpdate};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid_16(voxel: f64) -> OccupancyGrid {
        let spec = GridSpec::new(Vec3::zeros(), voxel, [16, 16, 16]).unwrap();
        OccupancyGrid::new(spec, Thresholds::default(), Coefficients::default())
    }

    /// Sets a voxel's value exactly by applying an infinite-weight update.
    fn set_value(grid: &mut OccupancyGrid, v: VoxelIndex, g: f64) {
        grid.apply_updates(&[WeightedUpdate { voxel: v, coefficient: g, weight: f64::INFINITY }])
            .unwrap();
    }

    fn set_all(grid: &mut OccupancyGrid, g: f64) {
        let dims = grid.spec().dims();
        let mut batch = Vec::new();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    batch.push(WeightedUpdate {
                        voxel: VoxelIndex::new(x, y, z),
                        coefficient: g,
                        weight: f64::INFINITY,
                    });
                }
            }
        }
        grid.apply_updates(&batch).unwrap();
    }

    #[test]
    fn pair_within_reach_is_one_cluster() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.2, 0.0, 0.0)];
        assert_eq!(extract_clusters(&pts, 0.25).unwrap().len(), 1);
    }

    #[test]
    fn pair_beyond_reach_splits() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.3, 0.0, 0.0)];
        assert_eq!(extract_clusters(&pts, 0.25).unwrap().len(), 2);
    }

    #[test]
    fn chain_connectivity_joins_distant_ends() {
        let pts: Vec<Point3> = (0..5).map(|i| Point3::new(0.2 * i as f64, 0.0, 0.0)).collect();
        let clusters = extract_clusters(&pts, 0.25).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0], vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn empty_input_empty_output() {
        assert!(extract_clusters(&[], 0.25).unwrap().is_empty());
    }

    /// O(n²) union-find over the proximity graph, with none of the bucket
    /// machinery.
    fn brute_force_clusters(points: &[Point3], d: f64) -> Vec<Vec<u32>> {
        let n = points.len();
        let mut dsu = Dsu::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if (points[j] - points[i]).norm() <= d {
                    dsu.union(i as u32, j as u32);
                }
            }
        }
        let mut groups: HashMap<u32, Vec<u32>> = HashMap::default();
        for i in 0..n as u32 {
            groups.entry(dsu.find(i)).or_default().push(i);
        }
        let mut out: Vec<Vec<u32>> = groups.into_values().collect();
        for g in &mut out {
            g.sort_unstable();
        }
        out.sort_unstable_by_key(|g| g[0]);
        out
    }

    #[test]
    fn clustering_matches_proximity_graph_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..60 {
            let n = rng.gen_range(2..80);
            let scale = if case % 2 == 0 { 1.0 } else { 0.4 };
            let pts: Vec<Point3> = (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-scale..scale),
                        rng.gen_range(-scale..scale),
                        rng.gen_range(-scale..scale),
                    )
                })
                .collect();
            let got = extract_clusters(&pts, 0.25).unwrap();
            let want = brute_force_clusters(&pts, 0.25);
            assert_eq!(got, want, "case {case} with {n} points");
        }
    }

    #[test]
    fn cluster_partition_properties_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point3> = (0..120)
            .map(|_| {
                Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let d = 0.25;
        let clusters = extract_clusters(&pts, d).unwrap();
        let total: usize = clusters.iter().map(Vec::len).sum();
        assert_eq!(total, pts.len());
        // Cross-cluster separation is strictly greater than d.
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        assert!((pts[i as usize] - pts[j as usize]).norm() > d);
                    }
                }
            }
        }
    }

    #[test]
    fn near_occupied_respects_metric_radius() {
        let mut grid = grid_16(0.25);
        // Center of voxel (8,8,8) sits at (2.125, 2.125, 2.125).
        set_value(&mut grid, VoxelIndex::new(8, 8, 8), 0.0);
        let center = Point3::new(2.125, 2.125, 2.125);
        let at = |d: f64| Point3::new(center.x + d, center.y, center.z);
        let floor = grid.thresholds().tentative;
        assert!(near_occupied(&at(0.5), &grid, 0.7, floor));
        assert!(!near_occupied(&at(0.71), &grid, 0.7, floor));
    }

    #[test]
    fn near_occupied_false_on_free_grid() {
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        let floor = grid.thresholds().tentative;
        assert!(!near_occupied(&Point3::new(2.0, 2.0, 2.0), &grid, 0.7, floor));
    }

    #[test]
    fn near_occupied_value_floor_is_inclusive() {
        let mut grid = grid_16(0.25);
        set_value(&mut grid, VoxelIndex::new(8, 8, 8), -300.0);
        let p = Point3::new(2.125, 2.125, 2.125);
        assert!(near_occupied(&p, &grid, 0.7, -300.0));
        assert!(!near_occupied(&p, &grid, 0.7, -0.1));
    }

    #[test]
    fn floating_when_surrounded_by_free() {
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        // Leave the cluster's own voxel uncertain.
        set_value(&mut grid, VoxelIndex::new(8, 8, 8), -740.0);
        let p = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8));
        assert!(is_floating(&[p], &grid, 3.0));
    }

    #[test]
    fn uncertain_corridor_to_structure_fails() {
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        // Corridor of uncertain voxels from (8,8,8) to an occupied voxel.
        for x in 8..12 {
            set_value(&mut grid, VoxelIndex::new(x, 8, 8), -740.0);
        }
        set_value(&mut grid, VoxelIndex::new(12, 8, 8), 0.0);
        let p = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8));
        assert!(!is_floating(&[p], &grid, 3.0));
    }

    #[test]
    fn unbounded_uncertainty_fails_at_search_border() {
        let grid = grid_16(0.25); // everything uncertain
        let p = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8));
        assert!(!is_floating(&[p], &grid, 3.0));
    }

    #[test]
    fn out_of_grid_point_is_not_floating() {
        let grid = grid_16(0.25);
        assert!(!is_floating(&[Point3::new(-5.0, 0.0, 0.0)], &grid, 3.0));
    }

    /// Plain reachability oracle: expand every Uncertain voxel with no early
    /// exits, then judge the full visited set.
    fn floating_oracle(starts: &[VoxelIndex], grid: &OccupancyGrid, radius: u64) -> bool {
        let spec = grid.spec();
        let t = grid.thresholds();
        for &start in starts {
            let mut seen = HashSet::default();
            let mut queue = VecDeque::new();
            seen.insert(start);
            queue.push_back(start);
            let mut visited = Vec::new();
            while let Some(v) = queue.pop_front() {
                visited.push(v);
                if crate::occupancy::classify(grid.value(v), t) == VoxelState::Uncertain {
                    for d in [[1i64, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] {
                        if let Some(nb) = spec.offset(v, d) {
                            if seen.insert(nb) {
                                queue.push_back(nb);
                            }
                        }
                    }
                }
            }
            let ok = visited.iter().all(|v| {
                grid.value(*v) < t.tentative && v.manhattan(&start) < radius
            });
            if !ok {
                return false;
            }
        }
        true
    }

    #[test]
    fn floating_check_matches_reachability_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = GridSpec::new(Vec3::zeros(), 0.25, [20, 20, 20]).unwrap();
        for _ in 0..60 {
            let mut grid =
                OccupancyGrid::new(spec.clone(), Thresholds::default(), Coefficients::default());
            let mut batch = Vec::new();
            for z in 0..20 {
                for y in 0..20 {
                    for x in 0..20 {
                        // Mostly free and uncertain with occasional structure.
                        let g = match rng.gen_range(0..10) {
                            0 => 0.0,
                            1 => -200.0,
                            2..=5 => -740.0,
                            _ => -1000.0,
                        };
                        batch.push(WeightedUpdate {
                            voxel: VoxelIndex::new(x, y, z),
                            coefficient: g,
                            weight: f64::INFINITY,
                        });
                    }
                }
            }
            grid.apply_updates(&batch).unwrap();
            let start = VoxelIndex::new(
                rng.gen_range(0..20),
                rng.gen_range(0..20),
                rng.gen_range(0..20),
            );
            let p = grid.spec().voxel_center(start);
            let d_search = 1.5f64;
            let radius = (d_search / 0.25).floor() as u64;
            assert_eq!(
                is_floating(&[p], &grid, d_search),
                floating_oracle(&[start], &grid, radius),
            );
        }
    }

    #[test]
    fn rules_apply_in_order() {
        let params = DetectorParams::default();
        // Rule 1: a point near structure is background even in free space.
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        set_value(&mut grid, VoxelIndex::new(8, 8, 8), 0.0);
        let near = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8)) + Vec3::new(0.3, 0.0, 0.0);
        assert_eq!(classify_cluster(&[near], &grid, &params), ClusterLabel::Background);

        // Rule 2: isolated cluster in well-observed free space.
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        set_value(&mut grid, VoxelIndex::new(4, 4, 8), -740.0);
        let p = grid.spec().voxel_center(VoxelIndex::new(4, 4, 8));
        assert_eq!(classify_cluster(&[p], &grid, &params), ClusterLabel::FlyingObject);

        // Rule 3: unexplored region.
        let grid = grid_16(0.25);
        let p = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8));
        assert_eq!(classify_cluster(&[p], &grid, &params), ClusterLabel::Unknown);
    }

    #[test]
    fn process_scan_empty_input() {
        let grid = grid_16(0.25);
        let out = process_scan(&[], 1.0, &grid, &DetectorParams::default()).unwrap();
        assert!(out.background.is_empty());
        assert!(out.detected.is_empty());
        assert!(out.unknown.is_empty());
        assert!(out.detections.is_empty());
    }

    #[test]
    fn process_scan_reports_detection_at_mean() {
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        set_value(&mut grid, VoxelIndex::new(8, 8, 8), -740.0);
        let c = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8));
        let pts = vec![
            c + Vec3::new(0.05, 0.0, 0.0),
            c + Vec3::new(-0.05, 0.0, 0.0),
            c + Vec3::new(0.0, 0.05, 0.0),
            c + Vec3::new(0.0, -0.05, 0.0),
        ];
        let out = process_scan(&pts, 2.5, &grid, &DetectorParams::default()).unwrap();
        assert_eq!(out.detections.len(), 1);
        let det = &out.detections[0];
        assert_eq!(det.point_count, 4);
        assert_eq!(det.timestamp, 2.5);
        assert_relative_eq!((det.position - c).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(out.detected, vec![VoxelIndex::new(8, 8, 8)]);
    }

    #[test]
    fn process_scan_counts_background_points_per_voxel() {
        let mut grid = grid_16(0.25);
        set_all(&mut grid, -1000.0);
        set_value(&mut grid, VoxelIndex::new(8, 8, 8), 0.0);
        let c = grid.spec().voxel_center(VoxelIndex::new(8, 8, 8));
        // Three points in the occupied voxel, one in its neighbor.
        let pts = vec![
            c,
            c + Vec3::new(0.05, 0.0, 0.0),
            c + Vec3::new(-0.05, 0.0, 0.0),
            c + Vec3::new(0.25, 0.0, 0.0),
        ];
        let out = process_scan(&pts, 0.0, &grid, &DetectorParams::default()).unwrap();
        assert!(out.detections.is_empty());
        assert_eq!(out.background.get(&VoxelIndex::new(8, 8, 8)), Some(&3.0));
        assert_eq!(out.background.get(&VoxelIndex::new(9, 8, 8)), Some(&1.0));
    }

    #[test]
    fn process_scan_point_sets_are_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut grid = grid_16(0.25);
        let mut batch = Vec::new();
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let g = match rng.gen_range(0..8) {
                        0 => 0.0,
                        1..=3 => -740.0,
                        _ => -1000.0,
                    };
                    batch.push(WeightedUpdate {
                        voxel: VoxelIndex::new(x, y, z),
                        coefficient: g,
                        weight: f64::INFINITY,
                    });
                }
            }
        }
        grid.apply_updates(&batch).unwrap();
        let pts: Vec<Point3> = (0..300)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.5..4.5),
                    rng.gen_range(-0.5..4.5),
                    rng.gen_range(-0.5..4.5),
                )
            })
            .collect();
        let out = process_scan(&pts, 0.0, &grid, &DetectorParams::default()).unwrap();
        let mut seen = vec![false; pts.len()];
        let mut total = 0;
        for c in &out.clusters {
            for &i in &c.point_ids {
                assert!(!seen[i as usize], "point {i} appears in two clusters");
                seen[i as usize] = true;
                total += 1;
            }
        }
        assert_eq!(total, pts.len());
    }

    #[test]
    fn visible_hemisphere_centroid_bias_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let radius = rng.gen_range(0.2..2.0);
            let center = Point3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let view = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            // Sample the hemisphere facing the viewer.
            let mut sum = Vec3::zeros();
            let mut n = 0;
            while n < 200 {
                let q = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if q.norm() > 1.0 || q.norm() < 1e-6 {
                    continue;
                }
                let dir = q.normalize();
                if dir.dot(&view) < 0.0 {
                    continue;
                }
                sum += center.coords + radius * dir;
                n += 1;
            }
            let centroid = sum / n as f64;
            let bias = (centroid - center.coords).norm();
            assert!(bias >= 0.0 && bias <= radius + 1e-9, "bias {bias} radius {radius}");
        }
    }
}
