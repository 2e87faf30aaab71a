//! Removal of detached occupied residue from the map.
//!
//! A flying object that rests on the ground long enough gets absorbed into
//! the occupied background; when it departs it leaves a trail of tentative
//! voxels behind. Those trails form occupied clusters that contain few or
//! no confidently occupied members, while real structure keeps a confident
//! core. This pass clusters all at-least-tentative voxels by center
//! distance and schedules every cluster below the confident-member floor
//! for one free-ward update, which with default values drops a tentative
//! voxel out of the occupied band in a single application.

use crate::error::{Error, Result};
use crate::geometry::VoxelIndex;
use crate::occupancy::{OccupancyGrid, WeightedUpdate};
use rustc_hash::FxHashMap as HashMap;

/// Connectivity radius giving 26-connected components: one voxel diagonal.
pub fn default_d_sep(voxel_size: f64) -> f64 {
    3.0f64.sqrt() * voxel_size
}

/// One connected component of at-least-tentative voxels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelCluster {
    pub voxels: Vec<VoxelIndex>,
    /// Members whose value is at or above the confident threshold.
    pub n_conf: usize,
}

/// Clusters every voxel with value at or above the tentative threshold.
/// Two voxels connect when their center distance is at most `d_sep`
/// (boundary inclusive up to numerical tolerance). Clusters are ordered by
/// their smallest voxel, members ascending.
pub fn cluster_occupied(grid: &OccupancyGrid, d_sep: f64) -> Result<Vec<VoxelCluster>> {
    if !(d_sep.is_finite() && d_sep > 0.0) {
        return Err(Error::InvalidInput("d_sep must be positive and finite".into()));
    }
    let spec = grid.spec();
    let h = spec.voxel_size();
    let occupied = grid.occupied_indices();
    if occupied.is_empty() {
        return Ok(Vec::new());
    }

    // Integer offsets whose center distance fits within d_sep.
    let r = d_sep / h;
    let r2 = r * r * (1.0 + 1e-12) + 1e-12;
    let reach = r.floor() as i64;
    let mut offsets: Vec<[i64; 3]> = Vec::new();
    for dz in -reach..=reach {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                if (dx * dx + dy * dy + dz * dz) as f64 <= r2 {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
    }

    // Dense slot lookup: flat index -> position in `occupied`, u32::MAX when
    // the voxel is not occupied.
    let mut slot: Vec<u32> = vec![u32::MAX; spec.voxel_count()];
    for (i, &v) in occupied.iter().enumerate() {
        slot[spec.flat(v)] = i as u32;
    }
    let mut parent: Vec<u32> = (0..occupied.len() as u32).collect();
    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            let gp = parent[parent[i as usize] as usize];
            parent[i as usize] = gp;
            i = gp;
        }
        i
    }
    for (i, &v) in occupied.iter().enumerate() {
        for off in &offsets {
            let Some(nb) = spec.offset(v, *off) else { continue };
            let j = slot[spec.flat(nb)];
            if j == u32::MAX {
                continue;
            }
            let (ri, rj) = (find(&mut parent, i as u32), find(&mut parent, j));
            if ri != rj {
                parent[rj as usize] = ri;
            }
        }
    }

    let confident = grid.thresholds().confident;
    let mut groups: HashMap<u32, VoxelCluster> = HashMap::default();
    for (i, &v) in occupied.iter().enumerate() {
        let root = find(&mut parent, i as u32);
        let c = groups.entry(root).or_insert_with(|| VoxelCluster { voxels: Vec::new(), n_conf: 0 });
        c.voxels.push(v);
        if grid.value(v) >= confident {
            c.n_conf += 1;
        }
    }
    let mut out: Vec<VoxelCluster> = groups.into_values().collect();
    for c in &mut out {
        c.voxels.sort_unstable();
    }
    out.sort_unstable_by(|a, b| a.voxels[0].cmp(&b.voxels[0]));
    Ok(out)
}

/// All voxels of every cluster whose confident-member count is below
/// `n_conf_min`, in ascending order.
pub fn select_separated(clusters: &[VoxelCluster], n_conf_min: usize) -> Vec<VoxelIndex> {
    let mut out: Vec<VoxelIndex> = clusters
        .iter()
        .filter(|c| c.n_conf < n_conf_min)
        .flat_map(|c| c.voxels.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

/// Runs both steps against a grid snapshot and emits one weight-1 free-ward
/// update per selected voxel.
pub fn separation_updates(
    grid: &OccupancyGrid,
    d_sep: f64,
    n_conf_min: usize,
) -> Result<Vec<WeightedUpdate>> {
    let clusters = cluster_occupied(grid, d_sep)?;
    let free = grid.coefficients().free;
    Ok(select_separated(&clusters, n_conf_min)
        .into_iter()
        .map(|voxel| WeightedUpdate { voxel, coefficient: free, weight: 1.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridSpec, Vec3};
    use crate::occupancy::{classify, Coefficients, Thresholds, VoxelState};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid_with(values: &[(VoxelIndex, f64)]) -> OccupancyGrid {
        let spec = GridSpec::new(Vec3::zeros(), 0.25, [24, 24, 24]).unwrap();
        let mut grid = OccupancyGrid::new(spec, Thresholds::default(), Coefficients::default());
        let batch: Vec<WeightedUpdate> = values
            .iter()
            .map(|&(voxel, g)| WeightedUpdate { voxel, coefficient: g, weight: f64::INFINITY })
            .collect();
        grid.apply_updates(&batch).unwrap();
        grid
    }

    #[test]
    fn separated_blobs_form_two_clusters() {
        let grid = grid_with(&[
            (VoxelIndex::new(2, 2, 2), 0.0),
            (VoxelIndex::new(3, 2, 2), 0.0),
            (VoxelIndex::new(6, 2, 2), -200.0),
            (VoxelIndex::new(7, 2, 2), -200.0),
        ]);
        let clusters = cluster_occupied(&grid, 0.25).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].n_conf, 2);
        assert_eq!(clusters[1].n_conf, 0);
    }

    #[test]
    fn empty_map_has_no_clusters() {
        let grid = grid_with(&[]);
        assert!(cluster_occupied(&grid, 0.25).unwrap().is_empty());
    }

    #[test]
    fn diagonal_default_connects_corner_neighbors() {
        let grid = grid_with(&[
            (VoxelIndex::new(2, 2, 2), 0.0),
            (VoxelIndex::new(3, 3, 3), 0.0),
        ]);
        let d = default_d_sep(0.25);
        assert_eq!(cluster_occupied(&grid, d).unwrap().len(), 1);
        // Face distance 1 voxel only: the corner pair splits.
        assert_eq!(cluster_occupied(&grid, 0.25).unwrap().len(), 2);
    }

    fn brute_force_components(grid: &OccupancyGrid, d_sep: f64) -> Vec<Vec<VoxelIndex>> {
        let occupied = grid.occupied_indices();
        let h = grid.spec().voxel_size();
        let n = occupied.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = grid.spec().voxel_center(occupied[i]);
                let b = grid.spec().voxel_center(occupied[j]);
                if (a - b).norm() <= d_sep + 1e-9 * h {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[rj] = ri;
                    }
                }
            }
        }
        let mut groups: HashMap<usize, Vec<VoxelIndex>> = HashMap::default();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(occupied[i]);
        }
        let mut out: Vec<Vec<VoxelIndex>> = groups.into_values().collect();
        for g in &mut out {
            g.sort_unstable();
        }
        out.sort_unstable_by(|a, b| a[0].cmp(&b[0]));
        out
    }

    #[test]
    fn clustering_matches_proximity_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let mut cells = Vec::new();
            for _ in 0..rng.gen_range(5..60) {
                let v = VoxelIndex::new(
                    rng.gen_range(0..10),
                    rng.gen_range(0..10),
                    rng.gen_range(0..10),
                );
                let g = if rng.gen_bool(0.3) { 0.0 } else { -250.0 };
                cells.push((v, g));
            }
            cells.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            cells.dedup_by_key(|c| c.0);
            let grid = grid_with(&cells);
            let d_sep = default_d_sep(0.25);
            let got: Vec<Vec<VoxelIndex>> = cluster_occupied(&grid, d_sep)
                .unwrap()
                .into_iter()
                .map(|c| c.voxels)
                .collect();
            assert_eq!(got, brute_force_components(&grid, d_sep));
        }
    }

    #[test]
    fn selection_keeps_confident_clusters() {
        // 30-voxel tentative line: selected in full.
        let mut cells: Vec<(VoxelIndex, f64)> =
            (0..30u32).map(|i| (VoxelIndex::new(i % 24, i / 24, 0), -200.0)).collect();
        // A separate slab with 24 confident voxels: kept.
        for x in 0..6u32 {
            for y in 0..4u32 {
                cells.push((VoxelIndex::new(x, y + 10, 10), 0.0));
            }
        }
        let grid = grid_with(&cells);
        let clusters = cluster_occupied(&grid, default_d_sep(0.25)).unwrap();
        assert_eq!(clusters.len(), 2);
        let selected = select_separated(&clusters, 24);
        assert_eq!(selected.len(), 30);
        assert!(selected.iter().all(|v| v.z == 0));
        for c in &clusters {
            if c.n_conf >= 24 {
                assert!(c.voxels.iter().all(|v| !selected.contains(v)));
            }
        }
    }

    #[test]
    fn single_pass_demotes_tentative_trail() {
        let v = VoxelIndex::new(5, 5, 5);
        let mut grid = grid_with(&[(v, -200.0)]);
        assert_eq!(grid.state(v), VoxelState::TentativeOccupied);
        let updates = separation_updates(&grid, default_d_sep(0.25), 24).unwrap();
        assert_eq!(updates.len(), 1);
        assert_eq!(updates[0].weight, 1.0);
        grid.apply_updates(&updates).unwrap();
        assert_eq!(grid.value(v), -600.0);
        assert_eq!(classify(grid.value(v), grid.thresholds()), VoxelState::Uncertain);
    }
}
