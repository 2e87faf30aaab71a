//! Shared geometric primitives: points, rigid sensor poses and the voxel
//! indexing scheme used by the occupancy map, the raycaster and the detector.
//!
//! Voxel convention: a grid is an axis-aligned box anchored at `origin` with
//! cubic voxels of edge `voxel_size`. A point belongs to the voxel whose
//! half-open cube `[lo, lo + h)` contains it, so points exactly on a shared
//! face belong to the upper neighbor and every point maps to at most one
//! voxel.

use crate::error::{Error, Result};
use nalgebra::Matrix3;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Point3 = nalgebra::Point3<f64>;

/// Rotation about the x axis.
pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the y axis.
pub fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the z axis.
pub fn rot_z(g: f64) -> Matrix3<f64> {
    let (s, c) = g.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Intrinsic z-y-x rotation `R_z(gamma) * R_y(beta) * R_x(alpha)`.
pub fn rot_zyx(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    rot_z(gamma) * rot_y(beta) * rot_x(alpha)
}

/// Rigid sensor pose: translation plus intrinsic z-y-x Euler orientation.
///
/// The rotation matrix is derived once on construction and kept consistent
/// with the stored angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    /// Rotation about x, applied first.
    pub alpha: f64,
    /// Rotation about y, applied second.
    pub beta: f64,
    /// Rotation about z, applied last.
    pub gamma: f64,
    rotation: Matrix3<f64>,
}

impl Pose {
    pub fn new(translation: Vec3, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(translation.iter().all(|v| v.is_finite())
            && alpha.is_finite()
            && beta.is_finite()
            && gamma.is_finite())
        {
            return Err(Error::InvalidInput("pose components must be finite".into()));
        }
        Ok(Self { translation, alpha, beta, gamma, rotation: rot_zyx(alpha, beta, gamma) })
    }

    pub fn identity() -> Self {
        Self { translation: Vec3::zeros(), alpha: 0.0, beta: 0.0, gamma: 0.0, rotation: Matrix3::identity() }
    }

    /// Builds a pose from an explicit rotation matrix, checking that it is
    /// orthonormal with determinant +1 to within `1e-9`, and recovers the
    /// z-y-x Euler angles.
    pub fn from_rotation_matrix(translation: Vec3, rotation: Matrix3<f64>) -> Result<Self> {
        let residual = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if residual > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "rotation matrix is not orthonormal (residual {residual:.3e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("rotation matrix must have determinant +1".into()));
        }
        // Angles of R = Rz(g) Ry(b) Rx(a); at the |cos b| ~ 0 singularity only
        // the sum/difference of a and g is observable, so fix a = 0 there.
        let beta = (-rotation[(2, 0)]).asin();
        let (alpha, gamma) = if rotation[(2, 0)].abs() < 1.0 - 1e-12 {
            (
                rotation[(2, 1)].atan2(rotation[(2, 2)]),
                rotation[(1, 0)].atan2(rotation[(0, 0)]),
            )
        } else {
            (0.0, (-rotation[(0, 1)]).atan2(rotation[(1, 1)]))
        };
        Ok(Self { translation, alpha, beta, gamma, rotation })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// Maps a point from the sensor frame to the world frame.
    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Rotates a direction from the sensor frame to the world frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }
}

/// Index of one voxel inside a [`GridSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl VoxelIndex {
    pub fn new(x: u32, y: u32, z: u32) -> Self {
        Self { x, y, z }
    }

    /// Manhattan distance between two voxel indices, in voxels.
    pub fn manhattan(&self, other: &VoxelIndex) -> u64 {
        let d = |a: u32, b: u32| (a as i64 - b as i64).unsigned_abs();
        d(self.x, other.x) + d(self.y, other.y) + d(self.z, other.z)
    }
}

/// Placement and resolution of a voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    origin: Vec3,
    voxel_size: f64,
    dims: [u32; 3],
}

impl GridSpec {
    pub fn new(origin: Vec3, voxel_size: f64, dims: [u32; 3]) -> Result<Self> {
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::InvalidInput("voxel size must be positive".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput("grid dimensions must all be at least 1".into()));
        }
        let count = dims.iter().map(|&d| d as u128).product::<u128>();
        if count > usize::MAX as u128 / 8 {
            return Err(Error::InvalidInput("grid too large to allocate".into()));
        }
        Ok(Self { origin, voxel_size, dims })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    /// Upper corner of the grid box (exclusive).
    pub fn max_corner(&self) -> Vec3 {
        self.origin + Vec3::new(
            self.dims[0] as f64 * self.voxel_size,
            self.dims[1] as f64 * self.voxel_size,
            self.dims[2] as f64 * self.voxel_size,
        )
    }

    /// Row-major flat offset of a voxel (x fastest).
    pub fn flat(&self, v: VoxelIndex) -> usize {
        debug_assert!(self.contains_index(v));
        ((v.z as usize * self.dims[1] as usize) + v.y as usize) * self.dims[0] as usize
            + v.x as usize
    }

    pub fn from_flat(&self, flat: usize) -> VoxelIndex {
        let dx = self.dims[0] as usize;
        let dy = self.dims[1] as usize;
        VoxelIndex::new((flat % dx) as u32, ((flat / dx) % dy) as u32, (flat / (dx * dy)) as u32)
    }

    pub fn contains_index(&self, v: VoxelIndex) -> bool {
        v.x < self.dims[0] && v.y < self.dims[1] && v.z < self.dims[2]
    }

    /// Voxel containing a point, or `None` outside the grid. Lower faces are
    /// inclusive, upper faces exclusive.
    pub fn voxel_of(&self, p: &Point3) -> Option<VoxelIndex> {
        let mut idx = [0u32; 3];
        for a in 0..3 {
            let rel = (p[a] - self.origin[a]) / self.voxel_size;
            if !(0.0..self.dims[a] as f64).contains(&rel.floor()) {
                return None;
            }
            idx[a] = rel.floor() as u32;
        }
        Some(VoxelIndex::new(idx[0], idx[1], idx[2]))
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Point3 {
        Point3::new(
            self.origin.x + (v.x as f64 + 0.5) * self.voxel_size,
            self.origin.y + (v.y as f64 + 0.5) * self.voxel_size,
            self.origin.z + (v.z as f64 + 0.5) * self.voxel_size,
        )
    }

    /// Lower and upper corners of one voxel's cube.
    pub fn voxel_box(&self, v: VoxelIndex) -> (Point3, Point3) {
        let lo = Point3::new(
            self.origin.x + v.x as f64 * self.voxel_size,
            self.origin.y + v.y as f64 * self.voxel_size,
            self.origin.z + v.z as f64 * self.voxel_size,
        );
        let hi = Point3::new(
            lo.x + self.voxel_size,
            lo.y + self.voxel_size,
            lo.z + self.voxel_size,
        );
        (lo, hi)
    }

    /// Offsets a voxel index by a signed step, staying inside the grid.
    pub fn offset(&self, v: VoxelIndex, d: [i64; 3]) -> Option<VoxelIndex> {
        let x = v.x as i64 + d[0];
        let y = v.y as i64 + d[1];
        let z = v.z as i64 + d[2];
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let out = VoxelIndex::new(x as u32, y as u32, z as u32);
        self.contains_index(out).then_some(out)
    }
}
