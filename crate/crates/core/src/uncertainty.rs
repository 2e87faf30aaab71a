//! Measurement-uncertainty analysis.
//!
//! A LiDAR point is a function of the sensor pose (translation and
//! intrinsic z-y-x angles) and the measured range. Gaussian noise on those
//! seven inputs maps to a 3x3 world-frame point covariance through the
//! measurement Jacobian. From that covariance this module computes the
//! probability that the point's voxel was really hit (a Gaussian integral
//! over an axis-aligned box, evaluated by sequential-conditioning
//! quadrature), and, independently, the probability that a spherical
//! target at a given distance is intersected by at least one ray of a
//! spinning multi-beam sensor (a union of spherical caps, Monte Carlo
//! estimated).

use crate::error::{Error, Result};
use crate::geometry::{rot_x, rot_y, rot_z, GridSpec, Point3, Pose, Vec3};
use crate::scan::SensorLayout;
use nalgebra::{Matrix3, SMatrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2, TAU};

pub type Matrix7 = SMatrix<f64, 7, 7>;
pub type Jacobian = SMatrix<f64, 3, 7>;

/// Covariance over the measurement inputs
/// `w = (t_x, t_y, t_z, alpha, beta, gamma, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    sigma: Matrix7,
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self { sigma: Matrix7::zeros() }
    }

    /// Independent noise given as standard deviations.
    pub fn from_sigmas(translation: [f64; 3], angles: [f64; 3], range: f64) -> Result<Self> {
        let mut sigma = Matrix7::zeros();
        for (i, s) in translation.iter().chain(angles.iter()).chain([range].iter()).enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(Error::InvalidInput(
                    "noise standard deviations must be nonnegative and finite".into(),
                ));
            }
            sigma[(i, i)] = s * s;
        }
        Ok(Self { sigma })
    }

    /// Full covariance matrix; must be symmetric positive semi-definite.
    pub fn from_matrix(sigma: Matrix7) -> Result<Self> {
        let asym = (sigma - sigma.transpose()).norm();
        let scale = sigma.norm().max(1.0);
        if asym > 1e-9 * scale {
            return Err(Error::InvalidInput("noise covariance must be symmetric".into()));
        }
        let sym = (sigma + sigma.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        if eig.eigenvalues.iter().any(|&l| l < -1e-9 * max.max(1.0)) {
            return Err(Error::InvalidInput("noise covariance must be positive semi-definite".into()));
        }
        Ok(Self { sigma: sym })
    }

    pub fn matrix(&self) -> &Matrix7 {
        &self.sigma
    }

    pub fn is_zero(&self) -> bool {
        self.sigma.iter().all(|&v| v == 0.0)
    }
}

fn drot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn drot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_z(g: f64) -> Matrix3<f64> {
    let (s, c) = g.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Jacobian of the world point with respect to the seven measurement
/// inputs, evaluated at the measured pose and range. Columns: the three
/// translation directions (identity), the three angle derivatives scaled
/// by the range lever arm, and the ray direction for the range itself.
pub fn jacobian(pose: &Pose, d: &Vec3, l: f64) -> Result<Jacobian> {
    if (d.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("ray direction must be a unit vector".into()));
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::InvalidInput("range must be nonnegative and finite".into()));
    }
    let rx = rot_x(pose.alpha);
    let ry = rot_y(pose.beta);
    let rz = rot_z(pose.gamma);
    let col_alpha = l * (rz * ry * drot_x(pose.alpha) * d);
    let col_beta = l * (rz * drot_y(pose.beta) * rx * d);
    let col_gamma = l * (drot_z(pose.gamma) * ry * rx * d);
    let col_range = rz * ry * rx * d;
    let mut j = Jacobian::zeros();
    for k in 0..3 {
        j[(k, k)] = 1.0;
        j[(k, 3)] = col_alpha[k];
        j[(k, 4)] = col_beta[k];
        j[(k, 5)] = col_gamma[k];
        j[(k, 6)] = col_range[k];
    }
    Ok(j)
}

/// First-order propagation of the input covariance to the point.
pub fn propagate(j: &Jacobian, noise: &NoiseSpec) -> Matrix3<f64> {
    let s = j * noise.sigma * j.transpose();
    (s + s.transpose()) * 0.5
}

fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn phi_inv(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    -SQRT_2 * erfc_inv(2.0 * p)
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gl8_cell<F: Fn(f64, f64) -> f64>(f: &F, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut sum = 0.0;
    for (i, &xi) in GL8_NODES.iter().enumerate() {
        let x = cx + hx * xi;
        let mut row = 0.0;
        for (j, &yj) in GL8_NODES.iter().enumerate() {
            row += GL8_WEIGHTS[j] * f(x, cy + hy * yj);
        }
        sum += GL8_WEIGHTS[i] * row;
    }
    sum * hx * hy
}

fn adaptive_cell<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let whole = gl8_cell(f, x0, x1, y0, y1);
    let xm = 0.5 * (x0 + x1);
    let ym = 0.5 * (y0 + y1);
    let split = gl8_cell(f, x0, xm, y0, ym)
        + gl8_cell(f, xm, x1, y0, ym)
        + gl8_cell(f, x0, xm, ym, y1)
        + gl8_cell(f, xm, x1, ym, y1);
    if (whole - split).abs() <= tol.max(1e-15) || depth >= 9 {
        return split;
    }
    let t = tol * 0.25;
    adaptive_cell(f, x0, xm, y0, ym, t, depth + 1)
        + adaptive_cell(f, xm, x1, y0, ym, t, depth + 1)
        + adaptive_cell(f, x0, xm, ym, y1, t, depth + 1)
        + adaptive_cell(f, xm, x1, ym, y1, t, depth + 1)
}

/// Probability mass of a trivariate Gaussian inside an axis-aligned box.
///
/// Nearly singular covariances are regularized by flooring eigenvalues at
/// a small fraction of the largest one, which concentrates the remaining
/// directions without changing well-conditioned results. A zero covariance
/// degenerates to the half-open box indicator at the mean.
pub fn mvn_box_probability(
    mean: &Point3,
    sigma: &Matrix3<f64>,
    lo: &Point3,
    hi: &Point3,
) -> Result<f64> {
    if lo.x > hi.x || lo.y > hi.y || lo.z > hi.z {
        return Err(Error::InvalidInput("box must satisfy lo <= hi".into()));
    }
    let asym = (sigma - sigma.transpose()).norm();
    if asym > 1e-9 * sigma.norm().max(1.0) {
        return Err(Error::InvalidInput("covariance must be symmetric".into()));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * max.max(1.0)) {
        return Err(Error::InvalidInput("covariance must be positive semi-definite".into()));
    }
    if max <= 0.0 {
        let inside = (0..3).all(|k| lo[k] <= mean[k] && mean[k] < hi[k]);
        return Ok(if inside { 1.0 } else { 0.0 });
    }
    let floor = max * 1e-12;
    let mut vals = eig.eigenvalues;
    for v in vals.iter_mut() {
        *v = v.max(floor);
    }
    let rebuilt = eig.eigenvectors * Matrix3::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let chol = rebuilt
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance factorization failed".into()))?;
    let l = chol.l();

    let a = [lo.x - mean.x, lo.y - mean.y, lo.z - mean.z];
    let b = [hi.x - mean.x, hi.y - mean.y, hi.z - mean.z];
    let d1 = phi(a[0] / l[(0, 0)]);
    let e1 = phi(b[0] / l[(0, 0)]);
    let f1 = e1 - d1;
    if f1 <= 0.0 {
        return Ok(0.0);
    }
    let integrand = |w1: f64, w2: f64| -> f64 {
        let y1 = phi_inv(d1 + w1 * (e1 - d1));
        let d2 = phi((a[1] - l[(1, 0)] * y1) / l[(1, 1)]);
        let e2 = phi((b[1] - l[(1, 0)] * y1) / l[(1, 1)]);
        let f2 = e2 - d2;
        if f2 <= 0.0 {
            return 0.0;
        }
        let y2 = phi_inv(d2 + w2 * (e2 - d2));
        let d3 = phi((a[2] - l[(2, 0)] * y1 - l[(2, 1)] * y2) / l[(2, 2)]);
        let e3 = phi((b[2] - l[(2, 0)] * y1 - l[(2, 1)] * y2) / l[(2, 2)]);
        f2 * (e3 - d3).max(0.0)
    };
    let inner = adaptive_cell(&integrand, 0.0, 1.0, 0.0, 1.0, 1e-8, 0);
    Ok((f1 * inner).clamp(0.0, 1.0))
}

/// Probability that the voxel containing the measured point was really hit,
/// i.e. the Gaussian mass inside that voxel's box.
pub fn voxel_hit_probability(p_m: &Point3, sigma: &Matrix3<f64>, grid: &GridSpec) -> Result<f64> {
    let v = grid
        .voxel_of(p_m)
        .ok_or_else(|| Error::InvalidInput("measured point is outside the grid".into()))?;
    let (lo, hi) = grid.voxel_box(v);
    mvn_box_probability(p_m, sigma, &lo, &hi)
}

/// Hit probability as a function of range for one sensor ray under a fixed
/// noise model. The voxel is taken as a box of edge `voxel_size` centered
/// on the measured point, which makes the curve independent of how the
/// measurement happens to straddle a particular grid's voxel boundaries.
pub fn hit_probability_curve(
    noise: &NoiseSpec,
    pose: &Pose,
    d: &Vec3,
    voxel_size: f64,
    distances: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(Error::InvalidInput("voxel_size must be positive".into()));
    }
    let half = 0.5 * voxel_size;
    let lo = Point3::new(-half, -half, -half);
    let hi = Point3::new(half, half, half);
    let origin = Point3::origin();
    let mut out = Vec::with_capacity(distances.len());
    for &l in distances {
        let j = jacobian(pose, d, l)?;
        let sigma = propagate(&j, noise);
        let p = mvn_box_probability(&origin, &sigma, &lo, &hi)?;
        out.push((l, p));
    }
    Ok(out)
}

/// Probability that a single ray pointing uniformly at random intersects a
/// target of presented area `a_p` at distance `l`: the area fraction of the
/// radius-`l` sphere the target covers.
pub fn intersection_probability_single(a_p: f64, l: f64) -> Result<f64> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidInput("distance must be positive".into()));
    }
    let total = 4.0 * PI * l * l;
    if !(a_p.is_finite() && (0.0..=total).contains(&a_p)) {
        return Err(Error::InvalidInput(format!(
            "presented area must lie in [0, {total}], got {a_p}"
        )));
    }
    Ok(a_p / total)
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub p: f64,
    pub std_error: f64,
}

/// Probability that a sphere of radius `a`, centered at distance `l` in a
/// uniformly random direction, is intersected by at least one sensor ray.
/// Each ray covers a spherical cap of angular radius `asin(a/l)` around its
/// direction; the estimate is the sampled area fraction of the cap union.
pub fn detection_probability(
    layout: &SensorLayout,
    a: f64,
    l: f64,
    samples: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    if !(a.is_finite() && a > 0.0 && l.is_finite() && l > 0.0) {
        return Err(Error::InvalidInput("target radius and distance must be positive".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    if a >= l {
        return Ok(ProbabilityEstimate { p: 1.0, std_error: 0.0 });
    }
    let theta = (a / l).asin();
    let cos_theta = theta.cos();
    let elevations = layout.elevations();
    let az_step = TAU / layout.cols as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let az: f64 = rng.gen_range(0.0..TAU);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let dir = Vec3::new(s * az.cos(), s * az.sin(), z);
        if direction_hits_any_ray(&dir, &elevations, layout.cols, az_step, theta, cos_theta) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let std_error = (p * (1.0 - p) / samples as f64).sqrt();
    Ok(ProbabilityEstimate { p, std_error })
}

/// Exact membership test for the cap union. The angle between `dir` and a
/// ray is at least their elevation difference, so only rows within `theta`
/// in elevation can match; within a row the angle is minimized at the
/// azimuthally nearest column because the azimuth term enters through
/// `cos(delta_az)` with a nonnegative factor.
fn direction_hits_any_ray(
    dir: &Vec3,
    elevations: &[f64],
    cols: usize,
    az_step: f64,
    theta: f64,
    cos_theta: f64,
) -> bool {
    let el = dir.z.clamp(-1.0, 1.0).asin();
    let mut az = dir.y.atan2(dir.x);
    if az < 0.0 {
        az += TAU;
    }
    let lo = elevations.partition_point(|&e| e < el - theta - 1e-12);
    let (sin_el, cos_el) = el.sin_cos();
    for &el_r in elevations.iter().skip(lo) {
        if el_r > el + theta + 1e-12 {
            break;
        }
        let mut c = (az / az_step).round() as i64;
        if c >= cols as i64 {
            c -= cols as i64;
        }
        let d_az = az - c as f64 * az_step;
        let (sin_r, cos_r) = el_r.sin_cos();
        let cos_angle = sin_el * sin_r + cos_el * cos_r * d_az.cos();
        if cos_angle >= cos_theta {
            return true;
        }
    }
    false
}
