//! Organized-scan rendering: for every beam of the sensor layout, the
//! closest analytic intersection with the static scene and the target,
//! with optional Gaussian pose and range noise. The true pose drives the
//! geometry; the scan records the (possibly perturbed) measured pose, so a
//! noisy scan reprojects points exactly the way a real system would.

use crate::config::{ScenarioConfig, ShapeConfig};
use crate::scene::{target_hit, Scene};
use aerovox_core::scan::{CellKind, OrganizedScan};
use aerovox_core::{Point3, Pose, Vec3};
use anyhow::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub enabled: bool,
    /// Per-axis translation sigma, meters.
    pub sigma_translation: [f64; 3],
    /// Roll/pitch/yaw sigma, radians.
    pub sigma_angles: [f64; 3],
    /// Range sigma, meters.
    pub sigma_range: f64,
}

impl NoiseModel {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let n = &cfg.noise;
        Self {
            enabled: n.enabled,
            sigma_translation: n.sigma_translation,
            sigma_angles: n.sigma_angles_deg.map(f64::to_radians),
            sigma_range: n.sigma_range.unwrap_or(cfg.sensor.range_precision_m),
        }
    }

    pub fn none() -> Self {
        Self { enabled: false, sigma_translation: [0.0; 3], sigma_angles: [0.0; 3], sigma_range: 0.0 }
    }
}

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        sigma * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    }
}

/// Renders one scan at the given true pose. A disabled noise model never
/// touches the RNG, so noiseless runs are seed-independent.
#[allow(clippy::too_many_arguments)]
pub fn generate_scan<R: Rng>(
    scene: &Scene,
    target: Option<(&ShapeConfig, Point3)>,
    directions: &Arc<Vec<Vec3>>,
    masked: &[bool],
    max_range: f64,
    true_pose: &Pose,
    noise: &NoiseModel,
    rng: &mut R,
    rows: usize,
    cols: usize,
    timestamp: f64,
) -> Result<OrganizedScan> {
    let n = rows * cols;
    anyhow::ensure!(directions.len() == n, "direction table size mismatch");
    anyhow::ensure!(masked.len() == n, "mask table size mismatch");

    let recorded_pose = if noise.enabled {
        let t = true_pose.translation;
        let dt = Vec3::new(
            gauss(rng, noise.sigma_translation[0]),
            gauss(rng, noise.sigma_translation[1]),
            gauss(rng, noise.sigma_translation[2]),
        );
        Pose::new(
            t + dt,
            true_pose.alpha + gauss(rng, noise.sigma_angles[0]),
            true_pose.beta + gauss(rng, noise.sigma_angles[1]),
            true_pose.gamma + gauss(rng, noise.sigma_angles[2]),
        )?
    } else {
        true_pose.clone()
    };

    let origin = Point3::from(true_pose.translation);
    let mut ranges = vec![0.0f64; n];
    let mut kinds = vec![CellKind::Empty; n];
    for i in 0..n {
        if masked[i] {
            kinds[i] = CellKind::Masked;
            continue;
        }
        let dir = true_pose.rotate(&directions[i]);
        let mut best = scene.ray_range(&origin, &dir);
        if let Some((shape, center)) = target {
            if let Some(t) = target_hit(shape, &center, &origin, &dir) {
                if best.map_or(true, |cur| t < cur) {
                    best = Some(t);
                }
            }
        }
        match best {
            Some(r) if r <= max_range => {
                let measured = if noise.enabled {
                    (r + gauss(rng, noise.sigma_range)).max(1e-3)
                } else {
                    r
                };
                ranges[i] = measured;
                kinds[i] = CellKind::Return;
            }
            _ => kinds[i] = CellKind::Empty,
        }
    }

    Ok(OrganizedScan::new(rows, cols, ranges, kinds, directions.clone(), recorded_pose, timestamp)?)
}
