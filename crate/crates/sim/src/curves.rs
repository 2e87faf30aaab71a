//! Analytic curve generation: per-voxel hit probability under sensor noise
//! and whole-target detection probability, both as functions of distance.

use crate::config::{ScenarioConfig, ShapeConfig};
use anyhow::{bail, Context, Result};
use aerovox_core::uncertainty::{detection_probability, hit_probability_curve, NoiseSpec};
use aerovox_core::{Pose, Vec3};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn distances(cfg: &ScenarioConfig) -> Vec<f64> {
    let c = &cfg.curves;
    let mut out = Vec::new();
    let mut d = c.distance_start;
    while d <= c.distance_stop + 1e-12 {
        out.push(d);
        d += c.distance_step;
    }
    out
}

fn noise_spec(cfg: &ScenarioConfig) -> Result<NoiseSpec> {
    let n = &cfg.noise;
    let angles: Vec<f64> = n.sigma_angles_deg.iter().map(|a| a.to_radians()).collect();
    let range = n.sigma_range.unwrap_or(cfg.sensor.range_precision_m);
    NoiseSpec::from_sigmas(n.sigma_translation, [angles[0], angles[1], angles[2]], range)
        .context("building the noise model for curve generation")
}

/// Probability that a range return lands in its true voxel, per distance.
pub fn hit_probability_table(cfg: &ScenarioConfig) -> Result<Vec<(f64, f64)>> {
    let noise = noise_spec(cfg)?;
    let pose = Pose::identity();
    let ray = Vec3::new(cfg.curves.ray[0], cfg.curves.ray[1], cfg.curves.ray[2]);
    let norm = ray.norm();
    if !(norm.is_finite() && norm > 0.0) {
        bail!("curves.ray: must be a nonzero direction");
    }
    let d = ray / norm;
    let voxel_size = cfg.curves.voxel_size.unwrap_or(cfg.grid.voxel_size);
    Ok(hit_probability_curve(&noise, &pose, &d, voxel_size, &distances(cfg))?)
}

/// Probability that at least one beam intersects the target, per distance.
/// Uses the scenario's sphere radius unless `curves.target_radius` is set.
pub fn detection_probability_table(cfg: &ScenarioConfig) -> Result<Vec<(f64, f64, f64)>> {
    let a = match cfg.curves.target_radius {
        Some(a) => a,
        None => match cfg.target.as_ref().map(|t| &t.shape) {
            Some(ShapeConfig::Sphere { radius }) => *radius,
            _ => bail!(
                "curves.target_radius: required when the scenario has no spherical target"
            ),
        },
    };
    let layout = cfg.sensor_layout()?;
    let mut out = Vec::new();
    for l in distances(cfg) {
        if a >= l {
            out.push((l, 1.0, 0.0));
            continue;
        }
        let est = detection_probability(&layout, a, l, cfg.curves.detection_samples, cfg.seed)?;
        out.push((l, est.p, est.std_error));
    }
    Ok(out)
}

/// Writes both curve CSVs into `out`, returning their paths.
pub fn emit_curves(out: &Path, cfg: &ScenarioConfig) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let mut hit = String::from("distance,p_hit\n");
    for (l, p) in hit_probability_table(cfg)? {
        writeln!(hit, "{l},{p}").expect("string write");
    }
    let hit_path = out.join("hit_probability.csv");
    std::fs::write(&hit_path, &hit).with_context(|| format!("writing {}", hit_path.display()))?;

    let mut det = String::from("distance,p_detect,std_error\n");
    for (l, p, se) in detection_probability_table(cfg)? {
        writeln!(det, "{l},{p},{se}").expect("string write");
    }
    let det_path = out.join("detection_probability.csv");
    std::fs::write(&det_path, &det).with_context(|| format!("writing {}", det_path.display()))?;

    Ok((hit_path, det_path))
}
