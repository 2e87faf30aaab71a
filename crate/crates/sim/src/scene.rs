//! Analytic scene geometry and trajectory evaluation. The scene is a set
//! of axis-aligned boxes (the ground is a finite slab, so surface returns
//! never extend past the mapped footprint), plus one optional moving
//! sphere or box target rendered separately.

use crate::config::{PriorAir, PriorStateConfig, ScenarioConfig, ShapeConfig, Trajectory};
use aerovox_core::occupancy::{PriorRegion, PriorState};
use aerovox_core::{Point3, Pose, Vec3};
use anyhow::Result;

const RAY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    /// Nearest positive ray parameter at which the ray enters the box, or
    /// the exit parameter when the origin is inside.
    pub fn ray_hit(&self, origin: &Point3, dir: &Vec3) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[a];
                let mut ta = (self.min[a] - origin[a]) * inv;
                let mut tb = (self.max[a] - origin[a]) * inv;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t_near = t_near.max(ta);
                t_far = t_far.min(tb);
                if t_near > t_far {
                    return None;
                }
            }
        }
        if t_near > RAY_EPS {
            Some(t_near)
        } else if t_far > RAY_EPS {
            Some(t_far)
        } else {
            None
        }
    }
}

/// Nearest positive intersection of a unit-direction ray with a sphere.
pub fn sphere_hit(center: &Point3, radius: f64, origin: &Point3, dir: &Vec3) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t = -b - s;
    if t > RAY_EPS {
        return Some(t);
    }
    let t = -b + s;
    if t > RAY_EPS {
        Some(t)
    } else {
        None
    }
}

pub fn target_hit(shape: &ShapeConfig, center: &Point3, origin: &Point3, dir: &Vec3) -> Option<f64> {
    match shape {
        ShapeConfig::Sphere { radius } => sphere_hit(center, *radius, origin, dir),
        ShapeConfig::Box { half_extents } => {
            let he = Vec3::from(*half_extents);
            Aabb::new(center - he, center + he).ray_hit(origin, dir)
        }
    }
}

/// Static scene: every box, with the ground slab folded in.
#[derive(Debug, Clone)]
pub struct Scene {
    pub boxes: Vec<Aabb>,
}

impl Scene {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let mut boxes = Vec::new();
        if let Some(g) = &cfg.scene.ground {
            let lo = g.min_xy.unwrap_or([cfg.grid.origin[0], cfg.grid.origin[1]]);
            let hi = g.max_xy.unwrap_or([
                cfg.grid.origin[0] + cfg.grid.dims[0] as f64 * cfg.grid.voxel_size,
                cfg.grid.origin[1] + cfg.grid.dims[1] as f64 * cfg.grid.voxel_size,
            ]);
            boxes.push(Aabb::new(
                Point3::new(lo[0], lo[1], g.z_top - g.thickness),
                Point3::new(hi[0], hi[1], g.z_top),
            ));
        }
        for b in &cfg.scene.boxes {
            boxes.push(Aabb::new(Point3::from(b.min), Point3::from(b.max)));
        }
        Self { boxes }
    }

    /// Range to the nearest static surface along a unit-direction ray.
    pub fn ray_range(&self, origin: &Point3, dir: &Vec3) -> Option<f64> {
        let mut best: Option<f64> = None;
        for b in &self.boxes {
            if let Some(t) = b.ray_hit(origin, dir) {
                if best.map_or(true, |cur| t < cur) {
                    best = Some(t);
                }
            }
        }
        best
    }
}

/// Prior regions for map initialization: the optional whole-grid free
/// layer, then the scene geometry as occupied, then explicit regions.
/// Later regions override earlier ones.
pub fn prior_regions(cfg: &ScenarioConfig, scene: &Scene) -> Vec<PriorRegion> {
    let mut regions = Vec::new();
    if cfg.prior.air == PriorAir::Free {
        let o = cfg.grid.origin;
        let hi = [
            o[0] + cfg.grid.dims[0] as f64 * cfg.grid.voxel_size,
            o[1] + cfg.grid.dims[1] as f64 * cfg.grid.voxel_size,
            o[2] + cfg.grid.dims[2] as f64 * cfg.grid.voxel_size,
        ];
        regions.push(PriorRegion {
            min: Point3::from(o),
            max: Point3::from(hi),
            state: PriorState::Free,
        });
    }
    if cfg.prior.scene_occupied {
        for b in &scene.boxes {
            regions.push(PriorRegion { min: b.min, max: b.max, state: PriorState::Occupied });
        }
    }
    for r in &cfg.prior.regions {
        regions.push(PriorRegion {
            min: Point3::from(r.min),
            max: Point3::from(r.max),
            state: match r.state {
                PriorStateConfig::Occupied => PriorState::Occupied,
                PriorStateConfig::Free => PriorState::Free,
                PriorStateConfig::PinnedOccupied => PriorState::PinnedOccupied,
                PriorStateConfig::PinnedFree => PriorState::PinnedFree,
            },
        });
    }
    regions
}

/// Pose at time `t`. An orbit yaws toward its center so the sensor's zero
/// azimuth faces the orbited point.
pub fn pose_at(traj: &Trajectory, t: f64) -> Result<Pose> {
    let pose = match traj {
        Trajectory::Static { position, yaw_deg, pitch_deg, roll_deg } => Pose::new(
            Vec3::from(*position),
            roll_deg.to_radians(),
            pitch_deg.to_radians(),
            yaw_deg.to_radians(),
        )?,
        Trajectory::Orbit { center, radius, angular_rate_deg_s, phase_deg } => {
            let phi = (phase_deg + angular_rate_deg_s * t).to_radians();
            let pos = Vec3::new(
                center[0] + radius * phi.cos(),
                center[1] + radius * phi.sin(),
                center[2],
            );
            let yaw = phi + std::f64::consts::PI;
            Pose::new(pos, 0.0, 0.0, yaw)?
        }
        Trajectory::Line { from, to, start_s, end_s, yaw_deg, pitch_deg, roll_deg } => {
            let f = ((t - start_s) / (end_s - start_s)).clamp(0.0, 1.0);
            let from = Vec3::from(*from);
            let to = Vec3::from(*to);
            Pose::new(
                from + f * (to - from),
                roll_deg.to_radians(),
                pitch_deg.to_radians(),
                yaw_deg.to_radians(),
            )?
        }
    };
    Ok(pose)
}

pub fn position_at(traj: &Trajectory, t: f64) -> Result<Point3> {
    Ok(Point3::from(pose_at(traj, t)?.translation))
}
