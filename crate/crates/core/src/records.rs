//! Flat output records for detections and tracks.
//!
//! Both record kinds serialize to CSV (fixed column order, header row) and
//! to JSON lines. All numbers are written with shortest round-trip
//! formatting, so equal inputs produce byte-equal output.

use crate::detector::Detection;
use crate::error::Result;
use crate::tracker::{uncertainty_radius, Track, TrackerConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub point_count: u64,
}

impl DetectionRecord {
    pub fn from_detection(d: &Detection) -> Self {
        Self {
            timestamp: d.timestamp,
            x: d.position.x,
            y: d.position.y,
            z: d.position.z,
            point_count: d.point_count as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub time: f64,
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub r_unc: f64,
    pub n_det: u32,
}

impl TrackRecord {
    pub fn from_track(track: &Track, config: &TrackerConfig, time: f64) -> Self {
        let p = track.position();
        let v = track.velocity();
        let a = track.acceleration();
        Self {
            time,
            id: track.id,
            x: p.x,
            y: p.y,
            z: p.z,
            vx: v.x,
            vy: v.y,
            vz: v.z,
            ax: a.x,
            ay: a.y,
            az: a.z,
            r_unc: uncertainty_radius(&track.cov, config),
            n_det: track.n_det,
        }
    }
}

pub const DETECTION_CSV_HEADER: &str = "timestamp,x,y,z,point_count";
pub const TRACK_CSV_HEADER: &str = "time,id,x,y,z,vx,vy,vz,ax,ay,az,r_unc,n_det";

pub fn write_detections_csv<W: Write>(w: &mut W, records: &[DetectionRecord]) -> Result<()> {
    writeln!(w, "{DETECTION_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{},{},{},{},{}", r.timestamp, r.x, r.y, r.z, r.point_count)?;
    }
    Ok(())
}

pub fn write_tracks_csv<W: Write>(w: &mut W, records: &[TrackRecord]) -> Result<()> {
    writeln!(w, "{TRACK_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.time, r.id, r.x, r.y, r.z, r.vx, r.vy, r.vz, r.ax, r.ay, r.az, r.r_unc, r.n_det
        )?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write, T: Serialize>(w: &mut W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)
            .map_err(|e| crate::error::Error::Format(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}
