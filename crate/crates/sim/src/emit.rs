//! Output files for a finished run: per-tick CSV log, flat detection and
//! track CSVs, distance-binned curves, and a JSON summary.

use crate::config::ScenarioConfig;
use crate::metrics::MetricsReport;
use crate::pipeline::TickRecord;
use aerovox_core::records::{write_detections_csv, write_tracks_csv, DetectionRecord};
use anyhow::{Context, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Where everything landed.
#[derive(Debug, Clone)]
pub struct EmitPaths {
    pub ticks_csv: PathBuf,
    pub detections_csv: PathBuf,
    pub tracks_csv: PathBuf,
    pub summary_json: PathBuf,
    pub error_over_distance_csv: PathBuf,
    pub recall_over_distance_csv: PathBuf,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    seed: u64,
    ticks: usize,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes every output file into `out` (created if missing).
pub fn emit(
    out: &Path,
    cfg: &ScenarioConfig,
    records: &[TickRecord],
    report: &MetricsReport,
) -> Result<EmitPaths> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let mut ticks = String::from(
        "tick,t,observer_x,observer_y,observer_z,gt_x,gt_y,gt_z,target_distance,\
         n_detections,nearest_detection_err,n_tracks,nearest_track_err,out_of_grid_points,\
         generate_ms,transform_ms,detect_ms,raycast_ms,bg_removal_ms,apply_ms,track_ms,pipeline_ms\n",
    );
    for r in records {
        let (gt_cols, dist, det_err, trk_err) = match r.gt_target {
            Some(gt) => {
                let nearest_det = r
                    .detections
                    .iter()
                    .map(|d| (d.position - gt).norm())
                    .fold(f64::INFINITY, f64::min);
                let nearest_trk = r
                    .tracks
                    .iter()
                    .map(|t| (nalgebra::Point3::new(t.x, t.y, t.z) - gt).norm())
                    .fold(f64::INFINITY, f64::min);
                (
                    format!("{},{},{}", gt.x, gt.y, gt.z),
                    (gt - r.observer).norm().to_string(),
                    opt(nearest_det.is_finite().then_some(nearest_det)),
                    opt(nearest_trk.is_finite().then_some(nearest_trk)),
                )
            }
            None => (",,".to_string(), String::new(), String::new(), String::new()),
        };
        writeln!(
            ticks,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.t,
            r.observer.x,
            r.observer.y,
            r.observer.z,
            gt_cols,
            dist,
            r.detections.len(),
            det_err,
            r.tracks.len(),
            trk_err,
            r.out_of_grid_points,
            r.times.generate_ms,
            r.times.transform_ms,
            r.times.detect_ms,
            r.times.raycast_ms,
            r.times.bg_removal_ms,
            r.times.apply_ms,
            r.times.track_ms,
            r.times.pipeline_ms(),
        )
        .expect("string write");
    }
    let ticks_csv = out.join("ticks.csv");
    write_file(&ticks_csv, &ticks)?;

    let detections: Vec<DetectionRecord> = records
        .iter()
        .flat_map(|r| r.detections.iter().map(DetectionRecord::from_detection))
        .collect();
    let mut buf = Vec::new();
    write_detections_csv(&mut buf, &detections)?;
    let detections_csv = out.join("detections.csv");
    write_file(&detections_csv, std::str::from_utf8(&buf).expect("utf8 csv"))?;

    let tracks: Vec<_> = records.iter().flat_map(|r| r.tracks.iter().cloned()).collect();
    let mut buf = Vec::new();
    write_tracks_csv(&mut buf, &tracks)?;
    let tracks_csv = out.join("tracks.csv");
    write_file(&tracks_csv, std::str::from_utf8(&buf).expect("utf8 csv"))?;

    let mut err_curve = String::from(
        "bin_lo,bin_hi,ticks,detections,mean_err_detected,std_err_detected,\
         tracked_ticks,mean_err_tracked,std_err_tracked\n",
    );
    let mut recall_curve = String::from("bin_lo,bin_hi,ticks,recall\n");
    for b in &report.recall_by_bin {
        writeln!(
            err_curve,
            "{},{},{},{},{},{},{},{},{}",
            b.lo,
            b.hi,
            b.ticks,
            b.detections,
            opt(b.mean_err_detected),
            opt(b.std_err_detected),
            b.tracked_ticks,
            opt(b.mean_err_tracked),
            opt(b.std_err_tracked),
        )
        .expect("string write");
        writeln!(recall_curve, "{},{},{},{}", b.lo, b.hi, b.ticks, b.recall)
            .expect("string write");
    }
    let error_over_distance_csv = out.join("error_over_distance.csv");
    write_file(&error_over_distance_csv, &err_curve)?;
    let recall_over_distance_csv = out.join("recall_over_distance.csv");
    write_file(&recall_over_distance_csv, &recall_curve)?;

    let summary = Summary {
        scenario: &cfg.name,
        seed: cfg.seed,
        ticks: records.len(),
        report,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    let summary_json = out.join("summary.json");
    write_file(&summary_json, &json)?;

    Ok(EmitPaths {
        ticks_csv,
        detections_csv,
        tracks_csv,
        summary_json,
        error_over_distance_csv,
        recall_over_distance_csv,
    })
}
