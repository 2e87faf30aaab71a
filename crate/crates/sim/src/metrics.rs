//! Accuracy and recall metrics over a finished run.
//!
//! A detection or track matches the ground-truth target when it lies
//! within the configured match radius. Errors are pooled over matches;
//! recall is the fraction of evaluated ticks with at least one matching
//! detection. Per-distance bins use the target's range from the observer.

use crate::config::MetricsConfig;
use crate::pipeline::TickRecord;
use serde::Serialize;

/// Summary statistics for one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub match_radius_m: f64,
    pub bin_width_m: f64,
    pub warmup_ticks: usize,
    /// Ticks past warmup, whether or not a target was present.
    pub evaluated_ticks: usize,
    /// Evaluated ticks in which ground truth existed.
    pub ticks_with_target: usize,
    pub detections_total: usize,
    pub detections_matched: usize,
    /// Fraction of target-bearing evaluated ticks with >= 1 matched detection.
    pub recall: f64,
    /// Mean distance from matched detections to ground truth; null when
    /// nothing matched.
    pub mean_err_detected: Option<f64>,
    pub std_err_detected: Option<f64>,
    /// Mean distance from the nearest in-radius track to ground truth.
    pub mean_err_tracked: Option<f64>,
    pub std_err_tracked: Option<f64>,
    pub recall_by_bin: Vec<BinStat>,
    pub final_track_count: usize,
}

/// Per target-distance bin: ticks whose true range fell in [lo, hi).
#[derive(Debug, Clone, Serialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub ticks: usize,
    pub recall: f64,
    pub detections: usize,
    pub mean_err_detected: Option<f64>,
    pub std_err_detected: Option<f64>,
    /// Ticks in the bin where a track lay within the match radius.
    pub tracked_ticks: usize,
    pub mean_err_tracked: Option<f64>,
    pub std_err_tracked: Option<f64>,
}

/// Sample mean and (N-1) standard deviation; std is None below two samples.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

#[derive(Default)]
struct BinAccum {
    ticks: usize,
    recalled: usize,
    detections: usize,
    det_errors: Vec<f64>,
    tracked_ticks: usize,
    track_errors: Vec<f64>,
}

pub fn compute_metrics(records: &[TickRecord], cfg: &MetricsConfig) -> MetricsReport {
    let radius = cfg.match_radius_m;
    let mut evaluated_ticks = 0;
    let mut ticks_with_target = 0;
    let mut recalled_ticks = 0;
    let mut detections_total = 0;
    let mut detections_matched = 0;
    let mut det_errors = Vec::new();
    let mut track_errors = Vec::new();
    let mut bins: Vec<BinAccum> = Vec::new();

    for rec in records.iter().filter(|r| r.tick >= cfg.warmup_ticks) {
        evaluated_ticks += 1;
        detections_total += rec.detections.len();
        let Some(gt) = rec.gt_target else { continue };
        ticks_with_target += 1;

        let bin_idx = ((gt - rec.observer).norm() / cfg.bin_width_m).floor() as usize;
        if bins.len() <= bin_idx {
            bins.resize_with(bin_idx + 1, BinAccum::default);
        }
        let bin = &mut bins[bin_idx];
        bin.ticks += 1;
        bin.detections += rec.detections.len();

        let mut tick_matched = false;
        for det in &rec.detections {
            let err = (det.position - gt).norm();
            if err <= radius {
                detections_matched += 1;
                det_errors.push(err);
                bin.det_errors.push(err);
                tick_matched = true;
            }
        }
        if tick_matched {
            recalled_ticks += 1;
            bin.recalled += 1;
        }

        let nearest_track = rec
            .tracks
            .iter()
            .map(|t| {
                let d = nalgebra::Point3::new(t.x, t.y, t.z) - gt;
                d.norm()
            })
            .fold(f64::INFINITY, f64::min);
        if nearest_track <= radius {
            track_errors.push(nearest_track);
            bin.tracked_ticks += 1;
            bin.track_errors.push(nearest_track);
        }
    }

    let (mean_err_detected, std_err_detected) = mean_std(&det_errors);
    let (mean_err_tracked, std_err_tracked) = mean_std(&track_errors);
    let recall = if ticks_with_target > 0 {
        recalled_ticks as f64 / ticks_with_target as f64
    } else {
        0.0
    };

    let recall_by_bin = bins
        .into_iter()
        .enumerate()
        .filter(|(_, b)| b.ticks > 0)
        .map(|(i, b)| {
            let (med, sed) = mean_std(&b.det_errors);
            let (met, set) = mean_std(&b.track_errors);
            BinStat {
                lo: i as f64 * cfg.bin_width_m,
                hi: (i + 1) as f64 * cfg.bin_width_m,
                ticks: b.ticks,
                recall: b.recalled as f64 / b.ticks as f64,
                detections: b.detections,
                mean_err_detected: med,
                std_err_detected: sed,
                tracked_ticks: b.tracked_ticks,
                mean_err_tracked: met,
                std_err_tracked: set,
            }
        })
        .collect();

    MetricsReport {
        match_radius_m: radius,
        bin_width_m: cfg.bin_width_m,
        warmup_ticks: cfg.warmup_ticks,
        evaluated_ticks,
        ticks_with_target,
        detections_total,
        detections_matched,
        recall,
        mean_err_detected,
        std_err_detected,
        mean_err_tracked,
        std_err_tracked,
        recall_by_bin,
        final_track_count: records.last().map_or(0, |r| r.tracks.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{StageTimes, TickRecord};
    use aerovox_core::detector::Detection;
    use aerovox_core::Point3;

    fn record(tick: usize, gt: Option<Point3>, detections: Vec<Detection>) -> TickRecord {
        TickRecord {
            tick,
            t: tick as f64 * 0.1,
            observer: Point3::new(0.0, 0.0, 0.0),
            gt_target: gt,
            detections,
            tracks: Vec::new(),
            out_of_grid_points: 0,
            cluster_counts: [0; 3],
            times: StageTimes::default(),
        }
    }

    fn det(x: f64, y: f64, z: f64) -> Detection {
        Detection { position: Point3::new(x, y, z), point_count: 1, timestamp: 0.0 }
    }

    fn cfg() -> MetricsConfig {
        MetricsConfig { match_radius_m: 2.0, bin_width_m: 5.0, warmup_ticks: 0 }
    }

    #[test]
    fn recall_counts_matched_ticks_only() {
        let gt = Some(Point3::new(0.0, 0.0, 10.0));
        let records = vec![
            record(0, gt, vec![det(0.0, 0.0, 10.5)]),
            record(1, gt, vec![det(0.0, 0.0, 20.0)]),
            record(2, gt, vec![]),
            record(3, gt, vec![det(0.1, 0.0, 10.0), det(5.0, 5.0, 5.0)]),
        ];
        let m = compute_metrics(&records, &cfg());
        assert_eq!(m.ticks_with_target, 4);
        assert_eq!(m.detections_total, 4);
        assert_eq!(m.detections_matched, 2);
        assert!((m.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors_pool_over_matches() {
        let gt = Some(Point3::new(0.0, 0.0, 10.0));
        let records = vec![
            record(0, gt, vec![det(0.0, 0.0, 11.0)]),
            record(1, gt, vec![det(0.0, 0.0, 9.0)]),
        ];
        let m = compute_metrics(&records, &cfg());
        assert_eq!(m.mean_err_detected, Some(1.0));
        assert_eq!(m.std_err_detected, Some(0.0));
        assert_eq!(m.mean_err_tracked, None);
    }

    #[test]
    fn warmup_ticks_are_skipped() {
        let gt = Some(Point3::new(0.0, 0.0, 10.0));
        let records = vec![
            record(0, gt, vec![det(0.0, 0.0, 10.0)]),
            record(1, gt, vec![]),
        ];
        let c = MetricsConfig { warmup_ticks: 1, ..cfg() };
        let m = compute_metrics(&records, &c);
        assert_eq!(m.evaluated_ticks, 1);
        assert_eq!(m.detections_total, 0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn bins_split_by_target_range() {
        let near = Some(Point3::new(0.0, 0.0, 3.0));
        let far = Some(Point3::new(0.0, 0.0, 12.0));
        let records = vec![
            record(0, near, vec![det(0.0, 0.0, 3.0)]),
            record(1, far, vec![]),
        ];
        let m = compute_metrics(&records, &cfg());
        assert_eq!(m.recall_by_bin.len(), 2);
        assert_eq!(m.recall_by_bin[0].lo, 0.0);
        assert_eq!(m.recall_by_bin[0].recall, 1.0);
        assert_eq!(m.recall_by_bin[1].lo, 10.0);
        assert_eq!(m.recall_by_bin[1].recall, 0.0);
        assert_eq!(m.recall_by_bin[1].mean_err_detected, None);
    }

    #[test]
    fn no_target_means_zero_recall_and_null_errors() {
        let records = vec![record(0, None, vec![det(1.0, 1.0, 1.0)])];
        let m = compute_metrics(&records, &cfg());
        assert_eq!(m.ticks_with_target, 0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.detections_total, 1);
        assert_eq!(m.detections_matched, 0);
        assert_eq!(m.mean_err_detected, None);
    }
}
