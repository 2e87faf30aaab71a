//! Organized LiDAR scans: fixed row/column range-image layout, world-frame
//! transformation, and a compact binary fixture format for replay.
//!
//! Every element of a scan is either a `Return` carrying a range, `Empty`
//! (the beam was fired but nothing reflected within the sensor's maximum
//! range) or `Masked` (the element is permanently blocked, e.g. by the
//! carrying vehicle's own body, and must be skipped by all consumers). The
//! flag lives in a dedicated channel rather than in sentinel range values so
//! the layout survives serialization unambiguously.

use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose, Vec3};
use std::io::{Read, Write};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellKind {
    Return = 0,
    Empty = 1,
    Masked = 2,
}

/// Regular organized layout: uniformly spaced azimuth columns over the full
/// circle and uniformly spaced elevation rows over a symmetric vertical
/// field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    pub rows: usize,
    pub cols: usize,
    /// Lowest beam elevation in radians.
    pub elevation_min: f64,
    /// Highest beam elevation in radians.
    pub elevation_max: f64,
}

impl SensorLayout {
    pub fn new(rows: usize, cols: usize, elevation_min: f64, elevation_max: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("sensor layout needs rows > 0 and cols > 0".into()));
        }
        if !(elevation_min <= elevation_max)
            || elevation_min.abs() > std::f64::consts::FRAC_PI_2
            || elevation_max.abs() > std::f64::consts::FRAC_PI_2
        {
            return Err(Error::InvalidInput(
                "elevation bounds must satisfy min <= max within ±pi/2".into(),
            ));
        }
        Ok(Self { rows, cols, elevation_min, elevation_max })
    }

    /// Elevation of a beam row; row 0 is the lowest beam.
    pub fn elevation(&self, row: usize) -> f64 {
        if self.rows == 1 {
            return 0.5 * (self.elevation_min + self.elevation_max);
        }
        let f = row as f64 / (self.rows - 1) as f64;
        self.elevation_min + f * (self.elevation_max - self.elevation_min)
    }

    /// Azimuth of a column, counter-clockwise from the sensor x axis.
    pub fn azimuth(&self, col: usize) -> f64 {
        std::f64::consts::TAU * col as f64 / self.cols as f64
    }

    /// Unit beam direction in the sensor frame.
    pub fn direction(&self, row: usize, col: usize) -> Vec3 {
        let el = self.elevation(row);
        let az = self.azimuth(col);
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Full row-major direction table, for sharing across scans.
    pub fn direction_table(&self) -> Arc<Vec<Vec3>> {
        let mut t = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.push(self.direction(r, c));
            }
        }
        Arc::new(t)
    }

    pub fn elevations(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.elevation(r)).collect()
    }
}

/// One organized scan: row-major ranges plus flags, per-element unit beam
/// directions in the sensor frame, the sensor pose at capture time, and a
/// timestamp in seconds.
#[derive(Debug, Clone)]
pub struct OrganizedScan {
    rows: usize,
    cols: usize,
    /// Meaningful only where the flag is `Return`.
    ranges: Vec<f64>,
    kinds: Vec<CellKind>,
    directions: Arc<Vec<Vec3>>,
    pub sensor_pose: Pose,
    pub timestamp: f64,
}

impl OrganizedScan {
    pub fn new(
        rows: usize,
        cols: usize,
        ranges: Vec<f64>,
        kinds: Vec<CellKind>,
        directions: Arc<Vec<Vec3>>,
        sensor_pose: Pose,
        timestamp: f64,
    ) -> Result<Self> {
        let n = rows * cols;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("scan needs rows > 0 and cols > 0".into()));
        }
        if ranges.len() != n || kinds.len() != n || directions.len() != n {
            return Err(Error::InvalidInput(format!(
                "scan channels must all have rows*cols = {n} elements"
            )));
        }
        if !timestamp.is_finite() {
            return Err(Error::InvalidInput("scan timestamp must be finite".into()));
        }
        for (i, k) in kinds.iter().enumerate() {
            if *k == CellKind::Return && !(ranges[i].is_finite() && ranges[i] > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "return at element {i} must have a finite positive range"
                )));
            }
        }
        for (i, d) in directions.iter().enumerate() {
            if (d.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "direction at element {i} is not unit length"
                )));
            }
        }
        Ok(Self { rows, cols, ranges, kinds, directions, sensor_pose, timestamp })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self, i: usize) -> CellKind {
        self.kinds[i]
    }

    pub fn range(&self, i: usize) -> f64 {
        self.ranges[i]
    }

    pub fn direction(&self, i: usize) -> &Vec3 {
        &self.directions[i]
    }

    pub fn directions(&self) -> &Arc<Vec<Vec3>> {
        &self.directions
    }

    /// Serializes to the binary fixture format (little-endian throughout).
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"AVXS")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        w.write_all(&self.timestamp.to_le_bytes())?;
        for v in self.sensor_pose.translation.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.sensor_pose.alpha, self.sensor_pose.beta, self.sensor_pose.gamma] {
            w.write_all(&v.to_le_bytes())?;
        }
        for k in &self.kinds {
            w.write_all(&[*k as u8])?;
        }
        for r in &self.ranges {
            w.write_all(&r.to_le_bytes())?;
        }
        for d in self.directions.iter() {
            for a in 0..3 {
                w.write_all(&d[a].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"AVXS" {
            return Err(Error::Format("bad scan magic".into()));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported scan version {version}")));
        }
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n > 0 && n <= 1 << 28)
            .ok_or_else(|| Error::Format("implausible scan dimensions".into()))?;
        let timestamp = read_f64(r)?;
        let translation = Vec3::new(read_f64(r)?, read_f64(r)?, read_f64(r)?);
        let (alpha, beta, gamma) = (read_f64(r)?, read_f64(r)?, read_f64(r)?);
        let pose = Pose::new(translation, alpha, beta, gamma)
            .map_err(|e| Error::Format(format!("bad pose in scan: {e}")))?;
        let mut kinds = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b = [0u8; 1];
            r.read_exact(&mut b)?;
            kinds.push(match b[0] {
                0 => CellKind::Return,
                1 => CellKind::Empty,
                2 => CellKind::Masked,
                k => return Err(Error::Format(format!("unknown cell kind {k}"))),
            });
        }
        let mut ranges = Vec::with_capacity(n);
        for _ in 0..n {
            ranges.push(read_f64(r)?);
        }
        let mut directions = Vec::with_capacity(n);
        for _ in 0..n {
            directions.push(Vec3::new(read_f64(r)?, read_f64(r)?, read_f64(r)?));
        }
        Self::new(rows, cols, ranges, kinds, Arc::new(directions), pose, timestamp)
            .map_err(|e| Error::Format(format!("inconsistent scan data: {e}")))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_bits(u64::from_le_bytes(b)))
}

/// One element of a transformed scan: a world-frame point for returns, or
/// the original flag passed through for the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanPoint {
    World(Point3),
    Empty,
    Masked,
}

/// World-frame view of one scan, preserving the organized layout.
#[derive(Debug, Clone)]
pub struct TransformedScan {
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<ScanPoint>,
    pub sensor_origin: Point3,
    pub timestamp: f64,
}

impl TransformedScan {
    /// Iterates over the positioned (return) points only.
    pub fn world_points(&self) -> impl Iterator<Item = Point3> + '_ {
        self.points.iter().filter_map(|p| match p {
            ScanPoint::World(w) => Some(*w),
            _ => None,
        })
    }
}

/// Applies the scan's recorded sensor pose to every return:
/// `p = R * (range * d) + t`. Empty and masked elements pass through
/// flagged, not positioned.
pub fn transform_scan(scan: &OrganizedScan) -> TransformedScan {
    let rot = *scan.sensor_pose.rotation();
    let t = scan.sensor_pose.translation;
    let points = (0..scan.len())
        .map(|i| match scan.kind(i) {
            CellKind::Return => {
                ScanPoint::World(Point3::from(rot * (scan.range(i) * scan.direction(i)) + t))
            }
            CellKind::Empty => ScanPoint::Empty,
            CellKind::Masked => ScanPoint::Masked,
        })
        .collect();
    TransformedScan {
        rows: scan.rows,
        cols: scan.cols,
        points,
        sensor_origin: Point3::from(t),
        timestamp: scan.timestamp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_scan() -> OrganizedScan {
        let layout = SensorLayout::new(2, 4, -0.3, 0.3).unwrap();
        let dirs = layout.direction_table();
        let ranges = vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 7.0, 8.0];
        let kinds = vec![
            CellKind::Return,
            CellKind::Return,
            CellKind::Return,
            CellKind::Return,
            CellKind::Return,
            CellKind::Empty,
            CellKind::Return,
            CellKind::Masked,
        ];
        let pose = Pose::new(Vec3::new(1.0, -2.0, 0.5), 0.1, -0.2, 0.3).unwrap();
        OrganizedScan::new(2, 4, ranges, kinds, dirs, pose, 12.5).unwrap()
    }

    #[test]
    fn layout_directions_are_unit() {
        let layout = SensorLayout::new(16, 64, -0.4, 0.4).unwrap();
        for r in 0..16 {
            for c in 0..64 {
                assert_relative_eq!(layout.direction(r, c).norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn transform_sends_quarter_turn_return_sideways() {
        let dirs = Arc::new(vec![Vec3::new(1.0, 0.0, 0.0)]);
        let pose = Pose::new(Vec3::new(10.0, 0.0, 1.0), 0.0, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        let scan =
            OrganizedScan::new(1, 1, vec![2.0], vec![CellKind::Return], dirs, pose, 0.0).unwrap();
        let out = transform_scan(&scan);
        match out.points[0] {
            ScanPoint::World(p) => {
                assert_relative_eq!(p, Point3::new(10.0, 2.0, 1.0), epsilon = 1e-12)
            }
            _ => panic!("expected a positioned return"),
        }
    }

    #[test]
    fn transform_passes_flags_through() {
        let scan = small_scan();
        let out = transform_scan(&scan);
        assert_eq!(out.points[5], ScanPoint::Empty);
        assert_eq!(out.points[7], ScanPoint::Masked);
        assert_eq!(out.world_points().count(), 6);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let scan = small_scan();
        let mut buf = Vec::new();
        scan.write_binary(&mut buf).unwrap();
        let back = OrganizedScan::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.rows(), scan.rows());
        assert_eq!(back.cols(), scan.cols());
        assert_eq!(back.timestamp, scan.timestamp);
        for i in 0..scan.len() {
            assert_eq!(back.kind(i), scan.kind(i));
            assert_eq!(back.range(i).to_bits(), scan.range(i).to_bits());
            assert_eq!(back.direction(i), scan.direction(i));
        }
        assert_eq!(back.sensor_pose, scan.sensor_pose);
    }

    #[test]
    fn rejects_mismatched_channels() {
        let layout = SensorLayout::new(1, 2, -0.1, 0.1).unwrap();
        let err = OrganizedScan::new(
            1,
            2,
            vec![1.0],
            vec![CellKind::Return, CellKind::Return],
            layout.direction_table(),
            Pose::identity(),
            0.0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_nonpositive_return_range() {
        let layout = SensorLayout::new(1, 1, -0.1, 0.1).unwrap();
        let err = OrganizedScan::new(
            1,
            1,
            vec![0.0],
            vec![CellKind::Return],
            layout.direction_table(),
            Pose::identity(),
            0.0,
        );
        assert!(err.is_err());
    }
}
