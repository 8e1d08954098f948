//! Pose error metrics, the success criterion, and aggregate reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::net::PosePrediction;
use crate::pose::{orientation_angle_deg, Pose};

/// Success thresholds; both comparisons are strict.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub max_position_cm: f64,
    pub max_orientation_deg: f64,
    pub strict: bool,
}

impl Default for SuccessCriterion {
    fn default() -> Self {
        SuccessCriterion {
            max_position_cm: 5.0,
            max_orientation_deg: 15.0,
            strict: true,
        }
    }
}

impl SuccessCriterion {
    pub fn check(&self, pos_cm: f64, ori_deg: f64) -> Result<bool> {
        if !(pos_cm >= 0.0) || !(ori_deg >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "errors must be nonnegative, got ({pos_cm}, {ori_deg})"
            )));
        }
        Ok(if self.strict {
            pos_cm < self.max_position_cm && ori_deg < self.max_orientation_deg
        } else {
            pos_cm <= self.max_position_cm && ori_deg <= self.max_orientation_deg
        })
    }
}

/// `pos_cm < 5 && ori_deg < 15`.
pub fn is_success(pos_cm: f64, ori_deg: f64) -> Result<bool> {
    SuccessCriterion::default().check(pos_cm, ori_deg)
}

/// Euclidean position error in centimeters and geodesic orientation error
/// in degrees. The predicted quaternion is canonicalized first, so either
/// sign of it scores the same.
pub fn pose_errors(pred: &PosePrediction, gt: &Pose) -> Result<(f64, f64)> {
    let pos_cm = geom::norm(geom::sub(pred.position, gt.position)) * 100.0;
    let q = pred.quaternion.canonicalize()?;
    let ori = orientation_angle_deg(q, gt.orientation)?;
    Ok((pos_cm, ori))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub class: usize,
    pub position_error_cm: f64,
    pub orientation_error_deg: f64,
    pub success: bool,
}

impl EvalRecord {
    pub fn new(id: impl Into<String>, class: usize, pos_cm: f64, ori_deg: f64) -> Result<Self> {
        Ok(EvalRecord {
            id: id.into(),
            class,
            position_error_cm: pos_cm,
            orientation_error_deg: ori_deg,
            success: is_success(pos_cm, ori_deg)?,
        })
    }

    pub fn from_prediction(id: impl Into<String>, pred: &PosePrediction, gt: &Pose) -> Result<Self> {
        let (p, o) = pose_errors(pred, gt)?;
        EvalRecord::new(id, pred.class, p, o)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean_position_cm: f64,
    pub median_position_cm: f64,
    pub mean_orientation_deg: f64,
    pub median_orientation_deg: f64,
    pub success_rate: f64,
}

/// Fixed-width histogram with an overflow count for values at or past `max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub max: f64,
    pub counts: Vec<usize>,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(bin_width: f64, max: f64) -> Self {
        let bins = (max / bin_width).round() as usize;
        Histogram {
            bin_width,
            max,
            counts: vec![0; bins],
            overflow: 0,
        }
    }

    /// Adds a value; `max` itself lands in the last bin when
    /// `include_max` is set, otherwise in the overflow.
    pub fn add(&mut self, v: f64, include_max: bool) {
        let bins = self.counts.len();
        if v < self.max || (include_max && v == self.max) {
            let i = ((v / self.bin_width).floor() as usize).min(bins - 1);
            self.counts[i] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.overflow
    }

    /// `bin_lo,bin_hi,count` rows; the overflow row has `bin_hi = inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let lo = i as f64 * self.bin_width;
            let _ = writeln!(s, "{},{},{}", lo, lo + self.bin_width, c);
        }
        let _ = writeln!(s, "{},inf,{}", self.max, self.overflow);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: ErrorStats,
    pub per_class: BTreeMap<usize, ErrorStats>,
    pub position_histogram: Histogram,
    pub orientation_histogram: Histogram,
    pub criterion: SuccessCriterion,
    pub median_convention: String,
    pub orientation_metric: String,
}

/// Lower-middle median of a nonempty slice.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn stats(records: &[&EvalRecord]) -> ErrorStats {
    let n = records.len();
    let pos: Vec<f64> = records.iter().map(|r| r.position_error_cm).collect();
    let ori: Vec<f64> = records.iter().map(|r| r.orientation_error_deg).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    ErrorStats {
        count: n,
        mean_position_cm: mean(&pos),
        median_position_cm: lower_median(&pos),
        mean_orientation_deg: mean(&ori),
        median_orientation_deg: lower_median(&ori),
        success_rate: records.iter().filter(|r| r.success).count() as f64 / n as f64,
    }
}

pub fn aggregate(records: &[EvalRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to aggregate".into()));
    }
    let all: Vec<&EvalRecord> = records.iter().collect();
    let mut by_class: BTreeMap<usize, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_class.entry(r.class).or_default().push(r);
    }
    let mut position_histogram = Histogram::new(0.5, 20.0);
    let mut orientation_histogram = Histogram::new(2.0, 180.0);
    for r in records {
        position_histogram.add(r.position_error_cm, false);
        orientation_histogram.add(r.orientation_error_deg, true);
    }
    Ok(EvalReport {
        overall: stats(&all),
        per_class: by_class.into_iter().map(|(c, v)| (c, stats(&v))).collect(),
        position_histogram,
        orientation_histogram,
        criterion: SuccessCriterion::default(),
        median_convention: "lower-middle".into(),
        orientation_metric: "geodesic angle 2*acos(|<qa,qb>|)".into(),
    })
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Writes the JSON report plus `<stem>_position_hist.csv` and
    /// `<stem>_orientation_hist.csv` next to it.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<()> {
        self.write_json(&dir.join(format!("{stem}.json")))?;
        for (name, h) in [
            ("position_hist", &self.position_histogram),
            ("orientation_hist", &self.orientation_histogram),
        ] {
            let p = dir.join(format!("{stem}_{name}.csv"));
            std::fs::write(&p, h.to_csv()).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
