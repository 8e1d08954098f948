//! Circular occluders centered on mask boundaries, occlusion amounts, and
//! error-versus-occlusion sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{pose_errors, EvalRecord};
use crate::image::MaskImage;
use crate::net::{input_from_mask, predict_inputs, NetworkParams};
use crate::seeds;

/// Image width the reference occlusion radii are expressed at.
pub const REFERENCE_WIDTH: usize = 320;

/// Width of the occlusion-amount bins in sweep reports.
pub const BIN_WIDTH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    /// Pixel `(x, y)`.
    pub center: (usize, usize),
    pub radius: f64,
    /// Boundary point index and seed the center was drawn with, if random.
    pub source: Option<(usize, u64)>,
}

/// Set pixels with at least one unset 4-neighbor; pixels outside the
/// image count as unset. Row-major order.
pub fn boundary_points(mask: &MaskImage) -> Result<Vec<(usize, usize)>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let set = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
    };
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            if !set(xi - 1, yi) || !set(xi + 1, yi) || !set(xi, yi - 1) || !set(xi, yi + 1) {
                out.push((x, y));
            }
        }
    }
    Ok(out)
}

fn is_boundary(mask: &MaskImage, (x, y): (usize, usize)) -> bool {
    if x >= mask.width() || y >= mask.height() || !mask.get(x, y) {
        return false;
    }
    let (w, h) = (mask.width(), mask.height());
    x == 0
        || y == 0
        || x + 1 == w
        || y + 1 == h
        || !mask.get(x - 1, y)
        || !mask.get(x + 1, y)
        || !mask.get(x, y - 1)
        || !mask.get(x, y + 1)
}

/// Clears every pixel within Euclidean distance `radius` of the center.
pub fn apply_occlusion(mask: &MaskImage, spec: &OcclusionSpec) -> Result<MaskImage> {
    if !(spec.radius >= 1.0) || !spec.radius.is_finite() {
        return Err(Error::InvalidSpec(format!("radius {} below 1", spec.radius)));
    }
    if !is_boundary(mask, spec.center) {
        return Err(Error::InvalidSpec(format!(
            "center {:?} is not on the mask boundary",
            spec.center
        )));
    }
    let mut out = mask.clone();
    let (cx, cy) = (spec.center.0 as f64, spec.center.1 as f64);
    let r = spec.radius;
    let r2 = r * r;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let y1 = ((cy + r).ceil() as usize).min(mask.height() - 1);
    let x0 = (cx - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil() as usize).min(mask.width() - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r2 {
                out.set(x, y, false);
            }
        }
    }
    Ok(out)
}

/// Fraction of the original mask's pixels that were cleared.
pub fn occlusion_amount(original: &MaskImage, occluded: &MaskImage) -> Result<f64> {
    if original.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !occluded.is_subset_of(original) {
        return Err(Error::InvalidArgument(
            "occluded mask has pixels outside the original".into(),
        ));
    }
    let n = original.count();
    Ok((n - occluded.count()) as f64 / n as f64)
}

/// Boundary center drawn uniformly with a generator seeded by `seed`.
pub fn random_spec(mask: &MaskImage, radius: f64, seed: u64) -> Result<OcclusionSpec> {
    let pts = boundary_points(mask)?;
    let i = seeds::rng(seed, &[]).random_range(0..pts.len());
    Ok(OcclusionSpec {
        center: pts[i],
        radius,
        source: Some((i, seed)),
    })
}

/// Training augmentation: radius uniform in `[1, max_radius]`, center
/// uniform over boundary points. Empty masks pass through unchanged.
pub fn occlude_random<R: Rng + ?Sized>(mask: &MaskImage, max_radius: f64, rng: &mut R) -> Result<MaskImage> {
    if mask.is_empty() {
        return Ok(mask.clone());
    }
    let radius = if max_radius > 1.0 {
        rng.random_range(1.0..=max_radius)
    } else {
        1.0
    };
    let spec = random_spec(mask, radius, rng.random())?;
    apply_occlusion(mask, &spec)
}

/// Converts a radius given at [`REFERENCE_WIDTH`] to `width`.
pub fn scale_radius(radius_ref: f64, width: usize) -> f64 {
    radius_ref * width as f64 / REFERENCE_WIDTH as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub id: String,
    pub radius: f64,
    pub amount: f64,
    pub position_error_cm: f64,
    pub orientation_error_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub n: usize,
    /// `None` for an empty bin.
    pub mean_pos_err_cm: Option<f64>,
    pub mean_ori_err_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub radii: Vec<f64>,
    pub seed: u64,
    pub bins: Vec<SweepBin>,
    pub samples: Vec<SweepSample>,
}

impl SweepReport {
    /// Mean (position, orientation) error over samples whose occlusion
    /// amount lies in `[lo, hi)`; `None` when there are none.
    pub fn mean_in_range(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let sel: Vec<&SweepSample> = self
            .samples
            .iter()
            .filter(|s| s.amount >= lo && s.amount < hi)
            .collect();
        if sel.is_empty() {
            return None;
        }
        let n = sel.len() as f64;
        Some((
            sel.iter().map(|s| s.position_error_cm).sum::<f64>() / n,
            sel.iter().map(|s| s.orientation_error_deg).sum::<f64>() / n,
        ))
    }

    /// Samples drawn with the given radius.
    pub fn for_radius(&self, radius: f64) -> impl Iterator<Item = &SweepSample> {
        self.samples.iter().filter(move |s| s.radius == radius)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,n,mean_pos_err_cm,mean_ori_err_deg\n");
        for b in &self.bins {
            let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:.2},{:.2},{},{},{}",
                b.bin_lo,
                b.bin_hi,
                b.n,
                cell(b.mean_pos_err_cm),
                cell(b.mean_ori_err_deg)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn bin_of(amount: f64) -> usize {
    let bins = (1.0 / BIN_WIDTH).round() as usize;
    ((amount / BIN_WIDTH + 1e-9).floor() as usize).min(bins - 1)
}

/// For every test mask and radius, occludes at a seeded random boundary
/// point, predicts, and bins errors by measured occlusion amount. Radius 0
/// means no occlusion. Masks must be present in `test`.
pub fn sensitivity_sweep(params: &NetworkParams, test: &Dataset, radii: &[f64], seed: u64) -> Result<SweepReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    let mut inputs = Vec::new();
    let mut classes = Vec::new();
    let mut meta = Vec::new();
    for i in 0..test.len() {
        let mask = test.load_mask(i)?;
        for (ri, &r) in radii.iter().enumerate() {
            let (occluded, amount) = if r == 0.0 {
                (mask.clone(), 0.0)
            } else {
                let spec = random_spec(&mask, r, seeds::derive(seed, &[i as u64, ri as u64]))?;
                let occ = apply_occlusion(&mask, &spec)?;
                let a = occlusion_amount(&mask, &occ)?;
                (occ, a)
            };
            inputs.push(input_from_mask(&occluded));
            classes.push(test.records()[i].class);
            meta.push((i, r, amount));
        }
    }
    let preds = predict_inputs(params, &inputs, &classes)?;
    let mut samples = Vec::with_capacity(preds.len());
    for (pred, (i, r, amount)) in preds.iter().zip(meta) {
        let rec = &test.records()[i];
        let (p, o) = pose_errors(pred, &rec.pose())?;
        samples.push(SweepSample {
            id: rec.id.clone(),
            radius: r,
            amount,
            position_error_cm: p,
            orientation_error_deg: o,
        });
    }
    let nbins = (1.0 / BIN_WIDTH).round() as usize;
    let mut acc = vec![(0usize, 0.0f64, 0.0f64); nbins];
    for s in &samples {
        let b = &mut acc[bin_of(s.amount)];
        b.0 += 1;
        b.1 += s.position_error_cm;
        b.2 += s.orientation_error_deg;
    }
    let bins = acc
        .iter()
        .enumerate()
        .map(|(k, &(n, p, o))| SweepBin {
            bin_lo: k as f64 * BIN_WIDTH,
            bin_hi: (k + 1) as f64 * BIN_WIDTH,
            n,
            mean_pos_err_cm: (n > 0).then(|| p / n as f64),
            mean_ori_err_deg: (n > 0).then(|| o / n as f64),
        })
        .collect();
    Ok(SweepReport {
        radii: radii.to_vec(),
        seed,
        bins,
        samples,
    })
}

/// Unoccluded evaluation records for every test sample.
pub fn evaluate_unoccluded(params: &NetworkParams, test: &Dataset) -> Result<Vec<EvalRecord>> {
    let mut inputs = Vec::with_capacity(test.len());
    for i in 0..test.len() {
        inputs.push(input_from_mask(&test.load_mask(i)?));
    }
    let classes: Vec<usize> = test.records().iter().map(|r| r.class).collect();
    let preds = predict_inputs(params, &inputs, &classes)?;
    preds
        .iter()
        .zip(test.records())
        .map(|(p, r)| EvalRecord::from_prediction(r.id.clone(), p, &r.pose()))
        .collect()
}
