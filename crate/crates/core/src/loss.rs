//! Pose regression losses with analytic gradients.
//!
//! Every loss takes a prediction carrying the network's raw (unnormalized)
//! quaternion and a target with a canonical quaternion. The raw quaternion
//! is normalized before use and gradients are returned with respect to the
//! raw values, i.e. propagated through the normalization.
//!
//! `|v|` is the elementwise L1 norm. At a kink (an exactly zero difference,
//! or `q0 == 0` for the sign penalty) the subgradient 0 is used.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};
use crate::pose::{rotation_from_unit, Pose, Quaternion, MIN_NORM};

/// The four pose losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `|p' - p| + alpha |q' - q|`
    L1,
    /// `|p' - p| + alpha (1 - <q', q>)`
    L2,
    /// Point-cloud L1: `sum_i |H(p', q') x_i - H(p, q) x_i|`
    L3,
    /// Point-cloud L1 plus `max(-q'_0, 0)`
    L4,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::L1, LossKind::L2, LossKind::L3, LossKind::L4];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::L3 => "l3",
            LossKind::L4 => "l4",
        }
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, LossKind::L1 | LossKind::L2)
    }

    pub fn uses_cloud(self) -> bool {
        !self.uses_alpha()
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" | "posecnn" => Ok(LossKind::L2),
            "l3" | "pointcloud" => Ok(LossKind::L3),
            "l4" | "pointcloud-penalized" => Ok(LossKind::L4),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 1.0 }
    }
}

impl LossWeights {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha {alpha} must be >= 0")));
        }
        Ok(LossWeights { alpha })
    }
}

/// How the point-cloud losses combine per-point terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointReduction {
    #[default]
    Sum,
    Mean,
}

/// A predicted pose as emitted by the network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPose {
    pub position: Vec3,
    pub raw_quaternion: [f64; 4],
}

impl RawPose {
    pub fn new(position: Vec3, raw_quaternion: [f64; 4]) -> Self {
        RawPose {
            position,
            raw_quaternion,
        }
    }

    pub fn from_pose(pose: &Pose) -> Self {
        RawPose::new(pose.position, pose.orientation.to_array())
    }

    /// Normalized quaternion and the raw norm.
    pub fn normalized(&self) -> Result<(Quaternion, f64)> {
        let r = self.raw_quaternion;
        let n = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n > MIN_NORM) || !n.is_finite() {
            return Err(Error::InvalidQuaternion(format!("raw quaternion {r:?} has norm {n}")));
        }
        Ok((Quaternion::from_array(r.map(|c| c / n)), n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValueGrad {
    pub value: f64,
    pub d_position: Vec3,
    pub d_raw_quaternion: [f64; 4],
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Pulls a gradient with respect to the unit quaternion `q = r / |r|` back
/// to the raw quaternion `r`: `(g - q <q, g>) / |r|`.
fn through_normalization(q: Quaternion, norm: f64, g: [f64; 4]) -> [f64; 4] {
    let qa = q.to_array();
    let radial: f64 = qa.iter().zip(&g).map(|(a, b)| a * b).sum();
    [0, 1, 2, 3].map(|k| (g[k] - qa[k] * radial) / norm)
}

/// Gradient of `sum_jk G_jk R(q)_jk` with respect to the quaternion entries,
/// for the polynomial rotation parameterization.
fn rotation_pullback(q: Quaternion, g: &Mat3) -> [f64; 4] {
    let Quaternion { w, x, y, z } = q;
    let dw = 2.0 * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] - y * g[2][0] + x * g[2][1]);
    let dx = 2.0
        * (y * g[0][1] + z * g[0][2] + y * g[1][0] - 2.0 * x * g[1][1] - w * g[1][2] + z * g[2][0] + w * g[2][1]
            - 2.0 * x * g[2][2]);
    let dy = 2.0
        * (-2.0 * y * g[0][0] + x * g[0][1] + w * g[0][2] + x * g[1][0] + z * g[1][2] - w * g[2][0] + z * g[2][1]
            - 2.0 * y * g[2][2]);
    let dz = 2.0
        * (-2.0 * z * g[0][0] - w * g[0][1] + x * g[0][2] + w * g[1][0] - 2.0 * z * g[1][1]
            + y * g[1][2]
            + x * g[2][0]
            + y * g[2][1]);
    [dw, dx, dy, dz]
}

fn position_l1(pred: &RawPose, target: &Pose) -> (f64, Vec3) {
    let d = geom::sub(pred.position, target.position);
    (d.iter().map(|c| c.abs()).sum(), d.map(sign))
}

/// `|p' - p| + alpha |q' - q|`.
pub fn loss_l1(pred: &RawPose, target: &Pose, w: LossWeights) -> Result<LossValueGrad> {
    let (q, n) = pred.normalized()?;
    let (pos, d_position) = position_l1(pred, target);
    let dq: [f64; 4] = {
        let (a, b) = (q.to_array(), target.orientation.to_array());
        [0, 1, 2, 3].map(|k| a[k] - b[k])
    };
    let value = pos + w.alpha * dq.iter().map(|c| c.abs()).sum::<f64>();
    let g = dq.map(|c| w.alpha * sign(c));
    Ok(LossValueGrad {
        value,
        d_position,
        d_raw_quaternion: through_normalization(q, n, g),
    })
}

/// `|p' - p| + alpha (1 - <q', q>)`.
pub fn loss_posecnn(pred: &RawPose, target: &Pose, w: LossWeights) -> Result<LossValueGrad> {
    let (q, n) = pred.normalized()?;
    let (pos, d_position) = position_l1(pred, target);
    let t = target.orientation;
    let value = pos + w.alpha * (1.0 - q.dot(t));
    let g = t.to_array().map(|c| -w.alpha * c);
    Ok(LossValueGrad {
        value,
        d_position,
        d_raw_quaternion: through_normalization(q, n, g),
    })
}

fn pointcloud_terms(
    pred: &RawPose,
    target: &Pose,
    points: &[Vec3],
    reduction: PointReduction,
) -> Result<(LossValueGrad, Quaternion, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("point cloud is empty".into()));
    }
    let (q, n) = pred.normalized()?;
    let r_pred = rotation_from_unit(q);
    let r_true = target.rotation();
    let offset = geom::sub(pred.position, target.position);
    let mut value = 0.0;
    let mut d_position = [0.0; 3];
    let mut g = [[0.0; 3]; 3];
    for &x in points {
        let a = geom::mat_vec(&r_pred, x);
        let b = geom::mat_vec(&r_true, x);
        for j in 0..3 {
            let d = a[j] - b[j] + offset[j];
            value += d.abs();
            let s = sign(d);
            d_position[j] += s;
            for (k, xk) in x.iter().enumerate() {
                g[j][k] += s * xk;
            }
        }
    }
    let scale = match reduction {
        PointReduction::Sum => 1.0,
        PointReduction::Mean => 1.0 / points.len() as f64,
    };
    let gq = rotation_pullback(q, &g).map(|c| c * scale);
    Ok((
        LossValueGrad {
            value: value * scale,
            d_position: geom::scale(d_position, scale),
            d_raw_quaternion: through_normalization(q, n, gq),
        },
        q,
        n,
    ))
}

/// Point-cloud L1 loss, summed over points.
pub fn loss_pointcloud(pred: &RawPose, target: &Pose, cloud: &[Vec3]) -> Result<LossValueGrad> {
    loss_pointcloud_reduced(pred, target, cloud, PointReduction::Sum)
}

pub fn loss_pointcloud_reduced(
    pred: &RawPose,
    target: &Pose,
    cloud: &[Vec3],
    reduction: PointReduction,
) -> Result<LossValueGrad> {
    pointcloud_terms(pred, target, cloud, reduction).map(|(l, _, _)| l)
}

/// Point-cloud L1 loss plus `max(-q'_0, 0)` on the normalized prediction.
pub fn loss_pointcloud_penalized(pred: &RawPose, target: &Pose, cloud: &[Vec3]) -> Result<LossValueGrad> {
    loss_pointcloud_penalized_reduced(pred, target, cloud, PointReduction::Sum)
}

pub fn loss_pointcloud_penalized_reduced(
    pred: &RawPose,
    target: &Pose,
    cloud: &[Vec3],
    reduction: PointReduction,
) -> Result<LossValueGrad> {
    let (mut l, q, n) = pointcloud_terms(pred, target, cloud, reduction)?;
    if q.w < 0.0 {
        l.value += -q.w;
        let pen = through_normalization(q, n, [-1.0, 0.0, 0.0, 0.0]);
        for k in 0..4 {
            l.d_raw_quaternion[k] += pen[k];
        }
    }
    Ok(l)
}

/// Loss settings bundled for dispatch from training code.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub weights: LossWeights,
    pub reduction: PointReduction,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec {
            kind,
            weights: LossWeights::default(),
            reduction: PointReduction::Sum,
        }
    }

    pub fn evaluate(&self, pred: &RawPose, target: &Pose, cloud: &[Vec3]) -> Result<LossValueGrad> {
        match self.kind {
            LossKind::L1 => loss_l1(pred, target, self.weights),
            LossKind::L2 => loss_posecnn(pred, target, self.weights),
            LossKind::L3 => loss_pointcloud_reduced(pred, target, cloud, self.reduction),
            LossKind::L4 => loss_pointcloud_penalized_reduced(pred, target, cloud, self.reduction),
        }
    }

    /// Smallest distance from a kink of this loss at `pred`; finite
    /// differences are only meaningful when this exceeds the step size.
    pub fn kink_distance(&self, pred: &RawPose, target: &Pose, cloud: &[Vec3]) -> Result<f64> {
        let (q, _) = pred.normalized()?;
        let mut dist = geom::sub(pred.position, target.position)
            .iter()
            .fold(f64::INFINITY, |m, c| m.min(c.abs()));
        match self.kind {
            LossKind::L1 => {
                for (a, b) in q.to_array().iter().zip(target.orientation.to_array()) {
                    dist = dist.min((a - b).abs());
                }
            }
            LossKind::L2 => {}
            LossKind::L3 | LossKind::L4 => {
                dist = f64::INFINITY;
                let (ra, rb) = (rotation_from_unit(q), target.rotation());
                let off = geom::sub(pred.position, target.position);
                for &x in cloud {
                    let d = geom::add(geom::sub(geom::mat_vec(&ra, x), geom::mat_vec(&rb, x)), off);
                    dist = d.iter().fold(dist, |m, c| m.min(c.abs()));
                }
                if self.kind == LossKind::L4 {
                    dist = dist.min(q.w.abs());
                }
            }
        }
        Ok(dist)
    }
}

/// Finite-difference step used by [`gradcheck`].
pub const GRADCHECK_STEP: f64 = 1e-6;

/// Configurations whose kink distance is below this are resampled.
pub const KINK_MARGIN: f64 = 1e-5;

/// Relative error `|a - n| / max(|a|, |n|, floor)` with a small absolute
/// floor so exactly-zero components do not divide by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Random (prediction, target, cloud) configuration for gradient checks.
pub fn random_configuration<R: Rng + ?Sized>(rng: &mut R, points: usize) -> (RawPose, Pose, Vec<Vec3>) {
    let target = Pose::new(
        [
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(0.5..1.5),
        ],
        Quaternion::random_uniform(rng),
    )
    .expect("random pose is valid");
    let jitter: Vec3 = [0, 1, 2].map(|_| {
        let n: f64 = StandardNormal.sample(rng);
        0.05 * n
    });
    let mut raw = [0.0f64; 4];
    for c in raw.iter_mut() {
        *c = StandardNormal.sample(rng);
    }
    let scale = rng.random_range(0.5..2.0) / raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    let pred = RawPose::new(geom::add(target.position, jitter), raw.map(|c| c * scale));
    let cloud = (0..points)
        .map(|_| [0, 1, 2].map(|_| rng.random_range(-0.15..0.15)))
        .collect();
    (pred, target, cloud)
}

/// Worst relative error between analytic gradients and central finite
/// differences over `trials` seeded configurations. Configurations within
/// [`KINK_MARGIN`] of a kink are resampled.
pub fn gradcheck(kind: LossKind, trials: usize, seed: u64) -> Result<f64> {
    let spec = LossSpec::new(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < trials {
        let (pred, target, cloud) = random_configuration(&mut rng, 50);
        if spec.kink_distance(&pred, &target, &cloud)? < KINK_MARGIN {
            continue;
        }
        let analytic = spec.evaluate(&pred, &target, &cloud)?;
        let eval = |p: RawPose| spec.evaluate(&p, &target, &cloud).map(|l| l.value);
        let h = GRADCHECK_STEP;
        for k in 0..3 {
            let (mut a, mut b) = (pred, pred);
            a.position[k] += h;
            b.position[k] -= h;
            let num = (eval(a)? - eval(b)?) / (2.0 * h);
            worst = worst.max(relative_error(analytic.d_position[k], num));
        }
        for k in 0..4 {
            let (mut a, mut b) = (pred, pred);
            a.raw_quaternion[k] += h;
            b.raw_quaternion[k] -= h;
            let num = (eval(a)? - eval(b)?) / (2.0 * h);
            worst = worst.max(relative_error(analytic.d_raw_quaternion[k], num));
        }
        done += 1;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target_08() -> Pose {
        // q0 = 0.8, canonical
        Pose::new([0.1, -0.05, 0.9], Quaternion::new(0.8, 0.36, -0.48, 0.0)).unwrap()
    }

    fn cube_corners() -> Vec<Vec3> {
        let mut v = Vec::new();
        for x in [-0.1, 0.1] {
            for y in [-0.1, 0.1] {
                for z in [-0.1, 0.1] {
                    v.push([x, y, z]);
                }
            }
        }
        v
    }

    #[test]
    fn zero_at_target() {
        let t = target_08();
        let p = RawPose::from_pose(&t);
        let cloud = cube_corners();
        for kind in LossKind::ALL {
            let l = LossSpec::new(kind).evaluate(&p, &t, &cloud).unwrap();
            assert!(l.value.abs() < 1e-15, "{kind}: {}", l.value);
        }
    }

    #[test]
    fn l1_examples() {
        let t = target_08();
        let w = LossWeights::default();
        let mut p = RawPose::from_pose(&t);
        p.position = geom::add(t.position, [0.03, 0.0, 0.04]);
        assert!((loss_l1(&p, &t, w).unwrap().value - 0.07).abs() < 1e-12);
        let neg = RawPose::new(t.position, t.orientation.to_array().map(|c| -c));
        let expected = 2.0 * (0.8 + 0.36 + 0.48);
        assert!((loss_l1(&neg, &t, w).unwrap().value - expected).abs() < 1e-12);
        let zero = RawPose::new(t.position, [0.0; 4]);
        assert!(matches!(loss_l1(&zero, &t, w), Err(Error::InvalidQuaternion(_))));
    }

    #[test]
    fn posecnn_examples() {
        let t = target_08();
        let w = LossWeights::default();
        let neg = RawPose::new(t.position, t.orientation.to_array().map(|c| -c));
        assert!((loss_posecnn(&neg, &t, w).unwrap().value - 2.0).abs() < 1e-12);
        let mut p = RawPose::from_pose(&t);
        p.position = geom::add(t.position, [0.03, 0.0, 0.04]);
        assert!((loss_posecnn(&p, &t, w).unwrap().value - 0.07).abs() < 1e-12);
        assert!(LossWeights::new(-1.0).is_err());
    }

    #[test]
    fn pointcloud_examples() {
        let t = Pose::new([0.0, 0.0, 1.0], Quaternion::IDENTITY).unwrap();
        let p = RawPose::new([0.1, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]);
        let two = [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1]];
        assert!((loss_pointcloud(&p, &t, &two).unwrap().value - 0.2).abs() < 1e-12);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t0 = Pose::IDENTITY;
        let rz = RawPose::new([0.0; 3], [h, 0.0, 0.0, h]);
        let v = loss_pointcloud(&rz, &t0, &[[1.0, 0.0, 0.0]]).unwrap().value;
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        assert!(matches!(loss_pointcloud(&rz, &t0, &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn penalty_resolves_double_cover() {
        let t = target_08();
        let cloud = cube_corners();
        let neg = RawPose::new(t.position, t.orientation.to_array().map(|c| -c));
        let l3 = loss_pointcloud(&neg, &t, &cloud).unwrap().value;
        let l4 = loss_pointcloud_penalized(&neg, &t, &cloud).unwrap().value;
        assert!(l3.abs() < 1e-12);
        assert!((l4 - 0.8).abs() < 1e-12);

        // positive q0: penalty inactive
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut pred, target, cloud) = random_configuration(&mut rng, 20);
        pred.raw_quaternion = [0.3, 0.5, -0.7, 0.2];
        let a = loss_pointcloud(&pred, &target, &cloud).unwrap();
        let b = loss_pointcloud_penalized(&pred, &target, &cloud).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_translation_is_m_times_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (_, target, cloud) = random_configuration(&mut rng, 37);
            let delta: Vec3 = [0, 1, 2].map(|_| rng.random_range(-0.2..0.2));
            let pred = RawPose::new(geom::add(target.position, delta), target.orientation.to_array());
            let v = loss_pointcloud(&pred, &target, &cloud).unwrap().value;
            let expected = 37.0 * delta.iter().map(|c| c.abs()).sum::<f64>();
            assert!((v - expected).abs() < 1e-12 * expected.max(1.0), "{v} vs {expected}");
        }
    }

    #[test]
    fn l3_symmetric_and_sign_blind_l4_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let (pred, target, cloud) = random_configuration(&mut rng, 30);
            let (q, _) = pred.normalized().unwrap();
            let pred_pose = Pose::new(pred.position, q).unwrap();
            let forward = loss_pointcloud(&pred, &target, &cloud).unwrap().value;
            let back = loss_pointcloud(&RawPose::from_pose(&target), &pred_pose, &cloud)
                .unwrap()
                .value;
            assert!((forward - back).abs() < 1e-12);
            let negated = RawPose::new(pred.position, pred.raw_quaternion.map(|c| -c));
            let neg = loss_pointcloud(&negated, &target, &cloud).unwrap().value;
            assert!((forward - neg).abs() < 1e-12);
        }
    }

    #[test]
    fn strictly_positive_for_distinct_poses() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cloud = cube_corners();
        for _ in 0..50 {
            let (pred, target, _) = random_configuration(&mut rng, 4);
            for kind in [LossKind::L3, LossKind::L4] {
                assert!(LossSpec::new(kind).evaluate(&pred, &target, &cloud).unwrap().value > 0.0);
            }
        }
    }

    #[test]
    fn mean_reduction_divides_by_point_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (pred, target, cloud) = random_configuration(&mut rng, 25);
        let s = loss_pointcloud(&pred, &target, &cloud).unwrap();
        let m = loss_pointcloud_reduced(&pred, &target, &cloud, PointReduction::Mean).unwrap();
        assert!((s.value / 25.0 - m.value).abs() < 1e-12);
        for k in 0..4 {
            assert!((s.d_raw_quaternion[k] / 25.0 - m.d_raw_quaternion[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in LossKind::ALL {
            let err = gradcheck(kind, 100, 7).unwrap();
            assert!(err < 1e-4, "{kind}: {err}");
        }
    }

    #[test]
    fn penalty_subgradient_is_zero_at_kink() {
        let t = Pose::IDENTITY;
        let p = RawPose::new([0.0; 3], [0.0, 1.0, 0.0, 0.0]);
        let cloud = cube_corners();
        let a = loss_pointcloud(&p, &t, &cloud).unwrap();
        let b = loss_pointcloud_penalized(&p, &t, &cloud).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_kind_parsing() {
        assert_eq!("L4".parse::<LossKind>().unwrap(), LossKind::L4);
        assert_eq!("posecnn".parse::<LossKind>().unwrap(), LossKind::L2);
        assert!("l5".parse::<LossKind>().is_err());
    }
}
