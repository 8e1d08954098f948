//! Pose representation: position plus a unit quaternion held in a single
//! canonical sign convention.
//!
//! A rotation has two unit quaternion representatives, `q` and `-q`. The
//! canonical one has a nonnegative real part; when the real part is exactly
//! zero, the first nonzero imaginary component is made positive.

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Mat4, Vec3};

/// Inputs claimed to be unit quaternions are accepted within this tolerance.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Quaternions with a smaller norm are treated as zero.
pub const MIN_NORM: f64 = 1e-12;

// Already-normalized inputs (|n^2 - 1| below this) keep their bits.
const RENORM_SKIP: f64 = 1e-14;

/// Quaternion `w + xi + yj + zk`; `w` is the real component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(self, rhs: Quaternion) -> Self {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    /// True when the sign convention holds; the norm is checked separately.
    pub fn has_canonical_sign(self) -> bool {
        if self.w > 0.0 {
            return true;
        }
        if self.w < 0.0 {
            return false;
        }
        [self.x, self.y, self.z]
            .into_iter()
            .find(|c| *c != 0.0)
            .is_some_and(|c| c > 0.0)
    }

    pub fn is_canonical(self, norm_tolerance: f64) -> bool {
        (self.norm() - 1.0).abs() <= norm_tolerance && self.has_canonical_sign()
    }

    /// Unit-norm canonical representative of the same rotation.
    ///
    /// Idempotent bit for bit, and `canonicalize(-q) == canonicalize(q)`.
    pub fn canonicalize(self) -> Result<Quaternion> {
        let n2 = self.dot(self);
        if !n2.is_finite() || n2.sqrt() <= MIN_NORM {
            return Err(Error::InvalidQuaternion(format!(
                "cannot canonicalize {self:?} (norm {})",
                n2.sqrt()
            )));
        }
        let q = if (n2 - 1.0).abs() <= RENORM_SKIP {
            self
        } else {
            self.scale(1.0 / n2.sqrt())
        };
        let q = if q.has_canonical_sign() { q } else { q.scale(-1.0) };
        // Adding +0.0 turns any -0.0 into +0.0.
        Ok(Quaternion::new(q.w + 0.0, q.x + 0.0, q.y + 0.0, q.z + 0.0))
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotation(self) -> Result<Mat3> {
        if !self.is_unit() {
            return Err(Error::InvalidQuaternion(format!(
                "rotation requires a unit quaternion, norm is {}",
                self.norm()
            )));
        }
        Ok(rotation_from_unit(self))
    }

    /// Rotates `v` by this unit quaternion.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        geom::mat_vec(&rotation_from_unit(self), v)
    }

    /// Uniformly distributed rotation (Shoemake's subgroup algorithm),
    /// returned in canonical form.
    pub fn random_uniform<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
            let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
            let q = Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin());
            if let Ok(c) = q.canonicalize() {
                return c;
            }
        }
    }
}

impl std::ops::Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Rotation matrix for a quaternion assumed to be unit norm (not checked).
pub fn rotation_from_unit(q: Quaternion) -> Mat3 {
    let Quaternion { w, x, y, z } = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Geodesic angle in degrees between the rotations of two unit quaternions,
/// `2 * acos(|<qa, qb>|)`, in `[0, 180]`.
///
/// Evaluated through `atan2` of the chord lengths, which is exact at zero
/// and well conditioned for small angles.
pub fn orientation_angle_deg(qa: Quaternion, qb: Quaternion) -> Result<f64> {
    for q in [qa, qb] {
        if !q.is_unit() {
            return Err(Error::InvalidQuaternion(format!(
                "orientation angle requires unit quaternions, got norm {}",
                q.norm()
            )));
        }
    }
    let qb = if qa.dot(qb) < 0.0 { -qb } else { qb };
    let diff = [qa.w - qb.w, qa.x - qb.x, qa.y - qb.y, qa.z - qb.z];
    let sum = [qa.w + qb.w, qa.x + qb.x, qa.y + qb.y, qa.z + qb.z];
    let len = |v: [f64; 4]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let half = len(diff).atan2(len(sum));
    Ok((4.0 * half).to_degrees().clamp(0.0, 180.0))
}

/// Rotation about a unit axis by an angle strictly inside `(-pi, pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle {
    axis: Vec3,
    angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Result<Self> {
        let n = geom::norm(axis);
        if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("axis must be unit length, norm is {n}")));
        }
        if !(angle > -PI && angle < PI) {
            return Err(Error::Range(format!("angle {angle} outside (-pi, pi)")));
        }
        Ok(AxisAngle { axis, angle })
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn to_quaternion(&self) -> Quaternion {
        let (s, c) = (0.5 * self.angle).sin_cos();
        let a = self.axis;
        Quaternion::new(c, s * a[0], s * a[1], s * a[2])
            .canonicalize()
            .expect("axis-angle quaternion has unit norm")
    }

    /// Inverse of [`AxisAngle::to_quaternion`]. Returns a nonnegative angle;
    /// the identity maps to angle 0 about +z. A half-turn (`w == 0`) has
    /// angle exactly pi, which is outside the open range and rejected.
    pub fn from_quaternion(q: Quaternion) -> Result<Self> {
        let q = q.canonicalize()?;
        let v = [q.x, q.y, q.z];
        let s = geom::norm(v);
        if s == 0.0 {
            return AxisAngle::new([0.0, 0.0, 1.0], 0.0);
        }
        let angle = 2.0 * s.atan2(q.w);
        if angle >= PI {
            return Err(Error::Range(
                "half-turn rotation has angle pi, outside (-pi, pi)".into(),
            ));
        }
        let axis = geom::scale(v, 1.0 / s);
        let axis = geom::scale(axis, 1.0 / geom::norm(axis));
        AxisAngle::new(axis, angle)
    }
}

/// Position (meters, camera frame) plus canonical orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: [0.0; 3],
        orientation: Quaternion::IDENTITY,
    };

    /// Builds a pose, canonicalizing the orientation.
    pub fn new(position: Vec3, orientation: Quaternion) -> Result<Self> {
        if position.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite position {position:?}")));
        }
        Ok(Pose {
            position,
            orientation: orientation.canonicalize()?,
        })
    }

    pub fn rotation(&self) -> Mat3 {
        rotation_from_unit(self.orientation)
    }

    /// Homogeneous transform taking object-frame points to the camera frame.
    pub fn to_matrix(&self) -> Mat4 {
        let r = self.rotation();
        let p = self.position;
        [
            [r[0][0], r[0][1], r[0][2], p[0]],
            [r[1][0], r[1][1], r[1][2], p[1]],
            [r[2][0], r[2][1], r[2][2], p[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn transform_point(&self, x: Vec3) -> Vec3 {
        geom::add(geom::mat_vec(&self.rotation(), x), self.position)
    }

    pub fn inverse_transform_point(&self, y: Vec3) -> Vec3 {
        let rt = geom::transpose(&self.rotation());
        geom::mat_vec(&rt, geom::sub(y, self.position))
    }
}

/// Free-function form of [`Quaternion::canonicalize`].
pub fn canonicalize(q: Quaternion) -> Result<Quaternion> {
    q.canonicalize()
}

/// Free-function form of [`Quaternion::to_rotation`].
pub fn quat_to_rotation(q: Quaternion) -> Result<Mat3> {
    q.to_rotation()
}

pub fn pose_to_matrix(pose: &Pose) -> Mat4 {
    pose.to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_mat_close(a: &Mat3, b: &Mat3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - b[i][j]).abs() <= tol, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn canonicalize_examples() {
        let id = Quaternion::IDENTITY;
        assert_eq!(Quaternion::new(-1.0, 0.0, 0.0, 0.0).canonicalize().unwrap(), id);
        assert_eq!(Quaternion::new(2.0, 0.0, 0.0, 0.0).canonicalize().unwrap(), id);
        let c = Quaternion::new(0.0, -0.6, 0.0, -0.8).canonicalize().unwrap();
        assert!((c.x - 0.6).abs() < 1e-15 && (c.z - 0.8).abs() < 1e-15);
        assert_eq!(c.w, 0.0);
        assert_eq!(c.y.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn canonicalize_rejects_zero_and_nan() {
        assert!(Quaternion::new(0.0, 0.0, 0.0, 0.0).canonicalize().is_err());
        assert!(Quaternion::new(1e-13, 0.0, 0.0, 0.0).canonicalize().is_err());
        assert!(Quaternion::new(f64::NAN, 0.0, 0.0, 0.0).canonicalize().is_err());
    }

    #[test]
    fn tie_break_when_real_part_is_zero() {
        let c = Quaternion::new(0.0, 0.0, -1.0, 0.0).canonicalize().unwrap();
        assert_eq!(c, Quaternion::new(0.0, 0.0, 1.0, 0.0));
        let c = Quaternion::new(-0.0, 0.0, 0.0, -3.0).canonicalize().unwrap();
        assert_eq!(c, Quaternion::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn rotation_examples() {
        let i3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_mat_close(&Quaternion::IDENTITY.to_rotation().unwrap(), &i3, 0.0);
        let rz = Quaternion::new(H, 0.0, 0.0, H).to_rotation().unwrap();
        assert_mat_close(&rz, &[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 1e-15);
        let r = Quaternion::new(0.5, 0.5, 0.5, 0.5).to_rotation().unwrap();
        assert_mat_close(&r, &[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 0.0);
        assert!(Quaternion::new(2.0, 0.0, 0.0, 0.0).to_rotation().is_err());
    }

    #[test]
    fn pose_matrix_examples() {
        let p = Pose::new([0.0, 0.0, 1.0], Quaternion::IDENTITY).unwrap();
        let m = p.to_matrix();
        assert_eq!(m[0][3], 0.0);
        assert_eq!(m[2][3], 1.0);
        assert_eq!(m[0][0], 1.0);
        let id = Pose::IDENTITY.to_matrix();
        for (i, row) in id.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let rz = Pose::new([0.0; 3], Quaternion::new(H, 0.0, 0.0, H)).unwrap();
        let y = rz.transform_point([1.0, 0.0, 0.0]);
        assert!(y[0].abs() < 1e-15 && (y[1] - 1.0).abs() < 1e-15 && y[2] == 0.0);
    }

    #[test]
    fn orientation_angle_examples() {
        let q = Quaternion::new(0.3, -0.1, 0.5, 0.2).canonicalize().unwrap();
        assert_eq!(orientation_angle_deg(q, q).unwrap(), 0.0);
        assert_eq!(orientation_angle_deg(q, -q).unwrap(), 0.0);
        let rz = Quaternion::new(H, 0.0, 0.0, H);
        let a = orientation_angle_deg(Quaternion::IDENTITY, rz).unwrap();
        assert!((a - 90.0).abs() < 1e-12, "{a}");
        assert!(orientation_angle_deg(Quaternion::new(1.0, 1.0, 0.0, 0.0), q).is_err());
    }

    #[test]
    fn axis_angle_examples() {
        let aa = AxisAngle::new([0.0, 0.0, 1.0], PI / 2.0).unwrap();
        let q = aa.to_quaternion();
        assert!((q.w - H).abs() < 1e-15 && (q.z - H).abs() < 1e-15);
        let axis = [0.48, 0.6, 0.64];
        let a = AxisAngle::new(axis, 1.1).unwrap().to_quaternion();
        let b = AxisAngle::new(geom::scale(axis, -1.0), -1.1).unwrap().to_quaternion();
        assert_eq!(a, b);
        assert!(AxisAngle::new([0.0, 0.0, 1.0], PI).is_err());
        assert!(AxisAngle::new([0.0, 0.0, 2.0], 0.1).is_err());
        assert!(AxisAngle::from_quaternion(Quaternion::new(0.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn axis_angle_round_trip_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = Quaternion::random_uniform(&mut rng);
            let aa = AxisAngle::from_quaternion(q).unwrap();
            let back = aa.to_quaternion();
            let err = orientation_angle_deg(q, back).unwrap().to_radians();
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn pose_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = Quaternion::random_uniform(&mut rng);
            let p: Vec3 = [rng.random(), rng.random(), rng.random::<f64>() + 0.5];
            let pose = Pose::new(p, q).unwrap();
            let x: Vec3 = [rng.random(), rng.random(), rng.random()];
            let back = pose.inverse_transform_point(pose.transform_point(x));
            for k in 0..3 {
                assert!((back[k] - x[k]).abs() < 1e-9);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn quat() -> impl Strategy<Value = Quaternion> {
            (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
                .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-6)
                .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
        }

        proptest! {
            #[test]
            fn canonical_is_idempotent_and_sign_blind(q in quat()) {
                let c = q.canonicalize().unwrap();
                prop_assert_eq!(c.canonicalize().unwrap(), c);
                let n = (-q).canonicalize().unwrap();
                prop_assert_eq!(c.to_array().map(f64::to_bits), n.to_array().map(f64::to_bits));
                prop_assert!(c.is_canonical(1e-9));
            }

            #[test]
            fn rotation_is_proper_and_sign_blind(q in quat()) {
                let c = q.canonicalize().unwrap();
                let r = c.to_rotation().unwrap();
                let rn = (-c).to_rotation().unwrap();
                let rtr = geom::mat_mul(&geom::transpose(&r), &r);
                for i in 0..3 {
                    for j in 0..3 {
                        prop_assert!((r[i][j] - rn[i][j]).abs() <= 1e-12);
                        let e = if i == j { 1.0 } else { 0.0 };
                        prop_assert!((rtr[i][j] - e).abs() <= 1e-12);
                    }
                }
                prop_assert!((geom::det(&r) - 1.0).abs() <= 1e-12);
            }

            #[test]
            fn angle_is_a_metric(a in quat(), b in quat(), c in quat()) {
                let (a, b, c) = (a.canonicalize().unwrap(), b.canonicalize().unwrap(), c.canonicalize().unwrap());
                let ab = orientation_angle_deg(a, b).unwrap();
                let ba = orientation_angle_deg(b, a).unwrap();
                let bc = orientation_angle_deg(b, c).unwrap();
                let ac = orientation_angle_deg(a, c).unwrap();
                prop_assert!((0.0..=180.0).contains(&ab));
                prop_assert!((ab - ba).abs() <= 1e-12);
                prop_assert!(ac <= ab + bc + 1e-9);
            }
        }
    }
}
