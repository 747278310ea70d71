//! Vectors and unit quaternions.
//!
//! Quaternions are stored `(w, x, y, z)`. Rotations are right-handed and act on
//! column vectors, so `a * b` applies `b` first.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector, or `None` when the norm is degenerate.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::norm_eps() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self).scale(t)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quaternion<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quaternion<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation of `angle` radians about `axis` (normalised internally).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let Some(axis) = axis.normalized() else {
            return Self::identity();
        };
        let half = angle / T::lit(2.0);
        let s = half.sin();
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Inverse of [`Quaternion::log`] scaled by two: rotation vector to quaternion.
    pub fn from_rotation_vector(v: Vec3<T>) -> Self {
        let angle = v.norm();
        if angle <= T::norm_eps() {
            return Self::new(T::one(), v.x / T::lit(2.0), v.y / T::lit(2.0), v.z / T::lit(2.0))
                .normalized_or_identity();
        }
        Self::from_axis_angle(v, angle)
    }

    /// Shortest-arc rotation taking direction `from` onto direction `to`.
    pub fn between(from: Vec3<T>, to: Vec3<T>) -> Self {
        let (Some(a), Some(b)) = (from.normalized(), to.normalized()) else {
            return Self::identity();
        };
        let d = a.dot(b);
        if d < T::lit(-1.0) + T::lit(1e-9) {
            // antiparallel: any perpendicular axis works
            let mut axis = Vec3::new(T::one(), T::zero(), T::zero()).cross(a);
            if axis.norm_sq() < T::lit(1e-12) {
                axis = Vec3::new(T::zero(), T::one(), T::zero()).cross(a);
            }
            return Self::from_axis_angle(axis, T::PI());
        }
        let c = a.cross(b);
        Self::new(T::one() + d, c.x, c.y, c.z).normalized_or_identity()
    }

    pub fn vector(self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Inverse of a unit quaternion.
    pub fn inverse(self) -> Self {
        self.conj()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::NonFinite("quaternion"));
        }
        let n = self.norm();
        if n <= T::norm_eps() {
            return Err(Error::DegenerateQuaternion(n.to_f64_lossy()));
        }
        Ok(self.scale(T::one() / n))
    }

    pub fn normalized_or_identity(self) -> Self {
        self.normalized().unwrap_or_else(|_| Self::identity())
    }

    /// Representative with non-negative `w`.
    pub fn canonical(self) -> Self {
        if self.w < T::zero() {
            -self
        } else {
            self
        }
    }

    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = self.vector();
        let t = u.cross(v).scale(T::lit(2.0));
        v + t.scale(self.w) + u.cross(t)
    }

    /// Rotation vector (axis times angle / 2) of a unit quaternion, taken on the
    /// `w >= 0` hemisphere so that antipodal inputs give the same result.
    pub fn log(self) -> Vec3<T> {
        let q = self.canonical();
        let v = q.vector();
        let vn = v.norm();
        if vn <= T::norm_eps() {
            return v;
        }
        let half = vn.atan2(q.w);
        v.scale(half / vn)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(self) -> T {
        T::lit(2.0) * self.log().norm()
    }

    /// Shortest-arc spherical interpolation.
    pub fn slerp(self, other: Self, t: T) -> Self {
        let mut b = other;
        let mut d = self.dot(b);
        if d < T::zero() {
            b = -b;
            d = -d;
        }
        if d > T::lit(1.0 - 1e-9) {
            let q = self.scale(T::one() - t) + b.scale(t);
            return q.normalized_or_identity();
        }
        let theta = d.min(T::one()).acos();
        let s = theta.sin();
        let wa = ((T::one() - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        (self.scale(wa) + b.scale(wb)).normalized_or_identity()
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(self) -> [[T; 3]; 3] {
        let two = T::lit(2.0);
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                T::one() - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                T::one() - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                T::one() - two * (x * x + y * y),
            ],
        ]
    }

    pub fn cast<U: Real>(self) -> Quaternion<U> {
        Quaternion::new(
            U::lit(self.w.to_f64_lossy()),
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }
}

impl<T: Real> Mul for Quaternion<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl<T: Real> Add for Quaternion<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Quaternion<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Quaternion<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

fn check_unit<T: Real>(q: Quaternion<T>) -> Result<Quaternion<T>> {
    q.normalized()
}

/// Squared geodesic distance `|log(a^-1 b)|^2` between two rotations.
///
/// The relative rotation is moved to the `w >= 0` hemisphere before taking the
/// log, so `q` and `-q` are at distance zero. For a relative rotation of angle
/// `theta` the result is `(theta / 2)^2`.
pub fn quat_log_distance_sq<T: Real>(a: Quaternion<T>, b: Quaternion<T>) -> Result<T> {
    let a = check_unit(a)?;
    let b = check_unit(b)?;
    Ok((a.inverse() * b).log().norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn z_rot(angle: f64) -> Quaternion<f64> {
        Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle)
    }

    #[test]
    fn log_distance_identity_and_antipodal() {
        let q = Quaternion::new(0.3, -0.5, 0.1, 0.8).normalized().unwrap();
        assert!(quat_log_distance_sq(q, q).unwrap() < 1e-24);
        assert!(quat_log_distance_sq(q, -q).unwrap() < 1e-24);
    }

    #[test]
    fn log_distance_quarter_turn() {
        let d = quat_log_distance_sq(Quaternion::identity(), z_rot(std::f64::consts::FRAC_PI_2)).unwrap();
        assert_relative_eq!(d, 0.616_850_275_068_084_9, epsilon = 1e-12);
    }

    #[test]
    fn log_distance_rejects_bad_input() {
        let bad = Quaternion::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(matches!(
            quat_log_distance_sq(bad, Quaternion::identity()),
            Err(Error::NonFinite(_))
        ));
        let tiny = Quaternion::new(1e-20, 0.0, 0.0, 0.0);
        assert!(matches!(
            quat_log_distance_sq(tiny, Quaternion::identity()),
            Err(Error::DegenerateQuaternion(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let d = quat_log_distance_sq(
            Quaternion::<f32>::identity(),
            Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f32::consts::FRAC_PI_2),
        )
        .unwrap();
        assert!((d - 0.616_850_3).abs() < 1e-5);
    }

    #[test]
    fn rotate_quarter_turn() {
        let v = z_rot(std::f64::consts::FRAC_PI_2).rotate(Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(v.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(v.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn between_maps_direction() {
        let a = Vec3::new(1.0, 2.0, -0.5);
        let b = Vec3::new(-3.0, 0.2, 1.0);
        let q = Quaternion::between(a, b);
        let r = q.rotate(a).normalized().unwrap();
        let bn = b.normalized().unwrap();
        assert_relative_eq!(r.dot(bn), 1.0, epsilon = 1e-12);
        let q = Quaternion::between(a, -a);
        assert_relative_eq!(q.rotate(a).dot(a), -a.norm_sq(), epsilon = 1e-9);
    }

    fn arb_quat() -> impl Strategy<Value = Quaternion<f64>> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).normalized().unwrap())
    }

    proptest! {
        #[test]
        fn matrix_agrees_with_rotate(q in arb_quat(), x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0) {
            let m = q.to_matrix();
            let v = Vec3::new(x, y, z);
            let r = q.rotate(v);
            prop_assert!((m[0][0] * x + m[0][1] * y + m[0][2] * z - r.x).abs() < 1e-9);
            prop_assert!((m[1][0] * x + m[1][1] * y + m[1][2] * z - r.y).abs() < 1e-9);
            prop_assert!((m[2][0] * x + m[2][1] * y + m[2][2] * z - r.z).abs() < 1e-9);
        }

        #[test]
        fn slerp_endpoints(a in arb_quat(), b in arb_quat()) {
            prop_assert!(quat_log_distance_sq(a.slerp(b, 0.0), a).unwrap() < 1e-16);
            prop_assert!(quat_log_distance_sq(a.slerp(b, 1.0), b).unwrap() < 1e-16);
        }

        #[test]
        fn log_distance_symmetric(a in arb_quat(), b in arb_quat()) {
            let ab = quat_log_distance_sq(a, b).unwrap();
            let ba = quat_log_distance_sq(b, a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn rotation_vector_roundtrip(q in arb_quat()) {
            let back = Quaternion::from_rotation_vector(q.log().scale(2.0));
            prop_assert!(quat_log_distance_sq(q, back).unwrap() < 1e-20);
        }
    }
}
