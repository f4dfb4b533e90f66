//! Orbit camera driven by an arcball, pan and zoom.
//!
//! The arcball maps normalized device coordinates onto a unit sphere; a drag
//! from `p0` to `p1` is the rotation carrying the first sphere point to the
//! second. The camera orbits its look-at point by the inverse of that
//! rotation, so the scene appears to follow the cursor.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ParamValue, ParameterSet, CAM_AT, CAM_EYE, CAM_UP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CameraError {
    #[error("zoom factor must be positive")]
    NonPositiveFactor,
    #[error("eye and look-at point coincide")]
    DegenerateView,
    #[error("up vector is parallel to the view direction")]
    DegenerateUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Float> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; the zero vector stays zero.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self / n
        } else {
            self
        }
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x, self.y, self.z].map(|c| c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn from_f64(a: [f64; 3]) -> Self {
        let c = |v: f64| T::from(v).unwrap_or_else(T::nan);
        Vec3::new(c(a[0]), c(a[1]), c(a[2]))
    }
}

impl<T: Float> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Float> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Float> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Float> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Float> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion used for rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub v: Vec3<T>,
}

impl<T: Float> Quat<T> {
    pub fn identity() -> Self {
        Quat { w: T::one(), v: Vec3::zero() }
    }

    /// Rotation by `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let half = angle / (T::one() + T::one());
        Quat { w: half.cos(), v: axis * half.sin() }
    }

    pub fn conjugate(self) -> Self {
        Quat { w: self.w, v: -self.v }
    }

    pub fn mul(self, o: Self) -> Self {
        Quat {
            w: self.w * o.w - self.v.dot(o.v),
            v: o.v * self.w + self.v * o.w + self.v.cross(o.v),
        }
    }

    pub fn rotate(self, p: Vec3<T>) -> Vec3<T> {
        // p + 2w(v×p) + 2 v×(v×p)
        let two = T::one() + T::one();
        let t = self.v.cross(p) * two;
        p + t * self.w + self.v.cross(t)
    }
}

/// Point on the unit arcball sphere for normalized device coordinates.
/// Points outside the sphere's silhouette are projected onto it.
pub fn sphere_point<T: Float>(p: (T, T)) -> Vec3<T> {
    let (x, y) = p;
    let r2 = x * x + y * y;
    if r2 > T::one() {
        Vec3::new(x, y, T::zero()).normalized()
    } else {
        Vec3::new(x, y, (T::one() - r2).max(T::zero()).sqrt()).normalized()
    }
}

/// Rotation carrying the sphere point of `p0` onto that of `p1`, or `None`
/// when the two points coincide or are antipodal.
pub fn drag_rotation<T: Float>(p0: (T, T), p1: (T, T)) -> Option<Quat<T>> {
    let v0 = sphere_point(p0);
    let v1 = sphere_point(p1);
    let axis = v0.cross(v1);
    if axis.norm() <= T::epsilon() {
        return None;
    }
    let angle = v0.dot(v1).max(-T::one()).min(T::one()).acos();
    Some(Quat::from_axis_angle(axis.normalized(), angle))
}

/// Look-at camera. `up` is unit length and orthogonal to the view direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera<T> {
    pub eye: Vec3<T>,
    pub at: Vec3<T>,
    pub up: Vec3<T>,
}

impl<T: Float> Camera<T> {
    pub fn new(eye: Vec3<T>, at: Vec3<T>, up: Vec3<T>) -> Result<Self, CameraError> {
        let view = at - eye;
        if view.norm() <= T::epsilon() {
            return Err(CameraError::DegenerateView);
        }
        let forward = view.normalized();
        let up = up - forward * up.dot(forward);
        if up.norm() <= T::epsilon() {
            return Err(CameraError::DegenerateUp);
        }
        Ok(Camera { eye, at, up: up.normalized() })
    }

    pub fn distance(&self) -> T {
        (self.eye - self.at).norm()
    }

    pub fn forward(&self) -> Vec3<T> {
        (self.at - self.eye).normalized()
    }

    pub fn right(&self) -> Vec3<T> {
        self.forward().cross(self.up).normalized()
    }

    /// Orbit about `at` for a drag from `p0` to `p1` (both in `[-1, 1]²`).
    pub fn arcball(&self, p0: (T, T), p1: (T, T)) -> Self {
        match drag_rotation(p0, p1) {
            Some(q) => self.orbit(q.conjugate()),
            None => *self,
        }
    }

    /// Apply `rotation` to the eye offset and the up vector.
    pub fn orbit(&self, rotation: Quat<T>) -> Self {
        let dist = self.distance();
        let offset = rotation.rotate(self.eye - self.at).normalized() * dist;
        let forward = -offset.normalized();
        let up = rotation.rotate(self.up);
        let up = (up - forward * up.dot(forward)).normalized();
        Camera { eye: self.at + offset, at: self.at, up }
    }

    /// Translate eye and look-at point along the view plane, scaled by the
    /// orbit distance.
    pub fn pan(&self, dx: T, dy: T) -> Self {
        let shift = (self.right() * dx + self.up * dy) * self.distance();
        Camera { eye: self.eye + shift, at: self.at + shift, up: self.up }
    }

    pub fn zoom(&self, factor: T) -> Result<Self, CameraError> {
        if factor.is_nan() || factor <= T::zero() {
            return Err(CameraError::NonPositiveFactor);
        }
        Ok(Camera { eye: self.at + (self.eye - self.at) / factor, at: self.at, up: self.up })
    }

    /// The reserved camera parameters.
    pub fn to_params(&self) -> ParameterSet {
        ParameterSet::new()
            .with(CAM_EYE, ParamValue::Vec3(self.eye.to_f64()))
            .with(CAM_AT, ParamValue::Vec3(self.at.to_f64()))
            .with(CAM_UP, ParamValue::Vec3(self.up.to_f64()))
    }

    /// Camera from the reserved parameters, if all three are present vec3s.
    pub fn from_params(params: &ParameterSet) -> Option<Result<Self, CameraError>> {
        let get = |name| match params.get(name) {
            Some(ParamValue::Vec3(v)) => Some(Vec3::from_f64(*v)),
            _ => None,
        };
        Some(Camera::new(get(CAM_EYE)?, get(CAM_AT)?, get(CAM_UP)?))
    }
}

impl<T: Float> Default for Camera<T> {
    /// Eye on the +z axis at distance 5 looking at the origin, y up.
    fn default() -> Self {
        let c = |v: f64| T::from(v).expect("small constants are representable");
        Camera {
            eye: Vec3::new(c(0.0), c(0.0), c(5.0)),
            at: Vec3::zero(),
            up: Vec3::new(c(0.0), c(1.0), c(0.0)),
        }
    }
}
