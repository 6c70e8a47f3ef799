//! Planar value types shared by every module.
//!
//! Wrench components are always laid out as `(f_z, f_y, tau_x)`: the force
//! controlled axis first, then the two inertia-reduction axes. `as_array`,
//! `from_array` and [`DiagonalSelector`] all use that order.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Result, SimError};

/// Force along tool Z, force along tool Y, torque about tool X.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanarWrench {
    pub f_z: f64,
    pub f_y: f64,
    pub tau_x: f64,
}

impl PlanarWrench {
    pub const ZERO: PlanarWrench = PlanarWrench {
        f_z: 0.0,
        f_y: 0.0,
        tau_x: 0.0,
    };

    pub const fn new(f_z: f64, f_y: f64, tau_x: f64) -> Self {
        Self { f_z, f_y, tau_x }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(f_z: f64, f_y: f64, tau_x: f64) -> Result<Self> {
        let w = Self::new(f_z, f_y, tau_x);
        if w.is_finite() {
            Ok(w)
        } else {
            Err(SimError::param(
                "wrench",
                format!("non-finite component in {w:?}"),
            ))
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.f_z, self.f_y, self.tau_x]
    }

    pub fn is_finite(&self) -> bool {
        self.f_z.is_finite() && self.f_y.is_finite() && self.tau_x.is_finite()
    }

    pub fn force_norm(&self) -> f64 {
        self.f_y.hypot(self.f_z)
    }

    /// Componentwise product with a diagonal gain in `(z, y, x)` order.
    pub fn scale(&self, diag: [f64; 3]) -> Self {
        Self::new(self.f_z * diag[0], self.f_y * diag[1], self.tau_x * diag[2])
    }
}

impl Add for PlanarWrench {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.f_z + o.f_z, self.f_y + o.f_y, self.tau_x + o.tau_x)
    }
}

impl AddAssign for PlanarWrench {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for PlanarWrench {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.f_z - o.f_z, self.f_y - o.f_y, self.tau_x - o.tau_x)
    }
}

impl Neg for PlanarWrench {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.f_z, -self.f_y, -self.tau_x)
    }
}

impl Mul<f64> for PlanarWrench {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.f_z * s, self.f_y * s, self.tau_x * s)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid maps -pi to +pi already, which is what we want
    a
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanarPose {
    pub y: f64,
    pub z: f64,
    theta: f64,
}

impl PlanarPose {
    pub fn new(y: f64, z: f64, theta: f64) -> Self {
        Self {
            y,
            z,
            theta: normalize_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = normalize_angle(theta);
    }

    /// Maps a point given in this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.y + c * p[0] - s * p[1], self.z + s * p[0] + c * p[1]]
    }

    /// Inverse of [`transform_point`](Self::transform_point).
    pub fn inverse_transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        let d = [p[0] - self.y, p[1] - self.z];
        [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
    }

    /// Pose difference `self - other` with the angle wrapped.
    pub fn error_from(&self, other: &PlanarPose) -> [f64; 3] {
        [
            self.z - other.z,
            self.y - other.y,
            normalize_angle(self.theta - other.theta),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanarTwist {
    pub v_y: f64,
    pub v_z: f64,
    pub omega_x: f64,
}

impl PlanarTwist {
    pub const ZERO: PlanarTwist = PlanarTwist {
        v_y: 0.0,
        v_z: 0.0,
        omega_x: 0.0,
    };

    pub const fn new(v_y: f64, v_z: f64, omega_x: f64) -> Self {
        Self { v_y, v_z, omega_x }
    }

    pub fn is_finite(&self) -> bool {
        self.v_y.is_finite() && self.v_z.is_finite() && self.omega_x.is_finite()
    }
}

/// Simulation time at a control boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimeStamp {
    pub t: f64,
    pub tick: u64,
}

impl TimeStamp {
    pub fn at_tick(tick: u64, control_period: f64) -> Self {
        Self {
            t: tick as f64 * control_period,
            tick,
        }
    }
}

/// Diagonal {0,1} projector over the `(z, y, x)` wrench layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagonalSelector([bool; 3]);

impl DiagonalSelector {
    pub fn new(diag: [f64; 3]) -> Result<Self> {
        let mut out = [false; 3];
        for (i, &v) in diag.iter().enumerate() {
            out[i] = if v == 1.0 {
                true
            } else if v == 0.0 {
                false
            } else {
                return Err(SimError::InvalidSelector { index: i, value: v });
            };
        }
        Ok(Self(out))
    }

    pub const fn from_bools(diag: [bool; 3]) -> Self {
        Self(diag)
    }

    /// Selects only the force-controlled Z axis.
    pub const fn force_axis() -> Self {
        Self([true, false, false])
    }

    pub fn complement(&self) -> Self {
        Self([!self.0[0], !self.0[1], !self.0[2]])
    }

    pub fn is_complement_of(&self, other: &DiagonalSelector) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a != b)
    }

    pub fn diag(&self) -> [f64; 3] {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }
}

pub fn wrench_project(w: PlanarWrench, selector: DiagonalSelector) -> PlanarWrench {
    let a = w.as_array();
    let s = selector.0;
    PlanarWrench::from_array([
        if s[0] { a[0] } else { 0.0 },
        if s[1] { a[1] } else { 0.0 },
        if s[2] { a[2] } else { 0.0 },
    ])
}

/// Rotates the force part of `w` by `theta` about X; the torque is unchanged.
pub fn rotate_wrench(w: PlanarWrench, theta: f64) -> PlanarWrench {
    let (s, c) = theta.sin_cos();
    PlanarWrench::new(s * w.f_y + c * w.f_z, c * w.f_y - s * w.f_z, w.tau_x)
}
