//! Photon-pair kinematics in individual and center/relative coordinates.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::{Error, Result};

/// Three-vector in keV (momentum) or mm (position), depending on context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    /// Euclidean norm; `hypot` keeps tiny and huge components from
    /// underflowing or overflowing in the squares.
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Angle between two vectors in radians, accurate near 0 and π.
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::from_array(a)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Two annihilation photons. `omega_j = |k_j|` holds exactly because the
/// energies are computed from the wave vectors at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonPair {
    pub k1: Vec3,
    pub k2: Vec3,
    pub omega1: f64,
    pub omega2: f64,
    /// Unit direction of the relative wave vector.
    pub khat: Vec3,
}

impl PhotonPair {
    pub fn center(&self) -> Vec3 {
        self.k1 + self.k2
    }

    /// Deviation from back-to-back emission: angle between k1 and −k2, rad.
    pub fn acollinearity(&self) -> f64 {
        self.k1.angle_to(-self.k2)
    }

    pub fn energy_sum(&self) -> f64 {
        self.omega1 + self.omega2
    }
}

/// `(k1, k2) -> (k1 + k2, (k1 - k2) / 2)`.
pub fn to_center_relative(k1: Vec3, k2: Vec3) -> (Vec3, Vec3) {
    (k1 + k2, (k1 - k2) * 0.5)
}

/// Inverse of [`to_center_relative`]: `k1 = kc/2 + kr`, `k2 = kc/2 - kr`.
pub fn from_center_relative(kc: Vec3, kr: Vec3) -> (Vec3, Vec3) {
    let half = kc * 0.5;
    (half + kr, half - kr)
}

/// Tolerance on `|khat| = 1`.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Builds a photon pair whose relative wave vector has length `m` along
/// `khat` and whose center wave vector is `kc`, split evenly between the
/// photons. Momentum is conserved exactly; the energy sum differs from the
/// positronium energy by at most `|kc|²/(4m)`.
pub fn pair_from_direction(khat: Vec3, kc: Vec3, m: f64) -> Result<PhotonPair> {
    let norm = khat.norm();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::InvalidDirection { norm });
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::invalid("m", format!("must be > 0, got {m}")));
    }
    if !kc.is_finite() {
        return Err(Error::invalid("kc", "non-finite center wave vector"));
    }
    let (k1, k2) = from_center_relative(kc, khat * m);
    Ok(PhotonPair {
        k1,
        k2,
        omega1: k1.norm(),
        omega2: k2.norm(),
        khat,
    })
}

/// Whether `|kc|` is small enough for the first-order-in-velocity
/// construction of [`pair_from_direction`] to be meaningful.
pub fn is_nonrelativistic(kc: Vec3, m: f64) -> bool {
    kc.norm() <= 0.1 * m
}

/// Positronium energy `2m + |pc|²/(4m)`.
pub fn ps_total_energy(pc: Vec3, m: f64) -> f64 {
    2.0 * m + pc.norm_sq() / (4.0 * m)
}

/// Both sides of `k1·x1 + k2·x2 = kc·xc + kr·xr`, where `xc = (x1 + x2)/2`
/// and `xr = x1 - x2` are conjugate to `kc` and `kr`.
pub fn phase_invariant_check(k1: Vec3, k2: Vec3, x1: Vec3, x2: Vec3) -> (f64, f64) {
    let lhs = k1.dot(x1) + k2.dot(x2);
    let (kc, kr) = to_center_relative(k1, k2);
    let xc = (x1 + x2) * 0.5;
    let xr = x1 - x2;
    (lhs, kc.dot(xc) + kr.dot(xr))
}
