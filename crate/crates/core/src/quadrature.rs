//! Globally adaptive Gauss–Kronrod (7/15) quadrature for real and complex
//! integrands, plus a panel driver for long oscillatory ranges.

use num_traits::Zero;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

pub use num_complex::Complex64;

use crate::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values an integrand may return.
pub trait Scalar: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
            max_intervals: 20_000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// One 15-point Kronrod rule on `[a, b]`; error is `|K15 - G7|`.
pub fn gk15<T: Scalar, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * w;
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).magnitude())
}

struct Interval<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Interval<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Interval<T> {}
impl<T> PartialOrd for Interval<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Interval<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]`, bisecting the interval
/// with the largest error estimate until the total error is within
/// `max(tol.abs, tol.rel * |I|)`.
pub fn integrate<T: Scalar, F: FnMut(f64) -> T>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value, error });

    loop {
        if !total.magnitude().is_finite() {
            return Err(Error::Quadrature(format!("integrand not finite on [{a}, {b}]")));
        }
        if total_err <= tol.abs.max(tol.rel * total.magnitude()) {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "{} subintervals exhausted on [{a}, {b}]; error estimate {total_err:e}",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at machine resolution: accept as is
            heap.push(Interval { error: 0.0, ..worst });
            total_err = heap.iter().map(|i| i.error).sum();
            continue;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total = total - worst.value + lv + rv;
        total_err += le + re - worst.error;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }

    // re-sum to shed the drift of incremental updates
    let mut value = T::zero();
    let mut abs_error = 0.0;
    for i in heap.iter() {
        value = value + i.value;
        abs_error += i.error;
    }
    Ok(Estimate {
        value,
        abs_error,
        evaluations,
    })
}

/// Splits `[a, b]` into panels no wider than `panel` and integrates each
/// adaptively. Used for long oscillatory ranges where a single adaptive pass
/// would waste its budget resolving oscillations one bisection at a time.
pub fn integrate_panels<T: Scalar, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    panel: f64,
    tol: Tolerance,
) -> Result<Estimate<T>> {
    if !(panel > 0.0) {
        return Err(Error::Quadrature(format!("panel width must be > 0, got {panel}")));
    }
    let n = ((b - a) / panel).ceil().max(1.0) as usize;
    let width = (b - a) / n as f64;
    let mut value = T::zero();
    let mut abs_error = 0.0;
    let mut evaluations = 0;
    for i in 0..n {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n { b } else { a + width * (i + 1) as f64 };
        let est = integrate(&mut f, lo, hi, tol)?;
        value = value + est.value;
        abs_error += est.abs_error;
        evaluations += est.evaluations;
    }
    Ok(Estimate {
        value,
        abs_error,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        // K15 integrates degree-22 polynomials exactly
        let (v, _) = gk15(&mut |x: f64| x.powi(10), -1.0, 2.0);
        assert_relative_eq!(v, (2f64.powi(11) + 1.0) / 11.0, max_relative = 1e-14);
    }

    #[test]
    fn sharp_lorentzian() {
        let est = integrate(|x: f64| 1.0 / (x * x + 1.0), -1e4, 1e4, Tolerance::new(1e-15, 1e-14)).unwrap();
        assert_relative_eq!(est.value, 2.0 * 1e4f64.atan(), max_relative = 1e-12);
    }

    #[test]
    fn complex_oscillatory() {
        let tol = Tolerance::new(1e-13, 1e-13);
        let est = integrate_panels(|x: f64| Complex64::new(0.0, 3.0 * x).exp(), 0.0, 50.0, 0.5, tol).unwrap();
        let exact = (Complex64::new(0.0, 150.0).exp() - 1.0) / Complex64::new(0.0, 3.0);
        assert!((est.value - exact).norm() < 1e-11);
    }

    #[test]
    fn empty_interval_and_bad_limits() {
        assert_eq!(
            integrate(|x: f64| x, 1.0, 1.0, Tolerance::default()).unwrap().value,
            0.0
        );
        assert!(integrate(|x: f64| x, 0.0, f64::INFINITY, Tolerance::default()).is_err());
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 0.0,
            max_intervals: 8,
        };
        assert!(integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).is_err());
    }
}
