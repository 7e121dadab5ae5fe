//! Closed-form densities for the two-photon decay: the relative-energy
//! Lorentzian line, the spatial density of the relative coordinate, the
//! lifetime (PAL) rate, the coincidence double exponential, the Doppler
//! Gaussian, and the three comparison shapes used as fit models.
//!
//! Times are ps, distances mm, energies keV; `gamma` is always a rate in
//! ps⁻¹ unless a function says otherwise.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::kinematics::Vec3;
use crate::quadrature::{integrate, Tolerance};
use crate::{Error, Result};

fn require_positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

/// Line shape of the relative photon energy, `(γ/π) / ((ω - E)² + γ²)`,
/// with `gamma` the half-width in keV.
pub fn lorentzian_line(omega: f64, e: f64, gamma: f64) -> Result<f64> {
    let gamma = require_positive("gamma", gamma)?;
    let d = omega - e;
    Ok(gamma / PI / (d * d + gamma * gamma))
}

/// `|ψ(r, dt)|²` for the relative coordinate: photons separated by `r` mm a
/// time `dt` ps after injection.
///
/// `(Γ / 4πc) r⁻² exp[-2Γ(dt - r/2c)]` inside the causal ball `r ≤ 2c·dt`,
/// zero outside and for `dt ≤ 0`. The `1/c` turns the natural-unit prefactor
/// into mm⁻³.
pub fn relative_density(r: f64, dt: f64, gamma: f64, c: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("relative distance must be > 0, got {r}")));
    }
    let gamma = require_positive("gamma", gamma)?;
    let c = require_positive("c", c)?;
    if !(dt > 0.0) || r > 2.0 * c * dt {
        return Ok(0.0);
    }
    let exponent = -2.0 * gamma * (dt - r / (2.0 * c));
    Ok(gamma / (4.0 * PI * c) / (r * r) * exponent.exp())
}

/// Probability that the relative coordinate lies inside the causal ball at
/// time `dt`: `1 - exp(-2Γ·dt)`.
pub fn relative_norm_closed(gamma_dt: f64) -> f64 {
    if gamma_dt <= 0.0 {
        0.0
    } else {
        -(-2.0 * gamma_dt).exp_m1()
    }
}

/// Rate of counting an annihilation photon at distance `x1` a time `dt`
/// after injection, relative to its value at the light-travel edge:
/// `exp[-Γ(dt - x1/c)]` for `dt ≥ x1/c`, else 0.
pub fn pal_rate(dt: f64, x1: f64, gamma: f64, c: f64) -> f64 {
    let delay = dt - x1 / c;
    if delay < 0.0 {
        0.0
    } else {
        (-gamma * delay).exp()
    }
}

/// [`pal_rate`] normalized as a density in `dt` over `(x1/c, ∞)`.
pub fn pal_density(dt: f64, x1: f64, gamma: f64, c: f64) -> f64 {
    gamma * pal_rate(dt, x1, gamma, c)
}

/// Single-photon counting rate obtained by tracing the two-photon density
/// over the unobserved photon's distance `x2 ∈ [0, c·dt]`, with
/// `|x_r| = x1 + x2`. Unnormalized; its logarithmic slope in `dt` tends to
/// `-Γ` once `c·dt ≫ x1`.
pub fn pal_marginal(dt: f64, x1: f64, gamma: f64, c: f64) -> Result<f64> {
    let gamma = require_positive("gamma", gamma)?;
    let c = require_positive("c", c)?;
    if dt - x1 / c < 0.0 {
        return Ok(0.0);
    }
    let reach = c * dt;
    // integrand scaled by exp(-Γ dt) so the exponential stays O(1)
    let est = integrate(
        |x2: f64| {
            let w = x2 / (x1 + x2);
            w * w * (gamma * (x2 / c - dt)).exp()
        },
        0.0,
        reach,
        Tolerance::new(0.0, 1e-12),
    )?;
    let log_prefactor = -2.0 * gamma * dt + gamma * x1 / c + gamma * dt;
    Ok(4.0 * PI * log_prefactor.exp() * est.value)
}

/// Density of the second photon after the first has been counted, as a
/// function of its own time since injection and distance: same causal
/// exponential as [`pal_rate`].
pub fn conditional_second_photon_density(dt: f64, x2: f64, gamma: f64, c: f64) -> f64 {
    pal_rate(dt, x2, gamma, c)
}

/// `(Γ/2) exp(-Γ|dtau|)`.
pub fn coincidence_pdf(dtau: f64, gamma: f64) -> Result<f64> {
    CoincidencePdf::new(gamma, 0.0).map(|p| p.pdf(dtau))
}

/// Double-exponential law for the emission-time difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidencePdf {
    pub gamma: f64,
    pub mu: f64,
}

impl CoincidencePdf {
    pub fn new(gamma: f64, mu: f64) -> Result<Self> {
        require_positive("gamma", gamma)?;
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        Ok(Self { gamma, mu })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        0.5 * self.gamma * (-self.gamma * (x - self.mu).abs()).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = self.gamma * (x - self.mu);
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    pub fn fwhm(&self) -> f64 {
        2.0 * LN_2 / self.gamma
    }
}

/// Center-of-mass momentum density `(πσ²)^(-3/2) exp(-|kc|²/σ²)`, keV⁻³.
pub fn doppler_pdf(kc: Vec3, sigma: f64) -> Result<f64> {
    let sigma = require_positive("sigma", sigma)?;
    let s2 = sigma * sigma;
    Ok((PI * s2).powf(-1.5) * (-kc.norm_sq() / s2).exp())
}

/// Standard deviation of each Cartesian component under [`doppler_pdf`].
pub fn doppler_component_sd(sigma: f64) -> f64 {
    sigma / std::f64::consts::SQRT_2
}

/// The three shapes compared against the coincidence spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DoubleExponential,
    Lorentzian,
    Gaussian,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::DoubleExponential, ModelKind::Lorentzian, ModelKind::Gaussian];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DoubleExponential => "double_exponential",
            ModelKind::Lorentzian => "lorentzian",
            ModelKind::Gaussian => "gaussian",
        }
    }

    /// FWHM in terms of the fitted scale (Laplace b, Lorentzian half-width,
    /// Gaussian σ).
    pub fn fwhm(self, scale: f64) -> f64 {
        match self {
            ModelKind::DoubleExponential => 2.0 * LN_2 * scale,
            ModelKind::Lorentzian => 2.0 * scale,
            ModelKind::Gaussian => 2.0 * (2.0 * LN_2).sqrt() * scale,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "double_exponential" | "doubleexponential" | "laplace" => Ok(ModelKind::DoubleExponential),
            "lorentzian" | "cauchy" => Ok(ModelKind::Lorentzian),
            "gaussian" | "normal" => Ok(ModelKind::Gaussian),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Unit-normalized comparison shape with a single parameter `gamma`:
///
/// - double exponential `(γ/2) exp(-γ|x|)`
/// - Lorentzian `(γ/π) / (x² + γ²)`
/// - Gaussian `(γ/√π) exp(-γ²x²)`
pub fn model_shape(kind: ModelKind, x: f64, gamma: f64) -> Result<f64> {
    let g = require_positive("gamma", gamma)?;
    Ok(match kind {
        ModelKind::DoubleExponential => 0.5 * g * (-g * x.abs()).exp(),
        ModelKind::Lorentzian => g / PI / (x * x + g * g),
        ModelKind::Gaussian => g / PI.sqrt() * (-g * g * x * x).exp(),
    })
}

/// String-keyed variant of [`model_shape`].
pub fn model_shape_named(kind: &str, x: f64, gamma: f64) -> Result<f64> {
    model_shape(kind.parse()?, x, gamma)
}

/// The comparison shapes in their literal unnormalized form, without
/// renormalization: `(2Γ)⁻¹exp(-Γ|x|)`, `(πΓ²)⁻¹(x²+Γ²)⁻¹` and
/// `(Γπ)^(-3/2)exp(-Γ²x²)`. For plotting only.
pub fn literal_shape(kind: ModelKind, x: f64, gamma: f64) -> Result<f64> {
    let g = require_positive("gamma", gamma)?;
    Ok(match kind {
        ModelKind::DoubleExponential => (-g * x.abs()).exp() / (2.0 * g),
        ModelKind::Lorentzian => 1.0 / (PI * g * g) / (x * x + g * g),
        ModelKind::Gaussian => (g * PI).powf(-1.5) * (-g * g * x * x).exp(),
    })
}

/// A located, scaled fit model. `scale` is the Laplace `b`, Lorentzian
/// half-width or Gaussian σ, in the units of the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub kind: ModelKind,
    pub location: f64,
    pub scale: f64,
}

impl ModelShape {
    pub fn new(kind: ModelKind, location: f64, scale: f64) -> Result<Self> {
        require_positive("scale", scale)?;
        Ok(Self { kind, location, scale })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        let s = self.scale;
        match self.kind {
            ModelKind::DoubleExponential => 0.5 * (-z.abs()).exp() / s,
            ModelKind::Lorentzian => 1.0 / (PI * s * (1.0 + z * z)),
            ModelKind::Gaussian => (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt()),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        let s = self.scale;
        match self.kind {
            ModelKind::DoubleExponential => -z.abs() - (2.0 * s).ln(),
            ModelKind::Lorentzian => -(PI * s).ln() - z.mul_add(z, 1.0).ln(),
            ModelKind::Gaussian => -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        match self.kind {
            ModelKind::DoubleExponential => {
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            ModelKind::Lorentzian => 0.5 + z.atan() / PI,
            ModelKind::Gaussian => 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2),
        }
    }

    pub fn fwhm(&self) -> f64 {
        self.kind.fwhm(self.scale)
    }
}
