//! Physical constants, the para-positronium decay rate and the handful of
//! unit conversions the rest of the crate needs.
//!
//! Internally everything is carried in ps, mm and keV. Natural-unit
//! expressions (ħ = c = 1) are translated at the boundary through
//! [`PhysicalParams::hbar_kev_ps`] and [`PhysicalParams::c_mm_per_ps`].

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::{Error, Result};

/// CODATA 2018 fine-structure constant.
pub const ALPHA_CODATA_2018: f64 = 7.297_352_569_3e-3;
/// CODATA 2018 electron rest energy in keV.
pub const ELECTRON_MASS_KEV: f64 = 510.998_950_00;
/// Reduced Planck constant in keV·ps (6.582119569e-16 eV·s).
pub const HBAR_KEV_PS: f64 = 6.582_119_569e-7;
/// Speed of light in mm/ps.
pub const C_MM_PER_PS: f64 = 0.299_792_458;
/// Width of the center-of-mass momentum Gaussian measured in tissue, keV.
///
/// Quoted alongside `0.005 m`, which would be 2.555 keV; the keV figure is
/// used.
pub const SIGMA_DOPPLER_KEV: f64 = 2.4;

/// The single source of physics numbers.
///
/// `gamma` is never stored: it is recomputed from the constants (or the
/// lifetime override) on every call so that edits to `alpha` or `m_e_kev`
/// can never leave a stale rate behind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub alpha: f64,
    pub m_e_kev: f64,
    pub hbar_kev_ps: f64,
    pub c_mm_per_ps: f64,
    pub sigma_doppler_kev: f64,
    /// Material-dependent lifetime in ps (e.g. 156 ps in α-SiO₂). When set,
    /// `gamma = 1 / lifetime_override_ps` exactly.
    pub lifetime_override_ps: Option<f64>,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            alpha: ALPHA_CODATA_2018,
            m_e_kev: ELECTRON_MASS_KEV,
            hbar_kev_ps: HBAR_KEV_PS,
            c_mm_per_ps: C_MM_PER_PS,
            sigma_doppler_kev: SIGMA_DOPPLER_KEV,
            lifetime_override_ps: None,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

impl PhysicalParams {
    /// Same constants, fixed lifetime.
    pub fn with_lifetime(mut self, lifetime_ps: f64) -> Self {
        self.lifetime_override_ps = Some(lifetime_ps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("m_e_kev", self.m_e_kev)?;
        positive("hbar_kev_ps", self.hbar_kev_ps)?;
        positive("c_mm_per_ps", self.c_mm_per_ps)?;
        positive("sigma_doppler_kev", self.sigma_doppler_kev)?;
        if let Some(t) = self.lifetime_override_ps {
            positive("lifetime_override_ps", t)?;
        }
        Ok(())
    }

    /// Decay rate in ps⁻¹, honouring the lifetime override.
    pub fn gamma(&self) -> Result<f64> {
        match self.lifetime_override_ps {
            Some(t) => Ok(1.0 / positive("lifetime_override_ps", t)?),
            None => decay_rate(self),
        }
    }

    pub fn lifetime_ps(&self) -> Result<f64> {
        Ok(1.0 / self.gamma()?)
    }

    /// Decay rate expressed as an energy width ħΓ in keV.
    pub fn gamma_kev(&self) -> Result<f64> {
        Ok(self.gamma()? * self.hbar_kev_ps)
    }

    pub fn convert(&self, q: Quantity, to: Unit) -> Result<Quantity> {
        convert(q, to, self)
    }
}

/// Para-positronium two-photon decay rate `½ α⁵ m / ħ` in ps⁻¹.
///
/// Ignores `lifetime_override_ps`; use [`PhysicalParams::gamma`] for the
/// rate the simulation should run with.
pub fn decay_rate(params: &PhysicalParams) -> Result<f64> {
    let alpha = positive("alpha", params.alpha)?;
    let m = positive("m_e_kev", params.m_e_kev)?;
    let hbar = positive("hbar_kev_ps", params.hbar_kev_ps)?;
    let rate = 0.5 * alpha.powi(5) * m / hbar;
    positive("gamma", rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Kev,
    PerPs,
    Ps,
    Mm,
}

impl Unit {
    fn dimension(self) -> Dimension {
        match self {
            Unit::Kev | Unit::PerPs => Dimension::Energy,
            Unit::Ps | Unit::Mm => Dimension::Time,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Kev => "keV",
            Unit::PerPs => "ps^-1",
            Unit::Ps => "ps",
            Unit::Mm => "mm",
        })
    }
}

// energy ~ inverse time (via hbar), length ~ time (via c)
#[derive(PartialEq, Eq)]
enum Dimension {
    Energy,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Self { value, unit }
    }
}

/// Converts between the dimension pairs this crate uses: keV ↔ ps⁻¹ through
/// ħ and ps ↔ mm through c.
pub fn convert(q: Quantity, to: Unit, params: &PhysicalParams) -> Result<Quantity> {
    if q.unit.dimension() != to.dimension() {
        return Err(Error::Unit {
            from: q.unit.to_string(),
            to: to.to_string(),
        });
    }
    let hbar = positive("hbar_kev_ps", params.hbar_kev_ps)?;
    let c = positive("c_mm_per_ps", params.c_mm_per_ps)?;
    let value = match (q.unit, to) {
        (a, b) if a == b => q.value,
        (Unit::Kev, Unit::PerPs) => q.value / hbar,
        (Unit::PerPs, Unit::Kev) => q.value * hbar,
        (Unit::Ps, Unit::Mm) => q.value * c,
        (Unit::Mm, Unit::Ps) => q.value / c,
        _ => unreachable!("dimension check covers all mixed pairs"),
    };
    Ok(Quantity::new(value, to))
}
