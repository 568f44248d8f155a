//! The half-order Sobolev scaling `L = (EE*)^{-1/2}` and the regularizing filters built on it.
//!
//! Everything here is diagonal in the spherical-harmonic basis: `L` multiplies degree `ℓ`
//! by `(ℓ+½)^{1/2} = 1/σ_ℓ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::HarmonicCoeffs;

/// Singular values `σ_ℓ = (ℓ+½)^{-1/2}` of the embedding `H^{1/2} → L²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevScale {
    sigma: Vec<f64>,
}

impl SobolevScale {
    pub fn new(l_max: usize) -> Self {
        SobolevScale { sigma: (0..=l_max).map(sigma).collect() }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

#[inline]
pub fn sigma(l: usize) -> f64 {
    (l as f64 + 0.5).powf(-0.5)
}

/// Regularization filter `h_α` applied through the coefficients of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    /// `h(s) = 1/√s`, i.e. `U = L^{-1}`.
    ExactInverse,
    /// `h_α(s) = 1/(α + s)`.
    Tikhonov { alpha: f64 },
}

impl FilterSpec {
    pub fn tikhonov(alpha: f64) -> Result<Self> {
        let f = FilterSpec::Tikhonov { alpha };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FilterSpec::Tikhonov { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                Err(Error::invalid(format!("Tikhonov alpha must be finite and >= 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// `σ h(σ²)`, the multiplier applied to degree-`ℓ` data coefficients.
    pub fn multiplier(&self, l: usize) -> f64 {
        let s = sigma(l);
        match *self {
            FilterSpec::ExactInverse => 1.0,
            FilterSpec::Tikhonov { alpha } => s / (alpha + s * s),
        }
    }
}

pub fn apply_l(c: &HarmonicCoeffs) -> HarmonicCoeffs {
    c.scale_by_degree(|l| (l as f64 + 0.5).sqrt())
}

pub fn apply_l_inv(c: &HarmonicCoeffs) -> HarmonicCoeffs {
    c.scale_by_degree(sigma)
}

/// Computes `L U_α g` from the coefficients of `g`.
pub fn apply_filtered(c: &HarmonicCoeffs, spec: &FilterSpec) -> Result<HarmonicCoeffs> {
    spec.validate()?;
    Ok(c.scale_by_degree(|l| spec.multiplier(l)))
}
