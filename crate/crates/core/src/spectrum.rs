//! Biphoton spectral density |f(Ω)|² on a symmetric quadrature grid.
//!
//! The same density doubles as the classical source spectrum S(ω₀ + Ω) for
//! the OCT reference engine.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::{QoctError, Result, SPEED_OF_LIGHT, UM};

/// Half-span of the detuning grid in units of the width σ.
pub const GRID_HALF_SPAN_SIGMAS: f64 = 4.0 * std::f64::consts::SQRT_2;

/// Smallest accepted grid size.
pub const MIN_SAMPLES: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralShape {
    /// exp(−Ω²/(2σ²))
    Gaussian,
    /// sinc²(Ω/σ), the type-I phase-matching profile
    SincSquared,
}

impl SpectralShape {
    fn unnormalized(self, detuning: f64, width: f64) -> f64 {
        let x = detuning / width;
        match self {
            SpectralShape::Gaussian => (-0.5 * x * x).exp(),
            SpectralShape::SincSquared => {
                if x == 0.0 {
                    1.0
                } else {
                    let s = x.sin() / x;
                    s * s
                }
            }
        }
    }
}

impl fmt::Display for SpectralShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralShape::Gaussian => f.write_str("gaussian"),
            SpectralShape::SincSquared => f.write_str("sinc2"),
        }
    }
}

impl FromStr for SpectralShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SpectralShape::Gaussian),
            "sinc2" | "sincsquared" | "sinc_squared" => Ok(SpectralShape::SincSquared),
            other => Err(format!("unknown spectral shape `{other}` (gaussian | sinc2)")),
        }
    }
}

/// Symmetric, normalized spectral density sampled for trapezoid quadrature.
///
/// Sample `k` and sample `n - 1 - k` sit at exactly opposite detunings and
/// carry bit-identical density and weight values.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    center_frequency: f64,
    shape: SpectralShape,
    width: f64,
    norm: f64,
    detunings: Vec<f64>,
    weights: Vec<f64>,
    density: Vec<f64>,
}

impl SpectralDensity {
    /// Builds a spectrum centred on `center_wavelength_nm` with width `sigma`
    /// (rad/s) sampled at `n_samples` (odd, ≥ 257) detunings.
    pub fn new(
        center_wavelength_nm: f64,
        shape: SpectralShape,
        sigma: f64,
        n_samples: usize,
    ) -> Result<Self> {
        if !(center_wavelength_nm.is_finite() && center_wavelength_nm > 0.0) {
            return Err(QoctError::param(
                "center_wavelength",
                format!("must be positive, got {center_wavelength_nm}"),
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(QoctError::param("sigma", format!("must be positive, got {sigma}")));
        }
        if n_samples < MIN_SAMPLES || n_samples % 2 == 0 {
            return Err(QoctError::param(
                "n_samples",
                format!("must be odd and at least {MIN_SAMPLES}, got {n_samples}"),
            ));
        }
        let center_frequency = 2.0 * PI * SPEED_OF_LIGHT / (center_wavelength_nm * 1e-9);
        if sigma >= center_frequency / 4.0 {
            return Err(QoctError::param(
                "sigma",
                format!(
                    "narrowband guard violated: sigma {sigma:.4e} must be below omega0/4 = {:.4e}",
                    center_frequency / 4.0
                ),
            ));
        }

        let half = n_samples / 2;
        let span = GRID_HALF_SPAN_SIGMAS * sigma;
        let step = span / half as f64;

        // Non-negative half first, then mirror so that the grid is exactly even.
        let positive: Vec<f64> = (0..=half).map(|k| k as f64 * step).collect();
        let mut detunings = Vec::with_capacity(n_samples);
        detunings.extend(positive[1..].iter().rev().map(|&o| -o));
        detunings.extend_from_slice(&positive);

        let mut weights = vec![step; n_samples];
        weights[0] = 0.5 * step;
        weights[n_samples - 1] = 0.5 * step;

        let raw: Vec<f64> = positive
            .iter()
            .map(|&o| shape.unnormalized(o, sigma))
            .collect();
        let mut density = Vec::with_capacity(n_samples);
        density.extend(raw[1..].iter().rev().copied());
        density.extend_from_slice(&raw);

        let integral: f64 = weights.iter().zip(&density).map(|(w, d)| w * d).sum();
        let norm = 1.0 / integral;
        for d in &mut density {
            *d *= norm;
        }

        Ok(Self {
            center_frequency,
            shape,
            width: sigma,
            norm,
            detunings,
            weights,
            density,
        })
    }

    /// Degenerate centre frequency ω₀ (rad/s).
    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn center_wavelength_nm(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.center_frequency * 1e9
    }

    pub fn shape(&self) -> SpectralShape {
        self.shape
    }

    /// Width parameter σ (rad/s).
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    /// Detuning samples Ω_k (rad/s), ascending.
    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Trapezoid weights w_k (rad/s).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Normalized density samples |f(Ω_k)|².
    pub fn samples(&self) -> &[f64] {
        &self.density
    }

    /// Grid spacing in detuning (rad/s).
    pub fn step(&self) -> f64 {
        self.weights[1]
    }

    /// Normalized density at an arbitrary detuning.
    pub fn density(&self, detuning: f64) -> f64 {
        self.norm * self.shape.unnormalized(detuning.abs(), self.width)
    }

    /// Σ w_k · density_k; equals 1 up to rounding.
    pub fn integral(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.density)
            .map(|(w, d)| w * d)
            .sum()
    }

    /// Iterator over `(Ω_k, w_k · density_k)`.
    pub fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.detunings
            .iter()
            .zip(self.weights.iter().zip(&self.density))
            .map(|(&o, (&w, &d))| (o, w * d))
    }
}

/// Gaussian width σ whose single-mirror coincidence dip has the given FWHM.
///
/// The dip envelope is exp(−8σ²Δz²/c²), so σ = (c / FWHM)·√(ln 2 / 2).
pub fn calibrate_bandwidth(target_dip_fwhm_um: f64) -> Result<f64> {
    if !(target_dip_fwhm_um.is_finite() && target_dip_fwhm_um > 0.0) {
        return Err(QoctError::param(
            "target_dip_fwhm",
            format!("must be positive, got {target_dip_fwhm_um}"),
        ));
    }
    Ok(SPEED_OF_LIGHT / (target_dip_fwhm_um * UM) * (LN_2 / 2.0).sqrt())
}
