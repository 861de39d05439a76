//! Second-order (classical) OCT reference engine.
//!
//! The source spectrum is the biphoton density reused as S(ω₀ + Ω), so the
//! two engines see identical bandwidth and differ only in interferometric
//! order.

use num_complex::Complex64;

use crate::profile;
use crate::sample::LayerStack;
use crate::spectrum::SpectralDensity;
use crate::{Result, SPEED_OF_LIGHT, UM};

/// Cross-correlation fringes and their analytic-signal envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    pub z_grid: Vec<f64>,
    pub fringes: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Fringes(z) = Re Σ_k w_k S(ω₀+Ω_k) H(ω₀+Ω_k) e^{−2i(ω₀+Ω_k)z/c}; the
/// envelope is the modulus of the same sum.
pub fn interferogram(spectrum: &SpectralDensity, stack: &LayerStack, z_grid: &[f64]) -> Interferogram {
    let omega0 = spectrum.center_frequency();
    let weighted: Vec<(f64, Complex64)> = spectrum
        .weighted()
        .map(|(o, wd)| (o, stack.transfer_function(omega0 + o, omega0) * wd))
        .collect();

    let mut fringes = Vec::with_capacity(z_grid.len());
    let mut envelope = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let k = 2.0 * z * UM / SPEED_OF_LIGHT;
        // carrier factored out so the summed phases stay small
        let sum: Complex64 = weighted
            .iter()
            .map(|&(o, p)| p * Complex64::from_polar(1.0, -o * k))
            .sum();
        let analytic = sum * Complex64::from_polar(1.0, -omega0 * k);
        fringes.push(analytic.re);
        envelope.push(analytic.norm());
    }
    Interferogram {
        z_grid: z_grid.to_vec(),
        fringes,
        envelope,
    }
}

/// Full width at half maximum of the envelope peak (µm).
pub fn envelope_fwhm(ifg: &Interferogram) -> Result<f64> {
    profile::peak_width(&ifg.z_grid, &ifg.envelope)
}
