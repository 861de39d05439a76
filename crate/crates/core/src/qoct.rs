//! Fourth-order (Hong-Ou-Mandel) coincidence engine.
//!
//! With H the sample transfer function and |f(Ω)|² the biphoton density,
//!
//! ```text
//! Λ₀      = ½ Σ_k w_k |f(Ω_k)|² [ |H(ω₀+Ω_k)|² + |H(ω₀−Ω_k)|² ]
//! Λ(2τ)   = Σ_k w_k |f(Ω_k)|² H(ω₀+Ω_k) H*(ω₀−Ω_k) e^{−2iΩ_k τ},   τ = 2z/c
//! C(z)    = Λ₀ − Λ(2τ)
//! ```
//!
//! Same-interface (self) terms of H·H* carry only odd-order spectral phase,
//! so even-order dispersion above a surface cancels in its dip. Pairs of
//! distinct interfaces produce cross-interference features midway between
//! their dips; those keep the dispersion of the media between them and are
//! suppressed by averaging over interface phase jitter.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fft::chirp_z;
use crate::profile;
use crate::sample::LayerStack;
use crate::spectrum::SpectralDensity;
use crate::{QoctError, Result, SPEED_OF_LIGHT, UM};

/// |Im Λ| must stay below this fraction of Λ₀.
pub const REALITY_TOLERANCE: f64 = 1e-10;

/// Rounding slack allowed on 0 ≤ C ≤ 2Λ₀ before clamping.
const BOUND_SLACK: f64 = 1e-10;

/// The first A-scan sample must be at least this fraction of Λ₀.
pub const NORMALIZATION_FLOOR: f64 = 0.99;

/// A dip must fall below this normalized value to be measured.
pub const DIP_THRESHOLD: f64 = 0.99;

/// Which interface pairs (j, k) enter H(ω₀+Ω)·H*(ω₀−Ω).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terms {
    All,
    SelfOnly,
    CrossOnly,
}

/// Λ₀ split into its self part Σ|r_j|² and the classical inter-surface part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub self_part: f64,
    pub cross_part: f64,
}

impl Baseline {
    pub fn total(&self) -> f64 {
        self.self_part + self.cross_part
    }
}

/// Baseline Λ₀ with the self part evaluated independently of phase jitter.
pub fn baseline(spectrum: &SpectralDensity, stack: &LayerStack) -> Baseline {
    let omega0 = spectrum.center_frequency();
    let n = stack.len();
    let self_part = stack.self_reflectance() * spectrum.integral();
    let mut cross_part = 0.0;
    if n > 1 {
        for (o, wd) in spectrum.weighted() {
            // the grid is symmetric, so summing |H(ω₀+Ω)|² over it equals the
            // ½(|H(ω₀+Ω)|² + |H(ω₀−Ω)|²) form
            let amps: Vec<Complex64> = (0..n)
                .map(|j| stack.contribution(j, omega0 + o, omega0))
                .collect();
            let mut acc = 0.0;
            for j in 0..n {
                for k in j + 1..n {
                    acc += 2.0 * (amps[j] * amps[k].conj()).re;
                }
            }
            cross_part += wd * acc;
        }
    }
    Baseline {
        self_part,
        cross_part,
    }
}

/// Λ₀; zero when every reflectance vanishes.
pub fn lambda0(spectrum: &SpectralDensity, stack: &LayerStack) -> f64 {
    baseline(spectrum, stack).total()
}

/// Detuning-domain product w_k·|f|²·H(ω₀+Ω_k)·H*(ω₀−Ω_k) for one stack,
/// ready to be transformed onto delay positions.
#[derive(Debug, Clone)]
pub struct CrossSpectrum {
    detunings: Vec<f64>,
    products: Vec<Complex64>,
    lambda0: f64,
}

impl CrossSpectrum {
    pub fn new(spectrum: &SpectralDensity, stack: &LayerStack) -> Self {
        Self::with_terms(spectrum, stack, Terms::All)
    }

    pub fn with_terms(spectrum: &SpectralDensity, stack: &LayerStack, terms: Terms) -> Self {
        let omega0 = spectrum.center_frequency();
        let n = stack.len();
        let products = spectrum
            .weighted()
            .map(|(o, wd)| {
                let p = match terms {
                    Terms::All => {
                        stack.transfer_function(omega0 + o, omega0)
                            * stack.transfer_function(omega0 - o, omega0).conj()
                    }
                    _ => {
                        let plus: Vec<Complex64> =
                            (0..n).map(|j| stack.contribution(j, omega0 + o, omega0)).collect();
                        let minus: Vec<Complex64> =
                            (0..n).map(|j| stack.contribution(j, omega0 - o, omega0)).collect();
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..n {
                            for k in 0..n {
                                let keep = match terms {
                                    Terms::SelfOnly => j == k,
                                    _ => j != k,
                                };
                                if keep {
                                    acc += plus[j] * minus[k].conj();
                                }
                            }
                        }
                        acc
                    }
                };
                p * wd
            })
            .collect();
        CrossSpectrum {
            detunings: spectrum.detunings().to_vec(),
            products,
            lambda0: lambda0(spectrum, stack),
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Complex Λ(2τ) at delay position `z_um` by direct quadrature.
    pub fn lambda_complex(&self, z_um: f64) -> Complex64 {
        let k = 4.0 * z_um * UM / SPEED_OF_LIGHT;
        self.detunings
            .iter()
            .zip(&self.products)
            .map(|(&o, p)| p * Complex64::from_polar(1.0, -o * k))
            .sum()
    }

    /// Real Λ(2τ), rejecting a non-negligible imaginary part.
    pub fn lambda(&self, z_um: f64) -> Result<f64> {
        let l = self.lambda_complex(z_um);
        if l.im.abs() > REALITY_TOLERANCE * self.lambda0 {
            return Err(QoctError::InternalConsistency(format!(
                "Im Λ = {:e} exceeds {REALITY_TOLERANCE:e}·Λ₀ at z = {z_um} µm (Λ₀ = {:e})",
                l.im, self.lambda0
            )));
        }
        Ok(l.re)
    }

    /// Complex Λ(2τ) on the uniform grid `z_start + m·z_step` through a
    /// chirp-z (FFT) transform of the detuning-domain product.
    pub fn lambda_grid_fft(&self, z_start_um: f64, z_step_um: f64, n: usize) -> Vec<Complex64> {
        let beta = 4.0 / SPEED_OF_LIGHT;
        let z0 = z_start_um * UM;
        let dz = z_step_um * UM;
        let first = self.detunings[0];
        let step = self.detunings[1] - self.detunings[0];
        // Ω_k = first + k·step; the uniform-grid form needs the index, not the
        // stored (mirrored) value, so rebuild it here.
        let input: Vec<Complex64> = self
            .products
            .iter()
            .enumerate()
            .map(|(k, p)| p * Complex64::from_polar(1.0, -beta * k as f64 * step * z0))
            .collect();
        let out = chirp_z(&input, beta * step * dz, n);
        out.into_iter()
            .enumerate()
            .map(|(m, x)| x * Complex64::from_polar(1.0, -beta * first * (z0 + m as f64 * dz)))
            .collect()
    }

    /// Coincidence C = Λ₀ − Λ(2τ) with the 0 ≤ C ≤ 2Λ₀ bound enforced.
    pub fn coincidence(&self, z_um: f64) -> Result<f64> {
        if self.lambda0 <= 0.0 {
            return Err(QoctError::NoSignal);
        }
        bounded(self.lambda0 - self.lambda(z_um)?, self.lambda0)
    }
}

fn bounded(c: f64, lambda0: f64) -> Result<f64> {
    let slack = BOUND_SLACK * lambda0;
    if c < -slack || c > 2.0 * lambda0 + slack {
        return Err(QoctError::InternalConsistency(format!(
            "coincidence {c:e} outside [0, 2Λ₀] with Λ₀ = {lambda0:e}"
        )));
    }
    Ok(c.clamp(0.0, 2.0 * lambda0))
}

/// Real part of Λ(2τ) at delay `z_um`.
pub fn lambda_cross(spectrum: &SpectralDensity, stack: &LayerStack, z_um: f64) -> Result<f64> {
    CrossSpectrum::new(spectrum, stack).lambda(z_um)
}

/// C(z) = Λ₀ − Λ(2τ).
pub fn coincidence(spectrum: &SpectralDensity, stack: &LayerStack, z_um: f64) -> Result<f64> {
    CrossSpectrum::new(spectrum, stack).coincidence(z_um)
}

/// Delay grid and phase-jitter averaging for one A-scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AScanParams {
    pub z_start_um: f64,
    pub z_step_um: f64,
    pub n_steps: usize,
    /// 0 evaluates the stack as given.
    pub washout_trials: usize,
    pub seed: u64,
}

impl AScanParams {
    /// −15 … +15 µm in 1 µm steps, no washout.
    pub fn standard() -> Self {
        AScanParams {
            z_start_um: -15.0,
            z_step_um: 1.0,
            n_steps: 31,
            washout_trials: 0,
            seed: 0,
        }
    }

    pub fn z_grid(&self) -> Vec<f64> {
        (0..self.n_steps)
            .map(|i| self.z_start_um + i as f64 * self.z_step_um)
            .collect()
    }
}

/// A normalized coincidence A-scan.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceCurve {
    pub z_grid: Vec<f64>,
    /// C(z) divided by C at the normalization point.
    pub values: Vec<f64>,
    /// Unnormalized C(z).
    pub raw: Vec<f64>,
    /// Λ₀ (averaged over washout trials when they are used).
    pub lambda0: f64,
    pub normalization_point: usize,
}

impl CoincidenceCurve {
    /// C(z)/Λ₀: 1 far from any surface, 0 at a perfect dip.
    pub fn relative_to_baseline(&self) -> Vec<f64> {
        self.raw.iter().map(|c| c / self.lambda0).collect()
    }
}

/// Unnormalized C(z) on the grid for one fixed stack.
fn raw_curve(spectrum: &SpectralDensity, stack: &LayerStack, z: &[f64]) -> Result<(Vec<f64>, f64)> {
    let cs = CrossSpectrum::new(spectrum, stack);
    if cs.lambda0() <= 0.0 {
        return Err(QoctError::NoSignal);
    }
    let values = z.iter().map(|&z| cs.coincidence(z)).collect::<Result<Vec<_>>>()?;
    Ok((values, cs.lambda0()))
}

/// Uniform phases in [0, 2π) for every interface of one washout trial.
pub fn jitter_phases(seed: u64, trial: u64, n_interfaces: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..n_interfaces).map(|_| rng.random::<f64>() * TAU).collect()
}

/// Evaluates C over the delay grid, optionally averaged over phase-jitter
/// trials, and normalizes by the first sample.
pub fn ascan(
    spectrum: &SpectralDensity,
    stack: &LayerStack,
    params: &AScanParams,
) -> Result<CoincidenceCurve> {
    if params.n_steps < 2 {
        return Err(QoctError::param("n_steps", "an A-scan needs at least 2 points"));
    }
    if !(params.z_step_um.is_finite() && params.z_step_um > 0.0) {
        return Err(QoctError::param("z_step", "must be positive"));
    }
    let z_grid = params.z_grid();

    let (raw, lambda0) = if params.washout_trials == 0 {
        raw_curve(spectrum, stack, &z_grid)?
    } else {
        let mut sum = vec![0.0; z_grid.len()];
        let mut base = 0.0;
        for t in 0..params.washout_trials {
            let thetas = jitter_phases(params.seed, t as u64, stack.len());
            let (c, l0) = raw_curve(spectrum, &stack.with_phase_jitter(&thetas)?, &z_grid)?;
            for (s, v) in sum.iter_mut().zip(c) {
                *s += v;
            }
            base += l0;
        }
        let n = params.washout_trials as f64;
        (sum.into_iter().map(|s| s / n).collect(), base / n)
    };

    let first = raw[0];
    if !(first >= NORMALIZATION_FLOOR * lambda0) || first <= 0.0 {
        return Err(QoctError::Normalization(format!(
            "first sample at z = {} µm is {:.6}·Λ₀, below {NORMALIZATION_FLOOR}·Λ₀ \
             (normalizing on an interference feature)",
            z_grid[0],
            first / lambda0
        )));
    }
    let values = raw.iter().map(|c| c / first).collect();
    Ok(CoincidenceCurve {
        z_grid,
        values,
        raw,
        lambda0,
        normalization_point: 0,
    })
}

/// Full width at half depth of the dominant dip (µm).
pub fn dip_fwhm(curve: &CoincidenceCurve) -> Result<f64> {
    profile::dip_width(&curve.z_grid, &curve.values, 1.0, DIP_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{Layer, StackBuilder};
    use crate::spectrum::{calibrate_bandwidth, SpectralShape};

    fn spectrum() -> SpectralDensity {
        let sigma = calibrate_bandwidth(7.5).unwrap();
        SpectralDensity::new(812.0, SpectralShape::Gaussian, sigma, 1025).unwrap()
    }

    #[test]
    fn baseline_of_single_mirror() {
        let s = spectrum();
        assert!((lambda0(&s, &LayerStack::mirror(0.0, 1.0).unwrap()) - 1.0).abs() < 1e-12);
        assert!((lambda0(&s, &LayerStack::mirror(4.0, 0.5).unwrap()) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_reflectance_is_no_signal() {
        let s = spectrum();
        let dark = LayerStack::mirror(0.0, 0.0).unwrap();
        assert_eq!(lambda0(&s, &dark), 0.0);
        assert!(matches!(coincidence(&s, &dark, 0.0), Err(QoctError::NoSignal)));
        assert!(matches!(
            ascan(&s, &dark, &AScanParams::standard()),
            Err(QoctError::NoSignal)
        ));
    }

    #[test]
    fn full_dip_at_matched_delay() {
        let s = spectrum();
        let m = LayerStack::mirror(3.0, 1.0).unwrap();
        let l0 = lambda0(&s, &m);
        assert!((lambda_cross(&s, &m, 3.0).unwrap() - l0).abs() < 1e-12);
        assert!(coincidence(&s, &m, 3.0).unwrap() < 1e-12);
        // far away only the grid-truncation floor (erfc(4) ≈ 1.5e-8) remains
        assert!(lambda_cross(&s, &m, 3.0 + 60.0).unwrap().abs() < 1e-7);
        assert!((coincidence(&s, &m, -60.0).unwrap() - l0).abs() < 1e-7);
    }

    #[test]
    fn gaussian_dip_shape() {
        // Closed form for a single mirror: Λ = exp(−8σ²Δz²/c²).
        let s = spectrum();
        let sigma = s.width();
        let m = LayerStack::mirror(0.0, 1.0).unwrap();
        let cs = CrossSpectrum::new(&s, &m);
        for dz in [0.5, 1.0, 2.5, 3.75, 6.0, 10.0] {
            let x = dz * 1e-6;
            let expected = (-8.0 * sigma * sigma * x * x / (SPEED_OF_LIGHT * SPEED_OF_LIGHT)).exp();
            assert!((cs.lambda(dz).unwrap() - expected).abs() < 1e-7, "{dz}");
        }
    }

    #[test]
    fn standard_ascan_grid_and_normalization() {
        let s = spectrum();
        let curve = ascan(&s, &LayerStack::mirror(0.0, 1.0).unwrap(), &AScanParams::standard()).unwrap();
        assert_eq!(curve.z_grid.len(), 31);
        assert_eq!(curve.z_grid[0], -15.0);
        assert_eq!(curve.z_grid[30], 15.0);
        assert_eq!(curve.values[0], 1.0);
        let imin = (0..31).min_by(|&a, &b| curve.values[a].total_cmp(&curve.values[b])).unwrap();
        assert_eq!(curve.z_grid[imin], 0.0);
    }

    #[test]
    fn washout_leaves_single_mirror_unchanged() {
        let s = spectrum();
        let m = LayerStack::mirror(0.0, 0.8).unwrap();
        let plain = ascan(&s, &m, &AScanParams::standard()).unwrap();
        let washed = ascan(
            &s,
            &m,
            &AScanParams {
                washout_trials: 64,
                seed: 11,
                ..AScanParams::standard()
            },
        )
        .unwrap();
        for (a, b) in plain.values.iter().zip(&washed.values) {
            assert!((a - b).abs() < 1e-12);
        }
        // self part of the baseline does not see θ at all
        let jittered = m.with_phase_jitter(&[1.234]).unwrap();
        assert_eq!(
            baseline(&s, &m).self_part.to_bits(),
            baseline(&s, &jittered).self_part.to_bits()
        );
        assert!((plain.lambda0 - washed.lambda0).abs() < 1e-14);
    }

    #[test]
    fn normalization_on_a_feature_is_rejected() {
        let s = spectrum();
        let m = LayerStack::mirror(-14.0, 1.0).unwrap();
        assert!(matches!(
            ascan(&s, &m, &AScanParams::standard()),
            Err(QoctError::Normalization(_))
        ));
    }

    #[test]
    fn ascan_parameter_checks() {
        let s = spectrum();
        let m = LayerStack::mirror(0.0, 1.0).unwrap();
        let p = AScanParams {
            n_steps: 1,
            ..AScanParams::standard()
        };
        assert!(ascan(&s, &m, &p).is_err());
        let p = AScanParams {
            z_step_um: 0.0,
            ..AScanParams::standard()
        };
        assert!(ascan(&s, &m, &p).is_err());
    }

    #[test]
    fn dip_fwhm_errors() {
        let flat = CoincidenceCurve {
            z_grid: (0..10).map(|i| i as f64).collect(),
            values: vec![1.0; 10],
            raw: vec![1.0; 10],
            lambda0: 1.0,
            normalization_point: 0,
        };
        assert!(matches!(dip_fwhm(&flat), Err(QoctError::NoFeature(_))));
    }

    #[test]
    fn term_split_adds_up() {
        let s = spectrum();
        let stack = StackBuilder::new()
            .reflector(0.0, 0.3)
            .layer(Layer::from_indices(9.0, s.center_frequency(), 1.4, 1.42, 30.0))
            .reflector(9.0, 0.3)
            .build()
            .unwrap();
        let all = CrossSpectrum::with_terms(&s, &stack, Terms::All);
        let own = CrossSpectrum::with_terms(&s, &stack, Terms::SelfOnly);
        let cross = CrossSpectrum::with_terms(&s, &stack, Terms::CrossOnly);
        for z in [-3.0, 0.0, 4.5, 6.3, 12.6] {
            let d = all.lambda_complex(z) - own.lambda_complex(z) - cross.lambda_complex(z);
            assert!(d.norm() < 1e-14);
        }
    }

    #[test]
    fn jitter_streams_are_deterministic_and_distinct() {
        assert_eq!(jitter_phases(5, 3, 4), jitter_phases(5, 3, 4));
        assert_ne!(jitter_phases(5, 3, 4), jitter_phases(5, 4, 4));
        assert!(jitter_phases(9, 0, 100).iter().all(|&t| (0.0..TAU).contains(&t)));
    }
}
