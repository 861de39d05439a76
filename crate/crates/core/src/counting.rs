//! Photon-counting model: expected coincidence counts per delay step and
//! their Poisson shot noise.
//!
//! Random draws come from ChaCha8 keyed by the run seed and addressed by a
//! 64-bit stream id, so a draw depends only on `(seed, stream_id)` and never
//! on evaluation order.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::qoct::CoincidenceCurve;
use crate::{QoctError, Result};

const PLANCK: f64 = 6.626_070_15e-34;

/// How returned photons are separated from the input beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectionMode {
    /// Polarizing beam splitter plus quarter-wave plate.
    PbsQwp,
    /// Single non-polarizing beam splitter.
    Npbs,
}

impl fmt::Display for CollectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollectionMode::PbsQwp => f.write_str("pbs_qwp"),
            CollectionMode::Npbs => f.write_str("npbs"),
        }
    }
}

impl FromStr for CollectionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pbs_qwp" | "pbsqwp" | "pbs" => Ok(CollectionMode::PbsQwp),
            "npbs" => Ok(CollectionMode::Npbs),
            other => Err(format!("unknown collection mode `{other}` (pbs_qwp | npbs)")),
        }
    }
}

/// Fraction of pairs collected, relative to the PBS/QWP arrangement.
pub fn collection_factor(mode: CollectionMode) -> f64 {
    match mode {
        CollectionMode::PbsQwp => 1.0,
        CollectionMode::Npbs => 0.25,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingConfig {
    /// Biphoton flux (pairs/s).
    pub flux: f64,
    /// Accumulation time per delay step (s).
    pub accumulation_time: f64,
    /// Coincidence window (s).
    pub coincidence_window: f64,
    pub collection_mode: CollectionMode,
    pub visibility: f64,
    pub detector_efficiency: f64,
    pub seed: u64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        CountingConfig {
            flux: 1e6,
            accumulation_time: 5.0,
            coincidence_window: 3.5e-9,
            collection_mode: CollectionMode::PbsQwp,
            visibility: 0.9,
            detector_efficiency: 1.0,
            seed: 0,
        }
    }
}

impl CountingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("counting.flux", self.flux),
            ("counting.accumulation_s", self.accumulation_time),
            ("counting.window_s", self.coincidence_window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(QoctError::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("counting.visibility", self.visibility),
            ("counting.efficiency", self.detector_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(QoctError::param(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Singles rate seen by each detector (1/s). Each detector sees one photon
    /// per collected pair, and the collection loss is split evenly between
    /// the two arms.
    pub fn singles_rate(&self) -> f64 {
        self.flux * self.detector_efficiency * collection_factor(self.collection_mode).sqrt()
    }

    /// Informational optical power of the pair flux (W).
    pub fn optical_power(&self, center_wavelength_nm: f64) -> f64 {
        self.flux * PLANCK * crate::SPEED_OF_LIGHT / (center_wavelength_nm * 1e-9) * 2.0
    }
}

/// Accidental coincidence rate R = s₁·s₂·window.
pub fn accidental_rate(singles1: f64, singles2: f64, window: f64) -> f64 {
    singles1 * singles2 * window
}

/// Expected coincidence counts at one delay step for a curve value
/// normalized to the off-dip baseline (1 = no interference).
///
/// The collection factor scales true and accidental coincidences alike, so
/// the two collection modes differ by exactly their factor.
pub fn expected_counts(curve_value: f64, config: &CountingConfig) -> Result<f64> {
    if !(0.0..=2.0).contains(&curve_value) {
        return Err(QoctError::InvalidInput(format!(
            "normalized coincidence {curve_value} outside [0, 2]"
        )));
    }
    let eta = config.detector_efficiency;
    let singles = config.flux * eta;
    let true_rate = eta * eta * config.flux * (1.0 - config.visibility * (1.0 - curve_value));
    let accidental = accidental_rate(singles, singles, config.coincidence_window);
    Ok(collection_factor(config.collection_mode)
        * (config.accumulation_time * (true_rate + accidental)))
}

/// One Poisson draw with the given mean from stream `(seed, stream_id)`.
pub fn sample_counts(expected: f64, seed: u64, stream_id: u64) -> u64 {
    if !(expected > 0.0) {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    // Poisson::new only fails for non-positive or non-finite means
    let poisson = Poisson::new(expected).expect("positive finite mean");
    poisson.sample(&mut rng) as u64
}

/// Packs a scan position into a stream id (21 bits per axis).
pub fn stream_id(ix: usize, iy: usize, iz: usize) -> u64 {
    const MASK: u64 = (1 << 21) - 1;
    debug_assert!(ix as u64 <= MASK && iy as u64 <= MASK && iz as u64 <= MASK);
    ((ix as u64 & MASK) << 42) | ((iy as u64 & MASK) << 21) | (iz as u64 & MASK)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRecord {
    pub z_um: f64,
    pub expected: f64,
    pub sampled: u64,
}

/// Count record for an A-scan; sample `k` uses stream `stream_base + k`.
pub fn count_record(
    curve: &CoincidenceCurve,
    config: &CountingConfig,
    stream_base: u64,
) -> Result<Vec<CountRecord>> {
    config.validate()?;
    curve
        .relative_to_baseline()
        .into_iter()
        .zip(&curve.z_grid)
        .enumerate()
        .map(|(k, (c, &z))| {
            let expected = expected_counts(c, config)?;
            Ok(CountRecord {
                z_um: z,
                expected,
                sampled: sample_counts(expected, config.seed, stream_base + k as u64),
            })
        })
        .collect()
}
