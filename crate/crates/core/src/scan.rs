//! Volumetric acquisition: one A-scan per transverse grid point, assembled
//! into a volume and cut into C-scans, B-scans and a topography map.

use rayon::prelude::*;

use crate::counting::{self, CountingConfig};
use crate::phantom::Phantom;
use crate::profile;
use crate::qoct::{self, AScanParams};
use crate::sample::LayerStack;
use crate::spectrum::SpectralDensity;
use crate::{QoctError, Result};

/// Anything that yields a layer stack under a transverse position (µm).
pub trait Sample: Sync {
    fn stack_at(&self, x_um: f64, y_um: f64) -> Result<LayerStack>;
}

impl Sample for Phantom {
    fn stack_at(&self, x_um: f64, y_um: f64) -> Result<LayerStack> {
        self.local_stack(x_um, y_um)
    }
}

/// A laterally uniform sample.
impl Sample for LayerStack {
    fn stack_at(&self, _: f64, _: f64) -> Result<LayerStack> {
        Ok(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub x_extent_um: f64,
    pub y_extent_um: f64,
    pub transverse_step_um: f64,
    /// Transverse centre of the scanned area.
    pub x_center_um: f64,
    pub y_center_um: f64,
    pub z_start_um: f64,
    pub z_step_um: f64,
    pub z_count: usize,
    pub stochastic: bool,
    pub washout_trials: usize,
    pub counting: CountingConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            x_extent_um: 75.0,
            y_extent_um: 100.0,
            transverse_step_um: 5.0,
            x_center_um: 0.0,
            y_center_um: 0.0,
            z_start_um: -15.0,
            z_step_um: 1.0,
            z_count: 31,
            stochastic: false,
            washout_trials: 0,
            counting: CountingConfig::default(),
        }
    }
}

fn grid_count(extent: f64, step: f64) -> usize {
    (extent / step + 1e-9).floor() as usize + 1
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("scan.x_extent_um", self.x_extent_um),
            ("scan.y_extent_um", self.y_extent_um),
            ("scan.transverse_step_um", self.transverse_step_um),
            ("scan.z_step_um", self.z_step_um),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(QoctError::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.z_count < 2 {
            return Err(QoctError::param("scan.z_count", "must be at least 2"));
        }
        for (name, v) in [
            ("scan.x_center_um", self.x_center_um),
            ("scan.y_center_um", self.y_center_um),
            ("scan.z_start_um", self.z_start_um),
        ] {
            if !v.is_finite() {
                return Err(QoctError::param(name, "must be finite"));
            }
        }
        self.counting.validate()
    }

    /// Grid size (nx, ny, nz) with inclusive endpoints.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            grid_count(self.x_extent_um, self.transverse_step_um),
            grid_count(self.y_extent_um, self.transverse_step_um),
            self.z_count,
        )
    }

    pub fn origin(&self) -> (f64, f64, f64) {
        (
            self.x_center_um - 0.5 * self.x_extent_um,
            self.y_center_um - 0.5 * self.y_extent_um,
            self.z_start_um,
        )
    }

    pub fn ascan_params(&self) -> AScanParams {
        AScanParams {
            z_start_um: self.z_start_um,
            z_step_um: self.z_step_um,
            n_steps: self.z_count,
            washout_trials: self.washout_trials,
            seed: self.counting.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Normalized coincidence on a regular (x, y, z) grid; z varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: (usize, usize, usize),
    pub pitch: (f64, f64, f64),
    pub origin: (f64, f64, f64),
    pub values: Vec<f64>,
}

impl Volume {
    pub fn new(
        dims: (usize, usize, usize),
        pitch: (f64, f64, f64),
        origin: (f64, f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != dims.0 * dims.1 * dims.2 {
            return Err(QoctError::InvalidInput(format!(
                "{} voxels for dims {:?}",
                values.len(),
                dims
            )));
        }
        Ok(Volume {
            dims,
            pitch,
            origin,
            values,
        })
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims.1 + iy) * self.dims.2 + iz
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.index(ix, iy, iz)]
    }

    /// The A-scan at one transverse position.
    pub fn column(&self, ix: usize, iy: usize) -> &[f64] {
        let start = self.index(ix, iy, 0);
        &self.values[start..start + self.dims.2]
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.origin.0 + ix as f64 * self.pitch.0
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.origin.1 + iy as f64 * self.pitch.1
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.origin.2 + iz as f64 * self.pitch.2
    }

    /// Index of the z sample closest to `z_um`.
    pub fn z_index(&self, z_um: f64) -> usize {
        let k = ((z_um - self.origin.2) / self.pitch.2).round();
        k.clamp(0.0, (self.dims.2 - 1) as f64) as usize
    }
}

/// Converts one A-scan into voxel values normalized by the first sample.
fn column_values(
    rel: &[f64],
    counting_cfg: &CountingConfig,
    stochastic: bool,
    ix: usize,
    iy: usize,
    sampler: &(dyn Fn(f64, u64, u64) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let expected = rel
        .iter()
        .map(|&c| counting::expected_counts(c, counting_cfg))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<f64> = if stochastic {
        expected
            .iter()
            .enumerate()
            .map(|(k, &m)| sampler(m, counting_cfg.seed, counting::stream_id(ix, iy, k)))
            .collect()
    } else {
        expected
    };
    let first = counts[0];
    if !(first > 0.0) {
        return Err(QoctError::Normalization(
            "first delay sample recorded no coincidences".into(),
        ));
    }
    Ok(counts.iter().map(|c| c / first).collect())
}

/// Poisson sampler used by stochastic scans.
pub fn poisson_sampler(mean: f64, seed: u64, stream: u64) -> f64 {
    counting::sample_counts(mean, seed, stream) as f64
}

pub fn run_volume<S: Sample + ?Sized>(
    sample: &S,
    spectrum: &SpectralDensity,
    config: &ScanConfig,
    execution: Execution,
) -> Result<Volume> {
    run_volume_with_sampler(sample, spectrum, config, execution, &poisson_sampler)
}

/// As [`run_volume`], with the count sampler `(mean, seed, stream) → counts`
/// used by stochastic scans replaced.
pub fn run_volume_with_sampler<S: Sample + ?Sized>(
    sample: &S,
    spectrum: &SpectralDensity,
    config: &ScanConfig,
    execution: Execution,
    sampler: &(dyn Fn(f64, u64, u64) -> f64 + Sync),
) -> Result<Volume> {
    config.validate()?;
    let dims = config.dims();
    let origin = config.origin();
    let step = config.transverse_step_um;
    let params = config.ascan_params();

    let column = |n: usize| -> Result<Vec<f64>> {
        let (ix, iy) = (n / dims.1, n % dims.1);
        let x = origin.0 + ix as f64 * step;
        let y = origin.1 + iy as f64 * step;
        let run = || {
            let stack = sample.stack_at(x, y)?;
            let curve = qoct::ascan(spectrum, &stack, &params)?;
            column_values(
                &curve.relative_to_baseline(),
                &config.counting,
                config.stochastic,
                ix,
                iy,
                sampler,
            )
        };
        run().map_err(|e| QoctError::AtPosition {
            ix,
            iy,
            source: Box::new(e),
        })
    };

    let n_columns = dims.0 * dims.1;
    let columns: Vec<Vec<f64>> = match execution {
        Execution::Serial => (0..n_columns).map(column).collect::<Result<_>>()?,
        Execution::Parallel => (0..n_columns).into_par_iter().map(column).collect::<Result<_>>()?,
    };
    Volume::new(
        dims,
        (step, step, config.z_step_um),
        origin,
        columns.concat(),
    )
}

/// Row-major 2-D section.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image2D {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Transverse section at depth index `iz`: columns follow x, rows follow y.
pub fn cscan(volume: &Volume, iz: usize) -> Result<Image2D> {
    let (nx, ny, nz) = volume.dims;
    if iz >= nz {
        return Err(QoctError::OutOfBounds(format!("z index {iz} with {nz} planes")));
    }
    let mut data = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            data.push(volume.get(ix, iy, iz));
        }
    }
    Ok(Image2D {
        width: nx,
        height: ny,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BScanAxis {
    /// y-z plane at fixed x index.
    Yz,
    /// x-z plane at fixed y index.
    Xz,
}

/// Axial section: columns follow the transverse axis, rows follow z.
pub fn bscan(volume: &Volume, axis: BScanAxis, index: usize) -> Result<Image2D> {
    let (nx, ny, nz) = volume.dims;
    let (limit, width) = match axis {
        BScanAxis::Yz => (nx, ny),
        BScanAxis::Xz => (ny, nx),
    };
    if index >= limit {
        return Err(QoctError::OutOfBounds(format!(
            "{axis:?} index {index} with {limit} slices"
        )));
    }
    let mut data = Vec::with_capacity(width * nz);
    for iz in 0..nz {
        for t in 0..width {
            data.push(match axis {
                BScanAxis::Yz => volume.get(index, t, iz),
                BScanAxis::Xz => volume.get(t, index, iz),
            });
        }
    }
    Ok(Image2D {
        width,
        height: nz,
        data,
    })
}

pub const SURFACE_THRESHOLD: f64 = 0.9;

/// Surface depth per transverse position; `None` where no dip qualifies.
#[derive(Debug, Clone, PartialEq)]
pub struct Topography {
    pub nx: usize,
    pub ny: usize,
    pub depths: Vec<Option<f64>>,
}

impl Topography {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.depths[ix * self.ny + iy]
    }
}

/// Global minimum of each column below `threshold`, refined by a parabola
/// through the neighbouring samples.
pub fn detect_surface(volume: &Volume, threshold: f64) -> Topography {
    let (nx, ny, nz) = volume.dims;
    let mut depths = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let col = volume.column(ix, iy);
            let (k, &min) = col
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty column");
            if min >= threshold {
                depths.push(None);
                continue;
            }
            let offset = if k > 0 && k + 1 < nz {
                profile::parabolic_offset(col[k - 1], col[k], col[k + 1])
            } else {
                0.0
            };
            depths.push(Some(volume.z(k) + offset * volume.pitch.2));
        }
    }
    Topography { nx, ny, depths }
}
