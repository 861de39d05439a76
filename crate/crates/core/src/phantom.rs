//! Procedural onion-skin phantom.
//!
//! Cells form a brick-like tessellation: columns of width ~`cell_width` run
//! along the cell length, and each column is cut into cells of length
//! ~`cell_length` independently of its neighbours. Every cell carries a dome
//! of height `dome_sag` on its top surface. The top surface reflectance is
//! blurred by the transverse point-spread function, so it rolls off across
//! the cell walls. A flat membrane one cell thickness below the top closes
//! each cell.

use crate::sample::{Interface, Layer, LayerStack};
use crate::{QoctError, Result};

/// FWHM / σ for a Gaussian.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Stencil half-size: nodes run from −3 to +3 in each direction.
const STENCIL_REACH: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomConfig {
    pub cell_width_um: f64,
    pub cell_length_um: f64,
    pub cell_thickness_um: f64,
    pub dome_sag_um: f64,
    /// Intensity reflectance of the coated top surface.
    pub top_reflectance: f64,
    /// Intensity reflectance of the top surface over a cell wall.
    pub wall_reflectance: f64,
    /// Intensity reflectance of the bottom membrane; 0 omits it.
    pub membrane_reflectance: f64,
    pub wall_width_um: f64,
    pub orientation_rad: f64,
    pub jitter_fraction: f64,
    pub psf_fwhm_um: f64,
    /// Depth of the flat (dome-free) top surface.
    pub z_offset_um: f64,
    /// Intracellular medium between top surface and membrane.
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Full transverse size of the sample, centred on the origin.
    pub extent_x_um: f64,
    pub extent_y_um: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        // Water-like intracellular medium at 812 nm: n = 1.33, n_g = 1.344,
        // GVD 24 fs²/mm. These are placeholders, not measured tissue values.
        let omega0 = 2.0 * std::f64::consts::PI * crate::SPEED_OF_LIGHT / 812e-9;
        let water = Layer::from_indices(12.0, omega0, 1.33, 1.344, 24.0);
        PhantomConfig {
            cell_width_um: 75.0,
            cell_length_um: 300.0,
            cell_thickness_um: 12.0,
            dome_sag_um: 8.0,
            top_reflectance: 0.07,
            wall_reflectance: 0.02,
            membrane_reflectance: 0.02,
            wall_width_um: 2.0,
            orientation_rad: 0.0,
            jitter_fraction: 0.0,
            psf_fwhm_um: 12.0,
            z_offset_um: 3.0,
            beta0: water.beta0,
            beta1: water.beta1,
            beta2: water.beta2,
            extent_x_um: 600.0,
            extent_y_um: 1200.0,
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("phantom.cell_width_um", self.cell_width_um),
            ("phantom.cell_length_um", self.cell_length_um),
            ("phantom.cell_thickness_um", self.cell_thickness_um),
            ("phantom.psf_fwhm_um", self.psf_fwhm_um),
            ("phantom.extent_x_um", self.extent_x_um),
            ("phantom.extent_y_um", self.extent_y_um),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(QoctError::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.dome_sag_um.is_finite() && self.dome_sag_um >= 0.0) {
            return Err(QoctError::param("phantom.dome_sag_um", "must be non-negative"));
        }
        for (name, v) in [
            ("phantom.top_reflectance", self.top_reflectance),
            ("phantom.wall_reflectance", self.wall_reflectance),
            ("phantom.membrane_reflectance", self.membrane_reflectance),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(QoctError::param(name, format!("must lie in [0, 1), got {v}")));
            }
        }
        if self.wall_reflectance > self.top_reflectance {
            return Err(QoctError::param(
                "phantom.wall_reflectance",
                "must not exceed the top-surface reflectance",
            ));
        }
        if self.top_reflectance.sqrt() + self.membrane_reflectance.sqrt() > 1.0 {
            return Err(QoctError::param(
                "phantom.membrane_reflectance",
                "sum of top and membrane amplitude reflectances exceeds 1",
            ));
        }
        if !(0.0..=0.3).contains(&self.jitter_fraction) {
            return Err(QoctError::param("phantom.jitter_fraction", "must lie in [0, 0.3]"));
        }
        let min_cell = self.cell_width_um.min(self.cell_length_um);
        if !(self.wall_width_um >= 0.0 && self.wall_width_um < 0.25 * min_cell) {
            return Err(QoctError::param(
                "phantom.wall_width_um",
                "must be non-negative and below a quarter of the cell width",
            ));
        }
        for (name, v) in [
            ("phantom.z_offset_um", self.z_offset_um),
            ("phantom.orientation_rad", self.orientation_rad),
            ("phantom.beta0", self.beta0),
            ("phantom.beta1", self.beta1),
            ("phantom.beta2", self.beta2),
        ] {
            if !v.is_finite() {
                return Err(QoctError::param(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn intracellular_layer(&self) -> Layer {
        Layer {
            thickness_um: self.cell_thickness_um,
            beta0: self.beta0,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }
}

/// Gaussian point-spread stencil of 7×7 nodes spaced one σ apart.
///
/// Each node's field value should be the average over the node's
/// `spacing × spacing` box, which keeps the weighted sum close to the
/// continuous convolution even for features narrower than the spacing.
#[derive(Debug, Clone)]
pub struct PsfStencil {
    spacing: f64,
    weights: Vec<(f64, f64, f64)>,
}

impl PsfStencil {
    pub fn new(fwhm_um: f64) -> Self {
        let sigma = fwhm_um / FWHM_PER_SIGMA;
        let mut weights = Vec::with_capacity(49);
        let mut total = 0.0;
        for a in -STENCIL_REACH..=STENCIL_REACH {
            for b in -STENCIL_REACH..=STENCIL_REACH {
                let w = (-0.5 * f64::from(a * a + b * b)).exp();
                total += w;
                weights.push((f64::from(a) * sigma, f64::from(b) * sigma, w));
            }
        }
        for w in &mut weights {
            w.2 /= total;
        }
        PsfStencil {
            spacing: sigma,
            weights,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Weighted average of `field(du, dv, box)` over the stencil nodes.
    pub fn average(&self, mut field: impl FnMut(f64, f64, f64) -> f64) -> f64 {
        self.weights
            .iter()
            .map(|&(du, dv, w)| w * field(du, dv, self.spacing))
            .sum()
    }
}

/// Geometry of the cell containing a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellInfo {
    pub column: i64,
    pub row: i64,
    /// Cell centre in the rotated (u, v) frame.
    pub center_uv: (f64, f64),
    pub width_um: f64,
    pub length_um: f64,
    /// Point position relative to the centre, (u, v) frame.
    pub local_uv: (f64, f64),
}

impl CellInfo {
    /// Distance from the point to the nearest cell boundary.
    pub fn wall_distance(&self) -> f64 {
        let du = 0.5 * self.width_um - self.local_uv.0.abs();
        let dv = 0.5 * self.length_um - self.local_uv.1.abs();
        du.min(dv)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    config: PhantomConfig,
    psf: PsfStencil,
    /// Column boundaries along u; `u_bounds[i]` has index `u_first + i`.
    u_first: i64,
    u_bounds: Vec<f64>,
    /// Per-column cell boundaries along v, with their first index.
    v_first: i64,
    v_bounds: Vec<Vec<f64>>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Uniform in [−½, ½) from a keyed hash.
fn jitter_draw(seed: u64, tag: u64, a: i64, b: i64) -> f64 {
    let h = splitmix64(
        splitmix64(splitmix64(seed ^ tag.rotate_left(17)) ^ a as u64) ^ (b as u64).rotate_left(29),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

impl Phantom {
    pub fn generate(config: PhantomConfig) -> Result<Self> {
        config.validate()?;
        let w = config.cell_width_um;
        let l = config.cell_length_um;
        let j = config.jitter_fraction;
        let reach = 0.5 * config.extent_x_um.hypot(config.extent_y_um);

        let u_first = (-(reach + 2.0 * w) / w).floor() as i64;
        let u_last = ((reach + 2.0 * w) / w).ceil() as i64;
        let u_bounds: Vec<f64> = (u_first..=u_last)
            .map(|i| (i as f64 - 0.5) * w + j * w * jitter_draw(config.seed, 1, i, 0))
            .collect();

        let v_first = (-(reach + 2.0 * l) / l).floor() as i64;
        let v_last = ((reach + 2.0 * l) / l).ceil() as i64;
        let v_bounds = (u_first..u_last)
            .map(|c| {
                (v_first..=v_last)
                    .map(|r| (r as f64 - 0.5) * l + j * l * jitter_draw(config.seed, 2, c, r))
                    .collect()
            })
            .collect();

        Ok(Phantom {
            psf: PsfStencil::new(config.psf_fwhm_um),
            config,
            u_first,
            u_bounds,
            v_first,
            v_bounds,
        })
    }

    pub fn config(&self) -> &PhantomConfig {
        &self.config
    }

    pub fn psf(&self) -> &PsfStencil {
        &self.psf
    }

    /// Column boundaries along u (µm) with their lattice indices.
    pub fn column_boundaries(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.u_bounds
            .iter()
            .enumerate()
            .map(|(i, &b)| (self.u_first + i as i64, b))
    }

    fn to_uv(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.config.orientation_rad.sin_cos();
        (x * c + y * s, -x * s + y * c)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= 0.5 * self.config.extent_x_um && y.abs() <= 0.5 * self.config.extent_y_um
    }

    fn column_of(&self, u: f64) -> usize {
        let i = self.u_bounds.partition_point(|&b| b <= u);
        i.clamp(1, self.u_bounds.len() - 1) - 1
    }

    fn cell_uv(&self, u: f64, v: f64) -> CellInfo {
        let col = self.column_of(u);
        let (u0, u1) = (self.u_bounds[col], self.u_bounds[col + 1]);
        let vb = &self.v_bounds[col];
        let row = vb.partition_point(|&b| b <= v).clamp(1, vb.len() - 1) - 1;
        let (v0, v1) = (vb[row], vb[row + 1]);
        let center = (0.5 * (u0 + u1), 0.5 * (v0 + v1));
        CellInfo {
            column: self.u_first + col as i64,
            row: self.v_first + row as i64,
            center_uv: center,
            width_um: u1 - u0,
            length_um: v1 - v0,
            local_uv: (u - center.0, v - center.1),
        }
    }

    /// Cell containing the transverse point (x, y).
    pub fn cell_at(&self, x: f64, y: f64) -> CellInfo {
        let (u, v) = self.to_uv(x, y);
        self.cell_uv(u, v)
    }

    fn dome(&self, cell: &CellInfo) -> f64 {
        let a = 2.0 * cell.local_uv.0 / cell.width_um;
        let b = 2.0 * cell.local_uv.1 / cell.length_um;
        self.config.dome_sag_um * (1.0 - a * a - b * b).max(0.0)
    }

    /// Dome height z_surf(x, y) ∈ [0, dome_sag].
    pub fn surface_height(&self, x: f64, y: f64) -> f64 {
        self.dome(&self.cell_at(x, y))
    }

    /// Depth of the top surface: z_offset − z_surf.
    pub fn top_depth(&self, x: f64, y: f64) -> f64 {
        self.config.z_offset_um - self.surface_height(x, y)
    }

    /// Largest slope of the dome within `cell`.
    pub fn dome_lipschitz(&self, cell: &CellInfo) -> f64 {
        4.0 * self.config.dome_sag_um / cell.width_um.min(cell.length_um)
    }

    pub fn in_wall(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).wall_distance() < 0.5 * self.config.wall_width_um
    }

    /// Length of `[lo, hi]` covered by wall strips centred on `bounds`.
    fn strip_overlap(bounds: &[f64], half_wall: f64, lo: f64, hi: f64) -> f64 {
        let start = bounds.partition_point(|&b| b + half_wall < lo);
        bounds[start..]
            .iter()
            .take_while(|&&b| b - half_wall <= hi)
            .map(|&b| ((b + half_wall).min(hi) - (b - half_wall).max(lo)).max(0.0))
            .sum()
    }

    /// Top-surface amplitude relative to √top_reflectance, averaged over the
    /// `size × size` box centred on (u, v): 1 inside cells, √(wall/top) on walls.
    fn presence(&self, u: f64, v: f64, size: f64) -> f64 {
        let half_wall = 0.5 * self.config.wall_width_um;
        let col = self.column_of(u);
        let fu = Self::strip_overlap(&self.u_bounds, half_wall, u - 0.5 * size, u + 0.5 * size) / size;
        let fv =
            Self::strip_overlap(&self.v_bounds[col], half_wall, v - 0.5 * size, v + 0.5 * size) / size;
        let wall = (fu + fv - fu * fv).clamp(0.0, 1.0);
        let ratio = if self.config.top_reflectance > 0.0 {
            (self.config.wall_reflectance / self.config.top_reflectance).sqrt()
        } else {
            0.0
        };
        1.0 - wall * (1.0 - ratio)
    }

    /// PSF-weighted top-surface presence at (x, y), in [0, 1].
    pub fn blur(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.to_uv(x, y);
        self.psf.average(|du, dv, size| self.presence(u + du, v + dv, size))
    }

    /// Amplitude reflectance of the top surface at (x, y).
    pub fn top_amplitude(&self, x: f64, y: f64) -> f64 {
        self.config.top_reflectance.sqrt() * self.blur(x, y)
    }

    /// Two-interface stack (top surface, bottom membrane) under (x, y).
    pub fn local_stack(&self, x: f64, y: f64) -> Result<LayerStack> {
        if !self.contains(x, y) {
            return Err(QoctError::OutOfBounds(format!(
                "({x}, {y}) µm lies outside the {} × {} µm² phantom",
                self.config.extent_x_um, self.config.extent_y_um
            )));
        }
        let top = self.top_depth(x, y);
        let mut interfaces = vec![Interface::new(top, self.top_amplitude(x, y))];
        let mut layers = vec![None];
        if self.config.membrane_reflectance > 0.0 {
            interfaces.push(Interface::new(
                top + self.config.cell_thickness_um,
                self.config.membrane_reflectance.sqrt(),
            ));
            layers.push(Some(self.config.intracellular_layer()));
        }
        LayerStack::new(interfaces, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_phantom() -> Phantom {
        Phantom::generate(PhantomConfig::default()).unwrap()
    }

    #[test]
    fn unjittered_lattice_is_exact() {
        let p = default_phantom();
        for (i, b) in p.column_boundaries() {
            assert!((b - (i as f64 - 0.5) * 75.0).abs() < 1e-9);
        }
        let c = p.cell_at(10.0, 20.0);
        assert_eq!((c.column, c.row), (0, 0));
        assert!((c.width_um - 75.0).abs() < 1e-12);
        assert!((c.length_um - 300.0).abs() < 1e-12);
        let c = p.cell_at(80.0, 160.0);
        assert_eq!((c.column, c.row), (1, 1));
        assert!((c.center_uv.0 - 75.0).abs() < 1e-9 && (c.center_uv.1 - 300.0).abs() < 1e-9);
    }

    #[test]
    fn dome_endpoints() {
        let p = default_phantom();
        let sag = p.config().dome_sag_um;
        assert_eq!(p.surface_height(0.0, 0.0), sag);
        assert_eq!(p.surface_height(75.0, 300.0), sag);
        assert!(p.surface_height(37.5 - 1e-9, 150.0 - 1e-9).abs() < 1e-9);
        assert_eq!(p.surface_height(37.4, 149.0), 0.0);
    }

    #[test]
    fn same_seed_same_surface() {
        let cfg = PhantomConfig {
            jitter_fraction: 0.25,
            orientation_rad: 0.4,
            seed: 77,
            ..PhantomConfig::default()
        };
        let a = Phantom::generate(cfg).unwrap();
        let b = Phantom::generate(cfg).unwrap();
        let other = Phantom::generate(PhantomConfig { seed: 78, ..cfg }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut differs = false;
        for _ in 0..1000 {
            let x = rng.random_range(-250.0..250.0);
            let y = rng.random_range(-500.0..500.0);
            assert_eq!(a.surface_height(x, y).to_bits(), b.surface_height(x, y).to_bits());
            differs |= a.surface_height(x, y) != other.surface_height(x, y);
        }
        assert!(differs);
    }

    #[test]
    fn cell_center_stack() {
        let p = default_phantom();
        let s = p.local_stack(0.0, 0.0).unwrap();
        let d = s.surface_depths();
        assert_eq!(d.len(), 2);
        assert!((d[0].1 - 0.07).abs() / 0.07 < 0.01, "{}", d[0].1);
        assert!((d[0].0 - (3.0 - 8.0)).abs() < 1e-12);
        assert!((d[1].0 - d[0].0 - 12.0).abs() < 1e-12);
        assert!((d[1].1 - 0.02).abs() < 1e-15);
    }

    #[test]
    fn flat_plateau_has_full_blur() {
        let p = Phantom::generate(PhantomConfig {
            dome_sag_um: 0.0,
            ..PhantomConfig::default()
        })
        .unwrap();
        assert!((p.blur(0.0, 0.0) - 1.0).abs() < 1e-12);
        let s = p.local_stack(0.0, 0.0).unwrap();
        assert_eq!(s.interfaces()[0].depth_um, p.config().z_offset_um);
    }

    /// Dense brute-force convolution of the hard wall indicator with the
    /// untruncated Gaussian PSF.
    fn dense_blur(p: &Phantom, x: f64, y: f64) -> f64 {
        let cfg = p.config();
        let sigma = cfg.psf_fwhm_um / FWHM_PER_SIGMA;
        let ratio = (cfg.wall_reflectance / cfg.top_reflectance).sqrt();
        let h = 0.1;
        let n = (6.0 * sigma / h) as i64;
        let (mut num, mut den) = (0.0, 0.0);
        for a in -n..=n {
            for b in -n..=n {
                let (dx, dy) = (a as f64 * h, b as f64 * h);
                let g = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                let ind = if p.in_wall(x + dx, y + dy) { ratio } else { 1.0 };
                num += g * ind;
                den += g;
            }
        }
        num / den
    }

    #[test]
    fn wall_reflectance_matches_dense_convolution() {
        let p = default_phantom();
        let cfg = *p.config();
        for (x, y) in [(37.5, 0.0), (37.5, 40.0), (0.0, 150.0), (36.0, 10.0), (30.0, -20.0)] {
            let stencil = p.top_amplitude(x, y).powi(2);
            let dense = cfg.top_reflectance * dense_blur(&p, x, y).powi(2);
            assert!((stencil - dense).abs() / dense < 0.02, "({x},{y}): {stencil} vs {dense}");
        }
        let on_wall = p.top_amplitude(37.5, 0.0).powi(2);
        assert!(on_wall > cfg.wall_reflectance && on_wall < cfg.top_reflectance);
    }

    #[test]
    fn reflectance_bounded_everywhere() {
        let p = Phantom::generate(PhantomConfig {
            jitter_fraction: 0.3,
            orientation_rad: 0.3,
            seed: 5,
            ..PhantomConfig::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let x = rng.random_range(-290.0..290.0);
            let y = rng.random_range(-590.0..590.0);
            let r2 = p.top_amplitude(x, y).powi(2);
            assert!((0.0..=0.07 + 1e-15).contains(&r2));
            let h = p.surface_height(x, y);
            assert!((0.0..=p.config().dome_sag_um).contains(&h));
        }
    }

    #[test]
    fn step_edge_transition_width() {
        // Box-averaged step along u, scanned across the stencil.
        let psf = PsfStencil::new(12.0);
        let sigma = 12.0 / FWHM_PER_SIGMA;
        let response = |x: f64| psf.average(|du, _, size| ((x + du) / size + 0.5).clamp(0.0, 1.0));
        let xs: Vec<f64> = (0..=60_000).map(|i| -30.0 + i as f64 * 0.001).collect();
        let r: Vec<f64> = xs.iter().map(|&x| response(x)).collect();
        let x10 = xs[r.iter().position(|&v| v >= 0.1).unwrap()];
        let x90 = xs[r.iter().position(|&v| v >= 0.9).unwrap()];
        // 10–90 % width of an erf edge is 2·1.28155·σ
        let expected = 2.0 * 1.281_551_565_5 * sigma;
        assert!(((x90 - x10) - expected).abs() / expected < 0.10, "{} vs {expected}", x90 - x10);
    }

    #[test]
    fn dome_is_lipschitz_within_cells() {
        let p = Phantom::generate(PhantomConfig {
            jitter_fraction: 0.2,
            orientation_rad: 0.7,
            seed: 3,
            ..PhantomConfig::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for _ in 0..5000 {
            let (x, y) = (rng.random_range(-250.0..250.0), rng.random_range(-500.0..500.0));
            let (dx, dy) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let a = p.cell_at(x, y);
            let b = p.cell_at(x + dx, y + dy);
            if (a.column, a.row) != (b.column, b.row) {
                continue;
            }
            let dz = (p.surface_height(x, y) - p.surface_height(x + dx, y + dy)).abs();
            assert!(dz <= p.dome_lipschitz(&a) * dx.hypot(dy) + 1e-12);
            checked += 1;
        }
        assert!(checked > 3000);
    }

    #[test]
    fn out_of_extent_is_rejected() {
        let p = default_phantom();
        assert!(matches!(p.local_stack(301.0, 0.0), Err(QoctError::OutOfBounds(_))));
        assert!(p.local_stack(299.0, 599.0).is_ok());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            PhantomConfig { cell_width_um: 0.0, ..Default::default() },
            PhantomConfig { top_reflectance: 1.0, ..Default::default() },
            PhantomConfig { wall_reflectance: 0.08, ..Default::default() },
            PhantomConfig { jitter_fraction: 0.4, ..Default::default() },
            PhantomConfig { psf_fwhm_um: -1.0, ..Default::default() },
            PhantomConfig { top_reflectance: 0.8, membrane_reflectance: 0.2, ..Default::default() },
        ];
        for cfg in bad {
            assert!(Phantom::generate(cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn membrane_is_optional() {
        let p = Phantom::generate(PhantomConfig {
            membrane_reflectance: 0.0,
            ..PhantomConfig::default()
        })
        .unwrap();
        assert_eq!(p.local_stack(0.0, 0.0).unwrap().len(), 1);
    }
}
