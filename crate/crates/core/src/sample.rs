//! Multilayer dispersive sample and its round-trip transfer function H(ω).
//!
//! Single-scattering model: every interface contributes one reflected
//! amplitude, delayed by the vacuum path and by the material layers above
//! it. Each layer's phase is a second-order Taylor expansion about the
//! source centre frequency ω₀.

use num_complex::Complex64;

use crate::{QoctError, Result, SPEED_OF_LIGHT, UM};

/// Passivity slack for Σ|r_j| ≤ 1 (absorbs rounding in user-supplied values).
const PASSIVITY_SLACK: f64 = 1e-12;

/// Homogeneous dispersive slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness_um: f64,
    /// Carrier phase per unit length at ω₀ (rad/m).
    pub beta0: f64,
    /// Group delay per unit length (s/m).
    pub beta1: f64,
    /// Group-velocity dispersion per unit length (s²/m).
    pub beta2: f64,
}

impl Layer {
    /// A slab that propagates exactly like vacuum at first order.
    pub fn vacuum_like(thickness_um: f64, omega0: f64) -> Self {
        Layer {
            thickness_um,
            beta0: omega0 / SPEED_OF_LIGHT,
            beta1: 1.0 / SPEED_OF_LIGHT,
            beta2: 0.0,
        }
    }

    /// Non-dispersive-phase slab with group index `group_index` and GVD given
    /// in fs²/mm; the carrier phase uses `phase_index`.
    pub fn from_indices(
        thickness_um: f64,
        omega0: f64,
        phase_index: f64,
        group_index: f64,
        gvd_fs2_per_mm: f64,
    ) -> Self {
        Layer {
            thickness_um,
            beta0: phase_index * omega0 / SPEED_OF_LIGHT,
            beta1: group_index / SPEED_OF_LIGHT,
            beta2: gvd_fs2_per_mm * 1e-30 / 1e-3,
        }
    }

    /// One-pass spectral phase φ(ω) (rad).
    pub fn phase(&self, omega: f64, omega0: f64) -> f64 {
        let d = omega - omega0;
        (self.beta0 + self.beta1 * d + 0.5 * self.beta2 * d * d) * self.thickness_um * UM
    }

    /// β₂·L in fs².
    pub fn gdd_fs2(&self) -> f64 {
        self.beta2 * self.thickness_um * UM * 1e30
    }

    fn validate(&self) -> Result<()> {
        if !(self.thickness_um.is_finite() && self.thickness_um >= 0.0) {
            return Err(QoctError::param(
                "layer.thickness",
                format!("must be finite and non-negative, got {}", self.thickness_um),
            ));
        }
        if !(self.beta0.is_finite() && self.beta1.is_finite() && self.beta2.is_finite()) {
            return Err(QoctError::param("layer.beta", "dispersion coefficients must be finite"));
        }
        Ok(())
    }
}

/// Reflective interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interface {
    /// Geometric depth from the reference plane (µm).
    pub depth_um: f64,
    /// Complex amplitude reflectance.
    pub reflectance: Complex64,
    /// Extra phase θ_j used to model surface roughness (rad).
    pub phase_jitter: f64,
}

impl Interface {
    pub fn new(depth_um: f64, reflectance: impl Into<Complex64>) -> Self {
        Interface {
            depth_um,
            reflectance: reflectance.into(),
            phase_jitter: 0.0,
        }
    }
}

/// Accumulated propagation terms from the reference plane down to one interface.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PathTerms {
    /// Vacuum path (m).
    vacuum: f64,
    /// Σ β₀ L (rad).
    carrier: f64,
    /// Σ β₁ L (s).
    delay: f64,
    /// Σ ½ β₂ L (s²).
    chirp: f64,
}

/// Ordered reflective interfaces with the material layers between them.
///
/// `layers[j]` is the slab immediately above interface `j`; it is traversed
/// by every interface at index ≥ j.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    interfaces: Vec<Interface>,
    layers: Vec<Option<Layer>>,
    paths: Vec<PathTerms>,
}

impl LayerStack {
    pub fn new(interfaces: Vec<Interface>, layers: Vec<Option<Layer>>) -> Result<Self> {
        if interfaces.is_empty() {
            return Err(QoctError::InvalidInput(
                "a layer stack needs at least one interface".into(),
            ));
        }
        if layers.len() != interfaces.len() {
            return Err(QoctError::InvalidInput(format!(
                "{} layer slots for {} interfaces",
                layers.len(),
                interfaces.len()
            )));
        }
        for (j, iface) in interfaces.iter().enumerate() {
            let r = iface.reflectance;
            if !(iface.depth_um.is_finite()
                && r.re.is_finite()
                && r.im.is_finite()
                && iface.phase_jitter.is_finite())
            {
                return Err(QoctError::InvalidInput(format!(
                    "interface {j} has non-finite values"
                )));
            }
            if j > 0 && iface.depth_um <= interfaces[j - 1].depth_um {
                return Err(QoctError::InvalidInput(format!(
                    "interface depths must be strictly increasing ({} µm after {} µm)",
                    iface.depth_um,
                    interfaces[j - 1].depth_um
                )));
            }
        }
        let total: f64 = interfaces.iter().map(|i| i.reflectance.norm()).sum();
        if total > 1.0 + PASSIVITY_SLACK {
            return Err(QoctError::InvalidInput(format!(
                "passivity violated: sum of |r_j| is {total}"
            )));
        }
        for (j, layer) in layers.iter().enumerate() {
            let Some(layer) = layer else { continue };
            layer.validate()?;
            if j > 0 {
                let gap = interfaces[j].depth_um - interfaces[j - 1].depth_um;
                if layer.thickness_um > gap * (1.0 + 1e-12) {
                    return Err(QoctError::InvalidInput(format!(
                        "layer above interface {j} is {} µm thick but the gap is {gap} µm",
                        layer.thickness_um
                    )));
                }
            }
        }

        let mut paths = Vec::with_capacity(interfaces.len());
        let mut material_um = 0.0;
        let mut acc = PathTerms::default();
        for (iface, layer) in interfaces.iter().zip(&layers) {
            if let Some(l) = layer {
                let len = l.thickness_um * UM;
                material_um += l.thickness_um;
                acc.carrier += l.beta0 * len;
                acc.delay += l.beta1 * len;
                acc.chirp += 0.5 * l.beta2 * len;
            }
            paths.push(PathTerms {
                vacuum: (iface.depth_um - material_um) * UM,
                ..acc
            });
        }

        Ok(LayerStack {
            interfaces,
            layers,
            paths,
        })
    }

    /// Single reflector in vacuum.
    pub fn mirror(depth_um: f64, reflectance: f64) -> Result<Self> {
        Self::new(vec![Interface::new(depth_um, reflectance)], vec![None])
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn layers(&self) -> &[Option<Layer>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.interfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty()
    }

    /// Copy of the stack with the given per-interface phase jitter.
    pub fn with_phase_jitter(&self, thetas: &[f64]) -> Result<Self> {
        if thetas.len() != self.interfaces.len() {
            return Err(QoctError::InvalidInput(format!(
                "{} jitter phases for {} interfaces",
                thetas.len(),
                self.interfaces.len()
            )));
        }
        let mut out = self.clone();
        for (iface, &t) in out.interfaces.iter_mut().zip(thetas) {
            iface.phase_jitter = t;
        }
        Ok(out)
    }

    /// Same stack with depths shifted so interface `index` sits at z = 0.
    pub fn rereferenced(&self, index: usize) -> Result<Self> {
        let origin = self
            .interfaces
            .get(index)
            .ok_or_else(|| QoctError::OutOfBounds(format!("reference interface {index}")))?
            .depth_um;
        let interfaces = self
            .interfaces
            .iter()
            .map(|i| Interface {
                depth_um: i.depth_um - origin,
                ..*i
            })
            .collect();
        Self::new(interfaces, self.layers.clone())
    }

    /// Round-trip phase of interface `j` at `omega`, excluding θ_j.
    fn path_phase(&self, j: usize, omega: f64, omega0: f64) -> f64 {
        let p = &self.paths[j];
        let d = omega - omega0;
        2.0 * (omega * p.vacuum / SPEED_OF_LIGHT + p.carrier + p.delay * d + p.chirp * d * d)
    }

    /// Reflected amplitude of interface `j` alone.
    pub fn contribution(&self, j: usize, omega: f64, omega0: f64) -> Complex64 {
        let iface = &self.interfaces[j];
        iface.reflectance
            * Complex64::from_polar(1.0, iface.phase_jitter + self.path_phase(j, omega, omega0))
    }

    /// H(ω) for round-trip reflection, with layer dispersion expanded about ω₀.
    pub fn transfer_function(&self, omega: f64, omega0: f64) -> Complex64 {
        (0..self.interfaces.len())
            .map(|j| self.contribution(j, omega, omega0))
            .sum()
    }

    /// Group-delay position of interface `j` (µm): where a QOCT dip appears.
    pub fn group_depth_um(&self, j: usize) -> f64 {
        let p = &self.paths[j];
        (p.vacuum + SPEED_OF_LIGHT * p.delay) / UM
    }

    /// Interfaces in increasing depth with intensity reflectances |r_j|².
    pub fn surface_depths(&self) -> Vec<(f64, f64)> {
        self.interfaces
            .iter()
            .map(|i| (i.depth_um, i.reflectance.norm_sqr()))
            .collect()
    }

    /// Σ|r_j|².
    pub fn self_reflectance(&self) -> f64 {
        self.interfaces.iter().map(|i| i.reflectance.norm_sqr()).sum()
    }
}

/// Incremental construction in file order: an optional layer, then the
/// interface beneath it.
#[derive(Debug, Default, Clone)]
pub struct StackBuilder {
    interfaces: Vec<Interface>,
    layers: Vec<Option<Layer>>,
    pending: Option<Layer>,
}

impl StackBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Material directly above the next interface.
    pub fn layer(mut self, layer: Layer) -> Self {
        self.pending = Some(layer);
        self
    }

    pub fn interface(mut self, iface: Interface) -> Self {
        self.layers.push(self.pending.take());
        self.interfaces.push(iface);
        self
    }

    pub fn reflector(self, depth_um: f64, reflectance: impl Into<Complex64>) -> Self {
        self.interface(Interface::new(depth_um, reflectance))
    }

    pub fn build(self) -> Result<LayerStack> {
        if self.pending.is_some() {
            return Err(QoctError::InvalidInput(
                "trailing layer without an interface beneath it".into(),
            ));
        }
        LayerStack::new(self.interfaces, self.layers)
    }
}
