//! Flat `section.key = value` run configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::counting::CollectionMode;
use crate::phantom::PhantomConfig;
use crate::scan::{Execution, ScanConfig};
use crate::spectrum::{calibrate_bandwidth, SpectralDensity, SpectralShape};
use crate::{QoctError, Result};

/// Environment variable overriding every seed.
pub const SEED_ENV: &str = "QOCT_SEED";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// σ in rad/s.
    Sigma(f64),
    /// Target dip FWHM in µm, converted with [`calibrate_bandwidth`].
    DipFwhm(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub center_wavelength_nm: f64,
    pub shape: SpectralShape,
    pub bandwidth: Bandwidth,
    pub n_samples: usize,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            center_wavelength_nm: 812.0,
            shape: SpectralShape::Gaussian,
            bandwidth: Bandwidth::DipFwhm(7.5),
            n_samples: 1025,
        }
    }
}

impl SourceConfig {
    pub fn sigma(&self) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Sigma(s) => Ok(s),
            Bandwidth::DipFwhm(f) => calibrate_bandwidth(f),
        }
    }

    pub fn build(&self) -> Result<SpectralDensity> {
        SpectralDensity::new(self.center_wavelength_nm, self.shape, self.sigma()?, self.n_samples)
    }
}

/// Sample for `ascan`: a stack file, or a single mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub stack_file: Option<PathBuf>,
    pub mirror_depth_um: f64,
    pub mirror_reflectance: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            stack_file: None,
            mirror_depth_um: 0.0,
            mirror_reflectance: 1.0,
        }
    }
}

/// Mirror behind a dispersive slab, for the QOCT/OCT comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    pub gdd_fs2: f64,
    pub layer_thickness_um: f64,
    pub phase_index: f64,
    pub group_index: f64,
    pub z_step_um: f64,
    pub z_half_range_um: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            gdd_fs2: 360.0,
            layer_thickness_um: 10_000.0,
            phase_index: 1.45,
            group_index: 1.47,
            z_step_um: 0.1,
            z_half_range_um: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub sample: SampleConfig,
    pub phantom: PhantomConfig,
    pub scan: ScanConfig,
    pub execution: Execution,
    pub compare: CompareConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: SourceConfig::default(),
            sample: SampleConfig::default(),
            phantom: PhantomConfig::default(),
            scan: ScanConfig::default(),
            execution: Execution::Parallel,
            compare: CompareConfig::default(),
            output_dir: PathBuf::from("."),
        }
    }
}

fn parse_value<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got `{value}`")),
    }
}

fn parse_execution(value: &str) -> std::result::Result<Execution, String> {
    match value.to_ascii_lowercase().as_str() {
        "parallel" => Ok(Execution::Parallel),
        "serial" => Ok(Execution::Serial),
        _ => Err(format!("expected `parallel` or `serial`, got `{value}`")),
    }
}

/// Notes on defaults taken from the reported experiment.
const REPORTED_DEFAULTS: &[&str] = &[
    "source.center_wavelength_nm",
    "source.target_dip_fwhm_um",
    "phantom.cell_width_um",
    "phantom.cell_length_um",
    "phantom.top_reflectance",
    "scan.x_extent_um",
    "scan.y_extent_um",
    "scan.transverse_step_um",
    "scan.z_step_um",
    "scan.z_count",
    "counting.flux",
    "counting.accumulation_s",
    "counting.window_s",
    "counting.collection_mode",
];

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value;
        let p = &mut self.phantom;
        let s = &mut self.scan;
        let c = &mut self.compare;
        match key {
            "source.center_wavelength_nm" => self.source.center_wavelength_nm = parse_value(v)?,
            "source.shape" => self.source.shape = parse_value(v)?,
            "source.sigma_rad_s" => self.source.bandwidth = Bandwidth::Sigma(parse_value(v)?),
            "source.target_dip_fwhm_um" => self.source.bandwidth = Bandwidth::DipFwhm(parse_value(v)?),
            "source.n_samples" => self.source.n_samples = parse_value(v)?,

            "sample.stack_file" => self.sample.stack_file = Some(PathBuf::from(v)),
            "sample.mirror_depth_um" => self.sample.mirror_depth_um = parse_value(v)?,
            "sample.mirror_reflectance" => self.sample.mirror_reflectance = parse_value(v)?,

            "phantom.cell_width_um" => p.cell_width_um = parse_value(v)?,
            "phantom.cell_length_um" => p.cell_length_um = parse_value(v)?,
            "phantom.cell_thickness_um" => p.cell_thickness_um = parse_value(v)?,
            "phantom.dome_sag_um" => p.dome_sag_um = parse_value(v)?,
            "phantom.top_reflectance" => p.top_reflectance = parse_value(v)?,
            "phantom.wall_reflectance" => p.wall_reflectance = parse_value(v)?,
            "phantom.membrane_reflectance" => p.membrane_reflectance = parse_value(v)?,
            "phantom.wall_width_um" => p.wall_width_um = parse_value(v)?,
            "phantom.orientation_rad" => p.orientation_rad = parse_value(v)?,
            "phantom.jitter_fraction" => p.jitter_fraction = parse_value(v)?,
            "phantom.psf_fwhm_um" => p.psf_fwhm_um = parse_value(v)?,
            "phantom.z_offset_um" => p.z_offset_um = parse_value(v)?,
            "phantom.beta0_per_m" => p.beta0 = parse_value(v)?,
            "phantom.beta1_s_per_m" => p.beta1 = parse_value(v)?,
            "phantom.beta2_s2_per_m" => p.beta2 = parse_value(v)?,
            "phantom.extent_x_um" => p.extent_x_um = parse_value(v)?,
            "phantom.extent_y_um" => p.extent_y_um = parse_value(v)?,
            "phantom.seed" => p.seed = parse_value(v)?,

            "scan.x_extent_um" => s.x_extent_um = parse_value(v)?,
            "scan.y_extent_um" => s.y_extent_um = parse_value(v)?,
            "scan.transverse_step_um" => s.transverse_step_um = parse_value(v)?,
            "scan.x_center_um" => s.x_center_um = parse_value(v)?,
            "scan.y_center_um" => s.y_center_um = parse_value(v)?,
            "scan.z_start_um" => s.z_start_um = parse_value(v)?,
            "scan.z_step_um" => s.z_step_um = parse_value(v)?,
            "scan.z_count" => s.z_count = parse_value(v)?,
            "scan.stochastic" => s.stochastic = parse_bool(v)?,
            "scan.washout_trials" => s.washout_trials = parse_value(v)?,
            "scan.execution" => self.execution = parse_execution(v)?,

            "counting.flux" => s.counting.flux = parse_value(v)?,
            "counting.accumulation_s" => s.counting.accumulation_time = parse_value(v)?,
            "counting.window_s" => s.counting.coincidence_window = parse_value(v)?,
            "counting.collection_mode" => s.counting.collection_mode = parse_value::<CollectionMode>(v)?,
            "counting.visibility" => s.counting.visibility = parse_value(v)?,
            "counting.efficiency" => s.counting.detector_efficiency = parse_value(v)?,
            "counting.seed" => s.counting.seed = parse_value(v)?,

            "compare.gdd_fs2" => c.gdd_fs2 = parse_value(v)?,
            "compare.layer_thickness_um" => c.layer_thickness_um = parse_value(v)?,
            "compare.phase_index" => c.phase_index = parse_value(v)?,
            "compare.group_index" => c.group_index = parse_value(v)?,
            "compare.z_step_um" => c.z_step_um = parse_value(v)?,
            "compare.z_half_range_um" => c.z_half_range_um = parse_value(v)?,

            "output.dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses config text; `origin` names the source in error messages.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| QoctError::Parse {
                path: origin.to_string(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            if seen.contains("source.sigma_rad_s") && seen.contains("source.target_dip_fwhm_um") {
                return Err(err(
                    "give either source.sigma_rad_s or source.target_dip_fwhm_um, not both".into(),
                ));
            }
            config.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QoctError::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides given on the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for (i, item) in overrides.iter().enumerate() {
            let err = |message: String| QoctError::Parse {
                path: "--set".into(),
                line: i + 1,
                message,
            };
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{item}`")))?;
            self.set(key.trim(), value.trim())
                .map_err(|m| err(format!("{}: {m}", key.trim())))?;
        }
        Ok(())
    }

    /// Replaces every seed with `seed`.
    pub fn override_seeds(&mut self, seed: u64) {
        self.phantom.seed = seed;
        self.scan.counting.seed = seed;
    }

    /// Applies [`SEED_ENV`] when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v
                .trim()
                .parse()
                .map_err(|_| QoctError::InvalidInput(format!("{SEED_ENV}=`{v}` is not a u64")))?;
            self.override_seeds(seed);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let src = &self.source;
        if let Bandwidth::DipFwhm(f) = src.bandwidth {
            calibrate_bandwidth(f)?;
        }
        src.build()?;
        if let Some(path) = &self.sample.stack_file {
            if !path.is_file() {
                return Err(QoctError::InvalidInput(format!(
                    "sample.stack_file `{}` does not exist",
                    path.display()
                )));
            }
        }
        if !self.sample.mirror_depth_um.is_finite() {
            return Err(QoctError::param("sample.mirror_depth_um", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.sample.mirror_reflectance) {
            return Err(QoctError::param("sample.mirror_reflectance", "must lie in [0, 1]"));
        }
        self.phantom.validate()?;
        self.scan.validate()?;
        let c = &self.compare;
        for (name, v) in [
            ("compare.layer_thickness_um", c.layer_thickness_um),
            ("compare.phase_index", c.phase_index),
            ("compare.group_index", c.group_index),
            ("compare.z_step_um", c.z_step_um),
            ("compare.z_half_range_um", c.z_half_range_um),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(QoctError::param(name, "must be positive"));
            }
        }
        if !c.gdd_fs2.is_finite() {
            return Err(QoctError::param("compare.gdd_fs2", "must be finite"));
        }
        Ok(())
    }

    /// Every resolved setting as `(key, value)`, in a form [`RunConfig::set`]
    /// accepts.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.scan;
        let p = &self.phantom;
        let c = &self.compare;
        let mut out = vec![
            ("source.center_wavelength_nm", self.source.center_wavelength_nm.to_string()),
            ("source.shape", self.source.shape.to_string()),
        ];
        match self.source.bandwidth {
            Bandwidth::Sigma(v) => out.push(("source.sigma_rad_s", v.to_string())),
            Bandwidth::DipFwhm(v) => out.push(("source.target_dip_fwhm_um", v.to_string())),
        }
        out.push(("source.n_samples", self.source.n_samples.to_string()));
        if let Some(path) = &self.sample.stack_file {
            out.push(("sample.stack_file", path.display().to_string()));
        }
        out.extend([
            ("sample.mirror_depth_um", self.sample.mirror_depth_um.to_string()),
            ("sample.mirror_reflectance", self.sample.mirror_reflectance.to_string()),
            ("phantom.cell_width_um", p.cell_width_um.to_string()),
            ("phantom.cell_length_um", p.cell_length_um.to_string()),
            ("phantom.cell_thickness_um", p.cell_thickness_um.to_string()),
            ("phantom.dome_sag_um", p.dome_sag_um.to_string()),
            ("phantom.top_reflectance", p.top_reflectance.to_string()),
            ("phantom.wall_reflectance", p.wall_reflectance.to_string()),
            ("phantom.membrane_reflectance", p.membrane_reflectance.to_string()),
            ("phantom.wall_width_um", p.wall_width_um.to_string()),
            ("phantom.orientation_rad", p.orientation_rad.to_string()),
            ("phantom.jitter_fraction", p.jitter_fraction.to_string()),
            ("phantom.psf_fwhm_um", p.psf_fwhm_um.to_string()),
            ("phantom.z_offset_um", p.z_offset_um.to_string()),
            ("phantom.beta0_per_m", p.beta0.to_string()),
            ("phantom.beta1_s_per_m", p.beta1.to_string()),
            ("phantom.beta2_s2_per_m", p.beta2.to_string()),
            ("phantom.extent_x_um", p.extent_x_um.to_string()),
            ("phantom.extent_y_um", p.extent_y_um.to_string()),
            ("phantom.seed", p.seed.to_string()),
            ("scan.x_extent_um", s.x_extent_um.to_string()),
            ("scan.y_extent_um", s.y_extent_um.to_string()),
            ("scan.transverse_step_um", s.transverse_step_um.to_string()),
            ("scan.x_center_um", s.x_center_um.to_string()),
            ("scan.y_center_um", s.y_center_um.to_string()),
            ("scan.z_start_um", s.z_start_um.to_string()),
            ("scan.z_step_um", s.z_step_um.to_string()),
            ("scan.z_count", s.z_count.to_string()),
            ("scan.stochastic", s.stochastic.to_string()),
            ("scan.washout_trials", s.washout_trials.to_string()),
            (
                "scan.execution",
                match self.execution {
                    Execution::Parallel => "parallel".into(),
                    Execution::Serial => "serial".into(),
                },
            ),
            ("counting.flux", s.counting.flux.to_string()),
            ("counting.accumulation_s", s.counting.accumulation_time.to_string()),
            ("counting.window_s", s.counting.coincidence_window.to_string()),
            ("counting.collection_mode", s.counting.collection_mode.to_string()),
            ("counting.visibility", s.counting.visibility.to_string()),
            ("counting.efficiency", s.counting.detector_efficiency.to_string()),
            ("counting.seed", s.counting.seed.to_string()),
            ("compare.gdd_fs2", c.gdd_fs2.to_string()),
            ("compare.layer_thickness_um", c.layer_thickness_um.to_string()),
            ("compare.phase_index", c.phase_index.to_string()),
            ("compare.group_index", c.group_index.to_string()),
            ("compare.z_step_um", c.z_step_um.to_string()),
            ("compare.z_half_range_um", c.z_half_range_um.to_string()),
            ("output.dir", self.output_dir.display().to_string()),
        ]);
        out
    }

    /// Config text that parses back to this configuration. Settings left at
    /// a default taken from the reported experiment carry a comment.
    pub fn to_config_text(&self) -> String {
        let defaults: std::collections::HashMap<_, _> =
            RunConfig::default().entries().into_iter().collect();
        let mut text = String::new();
        for (key, value) in self.entries() {
            let _ = write!(text, "{key} = {value}");
            if REPORTED_DEFAULTS.contains(&key) && defaults.get(key) == Some(&value) {
                text.push_str("  # default: reported experimental value");
            }
            text.push('\n');
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = RunConfig::parse_str("", "empty").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.source.center_wavelength_nm, 812.0);
        assert_eq!(c.source.bandwidth, Bandwidth::DipFwhm(7.5));
        assert_eq!(c.scan.dims(), (16, 21, 31));
        c.validate().unwrap();
    }

    #[test]
    fn comments_and_whitespace() {
        let c = RunConfig::parse_str(
            "# header\n\n  scan.z_count = 11  # trailing\nsource.shape=sinc2\n",
            "t",
        )
        .unwrap();
        assert_eq!(c.scan.z_count, 11);
        assert_eq!(c.source.shape, SpectralShape::SincSquared);
    }

    #[test]
    fn zero_z_step_names_the_key() {
        let c = RunConfig::parse_str("scan.z_step_um = 0", "t").unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("scan.z_step_um"), "{err}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = RunConfig::parse_str("scan.z_count = 3\nscan.z_count = 4\n", "cfg.txt").unwrap_err();
        match err {
            QoctError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_bad_value_report_lines() {
        match RunConfig::parse_str("\nscan.bogus = 1", "t").unwrap_err() {
            QoctError::Parse { line: 2, message, .. } => assert!(message.contains("unknown key")),
            other => panic!("{other:?}"),
        }
        match RunConfig::parse_str("scan.z_count = many", "t").unwrap_err() {
            QoctError::Parse { line: 1, message, .. } => assert!(message.contains("scan.z_count")),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::parse_str("no equals sign", "t").is_err());
    }

    #[test]
    fn missing_stack_file_fails_validation() {
        let c = RunConfig::parse_str("sample.stack_file = /nonexistent/stack.txt", "t").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let mut c = RunConfig::default();
        c.apply_overrides(&[
            "phantom.seed=17".into(),
            "source.sigma_rad_s=2.1e13".into(),
            "scan.stochastic=true".into(),
            "counting.collection_mode=npbs".into(),
            "phantom.orientation_rad=0.1234567890123".into(),
        ])
        .unwrap();
        let text = c.to_config_text();
        assert!(text.contains("# default: reported experimental value"));
        let back = RunConfig::parse_str(&text, "manifest").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_and_seed_override() {
        let mut c = RunConfig::default();
        assert!(c.apply_overrides(&["scan.z_count".into()]).is_err());
        c.override_seeds(99);
        assert_eq!(c.phantom.seed, 99);
        assert_eq!(c.scan.counting.seed, 99);
    }
}
