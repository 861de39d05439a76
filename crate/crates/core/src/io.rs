//! File formats: CSV curves, 16-bit PGM sections, binary volumes, run
//! manifests and stack files.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;

use crate::config::RunConfig;
use crate::sample::{Interface, Layer, LayerStack, StackBuilder};
use crate::scan::{Image2D, Volume};
use crate::{QoctError, Result};

pub const VOLUME_MAGIC: &[u8; 8] = b"QOCTVOL1";
pub const PGM_MAXVAL: u16 = 65535;

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| QoctError::io(path, e))?;
    f.write_all(bytes).map_err(|e| QoctError::io(path, e))
}

/// CSV text with one header row and equal-length numeric columns.
pub fn csv_text(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    if header.len() != columns.len() || columns.is_empty() {
        return Err(QoctError::InvalidInput("one header per column required".into()));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(QoctError::InvalidInput("CSV columns differ in length".into()));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    write_bytes(path, csv_text(header, columns)?.as_bytes())
}

/// `z_um,value` rows.
pub fn write_curve_csv(path: &Path, z_um: &[f64], values: &[f64]) -> Result<()> {
    write_csv(path, &["z_um", "value"], &[z_um, values])
}

/// `z_um,qoct,oct_envelope` rows.
pub fn write_comparison_csv(path: &Path, z_um: &[f64], qoct: &[f64], oct: &[f64]) -> Result<()> {
    write_csv(path, &["z_um", "qoct", "oct_envelope"], &[z_um, qoct, oct])
}

/// Parsed CSV: header names and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str, origin: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| QoctError::Parse {
            path: origin.into(),
            line: 1,
            message: "empty file".into(),
        })?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let err = |message: String| QoctError::Parse {
            path: origin.into(),
            line: n + 2,
            message,
        };
        if fields.len() != header.len() {
            return Err(err(format!("{} fields, expected {}", fields.len(), header.len())));
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            col.push(f.trim().parse().map_err(|_| err(format!("bad number `{f}`")))?);
        }
    }
    Ok(Table { header, columns })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| QoctError::io(path, e))?;
    parse_csv(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PgmMapping {
    /// Image minimum to black, maximum to white.
    Auto,
    Range { min: f64, max: f64 },
}

/// The mapping actually applied to an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmInfo {
    pub min: f64,
    pub max: f64,
    /// min = max: every pixel was written mid-gray.
    pub degenerate: bool,
}

impl PgmInfo {
    pub fn describe(&self) -> String {
        format!("linear [{}, {}] -> [0, {PGM_MAXVAL}]", self.min, self.max)
    }

    pub fn warning(&self) -> Option<String> {
        self.degenerate
            .then(|| format!("degenerate mapping min = max = {}; image written mid-gray", self.min))
    }
}

/// Binary P5 PGM with 16-bit big-endian samples; low values render dark.
pub fn encode_pgm(image: &Image2D, mapping: PgmMapping) -> (Vec<u8>, PgmInfo) {
    let (min, max) = match mapping {
        PgmMapping::Range { min, max } => (min, max),
        PgmMapping::Auto => image
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
    };
    let degenerate = !(max > min);
    let mut bytes = format!("P5\n{} {}\n{}\n", image.width, image.height, PGM_MAXVAL).into_bytes();
    bytes.reserve(image.data.len() * 2);
    for &v in &image.data {
        let level = if degenerate {
            PGM_MAXVAL / 2 + 1
        } else {
            let t = ((v - min) / (max - min)).clamp(0.0, 1.0);
            (t * f64::from(PGM_MAXVAL)).round() as u16
        };
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    (bytes, PgmInfo { min, max, degenerate })
}

pub fn write_pgm(path: &Path, image: &Image2D, mapping: PgmMapping) -> Result<PgmInfo> {
    let (bytes, info) = encode_pgm(image, mapping);
    write_bytes(path, &bytes)?;
    Ok(info)
}

/// Magic, dims as u64, pitch and origin as f64, then the voxels as f64; all
/// little-endian, z fastest.
pub fn encode_volume(volume: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 9 * 8 + volume.values.len() * 8);
    out.extend_from_slice(VOLUME_MAGIC);
    for d in [volume.dims.0, volume.dims.1, volume.dims.2] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in [
        volume.pitch.0,
        volume.pitch.1,
        volume.pitch.2,
        volume.origin.0,
        volume.origin.1,
        volume.origin.2,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &volume.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    let bad = |m: &str| QoctError::InvalidInput(format!("volume file: {m}"));
    if bytes.len() < 80 || &bytes[..8] != VOLUME_MAGIC {
        return Err(bad("missing QOCTVOL1 header"));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes") };
    let dim = |i: usize| usize::try_from(u64::from_le_bytes(word(i))).map_err(|_| bad("dimension too large"));
    let dims = (dim(0)?, dim(1)?, dim(2)?);
    let f = |i: usize| f64::from_le_bytes(word(i));
    let pitch = (f(3), f(4), f(5));
    let origin = (f(6), f(7), f(8));
    let n = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| bad("dimensions overflow"))?;
    let body = &bytes[80..];
    if body.len() != n * 8 {
        return Err(bad(&format!("{} voxel bytes for dims {dims:?}", body.len())));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Volume::new(dims, pitch, origin, values)
}

pub fn write_volume(path: &Path, volume: &Volume) -> Result<()> {
    write_bytes(path, &encode_volume(volume))
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| QoctError::io(path, e))?;
    decode_volume(&bytes)
}

/// Manifest text: an informational comment block followed by the fully
/// resolved configuration, which parses back as a config file.
pub fn manifest_text(command: &str, config: &RunConfig, notes: &[(String, String)]) -> String {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = String::from("# qoct run manifest\n# [info]\n");
    text.push_str(&format!("# version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("# command = {command}\n"));
    text.push_str(&format!("# created_unix_s = {created}\n"));
    for (k, v) in notes {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    text.push_str("# [config]\n");
    text.push_str(&config.to_config_text());
    text
}

pub fn write_manifest(
    path: &Path,
    command: &str,
    config: &RunConfig,
    notes: &[(String, String)],
) -> Result<()> {
    write_bytes(path, manifest_text(command, config, notes).as_bytes())
}

/// Parses a stack file.
///
/// Interface lines are `z_um re(r) im(r) theta_rad`; a preceding
/// `layer L_um beta1_s_per_m beta2_s2_per_m [beta0_per_m]` line sets the
/// slab directly above the next interface. `#` starts a comment.
pub fn parse_stack(text: &str, origin: &str) -> Result<LayerStack> {
    let mut builder = StackBuilder::new();
    let mut pending_layer = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| QoctError::Parse {
            path: origin.into(),
            line: n + 1,
            message,
        };
        let mut tokens = line.split_whitespace().peekable();
        let is_layer = tokens.peek() == Some(&"layer");
        if is_layer {
            tokens.next();
        }
        let nums = tokens
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        if is_layer {
            if pending_layer {
                return Err(err("two layer lines without an interface between them".into()));
            }
            if !(3..=4).contains(&nums.len()) {
                return Err(err("layer needs L_um beta1 beta2 [beta0]".into()));
            }
            builder = builder.layer(Layer {
                thickness_um: nums[0],
                beta1: nums[1],
                beta2: nums[2],
                beta0: nums.get(3).copied().unwrap_or(0.0),
            });
            pending_layer = true;
        } else {
            if nums.len() != 4 {
                return Err(err("interface needs z_um re im theta".into()));
            }
            let mut iface = Interface::new(nums[0], Complex64::new(nums[1], nums[2]));
            iface.phase_jitter = nums[3];
            builder = builder.interface(iface);
            pending_layer = false;
        }
    }
    builder.build().map_err(|e| match e {
        QoctError::InvalidInput(m) | QoctError::InvalidParameter { reason: m, .. } => {
            QoctError::Parse {
                path: origin.into(),
                line: 0,
                message: m,
            }
        }
        other => other,
    })
}

pub fn read_stack_file(path: &Path) -> Result<LayerStack> {
    let text = fs::read_to_string(path).map_err(|e| QoctError::io(path, e))?;
    parse_stack(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let z: Vec<f64> = (0..31).map(|i| -15.0 + i as f64).collect();
        let v: Vec<f64> = z.iter().map(|z| 1.0 - 0.7 * (-z * z / 10.0f64).exp() + 1e-13 / 3.0).collect();
        write_curve_csv(&path, &z, &v).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 32);
        assert!(!text.contains('\r'));
        assert!(text.starts_with("z_um,value\n"));
        let t = read_csv(&path).unwrap();
        for (a, b) in t.columns[1].iter().zip(&v) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(t.columns[0], z);
    }

    #[test]
    fn comparison_header() {
        let text = csv_text(&["z_um", "qoct", "oct_envelope"], &[&[0.0], &[1.0], &[0.5]]).unwrap();
        assert_eq!(text, "z_um,qoct,oct_envelope\n0,1,0.5\n");
        assert!(csv_text(&["a", "b"], &[&[0.0], &[1.0, 2.0]]).is_err());
    }

    #[test]
    fn pgm_endpoints() {
        let img = Image2D {
            width: 2,
            height: 2,
            data: vec![0.2, 0.5, 0.8, 1.0],
        };
        let (bytes, info) = encode_pgm(&img, PgmMapping::Auto);
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..]
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(px[0], 0);
        assert_eq!(px[3], 65535);
        assert!(!info.degenerate);

        let (bytes, _) = encode_pgm(&img, PgmMapping::Range { min: 0.5, max: 0.8 });
        let px: Vec<u16> = bytes[header.len()..]
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(px, vec![0, 0, 65535, 65535]);
    }

    #[test]
    fn pgm_uniform_is_mid_gray() {
        let img = Image2D {
            width: 3,
            height: 1,
            data: vec![1.0; 3],
        };
        let (bytes, info) = encode_pgm(&img, PgmMapping::Auto);
        assert!(info.degenerate && info.warning().is_some());
        let body = &bytes[bytes.len() - 6..];
        assert!(body.chunks(2).all(|c| u16::from_be_bytes([c[0], c[1]]) == 32768));
    }

    #[test]
    fn pgm_size_for_default_cscan() {
        let img = Image2D {
            width: 16,
            height: 21,
            data: vec![0.5; 16 * 21],
        };
        let (bytes, _) = encode_pgm(&img, PgmMapping::Range { min: 0.0, max: 1.0 });
        assert_eq!(bytes.len(), "P5\n16 21\n65535\n".len() + 16 * 21 * 2);
    }

    #[test]
    fn volume_round_trip_is_bit_exact() {
        let values: Vec<f64> = (0..2 * 3 * 4).map(|i| (i as f64).sin() / 7.0).collect();
        let v = Volume::new((2, 3, 4), (5.0, 5.0, 1.0), (-37.5, -50.0, -15.0), values).unwrap();
        let bytes = encode_volume(&v);
        assert_eq!(&bytes[..8], b"QOCTVOL1");
        assert_eq!(bytes.len(), 80 + 24 * 8);
        assert_eq!(decode_volume(&bytes).unwrap(), v);
        assert!(decode_volume(&bytes[..100]).is_err());
        assert!(decode_volume(b"NOTAVOLUME").is_err());
    }

    #[test]
    fn stack_file_parsing() {
        let text = "# two surfaces\n0 0.3 0 0\nlayer 12 4.5e-9 2.4e-26\n12 0.1 0.05 1.5\n";
        let s = parse_stack(text, "s.txt").unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.layers()[0].is_none());
        let l = s.layers()[1].unwrap();
        assert_eq!((l.thickness_um, l.beta1, l.beta2, l.beta0), (12.0, 4.5e-9, 2.4e-26, 0.0));
        assert_eq!(s.interfaces()[1].phase_jitter, 1.5);
        assert_eq!(s.interfaces()[1].reflectance, Complex64::new(0.1, 0.05));

        for bad in ["0 0.3 0", "0 0.3 zero 0", "0 0.3 0 0\nlayer 1 0 0\n", "5 0.1 0 0\n1 0.1 0 0\n"] {
            assert!(parse_stack(bad, "bad").is_err(), "{bad}");
        }
        match parse_stack("0 0.1 0 0\nlayer x 0 0\n", "f") {
            Err(QoctError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_parses_back() {
        let cfg = RunConfig::default();
        let text = manifest_text("volume", &cfg, &[("dims".into(), "(16, 21, 31)".into())]);
        assert!(text.contains("# created_unix_s = "));
        assert_eq!(RunConfig::parse_str(&text, "manifest").unwrap(), cfg);
    }
}
