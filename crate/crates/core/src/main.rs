use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qoct::config::RunConfig;
use qoct::io::{self, PgmMapping};
use qoct::oct;
use qoct::phantom::Phantom;
use qoct::qoct::{self as engine, AScanParams};
use qoct::sample::{Layer, LayerStack, StackBuilder};
use qoct::scan::{self, BScanAxis};
use qoct::spectrum::calibrate_bandwidth;
use qoct::{QoctError, Result};

#[derive(Parser)]
#[command(name = "qoct", version, about = "Quantum optical coherence tomography simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `section.key = value` lines
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set scan.z_step_um=0.5`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides output.dir)
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the spectral width σ (rad/s) giving a target dip FWHM
    Calibrate {
        #[arg(long, default_value_t = 7.5, allow_negative_numbers = true)]
        fwhm_um: f64,
    },
    /// Coincidence A-scan of a stack file or single mirror
    Ascan(Common),
    /// QOCT dip against the OCT envelope behind a dispersive slab
    Compare(Common),
    /// Generate the phantom and write its ground truth on the scan grid
    Phantom(Common),
    /// Full volumetric scan of the phantom
    Volume(Common),
    /// Extract a C-scan or B-scan from a volume file as PGM
    Slice(SliceArgs),
    /// Surface topography CSV from a volume file
    Surface(SurfaceArgs),
}

#[derive(Args)]
struct SliceArgs {
    /// Volume file
    input: PathBuf,
    /// C-scan at this z index
    #[arg(long, group = "which")]
    cscan: Option<usize>,
    /// y-z B-scan at this x index
    #[arg(long, group = "which")]
    yz: Option<usize>,
    /// x-z B-scan at this y index
    #[arg(long, group = "which")]
    xz: Option<usize>,
    /// Value mapped to black (default: image minimum)
    #[arg(long, requires = "max")]
    min: Option<f64>,
    /// Value mapped to white (default: image maximum)
    #[arg(long, requires = "min")]
    max: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Volume file
    input: PathBuf,
    #[arg(long, default_value_t = scan::SURFACE_THRESHOLD)]
    threshold: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&common.overrides)?;
    cfg.apply_env()?;
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| QoctError::io(&cfg.output_dir, e))?;
    Ok(cfg)
}

fn sample_stack(cfg: &RunConfig) -> Result<LayerStack> {
    match &cfg.sample.stack_file {
        Some(path) => io::read_stack_file(path),
        None => LayerStack::mirror(cfg.sample.mirror_depth_um, cfg.sample.mirror_reflectance),
    }
}

fn run_ascan(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let spectrum = cfg.source.build()?;
    let stack = sample_stack(&cfg)?;
    let curve = engine::ascan(&spectrum, &stack, &cfg.scan.ascan_params())?;
    let out = cfg.output_dir.join("ascan.csv");
    io::write_curve_csv(&out, &curve.z_grid, &curve.values)?;
    io::write_manifest(&cfg.output_dir.join("ascan.manifest"), "ascan", &cfg, &[])?;
    match engine::dip_fwhm(&curve) {
        Ok(w) => eprintln!("dip FWHM {w:.4} µm"),
        Err(e) => eprintln!("dip width unavailable: {e}"),
    }
    println!("{}", out.display());
    Ok(())
}

fn run_compare(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let c = &cfg.compare;
    let spectrum = cfg.source.build()?;
    let layer = Layer::from_indices(
        c.layer_thickness_um,
        spectrum.center_frequency(),
        c.phase_index,
        c.group_index,
        c.gdd_fs2 / (c.layer_thickness_um * 1e-3),
    );
    let stack = StackBuilder::new()
        .layer(layer)
        .reflector(c.layer_thickness_um, 1.0)
        .build()?;
    let center = stack.group_depth_um(0);
    let n = (2.0 * c.z_half_range_um / c.z_step_um).round() as usize + 1;
    let params = AScanParams {
        z_start_um: center - c.z_half_range_um,
        z_step_um: c.z_step_um,
        n_steps: n,
        washout_trials: 0,
        seed: 0,
    };
    let curve = engine::ascan(&spectrum, &stack, &params)?;
    let ifg = oct::interferogram(&spectrum, &stack, &curve.z_grid);
    let peak = ifg.envelope.iter().cloned().fold(0.0, f64::max);
    let envelope: Vec<f64> = ifg.envelope.iter().map(|e| e / peak).collect();
    let out = cfg.output_dir.join("compare.csv");
    io::write_comparison_csv(&out, &curve.z_grid, &curve.values, &envelope)?;
    let qw = engine::dip_fwhm(&curve)?;
    let ow = oct::envelope_fwhm(&ifg)?;
    io::write_manifest(
        &cfg.output_dir.join("compare.manifest"),
        "compare",
        &cfg,
        &[
            ("qoct_dip_fwhm_um".into(), qw.to_string()),
            ("oct_envelope_fwhm_um".into(), ow.to_string()),
        ],
    )?;
    eprintln!("β₂L = {} fs²: QOCT dip FWHM {qw:.4} µm, OCT envelope FWHM {ow:.4} µm", c.gdd_fs2);
    println!("{}", out.display());
    Ok(())
}

fn run_phantom(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let phantom = Phantom::generate(cfg.phantom)?;
    let (nx, ny, _) = cfg.scan.dims();
    let (x0, y0, _) = cfg.scan.origin();
    let step = cfg.scan.transverse_step_um;
    let (mut xs, mut ys, mut zs, mut rs, mut walls) = (vec![], vec![], vec![], vec![], vec![]);
    for ix in 0..nx {
        for iy in 0..ny {
            let (x, y) = (x0 + ix as f64 * step, y0 + iy as f64 * step);
            xs.push(x);
            ys.push(y);
            zs.push(phantom.top_depth(x, y));
            rs.push(phantom.top_amplitude(x, y).powi(2));
            walls.push(if phantom.in_wall(x, y) { 1.0 } else { 0.0 });
        }
    }
    let out = cfg.output_dir.join("phantom.csv");
    io::write_csv(
        &out,
        &["x_um", "y_um", "z_top_um", "top_reflectance", "wall"],
        &[&xs, &ys, &zs, &rs, &walls],
    )?;
    io::write_manifest(&cfg.output_dir.join("phantom.manifest"), "phantom", &cfg, &[])?;
    println!("{}", out.display());
    Ok(())
}

fn run_volume_cmd(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let spectrum = cfg.source.build()?;
    let phantom = Phantom::generate(cfg.phantom)?;
    let volume = scan::run_volume(&phantom, &spectrum, &cfg.scan, cfg.execution)?;
    let out = cfg.output_dir.join("volume.qvol");
    io::write_volume(&out, &volume)?;
    let dims = format!("{:?}", volume.dims);
    io::write_manifest(
        &cfg.output_dir.join("volume.manifest"),
        "volume",
        &cfg,
        &[("dims".into(), dims.clone())],
    )?;
    println!("volume {} dims {dims}", out.display());
    Ok(())
}

fn default_output(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("volume");
    input.with_file_name(format!("{stem}_{suffix}"))
}

fn run_slice(args: &SliceArgs) -> Result<()> {
    let volume = io::read_volume(&args.input)?;
    let (image, name) = match (args.cscan, args.yz, args.xz) {
        (Some(k), _, _) => (scan::cscan(&volume, k)?, format!("cscan{k}.pgm")),
        (_, Some(i), _) => (scan::bscan(&volume, BScanAxis::Yz, i)?, format!("yz{i}.pgm")),
        (_, _, Some(j)) => (scan::bscan(&volume, BScanAxis::Xz, j)?, format!("xz{j}.pgm")),
        _ => {
            return Err(QoctError::InvalidInput(
                "choose one of --cscan, --yz, --xz".into(),
            ))
        }
    };
    let mapping = match (args.min, args.max) {
        (Some(min), Some(max)) => PgmMapping::Range { min, max },
        _ => PgmMapping::Auto,
    };
    let out = args.output.clone().unwrap_or_else(|| default_output(&args.input, &name));
    let info = io::write_pgm(&out, &image, mapping)?;
    let mut note = format!("# {}\n# mapping = {}\n", out.display(), info.describe());
    if let Some(w) = info.warning() {
        eprintln!("warning: {w}");
        note.push_str(&format!("# warning = {w}\n"));
    }
    let manifest = out.with_extension("manifest");
    std::fs::write(&manifest, note).map_err(|e| QoctError::io(&manifest, e))?;
    println!("{}", out.display());
    Ok(())
}

fn run_surface(args: &SurfaceArgs) -> Result<()> {
    let volume = io::read_volume(&args.input)?;
    let topo = scan::detect_surface(&volume, args.threshold);
    let (mut xs, mut ys, mut zs) = (vec![], vec![], vec![]);
    for ix in 0..topo.nx {
        for iy in 0..topo.ny {
            xs.push(volume.x(ix));
            ys.push(volume.y(iy));
            zs.push(topo.get(ix, iy).unwrap_or(f64::NAN));
        }
    }
    let out = args
        .output
        .clone()
        .unwrap_or_else(|| default_output(&args.input, "surface.csv"));
    io::write_csv(&out, &["x_um", "y_um", "z_um"], &[&xs, &ys, &zs])?;
    let found = zs.iter().filter(|z| z.is_finite()).count();
    eprintln!("surface found at {found} of {} positions", zs.len());
    println!("{}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate { fwhm_um } => {
            println!("{}", calibrate_bandwidth(fwhm_um)?);
            Ok(())
        }
        Command::Ascan(c) => run_ascan(&c),
        Command::Compare(c) => run_compare(&c),
        Command::Phantom(c) => run_phantom(&c),
        Command::Volume(c) => run_volume_cmd(&c),
        Command::Slice(a) => run_slice(&a),
        Command::Surface(a) => run_surface(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
