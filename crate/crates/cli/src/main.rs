use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use radfov::analysis::curves::{curve_csv, efficiency_curve, Family};
use radfov::analysis::phantom::{phantom_experiment, Phantom, PhantomDesign, PhantomOptions};
use radfov::analysis::{probe_directions, psf_metrics, Design2D};
use radfov::design3d::Method;
use radfov::gridding::{compute_psf, default_psf_dims, GridVolume, GriddingConfig};
use radfov::sampling::{sample_projections, ProjectionKind, SamplingOptions};
use radfov::shapes::{LengthUnit, ShapeFn, ShapeSpec};
use radfov::{DesignInput, DesignerRegistry, Error, Trajectory, TrajectoryFile};

#[derive(Parser)]
#[command(name = "radfov", version, about = "Radial trajectory design for anisotropic fields of view")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a trajectory and write trajectory.json
    Design(DesignArgs),
    /// Grid the PSF of a trajectory file
    Psf(PsfArgs),
    /// Ridge, FWHM and aliasing metrics of a 2D PSF grid
    Metrics(MetricsArgs),
    /// Projection counts over a family of shapes, as CSV
    Curve(CurveArgs),
    /// Reconstruct an analytic phantom and measure in-band aliasing
    Phantom(PhantomArgs),
}

#[derive(Args)]
struct ShapeArgs {
    /// In-plane FOV shape (pr2d), e.g. `ellipse:250,75`
    #[arg(long)]
    fov: Option<String>,
    /// Polar FOV as `kind:xy,z` (3D modes)
    #[arg(long)]
    fovt: Option<String>,
    /// Azimuthal FOV shape (3D modes)
    #[arg(long)]
    fovp: Option<String>,
    /// k-space extent in cycles/px: a number or a shape (`kind:xy,z` in 3D)
    #[arg(long, default_value = "0.5")]
    kmax: String,
    /// Pixel size in mm; FOV lengths are then read in mm
    #[arg(long)]
    res: Option<f64>,
    /// Full projections through the center (the default)
    #[arg(long, conflicts_with = "half")]
    full: bool,
    /// Half projections starting at the center
    #[arg(long)]
    half: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DesignArgs {
    /// pr2d, cones3d, pr3d-cones or pr3d-spiral
    mode: String,
    #[command(flatten)]
    shapes: ShapeArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PsfArgs {
    /// trajectory.json written by `design`
    #[arg(long)]
    traj: PathBuf,
    /// Frame size: `600`, `600x400` or `64,64,64`
    #[arg(long)]
    dims: Option<String>,
    /// Radial sample spacing in cycles/px; defaults to 1 / max FOV
    #[arg(long)]
    dkr: Option<f64>,
    /// Also write a densely sampled reference PSF (pr2d only)
    #[arg(long)]
    reference: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Complex float32 grid with a `.json` sidecar
    #[arg(long)]
    psf: PathBuf,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// FOV shape in px
    #[arg(long)]
    fov: String,
    /// Nominal k-space extent, cycles/px
    #[arg(long, default_value_t = 0.5)]
    kmax: f64,
    #[arg(long, default_value_t = 36)]
    directions: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    /// circle, ellipse, rect, sphere or ellipsoid
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1.0)]
    aspect: f64,
    /// `50..250` (step 25), `50..250:10` or `50,100,150`
    #[arg(long)]
    sizes: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomArgs {
    /// pr2d, pr3d-cones or pr3d-spiral
    mode: String,
    #[command(flatten)]
    shapes: ShapeArgs,
    /// `ellipse:wx,wy`, `ellipsoid:wx,wy,wz` or `sphere:d`, in px
    #[arg(long)]
    phantom: String,
    /// Phantom center offset, `x,y[,z]` px
    #[arg(long)]
    shift: Option<String>,
    #[arg(long)]
    dims: Option<String>,
    /// Extent covered by the radial spacing, px
    #[arg(long)]
    radial_fov: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Argument(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Argument(_) => 2,
            CliError::Core(e) if e.is_argument_error() => 2,
            CliError::Core(_) => 3,
        }
    }

    fn report(&self) -> Value {
        let (code, message) = match self {
            CliError::Argument(m) => ("InvalidArgument", m.clone()),
            CliError::Core(e) => (e.code(), e.to_string()),
        };
        json!({ "error": code, "message": message, "exit_code": self.exit_code() })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
struct RunManifest {
    command: String,
    input: Value,
    seed: u64,
    tool_version: &'static str,
    outputs: BTreeMap<String, String>,
}

struct Outputs {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), digests: BTreeMap::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, path: &Path) -> CliResult<()> {
        let digest = Sha256::digest(fs::read(path)?);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.digests.insert(name, hex::encode(digest));
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        fs::write(&path, bytes)?;
        self.record(&path)
    }

    fn grid(&mut self, name: &str, grid: &GridVolume) -> CliResult<()> {
        let path = self.path(name);
        let sidecar = grid.export(&path, true)?;
        self.record(&path)?;
        self.record(&sidecar)
    }

    fn finish(self, command: &str, input: Value, seed: u64) -> CliResult<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            input,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            outputs: self.digests,
        };
        fs::write(self.dir.join("manifest.json"), pretty(&manifest)?)?;
        Ok(())
    }
}

fn pretty<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn numbers(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split([',', 'x'])
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Argument(format!("bad {what} `{text}`"))))
        .collect()
}

fn parse_dims(text: &str, rank: usize) -> CliResult<Vec<usize>> {
    let values = numbers(text, "dims")?;
    let dims: Vec<usize> = values.iter().map(|&v| v as usize).collect();
    if values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
        return Err(CliError::Argument(format!("bad dims `{text}`")));
    }
    match dims.len() {
        1 => Ok(vec![dims[0]; rank]),
        n if n == rank => Ok(dims),
        n => Err(CliError::Argument(format!("{n} dims given for a {rank}D grid"))),
    }
}

fn parse_sizes(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Argument(format!("bad sizes `{text}`"));
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "25"));
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let step: f64 = step.trim().parse().map_err(|_| bad())?;
        if step.is_nan() || step <= 0.0 || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| lo + step * i as f64).collect())
    } else {
        numbers(text, "sizes")
    }
}

impl ShapeArgs {
    fn kind(&self) -> ProjectionKind {
        if self.half {
            ProjectionKind::Half
        } else {
            ProjectionKind::Full
        }
    }

    fn length_shape(&self, text: &str) -> CliResult<ShapeFn> {
        let mut spec = ShapeSpec::parse(text)?;
        if let Some(res) = self.res {
            spec = spec.with_unit(LengthUnit::Mm, res);
        }
        Ok(ShapeFn::from_spec(&spec)?)
    }

    fn input(&self, mode: &str) -> CliResult<DesignInput> {
        let dim = DesignerRegistry::global().get(mode)?.dim();
        let polar = dim.rank() == 3;
        let kmax = match self.kmax.parse::<f64>() {
            Ok(k) => ShapeFn::constant(k),
            Err(_) => {
                let k = ShapeFn::parse(&self.kmax)?;
                if polar {
                    k.polar()
                } else {
                    k
                }
            }
        };
        let input = if polar {
            let fovt = self.fovt.as_deref().ok_or_else(|| CliError::Argument(format!("{mode} needs --fovt")))?;
            let fov_theta = self.length_shape(fovt)?.polar();
            let fov_phi = match &self.fovp {
                Some(p) => self.length_shape(p)?,
                None => ShapeFn::circle(fov_theta.eval(std::f64::consts::FRAC_PI_2)),
            };
            DesignInput::volumetric(fov_theta, fov_phi, kmax)
        } else {
            let fov = self.fov.as_deref().ok_or_else(|| CliError::Argument(format!("{mode} needs --fov")))?;
            DesignInput::planar(self.length_shape(fov)?, kmax)
        };
        Ok(input.with_kind(self.kind()).with_seed(self.seed))
    }
}

fn canonical_input(mode: &str, input: &DesignInput) -> Value {
    json!({ "mode": mode, "kind": input.kind, "shapes": input.shapes() })
}

fn cmd_design(args: &DesignArgs) -> CliResult<()> {
    let input = args.shapes.input(&args.mode)?;
    let traj = DesignerRegistry::global().get(&args.mode)?.design(&input)?;
    let file = TrajectoryFile::new(&args.mode, &input, &traj);
    let mut out = Outputs::new(&args.out)?;
    out.write("trajectory.json", &pretty(&file)?)?;
    out.finish("design", canonical_input(&args.mode, &input), input.seed)?;
    println!("N={}", traj.len());
    Ok(())
}

fn cmd_psf(args: &PsfArgs) -> CliResult<()> {
    let raw = fs::read(&args.traj)?;
    let file: TrajectoryFile = serde_json::from_slice(&raw)?;
    let (input, traj) = file.rebuild(DesignerRegistry::global())?;
    let max_fov = input.max_fov();
    let rank = traj.dim().rank();
    let dims = match &args.dims {
        Some(d) => parse_dims(d, rank)?,
        None => default_psf_dims(max_fov, rank),
    };
    let dkr = args.dkr.unwrap_or(1.0 / max_fov);
    let cfg = GriddingConfig::default();
    let mut out = Outputs::new(&args.out)?;
    match (&traj, args.reference) {
        (Trajectory::Radial2D { fov, kind, .. }, true) => {
            let mut design = Design2D::new(fov.clone(), input.kmax.clone()).with_radial_oversampling(1.0 / (dkr * max_fov));
            design.kind = *kind;
            let (psf, reference) = design.psf_pair(&dims, &cfg)?;
            out.grid("psf.bin", &psf)?;
            out.grid("reference.bin", &reference)?;
        }
        (_, true) => return Err(CliError::Argument("--reference needs a pr2d trajectory".into())),
        (_, false) => {
            let opts = SamplingOptions { dkr, ..SamplingOptions::for_fov(max_fov) };
            let space = sample_projections(&traj.table()?, &opts)?;
            let mut psf = compute_psf(&space, max_fov, Some(&dims), &cfg)?;
            let peak = psf.center().re;
            psf.scale(1.0 / peak);
            out.grid("psf.bin", &psf)?;
        }
    }
    let input_json = json!({
        "trajectory": args.traj,
        "trajectory_sha256": hex::encode(Sha256::digest(&raw)),
        "dims": dims,
        "dkr": dkr,
        "reference": args.reference,
    });
    out.finish("psf", input_json, input.seed)?;
    println!("dims={dims:?}");
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> CliResult<()> {
    let psf = GridVolume::import(&args.psf)?;
    if psf.rank() != 2 {
        return Err(CliError::Argument("metrics expects a 2D PSF grid".into()));
    }
    let reference = args.reference.as_deref().map(GridVolume::import).transpose()?;
    let fov = ShapeFn::parse(&args.fov)?;
    let res = 0.5 / args.kmax;
    let metrics = psf_metrics(&psf, reference.as_ref(), &fov, res, &probe_directions(args.directions))?;
    let bytes = pretty(&metrics)?;
    if let Some(dir) = &args.out {
        let mut out = Outputs::new(dir)?;
        out.write("metrics.json", &bytes)?;
        let input = json!({ "psf": args.psf, "reference": args.reference, "fov": fov.spec(), "kmax": args.kmax, "directions": args.directions });
        out.finish("metrics", input, 0)?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn cmd_curve(args: &CurveArgs) -> CliResult<()> {
    let family = Family::parse(&args.family, args.aspect)?;
    let sizes = parse_sizes(&args.sizes)?;
    let csv = curve_csv(&efficiency_curve(&family, &sizes)?);
    if let Some(dir) = &args.out {
        let mut out = Outputs::new(dir)?;
        out.write("curve.csv", csv.as_bytes())?;
        out.finish("curve", json!({ "family": family.label(), "aspect": args.aspect, "sizes": sizes }), 0)?;
    }
    print!("{csv}");
    Ok(())
}

fn parse_phantom(text: &str, shift: Option<&str>) -> CliResult<Phantom> {
    let bad = || CliError::Argument(format!("bad phantom `{text}`"));
    let (kind, params) = text.split_once(':').ok_or_else(bad)?;
    let p = numbers(params, "phantom")?;
    let base = match (kind, p.as_slice()) {
        ("ellipse", [wx, wy]) => Phantom::ellipse(*wx, *wy),
        ("circle", [d]) => Phantom::ellipse(*d, *d),
        ("sphere", [d]) => Phantom::sphere(*d),
        ("ellipsoid", [wx, wy, wz]) => Phantom::Ellipsoid { center: [0.0; 3], widths: [*wx, *wy, *wz], amplitude: 1.0 },
        _ => return Err(bad()),
    };
    Ok(match shift {
        Some(s) => {
            let v = numbers(s, "shift")?;
            if v.len() != base.rank() {
                return Err(CliError::Argument(format!("shift `{s}` does not match a {}D phantom", base.rank())));
            }
            base.shifted([v[0], v[1], v.get(2).copied().unwrap_or(0.0)])
        }
        None => base,
    })
}

fn cmd_phantom(args: &PhantomArgs) -> CliResult<()> {
    let input = args.shapes.input(&args.mode)?;
    let design = match args.mode.as_str() {
        "pr2d" => PhantomDesign::Radial2D { fov: input.fov.clone().unwrap(), kmax: input.kmax.max_value() },
        "pr3d-cones" => PhantomDesign::Radial3D { request: input.pr3d_request(&args.mode)?, method: Method::ConesBased },
        "pr3d-spiral" => PhantomDesign::Radial3D { request: input.pr3d_request(&args.mode)?, method: Method::SpiralBased },
        other => return Err(CliError::Argument(format!("phantom experiments do not support mode {other}"))),
    };
    let phantom = parse_phantom(&args.phantom, args.shift.as_deref())?;
    let dims = args.dims.as_deref().map(|d| parse_dims(d, phantom.rank())).transpose()?;
    let opts = PhantomOptions { dims, radial_fov: args.radial_fov, ..Default::default() };
    let report = phantom_experiment(&design, &phantom, &opts)?;
    let bytes = pretty(&report)?;
    if let Some(dir) = &args.out {
        let mut out = Outputs::new(dir)?;
        out.write("phantom.json", &bytes)?;
        let mut canonical = canonical_input(&args.mode, &input);
        canonical["phantom"] = serde_json::to_value(&phantom)?;
        canonical["radial_fov"] = json!(args.radial_fov);
        out.finish("phantom", canonical, input.seed)?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design(a) => cmd_design(a),
        Command::Psf(a) => cmd_psf(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Phantom(a) => cmd_phantom(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
