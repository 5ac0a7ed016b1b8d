//! `armtraj` command line: model/figure loading → generation → IK →
//! simulated recording → SNR report → plots.
//!
//! Every subcommand that writes files also writes `manifest.json`, which
//! embeds the resolved parameters, the seed and the full text of every input,
//! so `armtraj replay manifest.json --out-dir other/` rebuilds the same bytes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exec::Execution;
use crate::ik::{solve_path_ik, solve_position_ik, IkError, IkRequest, PathIkOptions};
use crate::io::{self, IoError, ModelConfig, PlotData, PlotSeries, TrajectoryFile, TrajectoryHeader};
use crate::kinematics::{forward_kinematics, JointConfig, KinematicsError};
use crate::profiles::{ProfileError, ProfileKind, StrokeOptions, MU_DEFAULT, R_TARGET_DEFAULT, SAMPLE_PERIOD_DEFAULT};
use crate::trajectory::{numeric_speed, plan_repeated, FigureSpec, TrajectoryError};
use crate::verification::{self, CompareOptions, SensorModel, VerificationError};
use crate::Vec3;

pub const MANIFEST_NAME: &str = "manifest.json";

// ---------------------------------------------------------------------------
// errors and exit codes

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad input: parse or validation failure.
    Validation,
    /// Unreachable target, infeasible profile, degenerate duration, ...
    Numeric,
    Io,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Validation => 2,
            ExitKind::Numeric => 3,
            ExitKind::Io => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    /// Name of the underlying error variant, e.g. `Unreachable`.
    pub name: &'static str,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.name, self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn validation(name: &'static str, message: impl Into<String>) -> Self {
        CliError { kind: ExitKind::Validation, name, message: message.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let kind = match e {
            IoError::Io { .. } => ExitKind::Io,
            _ => ExitKind::Validation,
        };
        CliError { kind, name: e.name(), message: e.to_string() }
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        CliError::validation("ValidationError", e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        let (kind, name) = match e {
            ProfileError::DegenerateDuration(_) => (ExitKind::Numeric, "DegenerateDuration"),
            ProfileError::Infeasible { .. } => (ExitKind::Numeric, "Infeasible"),
            ProfileError::InvalidTarget(_) => (ExitKind::Validation, "InvalidTarget"),
            ProfileError::InvalidParameter { .. } => (ExitKind::Validation, "InvalidParameter"),
            ProfileError::DisconnectedPolyline { .. } => (ExitKind::Validation, "DisconnectedPolyline"),
        };
        CliError { kind, name, message: e.to_string() }
    }
}

impl From<IkError> for CliError {
    fn from(e: IkError) -> Self {
        let kind = match e.root() {
            IkError::InvalidRequest(_) | IkError::EmptyPath => ExitKind::Validation,
            _ => ExitKind::Numeric,
        };
        CliError { kind, name: e.name(), message: e.to_string() }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Profile(p) => p.into(),
            TrajectoryError::Ik(i) => i.into(),
            TrajectoryError::InvalidFigure { .. } => CliError::validation("ValidationError", e.to_string()),
            TrajectoryError::InvalidPath(_) => CliError::validation("InvalidPath", e.to_string()),
        }
    }
}

impl From<VerificationError> for CliError {
    fn from(e: VerificationError) -> Self {
        match e {
            VerificationError::Trajectory(t) => t.into(),
            VerificationError::InvalidSensor { .. } => CliError::validation("InvalidSensor", e.to_string()),
            _ => CliError { kind: ExitKind::Numeric, name: e.name(), message: e.to_string() },
        }
    }
}

// ---------------------------------------------------------------------------
// arguments

#[derive(Debug, Parser)]
#[command(name = "armtraj", version, about = "Lognormal and trapezoidal motion synthesis for 6R arms")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Run batch work on one thread. Outputs are identical either way.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tool pose for a joint configuration.
    Fk(FkArgs),
    /// Joint angles placing the tool at a point, wrist frozen.
    Ik(IkArgs),
    /// Sample a figure under one velocity law and solve its joints.
    Generate(GenerateArgs),
    /// SNR of a recorded (or simulated) execution against its program.
    Verify(VerifyArgs),
    /// Paired lognormal/trapezoidal stimuli for a set of figures.
    DemoSession(DemoArgs),
    /// Re-run a previous invocation from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct FkArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Six joint angles in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub q: Vec<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WristArgs {
    /// Frozen wrist q4,q5,q6 in degrees (default: from the model file).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q46: Option<Vec<f64>>,
    /// Seed for q1,q2,q3 in degrees (default: from the model file).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q13_seed: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct IkArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Target x,y,z in mm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub target: Vec<f64>,
    #[command(flatten)]
    pub wrist: WristArgs,
    /// Accepted squared position error (mm²).
    #[arg(long, default_value_t = crate::ik::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = crate::ik::DEFAULT_MAX_EVALS)]
    pub max_evals: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Lognormal,
    Trapezoidal,
}

impl From<ProfileArg> for ProfileKind {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Lognormal => ProfileKind::Lognormal,
            ProfileArg::Trapezoidal => ProfileKind::Trapezoidal,
        }
    }
}

#[derive(Debug, Args)]
pub struct MotionArgs {
    /// Progress of a lognormal stroke at its commanded end.
    #[arg(long, default_value_t = R_TARGET_DEFAULT)]
    pub r_target: f64,
    /// Fraction of each stroke shared with the next, in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    pub overlap: f64,
    #[arg(long, default_value_t = SAMPLE_PERIOD_DEFAULT)]
    pub sample_period: f64,
    /// Lognormal log-time delay.
    #[arg(long, default_value_t = MU_DEFAULT)]
    pub mu: f64,
    /// Trapezoid acceleration in mm/s² (default: the model's max_tool_accel).
    #[arg(long)]
    pub accel: Option<f64>,
    #[command(flatten)]
    pub wrist: WristArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub figure: PathBuf,
    #[arg(long, value_enum)]
    pub profile: ProfileArg,
    /// Times the figure is traced (closed figures only when > 1).
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Rest between repetitions (s).
    #[arg(long, default_value_t = 0.0)]
    pub pause: f64,
    #[command(flatten)]
    pub motion: MotionArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensorPreset {
    /// No noise, latency or quantization.
    Identity,
    /// Calibrated position noise, 30 ms latency, 0.01 mm quantization.
    Hardware,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Programmed trajectory CSV.
    #[arg(long)]
    pub programmed: PathBuf,
    /// Recorded trajectory CSV.
    #[arg(long, conflicts_with = "simulate", required_unless_present = "simulate")]
    pub recorded: Option<PathBuf>,
    /// Produce the recording with the simulated sensor.
    #[arg(long)]
    pub simulate: bool,
    /// With --simulate and joint columns present, observe the tool through FK.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "identity")]
    pub preset: SensorPreset,
    #[arg(long, default_value_t = verification::SENSOR_RATE_DEFAULT)]
    pub sensor_rate: f64,
    /// Overrides the preset's position noise (mm).
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Overrides the preset's latency (s).
    #[arg(long)]
    pub latency: Option<f64>,
    /// Overrides the preset's quantization step (mm).
    #[arg(long)]
    pub quantization: Option<f64>,
    /// Score raw finite-difference speeds.
    #[arg(long)]
    pub no_smoothing: bool,
    #[arg(long, default_value_t = verification::MAX_ALIGNMENT_OFFSET)]
    pub max_offset: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Figure files; repeat the flag for each.
    #[arg(long = "figure", required = true)]
    pub figures: Vec<PathBuf>,
    /// Repetitions of each figure per file.
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 1.0)]
    pub pause: f64,
    #[command(flatten)]
    pub motion: MotionArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// manifest

/// A file read by the run, embedded verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub content: String,
}

impl InputFile {
    fn read(role: &str, path: &Path) -> Result<Self, CliError> {
        let content = io::read_text(path)?;
        Ok(InputFile { role: role.into(), path: path.display().to_string(), sha256: digest(&content), content })
    }

    fn label(&self) -> PathBuf {
        PathBuf::from(&self.path)
    }

    fn check(&self) -> Result<(), CliError> {
        if digest(&self.content) != self.sha256 {
            return Err(CliError::validation("ValidationError", format!("embedded `{}` does not match its digest", self.path)));
        }
        Ok(())
    }
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkParams {
    pub q: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    pub target: [f64; 3],
    pub q46: [f64; 3],
    pub q13_seed: [f64; 3],
    pub tolerance: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub r_target: f64,
    pub mu: f64,
    pub accel: f64,
    pub overlap: f64,
    pub sample_period: f64,
    pub repetitions: usize,
    pub pause: f64,
    pub q46: [f64; 3],
    pub q13_seed: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub profile: ProfileKind,
    #[serde(flatten)]
    pub motion: MotionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    /// Sensor used to simulate the recording; `None` when a file was given.
    pub simulate: Option<SensorModel>,
    pub smoothing: bool,
    pub max_offset: f64,
}

/// Resolved parameters; angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Run {
    Fk(FkParams),
    Ik(IkParams),
    Generate(GenerateParams),
    Verify(VerifyParams),
    DemoSession(MotionParams),
}

impl Run {
    pub fn subcommand(&self) -> &'static str {
        match self {
            Run::Fk(_) => "fk",
            Run::Ik(_) => "ik",
            Run::Generate(_) => "generate",
            Run::Verify(_) => "verify",
            Run::DemoSession(_) => "demo-session",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub rng_seed: u64,
    pub run: Run,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<OutputFile>,
    /// Order in which the demo-session stimuli are to be shown.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub presentation_order: Vec<String>,
}

/// What a finished run reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: RunManifest,
    /// Human-readable result lines.
    pub lines: Vec<String>,
    /// SNR report of a verify run.
    pub snr: Option<verification::SnrReport>,
}

// ---------------------------------------------------------------------------
// driver

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitKind::Validation.code() } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(summary) => {
            for l in summary.lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.kind.code()
        }
    }
}

pub fn run(cli: Cli) -> Result<RunSummary, CliError> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let (run, seed, inputs, out_dir) = match cli.command {
        Command::Fk(a) => {
            let q = deg_vec::<6>("q", &a.q)?;
            (Run::Fk(FkParams { q }), 0, vec![InputFile::read("model", &a.model)?], a.out_dir)
        }
        Command::Ik(a) => {
            let model = InputFile::read("model", &a.model)?;
            let cfg = parse_model(&model)?;
            let (q46, q13_seed) = wrist(&a.wrist, &cfg)?;
            let target = vec3("target", &a.target)?;
            let p = IkParams { target, q46, q13_seed, tolerance: a.tolerance, max_evals: a.max_evals };
            (Run::Ik(p), 0, vec![model], a.out_dir)
        }
        Command::Generate(a) => {
            let model = InputFile::read("model", &a.model)?;
            let figure = InputFile::read("figure", &a.figure)?;
            let motion = motion_params(&a.motion, &parse_model(&model)?, a.repetitions, a.pause)?;
            let p = GenerateParams { profile: a.profile.into(), motion };
            (Run::Generate(p), a.motion.seed, vec![model, figure], Some(a.motion.out_dir))
        }
        Command::Verify(a) => {
            let mut inputs = vec![InputFile::read("programmed", &a.programmed)?];
            if let Some(r) = &a.recorded {
                inputs.push(InputFile::read("recorded", r)?);
            }
            if let Some(m) = &a.model {
                inputs.push(InputFile::read("model", m)?);
            }
            let simulate = a.simulate.then(|| {
                let base = match a.preset {
                    SensorPreset::Identity => SensorModel::identity(a.sensor_rate),
                    SensorPreset::Hardware => SensorModel { rate: a.sensor_rate, ..SensorModel::hardware_like() },
                };
                SensorModel {
                    position_noise_std: a.noise_std.unwrap_or(base.position_noise_std),
                    latency: a.latency.unwrap_or(base.latency),
                    quantization: a.quantization.unwrap_or(base.quantization),
                    ..base
                }
            });
            if let Some(s) = &simulate {
                s.validate()?;
            }
            let p = VerifyParams { simulate, smoothing: !a.no_smoothing, max_offset: a.max_offset };
            (Run::Verify(p), a.seed, inputs, Some(a.out_dir))
        }
        Command::DemoSession(a) => {
            let model = InputFile::read("model", &a.model)?;
            let motion = motion_params(&a.motion, &parse_model(&model)?, a.repetitions, a.pause)?;
            let mut inputs = vec![model];
            for f in &a.figures {
                inputs.push(InputFile::read("figure", f)?);
            }
            (Run::DemoSession(motion), a.motion.seed, inputs, Some(a.motion.out_dir))
        }
        Command::Replay(a) => {
            let m: RunManifest = io::read_json(&a.manifest)?;
            if m.format_version != io::FORMAT_VERSION {
                return Err(CliError::validation(
                    "ValidationError",
                    format!("manifest format_version {} is not supported", m.format_version),
                ));
            }
            for i in &m.inputs {
                i.check()?;
            }
            (m.run, m.rng_seed, m.inputs, Some(a.out_dir))
        }
    };
    execute(run, seed, inputs, out_dir.as_deref(), exec)
}

fn deg_vec<const N: usize>(field: &str, v: &[f64]) -> Result<[f64; N], CliError> {
    let arr: [f64; N] = v
        .try_into()
        .map_err(|_| CliError::validation("ValidationError", format!("--{field} needs {N} values, got {}", v.len())))?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(CliError::validation("ValidationError", format!("--{field} values must be finite")));
    }
    Ok(arr.map(f64::to_radians))
}

fn vec3(field: &str, v: &[f64]) -> Result<[f64; 3], CliError> {
    let arr: [f64; 3] = v
        .try_into()
        .map_err(|_| CliError::validation("ValidationError", format!("--{field} needs 3 values, got {}", v.len())))?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(CliError::validation("ValidationError", format!("--{field} values must be finite")));
    }
    Ok(arr)
}

fn wrist(a: &WristArgs, cfg: &ModelConfig) -> Result<([f64; 3], [f64; 3]), CliError> {
    let q46 = match &a.q46 {
        Some(v) => deg_vec::<3>("q46", v)?,
        None => cfg.q46,
    };
    let seed = match &a.q13_seed {
        Some(v) => deg_vec::<3>("q13-seed", v)?,
        None => cfg.q13_seed,
    };
    Ok((q46, seed))
}

fn motion_params(a: &MotionArgs, cfg: &ModelConfig, repetitions: usize, pause: f64) -> Result<MotionParams, CliError> {
    let (q46, q13_seed) = wrist(&a.wrist, cfg)?;
    Ok(MotionParams {
        r_target: a.r_target,
        mu: a.mu,
        accel: a.accel.unwrap_or(cfg.model.max_tool_accel),
        overlap: a.overlap,
        sample_period: a.sample_period,
        repetitions,
        pause,
        q46,
        q13_seed,
    })
}

fn parse_model(f: &InputFile) -> Result<ModelConfig, CliError> {
    Ok(io::parse_model_config(&f.content, &f.label())?)
}

fn parse_figure(f: &InputFile) -> Result<FigureSpec, CliError> {
    Ok(io::parse_figure(&f.content, &f.label())?)
}

fn input<'a>(inputs: &'a [InputFile], role: &str) -> Result<&'a InputFile, CliError> {
    inputs
        .iter()
        .find(|i| i.role == role)
        .ok_or_else(|| CliError::validation("ValidationError", format!("no `{role}` input")))
}

/// Collects output files under one directory and their digests.
struct Outputs<'a> {
    dir: Option<&'a Path>,
    files: Vec<OutputFile>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        if let Some(dir) = self.dir {
            io::write_text(&dir.join(name), text)?;
            self.files.push(OutputFile { path: name.into(), sha256: digest(text) });
        }
        Ok(())
    }

    fn plot(&mut self, stem: &str, plot: &PlotData) -> Result<(), CliError> {
        if let Some(dir) = self.dir {
            let (csv, svg) = io::emit_plot_data(plot, &dir.join(stem))?;
            for p in [csv, svg] {
                let name = p.file_name().expect("file name").to_string_lossy().into_owned();
                self.files.push(OutputFile { path: name, sha256: io::file_digest(&p)? });
            }
        }
        Ok(())
    }
}

/// Runs resolved parameters against embedded inputs. Writes outputs and the
/// manifest when `out_dir` is given.
pub fn execute(
    run: Run,
    rng_seed: u64,
    inputs: Vec<InputFile>,
    out_dir: Option<&Path>,
    exec: Execution,
) -> Result<RunSummary, CliError> {
    let mut out = Outputs { dir: out_dir, files: Vec::new() };
    let mut lines = Vec::new();
    let mut snr = None;
    let mut presentation_order = Vec::new();
    match &run {
        Run::Fk(p) => {
            let cfg = parse_model(input(&inputs, "model")?)?;
            let pose = forward_kinematics(&cfg.model, &JointConfig::new(p.q));
            let m = pose.rotation.matrix();
            lines.push(format!("position: {:.6} {:.6} {:.6}", pose.position.x, pose.position.y, pose.position.z));
            for r in 0..3 {
                lines.push(format!("R[{r}]: {:+.9} {:+.9} {:+.9}", m[(r, 0)], m[(r, 1)], m[(r, 2)]));
            }
            let json = serde_json::json!({
                "position": [pose.position.x, pose.position.y, pose.position.z],
                "rotation": [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]],
            });
            out.write("fk.json", &io::to_json(&json))?;
        }
        Run::Ik(p) => {
            let cfg = parse_model(input(&inputs, "model")?)?;
            let req = IkRequest {
                target: Vec3::from(p.target),
                q46: p.q46,
                seed: p.q13_seed,
                tolerance: p.tolerance,
                max_evals: p.max_evals,
            };
            let sol = solve_position_ik(&cfg.model, &req)?;
            if !sol.converged {
                return Err(IkError::NotConverged { residual: sol.residual }.into());
            }
            let q = sol.joint_config(p.q46).q;
            lines.push(format!("q (deg): {}", join(q.iter().map(|v| format!("{:.6}", v.to_degrees())))));
            lines.push(format!("q (rad): {}", join(q.iter().map(|v| format!("{v:.9}")))));
            lines.push(format!("residual: {:.3e} mm^2", sol.residual));
            lines.push(format!("evaluations: {}", sol.evals));
            let json = serde_json::json!({ "q": q, "residual": sol.residual, "evaluations": sol.evals });
            out.write("ik.json", &io::to_json(&json))?;
        }
        Run::Generate(p) => {
            let cfg = parse_model(input(&inputs, "model")?)?;
            let fig = parse_figure(input(&inputs, "figure")?)?;
            let g = generate_one(&cfg, &fig, p.profile, &p.motion, exec)?;
            out.write(&g.file_name, &g.csv)?;
            out.plot(&format!("{}_{}_speed", fig.name, p.profile), &g.plot)?;
            lines.push(format!("{}: {} samples, {:.3} s", g.file_name, g.samples, g.duration));
        }
        Run::Verify(p) => {
            let prog_in = input(&inputs, "programmed")?;
            let prog = io::parse_trajectory(&prog_in.content, &prog_in.label())?;
            let prog_path = prog.to_path()?;
            let recorded = match &p.simulate {
                Some(sensor) => {
                    let model = inputs.iter().find(|i| i.role == "model").map(parse_model).transpose()?;
                    let rec = match (model, prog.to_joints()) {
                        (Some(cfg), Some(joints)) => verification::record_joints(&joints, &cfg.model, sensor, rng_seed)?,
                        _ => verification::record(&prog_path, sensor, rng_seed)?,
                    };
                    let mut params = std::collections::BTreeMap::new();
                    params.insert("sensor_rate".into(), sensor.rate.to_string());
                    params.insert("position_noise_std".into(), sensor.position_noise_std.to_string());
                    params.insert("latency".into(), sensor.latency.to_string());
                    params.insert("quantization".into(), sensor.quantization.to_string());
                    params.insert("seed".into(), rng_seed.to_string());
                    let header = TrajectoryHeader {
                        model_id: prog.header.model_id.clone(),
                        profile: "recorded".into(),
                        sample_period: rec.sample_period(),
                        params,
                    };
                    let file = TrajectoryFile::from_path(header, &rec);
                    out.write("recorded.csv", &io::trajectory_to_csv(&file).map_err(|r| CliError::validation("ValidationError", r))?)?;
                    rec
                }
                None => {
                    let rec_in = input(&inputs, "recorded")?;
                    io::parse_trajectory(&rec_in.content, &rec_in.label())?.to_path()?
                }
            };
            let opts = CompareOptions { max_offset: p.max_offset, smoothing: p.smoothing };
            let (report, aligned) = verification::align_speeds(&prog_path, &recorded, &opts)?;
            out.write("snr_report.json", &io::to_json(&report))?;
            let plot = PlotData {
                title: format!("programmed vs recorded speed, SNR {}", report.display_db()),
                y_label: "speed (mm/s)".into(),
                t: aligned.t,
                series: vec![
                    PlotSeries { label: "programmed".into(), values: aligned.programmed },
                    PlotSeries { label: "recorded".into(), values: aligned.recorded },
                ],
                paths: vec![("programmed".into(), prog_path.points()), ("recorded".into(), recorded.points())],
            };
            out.plot("speed_overlay", &plot)?;
            lines.push(format!(
                "SNR: {} (n = {}, clock {} Hz, offset {:.3} s)",
                report.display_db(),
                report.n_samples,
                report.resampling_rate,
                report.alignment_offset
            ));
            snr = Some(report);
        }
        Run::DemoSession(m) => {
            if m.repetitions == 0 {
                return Err(CliError::validation("ValidationError", "repetitions must be >= 1"));
            }
            let cfg = parse_model(input(&inputs, "model")?)?;
            let figures = inputs
                .iter()
                .filter(|i| i.role == "figure")
                .map(parse_figure)
                .collect::<Result<Vec<_>, _>>()?;
            if figures.is_empty() {
                return Err(CliError::validation("ValidationError", "no figures given"));
            }
            let mut names: Vec<&str> = figures.iter().map(|f| f.name.as_str()).collect();
            names.sort_unstable();
            if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
                return Err(CliError::validation("ValidationError", format!("figure name `{}` is used twice", w[0])));
            }
            let jobs: Vec<(&FigureSpec, ProfileKind)> = figures
                .iter()
                .flat_map(|f| [(f, ProfileKind::Lognormal), (f, ProfileKind::Trapezoidal)])
                .collect();
            // jobs are independent; each one is sequential inside
            let results = exec.map(&jobs, |(f, k)| generate_one(&cfg, f, *k, m, Execution::Sequential));
            for r in results {
                let g = r?;
                out.write(&g.file_name, &g.csv)?;
                lines.push(format!("{}: {} samples, {:.3} s", g.file_name, g.samples, g.duration));
                presentation_order.push(g.file_name);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            presentation_order.shuffle(&mut rng);
            lines.push(format!("presentation order: {}", presentation_order.join(", ")));
        }
    }
    let manifest = RunManifest {
        format_version: io::FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_seed,
        run,
        inputs,
        outputs: out.files,
        presentation_order,
    };
    if let Some(dir) = out_dir {
        io::write_json(&manifest, &dir.join(MANIFEST_NAME))?;
        lines.push(format!("manifest: {}", dir.join(MANIFEST_NAME).display()));
    }
    Ok(RunSummary { manifest, lines, snr })
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(" ")
}

struct Generated {
    file_name: String,
    csv: String,
    plot: PlotData,
    samples: usize,
    duration: f64,
}

fn generate_one(
    cfg: &ModelConfig,
    fig: &FigureSpec,
    kind: ProfileKind,
    m: &MotionParams,
    exec: Execution,
) -> Result<Generated, CliError> {
    let opts = StrokeOptions {
        r_target: m.r_target,
        mu: m.mu,
        accel: m.accel,
        overlap: m.overlap,
        pause: 0.0,
        sample_period: m.sample_period,
    };
    let sup = plan_repeated(fig, kind, &opts, m.repetitions, m.pause, exec)?;
    let path = &sup.path;
    let report = solve_path_ik(&cfg.model, path, m.q46, m.q13_seed, &PathIkOptions::default())?;
    if !report.discontinuities.is_empty() {
        log::warn!("{} ({kind}): joint jumps at samples {:?}", fig.name, report.discontinuities);
    }
    let speed = numeric_speed(path);
    let peak = speed.iter().copied().fold(0.0, f64::max);
    if peak > cfg.model.max_tool_speed {
        log::warn!(
            "{} ({kind}): peak tool speed {peak:.1} mm/s exceeds the model limit {} mm/s",
            fig.name,
            cfg.model.max_tool_speed
        );
    }
    let mut params = std::collections::BTreeMap::new();
    params.insert("figure".into(), fig.name.clone());
    params.insert("r_target".into(), m.r_target.to_string());
    params.insert("mu".into(), m.mu.to_string());
    params.insert("accel".into(), m.accel.to_string());
    params.insert("overlap".into(), m.overlap.to_string());
    params.insert("repetitions".into(), m.repetitions.to_string());
    params.insert("pause".into(), m.pause.to_string());
    params.insert("q46".into(), join(m.q46.iter().map(|v| v.to_string())));
    params.insert("q13_seed".into(), join(m.q13_seed.iter().map(|v| v.to_string())));
    params.insert("snap_correction".into(), sup.snap_correction.to_string());
    let header = TrajectoryHeader {
        model_id: cfg.model.name.clone(),
        profile: kind.to_string(),
        sample_period: m.sample_period,
        params,
    };
    let file = TrajectoryFile::from_path_and_joints(header, path, &report.trajectory)
        .map_err(|r| CliError::validation("ValidationError", r))?;
    let csv = io::trajectory_to_csv(&file).map_err(|r| CliError::validation("ValidationError", r))?;
    let mut outline = fig.vertices.clone();
    if fig.closed {
        outline.push(fig.vertices[0]);
    }
    let plot = PlotData {
        title: format!("{} ({kind})", fig.name),
        y_label: "speed (mm/s)".into(),
        t: path.times(),
        series: vec![PlotSeries { label: kind.to_string(), values: speed }],
        paths: vec![("figure".into(), outline), ("tool path".into(), path.points())],
    };
    Ok(Generated {
        file_name: format!("{}_{kind}.csv", fig.name),
        csv,
        plot,
        samples: path.len(),
        duration: path.end_time() - path.start_time(),
    })
}
