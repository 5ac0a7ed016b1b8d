//! Model/figure configs (TOML), trajectories (CSV), reports (JSON) and plots.
//!
//! Every format carries `format_version = 1`. Floats in CSV files are written
//! with 17 significant digits so they read back bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kinematics::{DhRow, JointConfig, RobotModel, DEFAULT_JOINT_LIMITS};
use crate::trajectory::{EdgeTiming, FigureSpec, JointSample, JointTrajectory, PathSample, TimedPath};
use crate::Vec3;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}:{}: parse error: {reason}", line.map_or("?".to_string(), |l| l.to_string()))]
    Parse { file: String, line: Option<usize>, reason: String },
    #[error("{file}: invalid `{field}`: {reason}")]
    Validation { file: String, field: String, reason: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub fn name(&self) -> &'static str {
        match self {
            IoError::Parse { .. } => "ParseError",
            IoError::Validation { .. } => "ValidationError",
            IoError::Io { .. } => "IoError",
        }
    }

    fn validation(file: &Path, field: impl Into<String>, reason: impl Into<String>) -> Self {
        IoError::Validation { file: file.display().to_string(), field: field.into(), reason: reason.into() }
    }

    fn parse(file: &Path, line: Option<usize>, reason: impl Into<String>) -> Self {
        IoError::Parse { file: file.display().to_string(), line, reason: reason.into() }
    }

    fn io(file: &Path, source: std::io::Error) -> Self {
        IoError::Io { file: file.display().to_string(), source }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        IoError::parse(path, line, e.message().to_string())
    })
}

fn check_version(path: &Path, v: u32) -> Result<(), IoError> {
    if v != FORMAT_VERSION {
        return Err(IoError::validation(path, "format_version", format!("expected {FORMAT_VERSION}, got {v}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// robot model

/// A robot model plus the IK defaults stored with it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: RobotModel,
    pub description: Option<String>,
    /// Default frozen wrist (rad).
    pub q46: [f64; 3],
    /// Default seed for q1…q3 (rad).
    pub q13_seed: [f64; 3],
}

/// DH lengths may be numbers or references to a link length ("L1".."L5").
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Length {
    Value(f64),
    Link(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DhDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_offset_deg: Option<f64>,
    d: Length,
    a: Length,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_deg: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_deg: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    link_lengths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_tool_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_tool_accel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q46: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q46_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q13_seed: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q13_seed_deg: Option<Vec<f64>>,
    dh: Vec<DhDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint_limits: Option<Vec<LimitDoc>>,
}

/// Picks the radian or degree spelling of an angle; at most one may be given.
fn angle(path: &Path, field: &str, rad: Option<f64>, deg: Option<f64>) -> Result<Option<f64>, IoError> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(IoError::validation(path, field, "give radians or degrees, not both")),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(d)) => Ok(Some(d.to_radians())),
        (None, None) => Ok(None),
    }
}

fn triple(path: &Path, field: &str, rad: Option<Vec<f64>>, deg: Option<Vec<f64>>) -> Result<Option<[f64; 3]>, IoError> {
    let (v, scale) = match (rad, deg) {
        (Some(_), Some(_)) => return Err(IoError::validation(path, field, "give radians or degrees, not both")),
        (Some(v), None) => (v, 1.0),
        (None, Some(v)) => (v, std::f64::consts::PI / 180.0),
        (None, None) => return Ok(None),
    };
    let arr: [f64; 3] = v
        .try_into()
        .map_err(|v: Vec<f64>| IoError::validation(path, field, format!("expected 3 values, got {}", v.len())))?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(IoError::validation(path, field, "values must be finite"));
    }
    Ok(Some(arr.map(|x| x * scale)))
}

fn resolve_length(path: &Path, field: &str, v: &Length, l: &[f64; 5]) -> Result<f64, IoError> {
    match v {
        Length::Value(x) => Ok(*x),
        Length::Link(name) => {
            let idx = name
                .strip_prefix('L')
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| (1..=5).contains(k))
                .ok_or_else(|| IoError::validation(path, field, format!("unknown link `{name}`, expected L1..L5")))?;
            Ok(l[idx - 1])
        }
    }
}

fn model_from_doc(path: &Path, doc: ModelDoc) -> Result<ModelConfig, IoError> {
    check_version(path, doc.format_version)?;
    let l: [f64; 5] = doc.link_lengths.clone().try_into().map_err(|v: Vec<f64>| {
        IoError::validation(path, "link_lengths", format!("expected 5, got {}", v.len()))
    })?;
    if doc.dh.len() != 6 {
        return Err(IoError::validation(path, "rows", format!("expected 6, got {}", doc.dh.len())));
    }
    let mut rows = [DhRow::new(0.0, 0.0, 0.0, 0.0); 6];
    for (i, r) in doc.dh.iter().enumerate() {
        let f = |name: &str| format!("dh[{}].{name}", i + 1);
        let theta = angle(path, &f("theta_offset"), r.theta_offset, r.theta_offset_deg)?.unwrap_or(0.0);
        let alpha = angle(path, &f("alpha"), r.alpha, r.alpha_deg)?
            .ok_or_else(|| IoError::validation(path, f("alpha"), "missing"))?;
        rows[i] = DhRow::new(
            theta,
            resolve_length(path, &f("d"), &r.d, &l)?,
            resolve_length(path, &f("a"), &r.a, &l)?,
            alpha,
        );
    }
    let mut limits = DEFAULT_JOINT_LIMITS;
    if let Some(docs) = &doc.joint_limits {
        if docs.len() != 6 {
            return Err(IoError::validation(path, "joint_limits", format!("expected 6, got {}", docs.len())));
        }
        for (i, d) in docs.iter().enumerate() {
            let f = |name: &str| format!("joint_limits[{}].{name}", i + 1);
            let lo = angle(path, &f("min"), d.min, d.min_deg)?.ok_or_else(|| IoError::validation(path, f("min"), "missing"))?;
            let hi = angle(path, &f("max"), d.max, d.max_deg)?.ok_or_else(|| IoError::validation(path, f("max"), "missing"))?;
            limits[i] = (lo, hi);
        }
    }
    let defaults = RobotModel::six_r("defaults", [1.0; 5]).expect("unit model is valid");
    let model = RobotModel::new(
        doc.name,
        rows,
        l,
        limits,
        doc.max_tool_speed.unwrap_or(defaults.max_tool_speed),
        doc.max_tool_accel.unwrap_or(defaults.max_tool_accel),
    )
    .map_err(|e| match e {
        crate::kinematics::KinematicsError::InvalidRow { row, reason } => {
            IoError::validation(path, format!("dh[{row}]"), reason)
        }
        crate::kinematics::KinematicsError::InvalidModel { field, reason } => IoError::validation(path, field, reason),
        other => IoError::validation(path, "model", other.to_string()),
    })?;
    Ok(ModelConfig {
        model,
        description: doc.description,
        q46: triple(path, "q46", doc.q46, doc.q46_deg)?.unwrap_or([0.0; 3]),
        q13_seed: triple(path, "q13_seed", doc.q13_seed, doc.q13_seed_deg)?.unwrap_or([0.0; 3]),
    })
}

pub fn parse_model_config(text: &str, path: &Path) -> Result<ModelConfig, IoError> {
    model_from_doc(path, parse_toml(path, text)?)
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig, IoError> {
    parse_model_config(&read_text(path)?, path)
}

pub fn load_model(path: &Path) -> Result<RobotModel, IoError> {
    Ok(load_model_config(path)?.model)
}

/// Canonical TOML text: radians everywhere, lengths as numbers.
pub fn model_config_to_toml(cfg: &ModelConfig) -> String {
    let m = &cfg.model;
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        name: m.name.clone(),
        description: cfg.description.clone(),
        link_lengths: m.link_lengths.to_vec(),
        max_tool_speed: Some(m.max_tool_speed),
        max_tool_accel: Some(m.max_tool_accel),
        q46: Some(cfg.q46.to_vec()),
        q46_deg: None,
        q13_seed: Some(cfg.q13_seed.to_vec()),
        q13_seed_deg: None,
        dh: m
            .rows
            .iter()
            .map(|r| DhDoc {
                theta_offset: Some(r.theta_offset),
                theta_offset_deg: None,
                d: Length::Value(r.d),
                a: Length::Value(r.a),
                alpha: Some(r.alpha),
                alpha_deg: None,
            })
            .collect(),
        joint_limits: Some(
            m.joint_limits
                .iter()
                .map(|(lo, hi)| LimitDoc { min: Some(*lo), max: Some(*hi), min_deg: None, max_deg: None })
                .collect(),
        ),
    };
    toml::to_string(&doc).expect("model document serializes")
}

pub fn save_model_config(cfg: &ModelConfig, path: &Path) -> Result<(), IoError> {
    write_text(path, &model_config_to_toml(cfg))
}

// ---------------------------------------------------------------------------
// figures

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FigureDoc {
    format_version: u32,
    name: String,
    #[serde(default)]
    closed: bool,
    vertices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_durations: Option<Vec<f64>>,
}

pub fn parse_figure(text: &str, path: &Path) -> Result<FigureSpec, IoError> {
    let doc: FigureDoc = parse_toml(path, text)?;
    check_version(path, doc.format_version)?;
    let mut vertices = Vec::with_capacity(doc.vertices.len());
    for (i, v) in doc.vertices.iter().enumerate() {
        match v.as_slice() {
            [x, y, z] => vertices.push(Vec3::new(*x, *y, *z)),
            _ => {
                return Err(IoError::validation(path, format!("vertices[{i}]"), format!("expected 3 coordinates, got {}", v.len())))
            }
        }
    }
    let timing = match (doc.total_duration, doc.edge_durations) {
        (Some(t), None) => EdgeTiming::Total(t),
        (None, Some(d)) => EdgeTiming::PerEdge(d),
        (Some(_), Some(_)) => {
            return Err(IoError::validation(path, "total_duration", "give total_duration or edge_durations, not both"))
        }
        (None, None) => return Err(IoError::validation(path, "total_duration", "missing (or edge_durations)")),
    };
    FigureSpec::new(doc.name, vertices, doc.closed, timing).map_err(|e| match e {
        crate::trajectory::TrajectoryError::InvalidFigure { field, reason } => IoError::validation(path, field, reason),
        other => IoError::validation(path, "figure", other.to_string()),
    })
}

pub fn load_figure(path: &Path) -> Result<FigureSpec, IoError> {
    parse_figure(&read_text(path)?, path)
}

pub fn figure_to_toml(fig: &FigureSpec) -> String {
    let (total_duration, edge_durations) = match &fig.timing {
        EdgeTiming::Total(t) => (Some(*t), None),
        EdgeTiming::PerEdge(d) => (None, Some(d.clone())),
    };
    let doc = FigureDoc {
        format_version: FORMAT_VERSION,
        name: fig.name.clone(),
        closed: fig.closed,
        vertices: fig.vertices.iter().map(|v| vec![v.x, v.y, v.z]).collect(),
        total_duration,
        edge_durations,
    };
    toml::to_string(&doc).expect("figure document serializes")
}

pub fn save_figure(fig: &FigureSpec, path: &Path) -> Result<(), IoError> {
    write_text(path, &figure_to_toml(fig))
}

// ---------------------------------------------------------------------------
// trajectory CSV
//
//   # format_version=1
//   # model_id=...
//   # profile=lognormal
//   # sample_period=0.024
//   # joints=true
//   # <generation parameter>=<value>      (any number, sorted by key)
//   t,px,py,pz,q1,q2,q3,q4,q5,q6
//   <rows>

const POSITION_COLUMNS: [&str; 4] = ["t", "px", "py", "pz"];
const JOINT_COLUMNS: [&str; 6] = ["q1", "q2", "q3", "q4", "q5", "q6"];
const RESERVED_KEYS: [&str; 5] = ["format_version", "model_id", "profile", "sample_period", "joints"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHeader {
    pub model_id: String,
    pub profile: String,
    pub sample_period: f64,
    /// Generation parameters, written sorted by key.
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub p: Vec3,
    pub q: Option<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryFile {
    pub fn from_path(header: TrajectoryHeader, path: &TimedPath) -> Self {
        let rows = path.samples().iter().map(|s| TrajectoryRow { t: s.t, p: s.p, q: None }).collect();
        TrajectoryFile { header, rows }
    }

    /// Cartesian samples paired with their joint solutions.
    pub fn from_path_and_joints(header: TrajectoryHeader, path: &TimedPath, joints: &JointTrajectory) -> Result<Self, String> {
        if path.len() != joints.len() {
            return Err(format!("{} path samples vs {} joint samples", path.len(), joints.len()));
        }
        let rows = path
            .samples()
            .iter()
            .zip(&joints.samples)
            .map(|(s, j)| TrajectoryRow { t: s.t, p: s.p, q: Some(j.q.q) })
            .collect();
        Ok(TrajectoryFile { header, rows })
    }

    pub fn has_joints(&self) -> bool {
        self.rows.first().is_some_and(|r| r.q.is_some())
    }

    pub fn to_path(&self) -> Result<TimedPath, crate::trajectory::TrajectoryError> {
        let samples = self.rows.iter().map(|r| PathSample { t: r.t, p: r.p }).collect();
        TimedPath::new(samples, self.header.sample_period)
    }

    pub fn to_joints(&self) -> Option<JointTrajectory> {
        let samples = self
            .rows
            .iter()
            .map(|r| r.q.map(|q| JointSample { t: r.t, q: JointConfig::new(q) }))
            .collect::<Option<Vec<_>>>()?;
        Some(JointTrajectory { model: self.header.model_id.clone(), samples })
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_to_csv(file: &TrajectoryFile) -> Result<String, String> {
    let h = &file.header;
    let joints = file.has_joints();
    if file.rows.iter().any(|r| r.q.is_some() != joints) {
        return Err("rows disagree on joint columns".into());
    }
    let mut out = String::new();
    let mut kv = |k: &str, v: &str| -> Result<(), String> {
        if k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) || k.trim() != k || k.is_empty() {
            return Err(format!("header entry `{k}` cannot be written"));
        }
        writeln!(out, "# {k}={v}").expect("string write");
        Ok(())
    };
    kv("format_version", &FORMAT_VERSION.to_string())?;
    kv("model_id", &h.model_id)?;
    kv("profile", &h.profile)?;
    kv("sample_period", &fmt_f64(h.sample_period))?;
    kv("joints", if joints { "true" } else { "false" })?;
    for (k, v) in &h.params {
        if RESERVED_KEYS.contains(&k.as_str()) {
            return Err(format!("header key `{k}` is reserved"));
        }
        kv(k, v)?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut cols: Vec<&str> = POSITION_COLUMNS.to_vec();
    if joints {
        cols.extend(JOINT_COLUMNS);
    }
    w.write_record(&cols).map_err(|e| e.to_string())?;
    for r in &file.rows {
        let mut rec: Vec<String> = [r.t, r.p.x, r.p.y, r.p.z].into_iter().map(fmt_f64).collect();
        if let Some(q) = r.q {
            rec.extend(q.into_iter().map(fmt_f64));
        }
        w.write_record(&rec).map_err(|e| e.to_string())?;
    }
    let body = w.into_inner().map_err(|e| e.to_string())?;
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write_trajectory(file: &TrajectoryFile, path: &Path) -> Result<(), IoError> {
    let text = trajectory_to_csv(file).map_err(|r| IoError::validation(path, "trajectory", r))?;
    write_text(path, &text)
}

pub fn parse_trajectory(text: &str, path: &Path) -> Result<TrajectoryFile, IoError> {
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix('#') else { break };
        let rest = rest.trim_start();
        if rest.is_empty() {
            continue;
        }
        let (k, v) = rest
            .split_once('=')
            .ok_or_else(|| IoError::parse(path, Some(i + 1), format!("header line without `=`: {line}")))?;
        header.insert(k.trim().to_string(), v.to_string());
    }
    let mut take = |key: &str| header.remove(key).ok_or_else(|| IoError::parse(path, None, format!("missing header `{key}`")));
    let version: u32 = take("format_version")?
        .trim()
        .parse()
        .map_err(|_| IoError::parse(path, None, "format_version is not an integer"))?;
    check_version(path, version)?;
    let model_id = take("model_id")?;
    let profile = take("profile")?;
    let sample_period: f64 = take("sample_period")?
        .trim()
        .parse()
        .map_err(|_| IoError::parse(path, None, "sample_period is not a number"))?;
    let joints = match take("joints")?.trim() {
        "true" => true,
        "false" => false,
        other => return Err(IoError::parse(path, None, format!("joints must be true or false, got `{other}`"))),
    };

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(text.as_bytes());
    let cols = reader.headers().map_err(|e| IoError::parse(path, None, e.to_string()))?.clone();
    let mut expected: Vec<&str> = POSITION_COLUMNS.to_vec();
    if joints {
        expected.extend(JOINT_COLUMNS);
    }
    if cols.iter().collect::<Vec<_>>() != expected {
        return Err(IoError::parse(path, None, format!("expected columns {}, found `{}`", expected.join(","), cols.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            IoError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize);
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| IoError::parse(path, line, format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != expected.len() {
            return Err(IoError::parse(path, line, format!("expected {} fields, got {}", expected.len(), vals.len())));
        }
        let q = joints.then(|| std::array::from_fn(|k| vals[4 + k]));
        rows.push(TrajectoryRow { t: vals[0], p: Vec3::new(vals[1], vals[2], vals[3]), q });
    }
    if rows.is_empty() {
        return Err(IoError::parse(path, None, "no samples"));
    }
    Ok(TrajectoryFile { header: TrajectoryHeader { model_id, profile, sample_period, params: header }, rows })
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryFile, IoError> {
    parse_trajectory(&read_text(path)?, path)
}

// ---------------------------------------------------------------------------
// JSON

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path, Some(e.line()), e.to_string()))
}

// ---------------------------------------------------------------------------
// plots

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub values: Vec<f64>,
}

/// Series sharing one time axis, plus optional 3-D paths for a projected view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    pub title: String,
    pub y_label: String,
    pub t: Vec<f64>,
    pub series: Vec<PlotSeries>,
    pub paths: Vec<(String, Vec<Vec3>)>,
}

impl PlotData {
    fn validate(&self, path: &Path) -> Result<(), IoError> {
        if self.t.is_empty() {
            return Err(IoError::validation(path, "t", "zero-length series"));
        }
        if self.series.is_empty() {
            return Err(IoError::validation(path, "series", "nothing to plot"));
        }
        for s in &self.series {
            if s.values.len() != self.t.len() {
                return Err(IoError::validation(
                    path,
                    format!("series `{}`", s.label),
                    format!("{} values for {} time stamps", s.values.len(), self.t.len()),
                ));
            }
            if s.label.contains([',', '\n', '"']) {
                return Err(IoError::validation(path, format!("series `{}`", s.label), "label may not contain , \" or newlines"));
            }
        }
        for (label, pts) in &self.paths {
            if pts.is_empty() {
                return Err(IoError::validation(path, format!("path `{label}`"), "zero-length series"));
            }
        }
        Ok(())
    }
}

/// Columnar data: `t,<label 1>,<label 2>,...`.
pub fn plot_csv(plot: &PlotData) -> String {
    let mut out = String::from("t");
    for s in &plot.series {
        out.push(',');
        out.push_str(&s.label);
    }
    out.push('\n');
    for (i, t) in plot.t.iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for s in &plot.series {
            out.push(',');
            out.push_str(&fmt_f64(s.values[i]));
        }
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }
    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }
}

fn padded_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn axes(svg: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        f.x0, f.y0, f.w, f.h
    );
    for x in ticks(f.xr) {
        let px = f.px(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"##,
            f.y0 + f.h,
            f.y0 + f.h + 5.0,
            f.y0 + f.h + 18.0,
            trim_num(x)
        );
    }
    for y in ticks(f.yr) {
        let py = f.py(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
            f.x0 - 5.0,
            f.x0,
            f.x0 - 8.0,
            py + 4.0,
            trim_num(y)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        f.x0 + f.w / 2.0,
        f.y0 + f.h + 36.0,
        esc(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle" font-size="12">{}</text>"#,
        f.x0 - 48.0,
        f.y0 + f.h / 2.0,
        esc(y_label)
    );
}

fn trim_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn polyline(svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, d.trim_end());
}

fn legend(svg: &mut String, x: f64, y: f64, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{c}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            x + 20.0,
            x + 25.0,
            yy + 4.0,
            esc(l)
        );
    }
}

/// Oblique view: x recedes up-left, y to the right, z up.
fn project(p: &Vec3) -> (f64, f64) {
    let c = std::f64::consts::FRAC_1_SQRT_2 * 0.5;
    (p.y - c * p.x, p.z - c * p.x)
}

/// Self-contained SVG: speed-vs-time panel, plus a projected path panel when
/// `plot.paths` is non-empty.
pub fn plot_svg(plot: &PlotData) -> String {
    let with_paths = !plot.paths.is_empty();
    let width = if with_paths { 1100.0 } else { 700.0 };
    let height = 440.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, width / 2.0, esc(&plot.title));

    let f = Frame {
        x0: 70.0,
        y0: 50.0,
        w: 580.0,
        h: 330.0,
        xr: padded_range(plot.t.iter().copied()),
        yr: padded_range(plot.series.iter().flat_map(|s| s.values.iter().copied())),
    };
    axes(&mut svg, &f, "t (s)", &plot.y_label);
    for (i, s) in plot.series.iter().enumerate() {
        let pts = plot.t.iter().zip(&s.values).map(|(t, v)| (f.px(*t), f.py(*v)));
        polyline(&mut svg, pts, PALETTE[i % PALETTE.len()]);
    }
    let labels: Vec<&str> = plot.series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut svg, f.x0 + f.w - 150.0, f.y0 + 16.0, &labels);

    if with_paths {
        let proj: Vec<Vec<(f64, f64)>> = plot.paths.iter().map(|(_, p)| p.iter().map(project).collect()).collect();
        let mut xr = padded_range(proj.iter().flatten().map(|p| p.0));
        let mut yr = padded_range(proj.iter().flatten().map(|p| p.1));
        // equal aspect
        let (w, h) = (360.0, 330.0);
        let scale = ((xr.1 - xr.0) / w).max((yr.1 - yr.0) / h);
        let (cx, cy) = ((xr.0 + xr.1) / 2.0, (yr.0 + yr.1) / 2.0);
        xr = (cx - scale * w / 2.0, cx + scale * w / 2.0);
        yr = (cy - scale * h / 2.0, cy + scale * h / 2.0);
        let g = Frame { x0: 720.0, y0: 50.0, w, h, xr, yr };
        axes(&mut svg, &g, "y − 0.35·x (mm)", "z − 0.35·x (mm)");
        for (i, pts) in proj.iter().enumerate() {
            polyline(&mut svg, pts.iter().map(|(x, y)| (g.px(*x), g.py(*y))), PALETTE[i % PALETTE.len()]);
        }
        let labels: Vec<&str> = plot.paths.iter().map(|(l, _)| l.as_str()).collect();
        legend(&mut svg, g.x0 + 10.0, g.y0 + 16.0, &labels);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<stem>.csv` and `<stem>.svg` and returns their paths.
pub fn emit_plot_data(plot: &PlotData, stem: &Path) -> Result<(PathBuf, PathBuf), IoError> {
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    plot.validate(&csv_path)?;
    write_text(&csv_path, &plot_csv(plot))?;
    write_text(&svg_path, &plot_svg(plot))?;
    Ok((csv_path, svg_path))
}
