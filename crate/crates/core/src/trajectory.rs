//! Figure planning: polylines → sampled Cartesian paths → joint trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::ik::{solve_path_ik, IkError, PathIkOptions, PathIkReport};
use crate::kinematics::{JointConfig, RobotModel};
use crate::profiles::superpose::{plan_strokes, sample_strokes, Stroke};
use crate::profiles::{ProfileError, ProfileKind, SegmentSpec, StrokeOptions, Superposed};
use crate::Vec3;

/// Uniformity tolerance on timestamps (s).
pub const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Ik(#[from] IkError),
    #[error("invalid figure `{field}`: {reason}")]
    InvalidFigure { field: String, reason: String },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub p: Vec3,
}

/// Uniformly sampled Cartesian trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPath {
    samples: Vec<PathSample>,
    sample_period: f64,
}

impl TimedPath {
    /// Checks that timestamps increase strictly with spacing `sample_period`
    /// (within [`TIME_TOL`]).
    pub fn new(samples: Vec<PathSample>, sample_period: f64) -> Result<Self, TrajectoryError> {
        if samples.is_empty() {
            return Err(TrajectoryError::InvalidPath("no samples".into()));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(TrajectoryError::InvalidPath(format!("sample period {sample_period} must be > 0")));
        }
        let t0 = samples[0].t;
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || s.p.iter().any(|v| !v.is_finite()) {
                return Err(TrajectoryError::InvalidPath(format!("sample {i} is not finite")));
            }
            let want = t0 + i as f64 * sample_period;
            if (s.t - want).abs() > TIME_TOL {
                return Err(TrajectoryError::InvalidPath(format!(
                    "sample {i} at t = {} breaks the uniform {sample_period} s clock",
                    s.t
                )));
            }
        }
        Ok(TimedPath { samples, sample_period })
    }

    /// Infers the period from the first two timestamps.
    pub fn from_samples(samples: Vec<PathSample>) -> Result<Self, TrajectoryError> {
        match samples.len() {
            0 => Err(TrajectoryError::InvalidPath("no samples".into())),
            1 => Err(TrajectoryError::InvalidPath("cannot infer a sample period from one sample".into())),
            n => {
                let period = (samples[n - 1].t - samples[0].t) / (n - 1) as f64;
                Self::new(samples, period)
            }
        }
    }

    pub(crate) fn from_uniform(samples: Vec<PathSample>, sample_period: f64) -> Self {
        debug_assert!(!samples.is_empty());
        TimedPath { samples, sample_period }
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn points(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.p).collect()
    }

    /// Sum of distances between consecutive samples.
    pub fn arc_length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].p - w[0].p).norm()).sum()
    }

    /// Linear interpolation, held constant outside the sampled range. A time
    /// within 1e-9 of a sample period from a knot returns that knot exactly.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let u = (t - self.start_time()) / self.sample_period;
        let last = self.samples.len() - 1;
        if u <= 0.0 {
            return self.samples[0].p;
        }
        if u >= last as f64 {
            return self.samples[last].p;
        }
        let k = u.round();
        if (u - k).abs() < 1e-9 {
            return self.samples[k as usize].p;
        }
        let i = u.floor() as usize;
        let w = u - i as f64;
        let (a, b) = (self.samples[i].p, self.samples[i + 1].p);
        a + (b - a) * w
    }
}

/// Speed modulus by finite differences: central in the interior, one-sided
/// at the ends. Exact for paths moving at constant velocity.
pub fn numeric_speed(path: &TimedPath) -> Vec<f64> {
    let s = path.samples();
    let n = s.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (s[b].p - s[a].p).norm() / (s[b].t - s[a].t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub t: f64,
    pub q: JointConfig,
}

/// Robot-executable output: one joint configuration per path sample.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    /// Name of the model the joints were solved for.
    pub model: String,
    pub samples: Vec<JointSample>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Tool path through forward kinematics.
    pub fn tool_path(&self, model: &RobotModel) -> Result<TimedPath, TrajectoryError> {
        let samples: Vec<PathSample> = self
            .samples
            .iter()
            .map(|s| PathSample { t: s.t, p: crate::kinematics::tool_position(model, &s.q) })
            .collect();
        match samples.len() {
            1 => Ok(TimedPath::from_uniform(samples, 1.0)),
            _ => TimedPath::from_samples(samples),
        }
    }
}

/// How long each edge of a figure takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTiming {
    /// Explicit duration per edge (s).
    PerEdge(Vec<f64>),
    /// Figure total (s), split across edges in proportion to their length.
    Total(f64),
}

/// A polyline figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub name: String,
    pub vertices: Vec<Vec3>,
    /// Adds a final edge from the last vertex back to the first.
    pub closed: bool,
    pub timing: EdgeTiming,
}

impl FigureSpec {
    pub fn new(name: impl Into<String>, vertices: Vec<Vec3>, closed: bool, timing: EdgeTiming) -> Result<Self, TrajectoryError> {
        let fig = FigureSpec { name: name.into(), vertices, closed, timing };
        fig.validate()?;
        Ok(fig)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let bad = |field: &str, reason: String| TrajectoryError::InvalidFigure { field: field.into(), reason };
        if self.vertices.len() < 2 {
            return Err(bad("vertices", format!("need at least 2, got {}", self.vertices.len())));
        }
        if self.closed && self.vertices.len() < 3 {
            return Err(bad("vertices", "a closed figure needs at least 3".into()));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(bad("vertices", format!("vertex {i} is not finite")));
            }
        }
        for (i, (a, b)) in self.edges().enumerate() {
            if a == b {
                return Err(bad("vertices", format!("edge {i} has coincident endpoints")));
            }
        }
        match &self.timing {
            EdgeTiming::PerEdge(d) => {
                if d.len() != self.edge_count() {
                    return Err(bad("edge_durations", format!("expected {} durations, got {}", self.edge_count(), d.len())));
                }
                if let Some(x) = d.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                    return Err(bad("edge_durations", format!("{x} must be > 0")));
                }
            }
            EdgeTiming::Total(t) => {
                if !(*t > 0.0 && t.is_finite()) {
                    return Err(bad("total_duration", format!("{t} must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        let n = self.vertices.len();
        (0..self.edge_count()).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn polyline_length(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn edge_durations(&self) -> Vec<f64> {
        match &self.timing {
            EdgeTiming::PerEdge(d) => d.clone(),
            EdgeTiming::Total(total) => {
                let len = self.polyline_length();
                self.edges().map(|(a, b)| total * (b - a).norm() / len).collect()
            }
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.edge_durations().iter().sum()
    }

    pub fn segments(&self, kind: ProfileKind) -> Result<Vec<SegmentSpec>, TrajectoryError> {
        self.edges()
            .zip(self.edge_durations())
            .map(|((a, b), d)| SegmentSpec::new(a, b, d, kind).map_err(TrajectoryError::from))
            .collect()
    }
}

pub fn plan_figure(figure: &FigureSpec, kind: ProfileKind, opts: &StrokeOptions) -> Result<Superposed, TrajectoryError> {
    plan_figure_with(figure, kind, opts, Execution::default())
}

/// Samples a figure under one velocity law. Starts at vertex 0; the final
/// sample lands on the last vertex (vertex 0 again for closed figures).
pub fn plan_figure_with(
    figure: &FigureSpec,
    kind: ProfileKind,
    opts: &StrokeOptions,
    exec: Execution,
) -> Result<Superposed, TrajectoryError> {
    figure.validate()?;
    let segments = figure.segments(kind)?;
    Ok(crate::profiles::superpose::superpose_strokes_with(&segments, opts, exec)?)
}

/// Runs a closed figure `repetitions` times with `pause` seconds of rest in
/// between. The strokes of each repetition are time-shifted copies; since a
/// closed figure has zero net displacement the copies chain exactly.
pub fn plan_repeated(
    figure: &FigureSpec,
    kind: ProfileKind,
    opts: &StrokeOptions,
    repetitions: usize,
    pause: f64,
    exec: Execution,
) -> Result<Superposed, TrajectoryError> {
    figure.validate()?;
    if repetitions == 0 {
        return Err(TrajectoryError::InvalidFigure { field: "repetitions".into(), reason: "must be >= 1".into() });
    }
    if !(pause >= 0.0 && pause.is_finite()) {
        return Err(TrajectoryError::InvalidFigure { field: "pause".into(), reason: format!("{pause} must be >= 0") });
    }
    if !figure.closed && repetitions > 1 {
        return Err(TrajectoryError::InvalidFigure {
            field: "closed".into(),
            reason: "only closed figures can be repeated".into(),
        });
    }
    let segments = figure.segments(kind)?;
    let once = plan_strokes(&segments, opts)?;
    let single = once.iter().map(Stroke::end).fold(0.0, f64::max);
    let mut strokes = Vec::with_capacity(once.len() * repetitions);
    for rep in 0..repetitions {
        let offset = rep as f64 * (single + pause);
        strokes.extend(once.iter().map(|s| Stroke { start: s.start + offset, ..*s }));
    }
    let target = segments[segments.len() - 1].end;
    Ok(sample_strokes(strokes, figure.vertices[0], target, opts.sample_period, exec))
}

/// Joint trajectory for a Cartesian path with the wrist frozen at `q46`.
pub fn path_to_joints(
    model: &RobotModel,
    path: &TimedPath,
    q46: [f64; 3],
    seed0: [f64; 3],
    opts: &PathIkOptions,
) -> Result<PathIkReport, TrajectoryError> {
    Ok(solve_path_ik(model, path, q46, seed0, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(kind_total: f64) -> FigureSpec {
        FigureSpec::new(
            "unit-square",
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            true,
            EdgeTiming::Total(kind_total),
        )
        .unwrap()
    }

    #[test]
    fn figure_validation() {
        let one = FigureSpec::new("x", vec![Vec3::zeros()], false, EdgeTiming::Total(1.0));
        assert!(one.is_err());
        let dup = FigureSpec::new("x", vec![Vec3::zeros(), Vec3::zeros()], false, EdgeTiming::Total(1.0));
        assert!(dup.is_err());
        let wrong = FigureSpec::new(
            "x",
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)],
            false,
            EdgeTiming::PerEdge(vec![1.0, 2.0]),
        );
        assert!(wrong.is_err());
    }

    #[test]
    fn closed_figure_has_return_edge() {
        let f = square(8.0);
        assert_eq!(f.edge_count(), 4);
        let last = f.edges().last().unwrap();
        assert_eq!(last, (Vec3::new(0.0, 1.0, 0.0), Vec3::zeros()));
        assert_eq!(f.edge_durations(), vec![2.0; 4]);
    }

    #[test]
    fn timed_path_rejects_jitter() {
        let s = vec![
            PathSample { t: 0.0, p: Vec3::zeros() },
            PathSample { t: 0.1, p: Vec3::zeros() },
            PathSample { t: 0.25, p: Vec3::zeros() },
        ];
        assert!(TimedPath::new(s, 0.1).is_err());
    }

    #[test]
    fn numeric_speed_linear_and_constant() {
        let v = 12.5;
        let s: Vec<_> = (0..50).map(|i| PathSample { t: i as f64 * 0.024, p: Vec3::new(v * i as f64 * 0.024, 0.0, 0.0) }).collect();
        let path = TimedPath::new(s, 0.024).unwrap();
        assert!(numeric_speed(&path).iter().all(|x| (x - v).abs() < 1e-9));
        let s: Vec<_> = (0..5).map(|i| PathSample { t: i as f64, p: Vec3::new(1.0, 2.0, 3.0) }).collect();
        assert!(numeric_speed(&TimedPath::new(s, 1.0).unwrap()).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn interpolation_hits_knots_exactly() {
        let s: Vec<_> = (0..10).map(|i| PathSample { t: i as f64 * 0.024, p: Vec3::new((i as f64).sin(), 0.0, 0.0) }).collect();
        let path = TimedPath::new(s.clone(), 0.024).unwrap();
        for k in &s {
            assert_eq!(path.position_at(k.t), k.p);
        }
        assert_eq!(path.position_at(-1.0), s[0].p);
        assert_eq!(path.position_at(100.0), s[9].p);
    }

    #[test]
    fn repeated_figure_returns_home_each_time() {
        let f = square(4.0);
        let opts = StrokeOptions { accel: 50.0, ..Default::default() };
        let rep = plan_repeated(&f, ProfileKind::Trapezoidal, &opts, 3, 1.0, Execution::Sequential).unwrap();
        assert!((rep.total_duration - (3.0 * 4.0 + 2.0)).abs() < 1e-12);
        for k in 1..3 {
            let t = k as f64 * 5.0 - 0.5; // inside the pause
            assert!(rep.position_at(t).norm() < 1e-12);
        }
        assert!(plan_repeated(&f, ProfileKind::Trapezoidal, &opts, 0, 1.0, Execution::Sequential).is_err());
    }
}
