//! Polyline motions as a time-ordered sum of strokes.
//!
//! Stroke `k` moves the tool by `Δ_k = p_e(k) − p_s(k)` following its own
//! normalized progress law `r_k(t)`. The position is
//!
//! ```text
//! p(t) = p_s(0) + Σ_k Δ_k · r_k(t)
//! ```
//!
//! which is the same as summing the stroke velocity vectors and integrating.
//! Stroke `k + 1` activates `overlap · duration(k)` before stroke `k` reaches
//! its commanded end (plus an optional pause).

use crate::exec::Execution;
use crate::trajectory::{PathSample, TimedPath};
use crate::Vec3;

use super::{
    lognormal_cdf, lognormal_speed, solve_sigma, trapezoid_times, LognormalStroke, ProfileError,
    ProfileKind, SegmentSpec, TrapezoidSegment, MU_DEFAULT, R_TARGET_DEFAULT, SAMPLE_PERIOD_DEFAULT,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeOptions {
    /// Progress reached by a lognormal stroke at its commanded end.
    pub r_target: f64,
    pub mu: f64,
    /// Ramp acceleration of trapezoidal strokes (mm/s²).
    pub accel: f64,
    /// Fraction of a stroke's duration shared with the next one, in [0, 0.5).
    pub overlap: f64,
    /// Rest between consecutive strokes (s).
    pub pause: f64,
    pub sample_period: f64,
}

impl Default for StrokeOptions {
    fn default() -> Self {
        StrokeOptions {
            r_target: R_TARGET_DEFAULT,
            mu: MU_DEFAULT,
            accel: 1000.0,
            overlap: 0.0,
            pause: 0.0,
            sample_period: SAMPLE_PERIOD_DEFAULT,
        }
    }
}

impl StrokeOptions {
    fn validate(&self) -> Result<(), ProfileError> {
        if !(0.0..0.5).contains(&self.overlap) {
            return Err(ProfileError::InvalidParameter {
                field: "overlap",
                reason: format!("{} must lie in [0, 0.5)", self.overlap),
            });
        }
        if !(self.pause >= 0.0 && self.pause.is_finite()) {
            return Err(ProfileError::InvalidParameter { field: "pause", reason: format!("{} must be >= 0", self.pause) });
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(ProfileError::InvalidParameter {
                field: "sample_period",
                reason: format!("{} must be > 0", self.sample_period),
            });
        }
        if !(self.r_target > 0.5 && self.r_target < 1.0) {
            return Err(ProfileError::InvalidTarget(self.r_target));
        }
        Ok(())
    }
}

/// Normalized progress law of one stroke, measured from its activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProgressLaw {
    /// Lognormal CDF evaluated at `time_scale · (t − start)`. `time_scale` is 1
    /// unless the commanded duration is too short for a positive σ, in which
    /// case time is stretched so the duration maps to `e^{μ+1}`.
    Lognormal { mu: f64, sigma: f64, time_scale: f64 },
    Trapezoidal(TrapezoidSegment),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke {
    /// Activation time (s).
    pub start: f64,
    /// Commanded duration (s).
    pub duration: f64,
    pub delta: Vec3,
    pub law: ProgressLaw,
}

impl Stroke {
    /// Lays out one stroke activated at `start`.
    pub fn plan(seg: &SegmentSpec, start: f64, opts: &StrokeOptions) -> Result<Stroke, ProfileError> {
        let law = match seg.kind {
            ProfileKind::Lognormal => {
                let te = seg.duration;
                let (scaled_te, time_scale) = if te.ln() - opts.mu > 0.0 {
                    (te, 1.0)
                } else {
                    let scaled = (opts.mu + 1.0).exp();
                    log::debug!("stroke of {te} s rescaled by {} to admit a positive sigma", scaled / te);
                    (scaled, scaled / te)
                };
                let sigma = solve_sigma(scaled_te, opts.r_target, 0.0, opts.mu)?;
                ProgressLaw::Lognormal { mu: opts.mu, sigma, time_scale }
            }
            ProfileKind::Trapezoidal => {
                ProgressLaw::Trapezoidal(trapezoid_times(seg.length(), seg.duration, opts.accel)?)
            }
        };
        Ok(Stroke { start, duration: seg.duration, delta: seg.delta(), law })
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Fraction of `delta` covered at time `t`, in [0, 1].
    pub fn progress(&self, t: f64) -> f64 {
        let dt = t - self.start;
        if dt <= 0.0 {
            return 0.0;
        }
        match self.law {
            ProgressLaw::Lognormal { mu, sigma, time_scale } => lognormal_cdf(dt * time_scale, 0.0, mu, sigma),
            ProgressLaw::Trapezoidal(tz) => (tz.distance_at(dt) / tz.distance()).min(1.0),
        }
    }

    /// Tool speed contributed by this stroke (mm/s).
    pub fn speed(&self, t: f64) -> f64 {
        let dt = t - self.start;
        if dt <= 0.0 {
            return 0.0;
        }
        let len = self.delta.norm();
        match self.law {
            ProgressLaw::Lognormal { mu, sigma, time_scale } => {
                let unit = LognormalStroke { t0: 0.0, mu, sigma, d: 1.0 };
                len * time_scale * lognormal_speed(dt * time_scale, &unit)
            }
            ProgressLaw::Trapezoidal(tz) => tz.speed_at(dt) * len / tz.distance(),
        }
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        let len = self.delta.norm();
        if len == 0.0 {
            return Vec3::zeros();
        }
        self.delta * (self.speed(t) / len)
    }
}

/// Output of [`superpose_strokes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Superposed {
    pub path: TimedPath,
    pub strokes: Vec<Stroke>,
    pub origin: Vec3,
    /// End of the last stroke's commanded duration (s).
    pub total_duration: f64,
    /// Distance the final sample was moved to land exactly on the last vertex.
    pub snap_correction: f64,
}

impl Superposed {
    pub fn position_at(&self, t: f64) -> Vec3 {
        position_at(&self.strokes, &self.origin, t)
    }

    pub fn velocity_at(&self, t: f64) -> Vec3 {
        self.strokes.iter().map(|s| s.velocity(t)).sum()
    }
}

/// `origin + Σ Δ_k r_k(t)`.
pub fn position_at(strokes: &[Stroke], origin: &Vec3, t: f64) -> Vec3 {
    strokes.iter().fold(*origin, |p, s| {
        let r = s.progress(t);
        if r == 0.0 {
            p
        } else {
            p + s.delta * r
        }
    })
}

/// Activation schedule for a connected polyline.
pub fn plan_strokes(segments: &[SegmentSpec], opts: &StrokeOptions) -> Result<Vec<Stroke>, ProfileError> {
    opts.validate()?;
    if segments.is_empty() {
        return Err(ProfileError::InvalidParameter { field: "segments", reason: "empty".into() });
    }
    for (i, pair) in segments.windows(2).enumerate() {
        if pair[0].end != pair[1].start {
            return Err(ProfileError::DisconnectedPolyline { index: i + 1 });
        }
    }
    let mut strokes = Vec::with_capacity(segments.len());
    let mut start = 0.0;
    for seg in segments {
        let stroke = Stroke::plan(seg, start, opts)?;
        start = stroke.start + stroke.duration * (1.0 - opts.overlap) + opts.pause;
        strokes.push(stroke);
    }
    Ok(strokes)
}

/// Number of uniform samples covering `[0, duration]`.
pub fn sample_count(duration: f64, period: f64) -> usize {
    (duration / period + 1e-9).floor() as usize + 1
}

pub fn superpose_strokes(segments: &[SegmentSpec], opts: &StrokeOptions) -> Result<Superposed, ProfileError> {
    superpose_strokes_with(segments, opts, Execution::default())
}

/// Samples the superposed strokes every `opts.sample_period` from t = 0.
///
/// The lognormal CDF never reaches 1, so the last sample is snapped onto the
/// final vertex and the size of that correction is reported.
pub fn superpose_strokes_with(
    segments: &[SegmentSpec],
    opts: &StrokeOptions,
    exec: Execution,
) -> Result<Superposed, ProfileError> {
    let strokes = plan_strokes(segments, opts)?;
    let origin = segments[0].start;
    let target = segments[segments.len() - 1].end;
    Ok(sample_strokes(strokes, origin, target, opts.sample_period, exec))
}

/// Samples `origin + Σ Δ_k r_k(t)` on `[0, last stroke end]` and snaps the
/// last sample onto `target`.
pub fn sample_strokes(strokes: Vec<Stroke>, origin: Vec3, target: Vec3, period: f64, exec: Execution) -> Superposed {
    let total_duration = strokes.iter().map(Stroke::end).fold(0.0, f64::max);
    let n = sample_count(total_duration, period);
    let mut samples = exec.map_range(n, |i| {
        let t = i as f64 * period;
        PathSample { t, p: position_at(&strokes, &origin, t) }
    });
    let last = samples.last_mut().expect("at least one sample");
    let snap_correction = (target - last.p).norm();
    if snap_correction > 0.0 {
        log::debug!("final sample snapped onto end vertex by {snap_correction:.3e} mm");
    }
    last.p = target;
    let path = TimedPath::from_uniform(samples, period);
    Superposed { path, strokes, origin, total_duration, snap_correction }
}
