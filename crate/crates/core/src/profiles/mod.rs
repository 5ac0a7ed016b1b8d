//! Velocity laws for a single straight stroke.
//!
//! A lognormal stroke moves with speed
//!
//! ```text
//! v(t) = D / (σ (t - t0) √(2π)) · exp(-(ln(t - t0) - μ)² / (2σ²)),   t > t0
//! ```
//!
//! and its progress along the segment is the lognormal CDF
//! `r(t) = ½ (1 + erf((ln(t - t0) - μ) / (σ√2)))`. The trapezoidal law ramps at
//! constant acceleration, cruises, and ramps down symmetrically.
//!
//! Multi-segment motions are built in [`superpose`].

pub mod superpose;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use libm::{erf, erfc};
use statrs::function::erf::erf_inv;
use thiserror::Error;

use crate::Vec3;

pub use superpose::{superpose_strokes, ProgressLaw, Stroke, StrokeOptions, Superposed};

/// Fraction of the stroke completed at the commanded end time.
pub const R_TARGET_DEFAULT: f64 = 0.99;
/// The r value used to explain the σ procedure; kept as a preset.
pub const R_TARGET_EXPOSITION: f64 = 0.95;
/// Log-time delay; the shape is carried by σ alone.
pub const MU_DEFAULT: f64 = 0.0;
/// Cartesian sampling period of generated trajectories (s).
pub const SAMPLE_PERIOD_DEFAULT: f64 = 0.024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("degenerate duration: ln(t_e - t0) - mu = {0} <= 0, no positive sigma exists")]
    DegenerateDuration(f64),
    #[error("r_target {0} must lie in (0.5, 1)")]
    InvalidTarget(f64),
    #[error("infeasible trapezoid: accel {accel} mm/s^2 cannot cover {distance} mm in {total_time} s (needs >= {min_accel})")]
    Infeasible { distance: f64, total_time: f64, accel: f64, min_accel: f64 },
    #[error("invalid stroke parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("segment {index} does not start where segment {} ends", index - 1)]
    DisconnectedPolyline { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Lognormal,
    Trapezoidal,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Lognormal => "lognormal",
            ProfileKind::Trapezoidal => "trapezoidal",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lognormal" => Ok(ProfileKind::Lognormal),
            "trapezoidal" | "trapezoid" => Ok(ProfileKind::Trapezoidal),
            other => Err(format!("unknown profile `{other}` (expected lognormal or trapezoidal)")),
        }
    }
}

/// One lognormal velocity pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalStroke {
    /// Activation time (s).
    pub t0: f64,
    /// Log-time delay.
    pub mu: f64,
    /// Log-response time, > 0.
    pub sigma: f64,
    /// Displacement magnitude (mm).
    pub d: f64,
}

impl LognormalStroke {
    pub fn new(t0: f64, mu: f64, sigma: f64, d: f64) -> Result<Self, ProfileError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ProfileError::InvalidParameter { field: "sigma", reason: format!("{sigma} must be > 0") });
        }
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(ProfileError::InvalidParameter { field: "t0", reason: format!("{t0} must be >= 0") });
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(ProfileError::InvalidParameter { field: "d", reason: format!("{d} must be >= 0") });
        }
        if !mu.is_finite() {
            return Err(ProfileError::InvalidParameter { field: "mu", reason: "not finite".into() });
        }
        Ok(LognormalStroke { t0, mu, sigma, d })
    }

    pub fn speed(&self, t: f64) -> f64 {
        lognormal_speed(t, self)
    }

    /// Distance covered by time `t`, `D · r(t)`.
    pub fn displacement(&self, t: f64) -> f64 {
        self.d * lognormal_cdf(t, self.t0, self.mu, self.sigma)
    }

    /// Time of peak speed, `t0 + exp(μ − σ²)`.
    pub fn peak_time(&self) -> f64 {
        self.t0 + (self.mu - self.sigma * self.sigma).exp()
    }
}

/// Lognormal speed scaled by `D`; exactly zero for `t <= t0`.
pub fn lognormal_speed(t: f64, stroke: &LognormalStroke) -> f64 {
    let dt = t - stroke.t0;
    if dt <= 0.0 {
        return 0.0;
    }
    let z = (dt.ln() - stroke.mu) / stroke.sigma;
    stroke.d / (stroke.sigma * dt * (2.0 * PI).sqrt()) * (-0.5 * z * z).exp()
}

/// Lognormal CDF, the normalized progress of a stroke. Zero for `t <= t0`.
pub fn lognormal_cdf(t: f64, t0: f64, mu: f64, sigma: f64) -> f64 {
    let dt = t - t0;
    if dt <= 0.0 {
        return 0.0;
    }
    let z = (dt.ln() - mu) / (sigma * SQRT_2);
    if z < 0.0 {
        0.5 * erfc(-z)
    } else {
        0.5 * (1.0 + erf(z))
    }
}

/// σ such that the stroke has completed a fraction `r_target` of its travel
/// at `t_e`:
///
/// ```text
/// σ = (ln(t_e − t0) − μ) / (√2 · erfinv(2 r − 1))
/// ```
///
/// The closed form is checked against the CDF and refined by bisection if it
/// misses by more than 1e-12.
pub fn solve_sigma(t_e: f64, r_target: f64, t0: f64, mu: f64) -> Result<f64, ProfileError> {
    let num = check_sigma_inputs(t_e, r_target, t0, mu)?;
    let sigma = num / (SQRT_2 * erf_inv(2.0 * r_target - 1.0));
    let miss = lognormal_cdf(t_e, t0, mu, sigma) - r_target;
    if miss.abs() <= 1e-12 {
        return Ok(sigma);
    }
    log::debug!("closed-form sigma missed r by {miss:e}; refining by bisection");
    solve_sigma_bisection(t_e, r_target, t0, mu)
}

/// Bisection on the CDF for the same root as [`solve_sigma`].
///
/// `cdf(t_e; σ)` decreases monotonically in σ when `ln(t_e − t0) > μ`.
pub fn solve_sigma_bisection(t_e: f64, r_target: f64, t0: f64, mu: f64) -> Result<f64, ProfileError> {
    check_sigma_inputs(t_e, r_target, t0, mu)?;
    let mut lo = 1e-12_f64;
    let mut hi = 1.0_f64;
    while lognormal_cdf(t_e, t0, mu, hi) > r_target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(ProfileError::InvalidTarget(r_target));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lognormal_cdf(t_e, t0, mu, mid) > r_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_sigma_inputs(t_e: f64, r_target: f64, t0: f64, mu: f64) -> Result<f64, ProfileError> {
    if !(r_target > 0.5 && r_target < 1.0) {
        return Err(ProfileError::InvalidTarget(r_target));
    }
    if !(t_e > t0) || !t_e.is_finite() || !t0.is_finite() {
        return Err(ProfileError::InvalidParameter {
            field: "t_e",
            reason: format!("end time {t_e} must exceed t0 = {t0}"),
        });
    }
    let num = (t_e - t0).ln() - mu;
    if num <= 0.0 {
        return Err(ProfileError::DegenerateDuration(num));
    }
    Ok(num)
}

/// A straight segment to be traversed in `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub start: Vec3,
    pub end: Vec3,
    /// Commanded duration t_e (s).
    pub duration: f64,
    pub kind: ProfileKind,
}

impl SegmentSpec {
    pub fn new(start: Vec3, end: Vec3, duration: f64, kind: ProfileKind) -> Result<Self, ProfileError> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(ProfileError::InvalidParameter {
                field: "duration",
                reason: format!("{duration} must be > 0"),
            });
        }
        if start.iter().chain(end.iter()).any(|v| !v.is_finite()) {
            return Err(ProfileError::InvalidParameter { field: "endpoints", reason: "non-finite coordinate".into() });
        }
        Ok(SegmentSpec { start, end, duration, kind })
    }

    pub fn delta(&self) -> Vec3 {
        self.end - self.start
    }

    pub fn length(&self) -> f64 {
        self.delta().norm()
    }
}

/// Per-axis lognormal position, `p_s + (p_e − p_s) · r(t)`; equals `p_s` for
/// `t <= t0`.
pub fn lognormal_position(t: f64, seg: &SegmentSpec, t0: f64, mu: f64, sigma: f64) -> Vec3 {
    let r = lognormal_cdf(t, t0, mu, sigma);
    if r == 0.0 {
        return seg.start;
    }
    seg.start + seg.delta() * r
}

/// Phase durations of a rest-to-rest trapezoidal speed profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidSegment {
    /// Ramp duration (s), same for acceleration and deceleration.
    pub t_acc: f64,
    /// Cruise duration (s).
    pub t_const: f64,
    /// Cruise speed (mm/s).
    pub v_max: f64,
    /// Ramp acceleration (mm/s²).
    pub accel: f64,
}

impl TrapezoidSegment {
    pub fn total_time(&self) -> f64 {
        2.0 * self.t_acc + self.t_const
    }

    /// Area under the speed curve.
    pub fn distance(&self) -> f64 {
        self.v_max * (self.t_acc + self.t_const)
    }

    /// Distance covered `t` seconds after the start.
    pub fn distance_at(&self, t: f64) -> f64 {
        let total = self.total_time();
        if t <= 0.0 {
            0.0
        } else if t < self.t_acc {
            0.5 * self.accel * t * t
        } else if t < self.t_acc + self.t_const {
            0.5 * self.v_max * self.t_acc + self.v_max * (t - self.t_acc)
        } else if t < total {
            let rem = total - t;
            self.distance() - 0.5 * self.accel * rem * rem
        } else {
            self.distance()
        }
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let total = self.total_time();
        if t <= 0.0 || t >= total {
            0.0
        } else if t < self.t_acc {
            self.accel * t
        } else if t < self.t_acc + self.t_const {
            self.v_max
        } else {
            self.accel * (total - t)
        }
    }
}

/// Ramp and cruise times for covering `distance` in `total_time` with ramps
/// at `accel`. The ramp time is the smaller root of
/// `t² − T·t + distance/accel = 0`.
pub fn trapezoid_times(distance: f64, total_time: f64, accel: f64) -> Result<TrapezoidSegment, ProfileError> {
    for (field, v) in [("distance", distance), ("total_time", total_time), ("accel", accel)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ProfileError::InvalidParameter { field, reason: format!("{v} must be > 0") });
        }
    }
    let tt = total_time;
    let mut disc = tt * tt - 4.0 * distance / accel;
    if disc < 0.0 {
        if disc < -1e-12 * tt * tt {
            return Err(ProfileError::Infeasible {
                distance,
                total_time,
                accel,
                min_accel: 4.0 * distance / (tt * tt),
            });
        }
        disc = 0.0;
    }
    // (T − √disc)/2 rewritten to avoid cancellation when accel is generous
    let t_acc = (2.0 * distance / accel) / (tt + disc.sqrt());
    let t_const = (tt - 2.0 * t_acc).max(0.0);
    Ok(TrapezoidSegment { t_acc, t_const, v_max: accel * t_acc, accel })
}

/// Position along the segment `t` seconds after its start.
pub fn trapezoid_position(t: f64, seg: &SegmentSpec, tz: &TrapezoidSegment) -> Vec3 {
    let len = seg.length();
    if len == 0.0 {
        return seg.start;
    }
    let progress = (tz.distance_at(t) / tz.distance()).min(1.0);
    if progress >= 1.0 {
        return seg.end;
    }
    seg.start + seg.delta() * progress
}

#[cfg(test)]
mod tests {
    use super::*;

    // error function tables, 16 digits
    const ERF_TABLE: &[(f64, f64)] = &[
        (0.1, 0.1124629160182849),
        (0.5, 0.5204998778130465),
        (1.0, 0.8427007929497149),
        (2.0, 0.9953222650189527),
        (3.0, 0.9999779095030014),
    ];

    #[test]
    fn erf_backend_is_double_precision() {
        for &(x, want) in ERF_TABLE {
            assert!((erf(x) - want).abs() < 1e-15, "erf({x})");
        }
        assert!((erfc(4.0) / 1.541_725_790_028_002e-8 - 1.0).abs() < 1e-12);
        for i in 1..2000 {
            let y = -1.0 + i as f64 / 1000.0;
            assert!((erf(erf_inv(y)) - y).abs() < 1e-15, "y={y}");
        }
    }

    #[test]
    fn speed_zero_before_activation() {
        let s = LognormalStroke::new(0.5, 0.0, 0.3, 1.0).unwrap();
        assert_eq!(s.speed(0.5), 0.0);
        assert_eq!(s.speed(0.1), 0.0);
        assert!(s.speed(0.6) > 0.0);
    }

    #[test]
    fn peak_at_lognormal_mode() {
        let s = LognormalStroke::new(0.0, 0.0, 0.3, 1.0).unwrap();
        let mode = s.peak_time();
        assert!((mode - (-0.09f64).exp()).abs() < 1e-15);
        // dense sampling places the maximum at the mode
        let (mut best_t, mut best_v) = (0.0, 0.0);
        for i in 1..200_000 {
            let t = i as f64 * 1e-5;
            let v = s.speed(t);
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
        assert!((best_t - 0.9139).abs() < 1e-4, "{best_t}");
    }

    #[test]
    fn cdf_median_and_support() {
        assert_eq!(lognormal_cdf(0.25 + 1.0, 0.25, 0.0, 0.4), 0.5);
        assert_eq!(lognormal_cdf(0.2, 0.3, 0.0, 0.4), 0.0);
        assert_eq!(lognormal_cdf(0.3, 0.3, 0.0, 0.4), 0.0);
        let mu: f64 = 0.7;
        assert!((lognormal_cdf(mu.exp(), 0.0, mu, 0.2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sigma_for_two_seconds() {
        let s = solve_sigma(2.0, 0.99, 0.0, 0.0).unwrap();
        assert!((s - 0.29796).abs() < 1e-4, "{s}");
        assert!((lognormal_cdf(2.0, 0.0, 0.0, s) - 0.99).abs() < 1e-4);
        assert!((lognormal_cdf(2.0, 0.0, 0.0, 0.2980) - 0.99).abs() < 1e-4);
        let b = solve_sigma_bisection(2.0, 0.99, 0.0, 0.0).unwrap();
        assert!((s - b).abs() < 1e-12);
    }

    #[test]
    fn sigma_errors() {
        assert_eq!(solve_sigma(2.0, 0.5, 0.0, 0.0), Err(ProfileError::InvalidTarget(0.5)));
        assert!(matches!(solve_sigma(1.0, 0.99, 0.0, 0.0), Err(ProfileError::DegenerateDuration(_))));
        assert!(matches!(solve_sigma(3.5, 0.99, 2.5, 0.0), Err(ProfileError::DegenerateDuration(_))));
        assert!(matches!(solve_sigma(0.5, 0.99, 0.0, 0.0), Err(ProfileError::DegenerateDuration(_))));
        assert!(solve_sigma(2.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lognormal_position_fixtures() {
        let seg = SegmentSpec::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(11.0, -2.0, 3.0), 2.0, ProfileKind::Lognormal).unwrap();
        let sigma = solve_sigma(2.0, 0.99, 0.0, 0.0).unwrap();
        assert_eq!(lognormal_position(0.0, &seg, 0.0, 0.0, sigma), seg.start);
        let mid = lognormal_position(1.0, &seg, 0.0, 0.0, sigma);
        assert!((mid - (seg.start + seg.end) / 2.0).norm() < 1e-14);
        let end = lognormal_position(2.0, &seg, 0.0, 0.0, sigma);
        for k in 0..3 {
            let full = seg.end[k] - seg.start[k];
            assert!((end[k] - seg.end[k]).abs() <= 0.01 * full.abs() + 1e-12);
        }
    }

    #[test]
    fn trapezoid_fixtures() {
        let tz = trapezoid_times(1.0, 2.0, 1.0).unwrap();
        assert_eq!((tz.t_acc, tz.t_const, tz.v_max), (1.0, 0.0, 1.0));
        assert!(matches!(trapezoid_times(1.5, 2.0, 1.0), Err(ProfileError::Infeasible { .. })));
        let tz = trapezoid_times(0.75, 2.0, 1.0).unwrap();
        assert!((tz.t_acc - 0.5).abs() < 1e-15);
        assert!((tz.t_const - 1.0).abs() < 1e-15);
        assert!((tz.v_max - 0.5).abs() < 1e-15);
        assert!((tz.distance() - 0.75).abs() < 1e-15);
        assert!(trapezoid_times(0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn trapezoid_position_endpoints_and_midpoint() {
        let seg = SegmentSpec::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(30.0, 40.0, 0.0), 2.0, ProfileKind::Trapezoidal).unwrap();
        let tz = trapezoid_times(seg.length(), 2.0, 100.0).unwrap();
        assert_eq!(trapezoid_position(0.0, &seg, &tz), seg.start);
        assert_eq!(trapezoid_position(2.0, &seg, &tz), seg.end);
        let mid = trapezoid_position(tz.t_acc + tz.t_const / 2.0, &seg, &tz);
        assert!((mid - Vec3::new(15.0, 20.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn profile_kind_parse() {
        assert_eq!("Lognormal".parse::<ProfileKind>().unwrap(), ProfileKind::Lognormal);
        assert_eq!("trapezoidal".parse::<ProfileKind>().unwrap(), ProfileKind::Trapezoidal);
        assert!("bell".parse::<ProfileKind>().is_err());
    }
}
