//! Simulated position sensor and the SNR fidelity score.
//!
//! `snr = 10·log10(Σ v_p² / Σ (v_p − v_r)²)` on speed moduli. A recording is
//! compared with its program after resampling onto the recorded clock and a
//! cross-correlation search for the sensor delay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::kinematics::RobotModel;
use crate::trajectory::{numeric_speed, JointTrajectory, PathSample, TimedPath, TrajectoryError};
use crate::Vec3;

pub const SENSOR_RATE_DEFAULT: f64 = 200.0;
/// Half-width of the alignment search (s).
pub const MAX_ALIGNMENT_OFFSET: f64 = 0.25;

/// Position noise of [`SensorModel::hardware_like`] (mm, per axis).
///
/// Calibrated by Monte-Carlo so that both velocity laws on the shipped square
/// score inside 20–26 dB with the default comparison pipeline.
pub const HARDWARE_NOISE_STD: f64 = 0.045;
pub const HARDWARE_LATENCY: f64 = 0.03;
pub const HARDWARE_QUANTIZATION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("invalid sensor `{field}`: {reason}")]
    InvalidSensor { field: &'static str, reason: String },
    #[error("series lengths differ ({programmed} vs {recorded})")]
    LengthMismatch { programmed: usize, recorded: usize },
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("programmed speed has zero energy")]
    ZeroSignal,
    #[error("programmed and recorded time ranges do not overlap")]
    NoOverlap,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

impl VerificationError {
    pub fn name(&self) -> &'static str {
        match self {
            VerificationError::InvalidSensor { .. } => "InvalidSensor",
            VerificationError::LengthMismatch { .. } => "LengthMismatch",
            VerificationError::TooShort(_) => "TooShort",
            VerificationError::ZeroSignal => "ZeroSignal",
            VerificationError::NoOverlap => "NoOverlap",
            VerificationError::Trajectory(_) => "Trajectory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Samples per second.
    pub rate: f64,
    /// Standard deviation of the Gaussian noise added to each axis (mm).
    pub position_noise_std: f64,
    /// Recorded position at `t` is the true position at `t − latency` (s).
    pub latency: f64,
    /// Rounding step for each axis (mm); 0 disables it.
    pub quantization: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel::identity(SENSOR_RATE_DEFAULT)
    }
}

impl SensorModel {
    pub fn new(rate: f64, position_noise_std: f64, latency: f64, quantization: f64) -> Result<Self, VerificationError> {
        let s = SensorModel { rate, position_noise_std, latency, quantization };
        s.validate()?;
        Ok(s)
    }

    /// Noise-free, delay-free, unquantized sensor.
    pub fn identity(rate: f64) -> Self {
        SensorModel { rate, position_noise_std: 0.0, latency: 0.0, quantization: 0.0 }
    }

    /// 200 Hz sensor with the calibrated noise preset.
    pub fn hardware_like() -> Self {
        SensorModel {
            rate: SENSOR_RATE_DEFAULT,
            position_noise_std: HARDWARE_NOISE_STD,
            latency: HARDWARE_LATENCY,
            quantization: HARDWARE_QUANTIZATION,
        }
    }

    pub fn validate(&self) -> Result<(), VerificationError> {
        let bad = |field, reason: &str| Err(VerificationError::InvalidSensor { field, reason: reason.into() });
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate", "must be > 0");
        }
        for (field, v) in [
            ("position_noise_std", self.position_noise_std),
            ("latency", self.latency),
            ("quantization", self.quantization),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(field, "must be >= 0");
            }
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Simulates the sensor watching `path`.
///
/// The recording starts with the path and runs until `end + latency`. When
/// the sensor rate equals the path rate the path clock is reused, so an
/// identity sensor returns an exact copy.
pub fn record(path: &TimedPath, sensor: &SensorModel, rng_seed: u64) -> Result<TimedPath, VerificationError> {
    sensor.validate()?;
    let src = path.samples();
    let start = path.start_time();
    let mut period = sensor.period();
    let same_clock = (period - path.sample_period()).abs() <= 1e-12 * path.sample_period();
    if same_clock {
        period = path.sample_period();
    }
    let span = path.end_time() + sensor.latency - start;
    let n = (span / period + 1e-9).floor() as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = (sensor.position_noise_std > 0.0)
        .then(|| Normal::new(0.0, sensor.position_noise_std).expect("validated std"));
    let q = sensor.quantization;

    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let t = match src.get(j) {
            Some(s) if same_clock => s.t,
            _ => start + j as f64 * period,
        };
        let mut p = path.position_at(t - sensor.latency);
        if let Some(d) = &noise {
            p += Vec3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng));
        }
        if q > 0.0 {
            p = p.map(|x| (x / q).round() * q);
        }
        out.push(PathSample { t, p });
    }
    if out.len() == 1 {
        return Ok(TimedPath::from_uniform(out, period));
    }
    Ok(TimedPath::new(out, period)?)
}

/// [`record`] for a joint trajectory, observed through forward kinematics.
pub fn record_joints(
    traj: &JointTrajectory,
    model: &RobotModel,
    sensor: &SensorModel,
    rng_seed: u64,
) -> Result<TimedPath, VerificationError> {
    record(&traj.tool_path(model)?, sensor, rng_seed)
}

/// Result of an SNR evaluation. `snr_db` is `+∞` when the two series match
/// exactly; it is written as the string `"inf"` when serialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    #[serde(with = "db")]
    pub snr_db: f64,
    pub n_samples: usize,
    /// Rate of the common clock (samples/s); 0 when the series were given
    /// directly to [`snr`].
    pub resampling_rate: f64,
    /// Delay of the recording relative to the program (s).
    pub alignment_offset: f64,
}

impl SnrReport {
    pub fn is_perfect_match(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    /// `"23.0103 dB"` or `"inf dB"`.
    pub fn display_db(&self) -> String {
        if self.is_perfect_match() {
            "inf dB".to_string()
        } else {
            format!("{:.4} dB", self.snr_db)
        }
    }
}

mod db {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            Db::Text("inf".into()).serialize(s)
        } else {
            Db::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Db::deserialize(d)? {
            Db::Num(v) => Ok(v),
            Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Db::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// SNR in dB of `recorded` against `programmed`; series must already share a clock.
pub fn snr(programmed: &[f64], recorded: &[f64]) -> Result<SnrReport, VerificationError> {
    if programmed.len() != recorded.len() {
        return Err(VerificationError::LengthMismatch { programmed: programmed.len(), recorded: recorded.len() });
    }
    if programmed.len() < 2 {
        return Err(VerificationError::TooShort(programmed.len()));
    }
    let signal: f64 = programmed.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(VerificationError::ZeroSignal);
    }
    let error: f64 = programmed.iter().zip(recorded).map(|(p, r)| (p - r) * (p - r)).sum();
    let snr_db = if error == 0.0 { f64::INFINITY } else { 10.0 * (signal / error).log10() };
    Ok(SnrReport { snr_db, n_samples: programmed.len(), resampling_rate: 0.0, alignment_offset: 0.0 })
}

/// 3-tap moving average; the end points average their two available taps.
pub fn smooth3(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n < 3 {
        return v.to_vec();
    }
    (0..n)
        .map(|i| match i {
            0 => (v[0] + v[1]) / 2.0,
            i if i == n - 1 => (v[n - 2] + v[n - 1]) / 2.0,
            i => (v[i - 1] + v[i] + v[i + 1]) / 3.0,
        })
        .collect()
}

/// Speed modulus of a sampled path, optionally smoothed.
pub fn speed_series(path: &TimedPath, smoothing: bool) -> Vec<f64> {
    let v = numeric_speed(path);
    if smoothing {
        smooth3(&v)
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub max_offset: f64,
    /// Applies [`smooth3`] to both speed series before scoring.
    pub smoothing: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { max_offset: MAX_ALIGNMENT_OFFSET, smoothing: true }
    }
}

pub fn compare(programmed: &TimedPath, recorded: &TimedPath) -> Result<SnrReport, VerificationError> {
    compare_with(programmed, recorded, &CompareOptions::default())
}

/// Scores `recorded` against `programmed`.
///
/// Candidate delays are multiples of the recorded period within
/// `±max_offset`; the one maximizing the Pearson correlation of the two speed
/// series wins, ties going to the smallest |delay|.
pub fn compare_with(
    programmed: &TimedPath,
    recorded: &TimedPath,
    opts: &CompareOptions,
) -> Result<SnrReport, VerificationError> {
    align_speeds(programmed, recorded, opts).map(|(r, _)| r)
}

/// Speed series on the recorded clock after alignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignedSpeeds {
    /// Recorded timestamps (s).
    pub t: Vec<f64>,
    /// Programmed speed at `t − alignment_offset`.
    pub programmed: Vec<f64>,
    pub recorded: Vec<f64>,
}

/// [`compare_with`], also returning the series that were scored.
pub fn align_speeds(
    programmed: &TimedPath,
    recorded: &TimedPath,
    opts: &CompareOptions,
) -> Result<(SnrReport, AlignedSpeeds), VerificationError> {
    if programmed.len() < 2 {
        return Err(VerificationError::TooShort(programmed.len()));
    }
    if recorded.len() < 2 {
        return Err(VerificationError::TooShort(recorded.len()));
    }
    let vp = speed_series(programmed, opts.smoothing);
    let vr = speed_series(recorded, opts.smoothing);
    let h = recorded.sample_period();
    let rt = recorded.times();
    let kmax = (opts.max_offset.max(0.0) / h + 1e-9).floor() as i64;

    let pairs = |delay: f64| -> AlignedSpeeds {
        let mut out = AlignedSpeeds::default();
        for (t, r) in rt.iter().zip(&vr) {
            if let Some(p) = interp(&vp, programmed.start_time(), programmed.sample_period(), t - delay) {
                out.t.push(*t);
                out.programmed.push(p);
                out.recorded.push(*r);
            }
        }
        out
    };

    let mut best: Option<(f64, f64)> = None;
    for step in 0..=2 * kmax {
        // 0, +1, −1, +2, −2, ...
        let k = if step % 2 == 1 { (step + 1) / 2 } else { -(step / 2) };
        let delay = k as f64 * h;
        let a = pairs(delay);
        if a.t.len() < 2 {
            continue;
        }
        let c = pearson(&a.programmed, &a.recorded);
        if best.is_none_or(|(bc, _)| c > bc + 1e-12) {
            best = Some((c, delay));
        }
    }
    let (_, delay) = best.ok_or(VerificationError::NoOverlap)?;
    let aligned = pairs(delay);
    let mut report = snr(&aligned.programmed, &aligned.recorded)?;
    report.resampling_rate = 1.0 / h;
    report.alignment_offset = delay;
    Ok((report, aligned))
}

/// Linear interpolation of a uniformly sampled series; `None` outside its range.
fn interp(v: &[f64], start: f64, period: f64, t: f64) -> Option<f64> {
    let u = (t - start) / period;
    let last = (v.len() - 1) as f64;
    let k = u.round();
    if (u - k).abs() < 1e-9 && (0.0..=last).contains(&k) {
        return Some(v[k as usize]);
    }
    if !(0.0..=last).contains(&u) {
        return None;
    }
    let i = u.floor() as usize;
    let w = u - i as f64;
    Some(v[i] + (v[i + 1] - v[i]) * w)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Mean SNR (dB) over `seeds` for each noise level in `stds`, all other
/// sensor settings taken from `base`. Runs are independent and spread
/// according to `exec`.
pub fn noise_sweep(
    programmed: &TimedPath,
    base: &SensorModel,
    stds: &[f64],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<f64>, VerificationError> {
    if seeds.is_empty() {
        return Err(VerificationError::TooShort(0));
    }
    let m = seeds.len();
    let runs = exec.map_range(stds.len() * m, |i| {
        let sensor = SensorModel { position_noise_std: stds[i / m], ..*base };
        let rec = record(programmed, &sensor, seeds[i % m])?;
        compare(programmed, &rec).map(|r| r.snr_db)
    });
    let runs: Vec<f64> = runs.into_iter().collect::<Result<_, _>>()?;
    Ok(runs.chunks(m).map(|c| c.iter().sum::<f64>() / m as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, period: f64, v: Vec3) -> TimedPath {
        let s = (0..n).map(|i| {
            let t = i as f64 * period;
            PathSample { t, p: v * t }
        });
        TimedPath::new(s.collect(), period).unwrap()
    }

    /// Smooth bell-shaped move along x, 2 s long.
    fn bell(period: f64) -> TimedPath {
        let n = (2.0 / period).round() as usize + 1;
        let s = (0..n).map(|i| {
            let t = i as f64 * period;
            let u = t / 2.0;
            let x = 100.0 * (u - (2.0 * std::f64::consts::PI * u).sin() / (2.0 * std::f64::consts::PI));
            PathSample { t, p: Vec3::new(x, 0.0, 0.0) }
        });
        TimedPath::new(s.collect(), period).unwrap()
    }

    #[test]
    fn sensor_validation() {
        assert!(SensorModel::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SensorModel::new(200.0, -1.0, 0.0, 0.0).is_err());
        assert!(SensorModel::new(200.0, 0.0, f64::NAN, 0.0).is_err());
        assert!(SensorModel::new(200.0, 0.1, 0.02, 0.01).is_ok());
    }

    #[test]
    fn identity_sensor_copies_exactly() {
        let p = bell(0.024);
        let rec = record(&p, &SensorModel::identity(1.0 / 0.024), 7).unwrap();
        assert_eq!(rec, p);
    }

    #[test]
    fn latency_shifts_linear_motion() {
        let v = Vec3::new(30.0, -10.0, 5.0);
        let p = line(101, 0.01, v);
        let sensor = SensorModel { latency: 0.1, ..SensorModel::identity(100.0) };
        let rec = record(&p, &sensor, 0).unwrap();
        assert_eq!(rec.len(), 111);
        for s in rec.samples().iter().filter(|s| s.t >= 0.1 + 1e-9 && s.t <= 1.0) {
            let expected = p.position_at(s.t) - v * 0.1;
            assert!((s.p - expected).norm() < 1e-9, "t = {}", s.t);
        }
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let p = bell(0.024);
        let a = record(&p, &SensorModel::hardware_like(), 11).unwrap();
        let b = record(&p, &SensorModel::hardware_like(), 11).unwrap();
        let c = record(&p, &SensorModel::hardware_like(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn quantization_rounds_to_grid() {
        let p = bell(0.024);
        let sensor = SensorModel { quantization: 0.5, ..SensorModel::identity(200.0) };
        let rec = record(&p, &sensor, 0).unwrap();
        for s in rec.samples() {
            for x in s.p.iter() {
                assert!(((x / 0.5) - (x / 0.5).round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn snr_hand_value() {
        let r = snr(&[1.0, 1.0], &[1.0, 0.9]).unwrap();
        // 10·log10(2 / 0.01)
        assert!((r.snr_db - 23.010_299_956_639_81).abs() < 1e-9);
        assert_eq!(r.n_samples, 2);
    }

    #[test]
    fn snr_errors_and_sentinel() {
        assert_eq!(snr(&[0.0, 0.0], &[1.0, 1.0]), Err(VerificationError::ZeroSignal));
        assert!(matches!(snr(&[1.0], &[1.0]), Err(VerificationError::TooShort(1))));
        assert!(matches!(snr(&[1.0, 2.0], &[1.0]), Err(VerificationError::LengthMismatch { .. })));
        let r = snr(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(r.is_perfect_match());
        assert_eq!(r.display_db(), "inf dB");
    }

    #[test]
    fn report_json_round_trip() {
        let r = snr(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<SnrReport>(&s).unwrap(), r);
        let r = snr(&[1.0, 1.0], &[1.0, 0.9]).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SnrReport>(&s).unwrap(), r);
    }

    #[test]
    fn smoothing_preserves_constants() {
        assert_eq!(smooth3(&[2.0; 6]), vec![2.0; 6]);
        assert_eq!(smooth3(&[0.0, 3.0, 0.0]), vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn self_comparison_is_perfect() {
        let p = bell(0.024);
        let rec = record(&p, &SensorModel::identity(1.0 / 0.024), 0).unwrap();
        let r = compare(&p, &rec).unwrap();
        assert!(r.is_perfect_match());
        assert_eq!(r.alignment_offset, 0.0);
    }

    #[test]
    fn delay_is_recovered() {
        let p = bell(0.005);
        let sensor = SensorModel { latency: 0.05, ..SensorModel::identity(200.0) };
        let rec = record(&p, &sensor, 0).unwrap();
        let r = compare(&p, &rec).unwrap();
        assert!((r.alignment_offset - 0.05).abs() < 1e-9, "{}", r.alignment_offset);
        assert!(r.snr_db > 60.0, "{}", r.snr_db);
    }

    #[test]
    fn disjoint_ranges_do_not_overlap() {
        let p = bell(0.024);
        let shifted: Vec<PathSample> = p.samples().iter().map(|s| PathSample { t: s.t + 10.0, ..*s }).collect();
        let q = TimedPath::new(shifted, 0.024).unwrap();
        assert_eq!(compare(&p, &q), Err(VerificationError::NoOverlap));
    }

    #[test]
    fn sweep_policies_agree() {
        let p = bell(0.024);
        let base = SensorModel::hardware_like();
        let stds = [0.01, 0.05];
        let seeds = [1, 2, 3];
        let a = noise_sweep(&p, &base, &stds, &seeds, Execution::Sequential).unwrap();
        let b = noise_sweep(&p, &base, &stds, &seeds, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a[0] > a[1]);
    }
}
