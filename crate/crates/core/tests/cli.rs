mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use armtraj::io::{read_trajectory, TrajectoryFile};
use armtraj::kinematics::{forward_kinematics, tool_position};
use armtraj::trajectory::numeric_speed;
use armtraj::{JointConfig, Vec3};
use common::{data_dir, sample_model};
use tempfile::TempDir;

fn armtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armtraj")).args(args).output().expect("spawn armtraj")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn model_path() -> String {
    data_dir().join("models/example_6r.toml").display().to_string()
}

fn figure(name: &str) -> String {
    data_dir().join("figures").join(name).display().to_string()
}

fn numbers_after(text: &str, prefix: &str) -> Vec<f64> {
    let line = text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no {prefix} in {text}"));
    line[prefix.len()..].split_whitespace().map(|v| v.parse().unwrap()).collect()
}

fn generate(dir: &Path, fig: &str, profile: &str) -> TrajectoryFile {
    let out = dir.display().to_string();
    let o = armtraj(&["generate", "--model", &model_path(), "--figure", &figure(fig), "--profile", profile, "--out-dir", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stem = Path::new(fig).file_stem().unwrap().to_string_lossy().replace('_', "-");
    read_trajectory(&dir.join(format!("{stem}_{profile}.csv"))).unwrap()
}

#[test]
fn fk_prints_library_pose() {
    let o = armtraj(&["fk", "--model", &model_path(), "--q", "0,0,0,0,0,0"]);
    assert!(o.status.success());
    let p = numbers_after(&stdout(&o), "position:");
    let expect = forward_kinematics(&sample_model().model, &JointConfig::zeros()).position;
    for i in 0..3 {
        assert!((p[i] - expect[i]).abs() < 1e-6, "{p:?} vs {expect}");
    }
}

#[test]
fn ik_round_trips_an_fk_target() {
    let m = sample_model().model;
    let q = JointConfig::from_parts([0.3, -0.2, 0.5], [0.0; 3]);
    let target = tool_position(&m, &q);
    let arg = format!("{},{},{}", target.x, target.y, target.z);
    let o = armtraj(&["ik", "--model", &model_path(), "--target", &arg, "--q13-seed", "15,-10,25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let residual = numbers_after(&text.replace("mm^2", ""), "residual:")[0];
    assert!(residual < 1e-8);
    let rad = numbers_after(&text, "q (rad):");
    let back = tool_position(&m, &JointConfig::new(rad.try_into().unwrap()));
    // printed with 9 decimals
    assert!((back - target).norm() < 1e-3);
}

#[test]
fn ik_far_target_is_unreachable() {
    let o = armtraj(&["ik", "--model", &model_path(), "--target", "10000,0,0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("Unreachable"));
}

#[test]
fn generate_missing_figure_fails() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().display().to_string();
    let missing = figure("does_not_exist.toml");
    let o = armtraj(&["generate", "--model", &model_path(), "--figure", &missing, "--profile", "lognormal", "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("does_not_exist.toml"));
}

#[test]
fn generate_rejects_malformed_figure() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "format_version = 1\nname = \"x\"\nclosed = true\nvertices = [[0.0, 0.0]]\n").unwrap();
    let out = tmp.path().join("out").display().to_string();
    let o = armtraj(&["generate", "--model", &model_path(), "--figure", &bad.display().to_string(), "--profile", "lognormal", "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ParseError") || stderr(&o).contains("ValidationError"), "{}", stderr(&o));
}

#[test]
fn trapezoidal_square_has_three_phases_per_edge() {
    let tmp = TempDir::new().unwrap();
    let file = generate(tmp.path(), "square.toml", "trapezoidal");
    let path = file.to_path().unwrap();
    let v = numeric_speed(&path);
    let t = path.times();
    let cfg = sample_model();
    let accel = cfg.model.max_tool_accel;
    let (edge, duration) = (100.0, 2.0);
    // ramp length from a·t_acc·(T − t_acc) = d
    let t_acc = (duration - (duration * duration - 4.0 * edge / accel).sqrt()) / 2.0;
    let v_max = accel * t_acc;
    for e in 0..4 {
        let t0 = e as f64 * duration;
        let inside = |a: f64, b: f64| (0..t.len()).filter(|&k| t[k] > t0 + a && t[k] < t0 + b).collect::<Vec<_>>().into_iter();
        let ramp_up: Vec<f64> = inside(0.03, t_acc - 0.03).map(|k| v[k]).collect();
        let cruise: Vec<f64> = inside(t_acc + 0.05, duration - t_acc - 0.05).map(|k| v[k]).collect();
        let ramp_down: Vec<f64> = inside(duration - t_acc + 0.03, duration - 0.03).map(|k| v[k]).collect();
        assert!(ramp_up.len() >= 3 && ramp_down.len() >= 3 && cruise.len() >= 20);
        assert!(ramp_up.windows(2).all(|w| w[1] > w[0]), "edge {e} ramp up {ramp_up:?}");
        assert!(ramp_down.windows(2).all(|w| w[1] < w[0]), "edge {e} ramp down {ramp_down:?}");
        assert!(cruise.iter().all(|s| (s - v_max).abs() < 1e-6 * v_max), "edge {e} cruise");
    }
}

#[test]
fn lognormal_square_edges_end_within_one_percent() {
    let tmp = TempDir::new().unwrap();
    let file = generate(tmp.path(), "square.toml", "lognormal");
    let path = file.to_path().unwrap();
    let vertices = [
        Vec3::new(350.0, -50.0, 450.0),
        Vec3::new(350.0, 50.0, 450.0),
        Vec3::new(350.0, 50.0, 550.0),
        Vec3::new(350.0, -50.0, 550.0),
    ];
    for (e, v) in vertices.iter().enumerate().skip(1) {
        let miss = (path.position_at(2.0 * e as f64) - v).norm() / 100.0;
        // r = 0.99 leaves 1% of the edge; linear interpolation adds a little
        assert!(miss <= 0.0101, "edge {e}: {miss}");
    }
    let last = path.samples().last().unwrap().p;
    assert!((last - vertices[0]).norm() < 1e-9);
    assert!(file.has_joints());
}

#[test]
fn verify_identical_files_prints_inf() {
    let tmp = TempDir::new().unwrap();
    generate(tmp.path(), "square.toml", "lognormal");
    let csv = tmp.path().join("square_lognormal.csv").display().to_string();
    let out = tmp.path().join("v").display().to_string();
    let o = armtraj(&["verify", "--programmed", &csv, "--recorded", &csv, "--out-dir", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("inf dB"));
    let report = std::fs::read_to_string(tmp.path().join("v/snr_report.json")).unwrap();
    assert!(report.contains("\"inf\""));
}

#[test]
fn verify_hardware_preset_lands_in_band() {
    let tmp = TempDir::new().unwrap();
    generate(tmp.path(), "square.toml", "lognormal");
    let csv = tmp.path().join("square_lognormal.csv").display().to_string();
    for seed in ["1", "2", "3"] {
        let out = tmp.path().join(format!("h{seed}")).display().to_string();
        let o = armtraj(&["verify", "--programmed", &csv, "--simulate", "--preset", "hardware", "--seed", seed, "--out-dir", &out]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        let db: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((20.0..=26.0).contains(&db), "seed {seed}: {db}");
    }
}

#[test]
fn verify_without_overlap_is_an_alignment_error() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    let row = |t: f64, y: f64| format!("{t},350,{y},450\n");
    let head = "# format_version=1\n# model_id=m\n# profile=lognormal\n# sample_period=0.01\n# joints=false\nt,px,py,pz\n";
    let early: String = (0..50).map(|k| row(k as f64 * 0.01, k as f64)).collect();
    let late: String = (0..30).map(|k| row(100.0 + k as f64 * 0.01, k as f64)).collect();
    std::fs::write(&a, format!("{head}{early}")).unwrap();
    std::fs::write(&b, format!("{head}{late}")).unwrap();
    let out = tmp.path().join("v").display().to_string();
    let o = armtraj(&["verify", "--programmed", &a.display().to_string(), "--recorded", &b.display().to_string(), "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("NoOverlap"), "{}", stderr(&o));
}

fn session(out: &Path, seed: &str) -> Output {
    let mut args: Vec<String> = ["demo-session", "--model", &model_path()].iter().map(|s| s.to_string()).collect();
    for f in ["small_square", "small_triangle", "small_rectangle", "small_diamond", "big_square"] {
        args.push("--figure".into());
        args.push(figure(&format!("session/{f}.toml")));
    }
    args.extend(["--repetitions", "3", "--pause", "1.0", "--seed", seed, "--out-dir"].map(String::from));
    args.push(out.display().to_string());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    armtraj(&refs)
}

fn presentation(out: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["presentation_order"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

#[test]
fn demo_session_writes_ten_trajectories_and_a_manifest() {
    let tmp = TempDir::new().unwrap();
    let o = session(tmp.path(), "11");
    assert!(o.status.success(), "{}", stderr(&o));
    let mut csvs: Vec<PathBuf> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    assert_eq!(csvs.len(), 10);
    assert!(tmp.path().join("manifest.json").exists());
    let order = presentation(tmp.path());
    assert_eq!(order.len(), 10);
    for profile in ["lognormal", "trapezoidal"] {
        assert_eq!(order.iter().filter(|n| n.contains(profile)).count(), 5);
    }
    // three repetitions separated by 1 s pauses: the tool rests at the start vertex in between
    let f = read_trajectory(&tmp.path().join("small-square_lognormal.csv")).unwrap();
    let path = f.to_path().unwrap();
    let start = path.samples()[0].p;
    assert!((path.samples().last().unwrap().p - start).norm() < 1e-9);
}

#[test]
fn demo_session_refuses_zero_repetitions() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().display().to_string();
    let o = armtraj(&[
        "demo-session", "--model", &model_path(), "--figure", &figure("session/small_square.toml"),
        "--repetitions", "0", "--out-dir", &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("repetitions"));
}

#[test]
fn demo_session_order_is_fixed_by_seed() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "42"), (&b, "42"), (&c, "43")] {
        let o = session(dir, seed);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(presentation(&a), presentation(&b));
    let mut sorted = presentation(&c);
    sorted.sort();
    let mut base = presentation(&a);
    base.sort();
    assert_eq!(sorted, base);
}

#[test]
fn replay_reproduces_generate_outputs() {
    let tmp = TempDir::new().unwrap();
    generate(tmp.path(), "triangle.toml", "trapezoidal");
    let manifest = tmp.path().join("manifest.json").display().to_string();
    let again = tmp.path().join("again");
    let o = armtraj(&["replay", &manifest, "--out-dir", &again.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["triangle_trapezoidal.csv", "triangle_trapezoidal_speed.csv", "triangle_trapezoidal_speed.svg", "manifest.json"] {
        let x = std::fs::read(tmp.path().join(name)).unwrap();
        let y = std::fs::read(again.join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    let o = armtraj(&["fk", "--model", &model_path(), "--q", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}
