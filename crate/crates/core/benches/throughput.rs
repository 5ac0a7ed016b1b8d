use std::hint::black_box;

use armtraj::ik::{solve_batch, IkRequest};
use armtraj::kinematics::tool_position;
use armtraj::profiles::superpose::superpose_strokes_with;
use armtraj::profiles::{ProfileKind, StrokeOptions};
use armtraj::trajectory::{plan_figure, EdgeTiming, FigureSpec};
use armtraj::verification::{noise_sweep, SensorModel};
use armtraj::{Execution, JointConfig, RobotModel, Vec3};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn model() -> RobotModel {
    RobotModel::six_r("bench", [290.0, 270.0, 70.0, 302.0, 72.0]).unwrap()
}

fn square(total: f64) -> FigureSpec {
    let v = vec![
        Vec3::new(350.0, -50.0, 450.0),
        Vec3::new(350.0, 50.0, 450.0),
        Vec3::new(350.0, 50.0, 550.0),
        Vec3::new(350.0, -50.0, 550.0),
    ];
    FigureSpec::new("square", v, true, EdgeTiming::Total(total)).unwrap()
}

fn ik_batch(c: &mut Criterion) {
    let m = model();
    let requests: Vec<IkRequest> = (0..256)
        .map(|k| {
            let u = k as f64 / 256.0;
            let q = JointConfig::from_parts([0.6 * u - 0.3, 0.4 * u - 0.2, 0.3 + 0.4 * u], [0.0; 3]);
            IkRequest::new(tool_position(&m, &q), [0.0; 3], [0.0; 3])
        })
        .collect();
    let mut g = c.benchmark_group("ik_batch_256");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| solve_batch(&m, black_box(&requests), exec)));
    }
    g.finish();
}

fn path_sampling(c: &mut Criterion) {
    let fig = square(400.0);
    let opts = StrokeOptions { sample_period: 0.004, overlap: 0.2, ..Default::default() };
    let mut g = c.benchmark_group("sampling_100k");
    for kind in [ProfileKind::Lognormal, ProfileKind::Trapezoidal] {
        let segments = fig.segments(kind).unwrap();
        for (name, exec) in MODES {
            let id = BenchmarkId::new(kind.to_string(), name);
            g.bench_function(id, |b| b.iter(|| superpose_strokes_with(black_box(&segments), &opts, exec).unwrap()));
        }
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let path = plan_figure(&square(8.0), ProfileKind::Lognormal, &StrokeOptions::default()).unwrap().path;
    let base = SensorModel::hardware_like();
    let stds = [0.01, 0.02, 0.045, 0.09];
    let seeds: Vec<u64> = (0..16).collect();
    let mut g = c.benchmark_group("noise_sweep_64");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| noise_sweep(black_box(&path), &base, &stds, &seeds, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ik_batch, path_sampling, sweep);
criterion_main!(benches);
