use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use thermopipe::ops::{bicubic_resample, conv2d};
use thermopipe::pipeline::run_pipeline;
use thermopipe::sr::sr_forward;
use thermopipe::throughput::{bench_input, bench_weights, BenchConfig};
use thermopipe::training::NucMode;
use thermopipe_bench::{test_kernel, test_map, test_tensor};

fn conv(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv3x3");
    for (cin, cout) in [(1, 32), (32, 32)] {
        let x = test_tensor(cin, 120, 160);
        let k = test_kernel(cout, cin, 3);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{cin}to{cout}")), &(x, k), |b, (x, k)| {
            b.iter(|| conv2d(black_box(x), k).unwrap())
        });
    }
    g.finish();
}

fn resample(c: &mut Criterion) {
    let m = test_map(120, 160);
    c.bench_function("bicubic_x2_120x160", |b| b.iter(|| bicubic_resample(black_box(&m), 2.0).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("end_to_end");
    g.sample_size(10);
    for (scale, mode) in [(2, NucMode::Single), (4, NucMode::Single), (2, NucMode::Multi(7))] {
        let cfg = BenchConfig::new(240, 320, scale, mode);
        let w = bench_weights(&cfg).unwrap();
        let (input, t_amb) = bench_input(&cfg).unwrap();
        g.bench_function(format!("240x320_x{scale}_{mode}"), |b| {
            b.iter(|| run_pipeline(black_box(&input), t_amb, &w.nuc, &w.sr).unwrap())
        });
    }
    g.finish();
}

fn super_resolution(c: &mut Criterion) {
    let cfg = BenchConfig::new(240, 320, 2, NucMode::Single);
    let w = bench_weights(&cfg).unwrap();
    let m = test_map(120, 160);
    c.bench_function("sr_x2_120x160", |b| b.iter(|| sr_forward(black_box(&m), &w.sr, 2).unwrap()));
}

criterion_group!(benches, conv, resample, super_resolution, pipeline);
criterion_main!(benches);
