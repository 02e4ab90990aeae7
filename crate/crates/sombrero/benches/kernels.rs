//! Parallel vs sequential throughput of the data-parallel kernels.
//!
//! The `_seq` twins are always compiled, so one `cargo bench` run compares
//! both paths directly; building with `--no-default-features` additionally
//! turns the dispatched path itself sequential for an end-to-end check.

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64 as C64;
use sombrero::fft::Fft2;
use sombrero::grid::GridSpec;
use sombrero::model::{make_initial, GaussianSpec, ModelParams};
use sombrero::par;
use sombrero::propagate::{MonitorConfig, RunState, StepScheme, Stepper};
use std::hint::black_box;

fn field_data(n: usize) -> Vec<C64> {
    (0..n * n)
        .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect()
}

fn bench_fft2(c: &mut Criterion) {
    let n = 256;
    let fft = Fft2::new(n, n);
    let data = field_data(n);
    let mut group = c.benchmark_group("fft2_256");
    group.bench_function("dispatched", |b| {
        let mut d = data.clone();
        let mut scratch = Vec::new();
        b.iter(|| {
            fft.forward(&mut d, &mut scratch);
            fft.inverse(&mut d, &mut scratch);
            black_box(d[0]);
        })
    });
    group.bench_function("sequential", |b| {
        let mut d = data.clone();
        let mut scratch = Vec::new();
        b.iter(|| {
            fft.forward_seq(&mut d, &mut scratch);
            fft.inverse_seq(&mut d, &mut scratch);
            black_box(d[0]);
        })
    });
    group.finish();
}

fn bench_pointwise(c: &mut Criterion) {
    let n = 256;
    let table: Vec<C64> = (0..n * n)
        .map(|i| C64::from_polar(1.0, (i as f64 * 0.013).sin()))
        .collect();
    let data = field_data(n);
    let block = par::BLOCK_ROWS * n;
    let mut group = c.benchmark_group("phase_apply_256");
    group.bench_function("dispatched", |b| {
        let mut d = data.clone();
        b.iter(|| {
            par::for_each_block_mut(&mut d, block, |start, chunk| {
                for (i, z) in chunk.iter_mut().enumerate() {
                    *z *= table[start + i];
                }
            });
            black_box(d[0]);
        })
    });
    group.bench_function("sequential", |b| {
        let mut d = data.clone();
        b.iter(|| {
            par::for_each_block_mut_seq(&mut d, block, |start, chunk| {
                for (i, z) in chunk.iter_mut().enumerate() {
                    *z *= table[start + i];
                }
            });
            black_box(d[0]);
        })
    });
    group.finish();
}

fn bench_reduction(c: &mut Criterion) {
    let n = 256;
    let data = field_data(n);
    let block = par::BLOCK_ROWS * n;
    let mut group = c.benchmark_group("norm_reduce_256");
    group.bench_function("dispatched", |b| {
        b.iter(|| {
            let s: f64 = par::sum_blocks(&data, block, |_, c| {
                c.iter().map(|z| z.norm_sqr()).sum::<f64>()
            });
            black_box(s);
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let s: f64 = par::sum_blocks_seq(&data, block, |_, c| {
                c.iter().map(|z| z.norm_sqr()).sum::<f64>()
            });
            black_box(s);
        })
    });
    group.finish();
}

fn bench_full_step(c: &mut Criterion) {
    let grid = GridSpec::default_grid();
    let params = ModelParams::isotropic(4.0, 0.0).unwrap();
    let field = make_initial(&GaussianSpec::lower_pair(0.0, -3.0, -4.0, 0.0, 1.0), &grid).unwrap();
    let state = RunState::new(field, StepScheme::default_strang(), params).unwrap();
    let mut group = c.benchmark_group("full_step_256");
    group.bench_function("strang_g0", |b| {
        let mut st = state.clone();
        let mut stepper = Stepper::full_model(&st, MonitorConfig::default()).unwrap();
        b.iter(|| {
            stepper.step(&mut st).unwrap();
            black_box(st.tau);
        })
    });
    let params_g = ModelParams::isotropic(4.0, 0.25).unwrap();
    let field = make_initial(&GaussianSpec::lower_pair(0.0, -3.0, -4.0, 0.0, 1.0), &grid).unwrap();
    let state_g = RunState::new(field, StepScheme::default_strang(), params_g).unwrap();
    group.bench_function("strang_g0.25", |b| {
        let mut st = state_g.clone();
        let mut stepper = Stepper::full_model(&st, MonitorConfig::default()).unwrap();
        b.iter(|| {
            stepper.step(&mut st).unwrap();
            black_box(st.tau);
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_fft2,
    bench_pointwise,
    bench_reduction,
    bench_full_step
);
criterion_main!(benches);
