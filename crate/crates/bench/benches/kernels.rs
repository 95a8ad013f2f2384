use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use umsa_bench::{ou_fixture, OU_THETA};
use umsa_core::sde::{bridge_log_weight, fill_increments, BridgeWorkspace};
use umsa_core::{
    ccpf_bs_sweep, coupled_initial_trajectory, cpf_bs_sweep, initial_trajectory, rng_from_seed, MaxCoupling,
    Variant,
};

fn bridge_weight(c: &mut Criterion) {
    let (model, data) = ou_fixture();
    let mut g = c.benchmark_group("bridge_log_weight");
    for level in [4u32, 8] {
        let seg = data.segment(1, level);
        let mut w = vec![0.0; seg.n_steps];
        fill_increments(&mut w, seg.step(), &mut rng_from_seed(1));
        let mut ws = BridgeWorkspace::new(1);
        g.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, _| {
            b.iter(|| bridge_log_weight(&model, &OU_THETA, &seg, &[0.1], &[-0.4], black_box(&w), &mut ws).unwrap())
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let (model, data) = ou_fixture();
    let mut rng = rng_from_seed(2);
    let mut g = c.benchmark_group("sweep");
    g.sample_size(20);
    for level in [4u32, 6] {
        let z = initial_trajectory(&model, &OU_THETA, &data, level, &mut rng).unwrap();
        g.bench_with_input(BenchmarkId::new("cpf", level), &level, |b, &l| {
            b.iter(|| cpf_bs_sweep(&model, &OU_THETA, l, &z, &data, 50, &mut rng, Variant::Backward).unwrap())
        });
        let v = coupled_initial_trajectory(&model, &OU_THETA, &data, level, &mut rng).unwrap();
        g.bench_with_input(BenchmarkId::new("ccpf", level), &level, |b, _| {
            b.iter(|| ccpf_bs_sweep(&model, &OU_THETA, &OU_THETA, &v, &data, 50, &mut rng, Variant::Backward).unwrap())
        });
    }
    g.finish();
}

fn max_coupling(c: &mut Criterion) {
    let n = 50;
    let raw1: Vec<f64> = (0..n).map(|k| 1.0 + (k as f64 * 0.37).sin().abs()).collect();
    let raw2: Vec<f64> = (0..n).map(|k| 1.0 + (k as f64 * 0.41).cos().abs()).collect();
    let (s1, s2): (f64, f64) = (raw1.iter().sum(), raw2.iter().sum());
    let r1: Vec<f64> = raw1.iter().map(|x| x / s1).collect();
    let r2: Vec<f64> = raw2.iter().map(|x| x / s2).collect();
    let mut rng = rng_from_seed(3);
    c.bench_function("max_coupling/build", |b| b.iter(|| MaxCoupling::new(black_box(&r1), black_box(&r2))));
    let mc = MaxCoupling::new(&r1, &r2);
    c.bench_function("max_coupling/sample", |b| b.iter(|| mc.sample(&mut rng)));
}

criterion_group!(benches, bridge_weight, sweeps, max_coupling);
criterion_main!(benches);
