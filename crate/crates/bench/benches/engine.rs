use std::f64::consts::{PI, SQRT_2};

use criterion::{criterion_group, criterion_main, Criterion};
use reigate::gates::{embed_two_qubit, interaction_schedule, sq_schedule, HSH_3MHZ};
use reigate::metrics::ChannelCache;
use reigate::optimize::tq_model;
use reigate::spectral::compute_transmission_windows;
use reigate::*;

fn sq_gate(c: &mut Criterion) {
    let cfg = default_ion_config();
    let model = SimulationModel::single(&cfg);
    let pulse = CutGaussianParams::new(1.68, 4.16, PI / SQRT_2).unwrap();
    let sched = sq_schedule(&SqGateSpec::named(NamedGate::X, pulse), IonId::A, &cfg.qubit);
    let lv = model.qubit_levels(0).unwrap();
    let rho0 = DensityMatrix::basis(model.dim(), lv.q0);
    let mut g = c.benchmark_group("sq_gate");
    g.sample_size(20);
    for tol in [1e-6, 1e-8] {
        let s = IntegratorSettings::with_tol(tol);
        g.bench_function(format!("lindblad_x_gate_tol{tol:e}"), |b| b.iter(|| final_state(&model, &sched, &rho0, &s).unwrap()));
    }
    g.finish();
}

fn interaction_pure(c: &mut Criterion) {
    let cfg = default_ion_config();
    let model = tq_model(&cfg, 3.0).unwrap();
    let spec = TqGateSpec::interaction(HSH_3MHZ, 0.3, 3.0).unwrap();
    let (sched, _) = interaction_schedule(&spec, &cfg.qubit, &cfg.qubit).unwrap();
    let compiled = compile(&model, &sched, 0.0).unwrap();
    let psi = embed_two_qubit(&model, &[C64::new(0.5, 0.0); 4]).unwrap();
    let s = IntegratorSettings::with_tol(1e-8);
    let mut g = c.benchmark_group("two_ion");
    g.sample_size(10);
    g.bench_function("interaction_no_jump", |b| b.iter(|| reigate::engine::evolve_pure(&compiled, &[psi.clone()], &s).unwrap()));
    g.finish();
}

fn channel_cache(c: &mut Criterion) {
    let cfg = default_ion_config();
    let model = SimulationModel::single(&cfg);
    let pulse = CutGaussianParams::new(1.68, 4.16, PI / SQRT_2).unwrap();
    let cache = ChannelCache::build(&model, &pulse, &IntegratorSettings::with_tol(1e-8), 7).unwrap();
    let dim = model.dim();
    let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
    rho[0] = C64::new(1.0, 0.0);
    c.bench_function("channel_cache_apply_gate", |b| {
        b.iter(|| {
            let mut r = rho.clone();
            cache.apply_gate(&mut r, 0.0, 0.7, 1.1);
            r
        })
    });
}

fn windows(c: &mut Criterion) {
    let cfg = default_ion_config();
    c.bench_function("transmission_windows", |b| {
        b.iter(|| compute_transmission_windows(&cfg.scheme, &cfg.qubit, 2000.0).unwrap())
    });
}

criterion_group!(benches, sq_gate, interaction_pure, channel_cache, windows);
criterion_main!(benches);
