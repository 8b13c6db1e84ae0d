use std::f64::consts::{PI, SQRT_2};

use reigate::gates::{embed_two_qubit, interaction_schedule, sq_schedule, HSH_3MHZ};
use reigate::metrics::{state_error, ChannelCache};
use reigate::optimize::{calibrated_interaction, tq_model};
use reigate::sensitivity::{randomized_param_scan, PerturbationSpec, RetunePolicy, ScanAxis};
use reigate::spectral::windows_from_lines;
use reigate::*;

fn sq_pulse() -> CutGaussianParams {
    CutGaussianParams::new(1.68, 4.16, PI / SQRT_2).unwrap()
}

#[test]
fn channel_cache_matches_direct_integration() {
    let cfg = default_ion_config();
    let model = SimulationModel::single(&cfg);
    let pulse = sq_pulse();
    let s = IntegratorSettings::with_tol(1e-10);
    let cache = ChannelCache::build(&model, &pulse, &s, 15).unwrap();
    let gates = [(0.3, 2.0), (4.1, 0.7), (1.9, PI), (5.5, 1.3)];
    let lv = model.qubit_levels(0).unwrap();
    let mut psi = vec![C64::new(0.0, 0.0); 6];
    psi[lv.q0] = C64::new(0.6, 0.0);
    psi[lv.q1] = C64::new(0.0, 0.8);
    let rho0 = DensityMatrix::from_pure(&psi);

    let mut sched = GateSchedule::new(TargetIon::A);
    for &(phi, theta) in &gates {
        sched = sched.then(sq_schedule(&SqGateSpec { phi, theta, pulse }, IonId::A, &cfg.qubit));
    }
    let direct = final_state(&model, &sched, &rho0, &s).unwrap();

    let mut rho = rho0.as_slice().to_vec();
    let step = 2.0 * cache.pulse_duration();
    for (k, &(phi, theta)) in gates.iter().enumerate() {
        cache.apply_gate(&mut rho, k as f64 * step, phi, theta);
    }
    let diff = rho.iter().zip(direct.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-7, "max entry difference {diff:e}");
}

/// First-order jump expansion against the full two-ion density matrix.
#[test]
fn jump_expansion_matches_full_lindblad() {
    let cfg = default_ion_config();
    let model = tq_model(&cfg, 3.0).unwrap();
    let s = IntegratorSettings { rel_tol: 1e-9, abs_tol: 1e-11, max_step: f64::INFINITY };
    let spec = calibrated_interaction(HSH_3MHZ, &model, &s).unwrap();
    let (sched, u) = interaction_schedule(&spec, &cfg.qubit, &cfg.qubit).unwrap();
    let h = C64::new(0.5, 0.0);
    let input = [h, h, h, h];
    let t = u * nalgebra::Vector4::from_column_slice(&input);
    let psi = embed_two_qubit(&model, &input).unwrap();
    let target = embed_two_qubit(&model, &[t[0], t[1], t[2], t[3]]).unwrap();

    let full = final_state(&model, &sched, &DensityMatrix::from_pure(&psi), &s).unwrap();
    let full_error = state_error(&full, &target).unwrap();

    let c = compile(&model, &sched, 0.0).unwrap();
    let r = JumpExpansion::run(&c, &[psi], &[target], &s).unwrap();
    let one = C64::new(1.0, 0.0);
    let jump_error = 1.0 - r.fidelity(&[one], &[one]);
    assert!(full_error > 1e-4);
    assert!((full_error - jump_error).abs() < 1e-5 + 0.01 * full_error, "full {full_error:e} jump {jump_error:e}");
}

#[test]
fn state_error_of_pure_states() {
    let a = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let th: f64 = 0.37;
    let b = [C64::new(th.cos(), 0.0), C64::new(0.0, th.sin())];
    let e = state_error(&DensityMatrix::from_pure(&a), &b).unwrap();
    assert!((e - th.sin().powi(2)).abs() < 1e-14);
}

/// Brute-force windows on a 5 kHz grid of ion offsets against the exact
/// piecewise computation.
#[test]
fn windows_match_dense_grid() {
    let cfg = default_ion_config();
    let sc = &cfg.scheme;
    let lv = sc.qubit_levels(&cfg.qubit).unwrap();
    let f = [sc.transition_mhz(lv.q0, lv.e), sc.transition_mhz(lv.q1, lv.e)];
    let lines: Vec<Vec<f64>> =
        (0..3).map(|g| (3..6).filter(|&e| sc.strength(g, e) > 0.0).map(|e| sc.transition_mhz(g, e)).collect()).collect();
    let span = 400.0;
    let mut low = [-span / 2.0; 2];
    let mut high = [span / 2.0; 2];
    let n = (span / 0.005) as i64;
    for k in 0..=n {
        let x = -span / 2.0 + 0.005 * k as f64 + 0.0013;
        let key = |g: usize| {
            let d: Vec<f64> = lines[g].iter().flat_map(|t| f.iter().map(move |q| (x + t - q).abs())).collect();
            (d.iter().cloned().fold(f64::INFINITY, f64::min), d.iter().sum::<f64>())
        };
        let g = (0..3)
            .max_by(|&a, &b| {
                let (ka, kb) = (key(a), key(b));
                ka.0.partial_cmp(&kb.0).unwrap().then(ka.1.partial_cmp(&kb.1).unwrap())
            })
            .unwrap();
        for t in &lines[g] {
            for q in 0..2 {
                let d = x + t - f[q];
                if d < 0.0 {
                    low[q] = low[q].max(d);
                } else {
                    high[q] = high[q].min(d);
                }
            }
        }
    }
    let (w0, w1) = windows_from_lines(&lines, f[0], f[1], span).unwrap();
    for (exact, grid) in [(w0.0, low[0]), (w0.1, high[0]), (w1.0, low[1]), (w1.1, high[1])] {
        assert!((exact - grid).abs() < 0.01, "exact {exact} grid {grid}");
    }
}

#[test]
fn sensitivity_scan_without_perturbation_is_baseline() {
    let cfg = default_ion_config();
    let s = IntegratorSettings::with_tol(1e-7);
    let model = SimulationModel::single(&cfg);
    let base = reigate::metrics::average_sq_error(&model, &sq_pulse(), ErrorSourceMask::PHYSICAL, &s).unwrap().mean_error;
    let mut spec = PerturbationSpec::new(3);
    spec.n_draws = 2;
    let blind = randomized_param_scan(&cfg, &sq_pulse(), &spec, ScanAxis::Splitting, &[0.0], &RetunePolicy::blind(), &s).unwrap();
    for r in &blind.records {
        assert!((r.error - base).abs() < 1e-12);
    }
    let mut exact = RetunePolicy::retuned();
    exact.rabi_residual = 0.0;
    exact.freq_residual_khz = 0.0;
    let retuned = randomized_param_scan(&cfg, &sq_pulse(), &spec, ScanAxis::OscStrength, &[0.0], &exact, &s).unwrap();
    for r in &retuned.records {
        assert!((r.error - base).abs() < 1e-12);
    }
    let again = randomized_param_scan(&cfg, &sq_pulse(), &spec, ScanAxis::Splitting, &[5.0], &RetunePolicy::retuned(), &s).unwrap();
    let again2 = randomized_param_scan(&cfg, &sq_pulse(), &spec, ScanAxis::Splitting, &[5.0], &RetunePolicy::retuned(), &s).unwrap();
    assert_eq!(again, again2);
}

#[test]
fn double_excitation_needs_bandwidth_covering_shift() {
    let cfg = default_ion_config();
    let s = IntegratorSettings::with_tol(1e-8);
    let p = |d: f64| {
        let model = tq_model(&cfg, d).unwrap();
        let spec = TqGateSpec::interaction(HSH_3MHZ, 0.0, d).unwrap();
        reigate::gates::double_excitation(&spec, &model, &s).unwrap()
    };
    assert!(p(3.0) > 0.99);
    assert!(p(12.0) < 0.01);
}
