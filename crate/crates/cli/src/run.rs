//! One handler per experiment kind. Handlers compute everything in memory
//! and return the artifacts; nothing touches the disk here.

use std::f64::consts::{PI, SQRT_2};

use reigate::gates::{ideal_sq_unitary, sq_schedule, HSH_3MHZ};
use reigate::metrics::{run_benchmark, BenchmarkOptions};
use reigate::metrics::{average_tq_error, bowdrey_states, closed_form_error, sq_cases, sq_report, state_error};
use reigate::optimize::{
    calibrated_interaction, optimize_objective, tq_model, ObjectiveKind, ObjectiveSpec, SearchSpec,
};
use reigate::sensitivity::{
    rabi_box, rabi_scale_grid, randomized_param_scan, tq_uncertainty_scan, PerturbationSpec, RetunePolicy, ScanAxis,
};
use reigate::spectral::{
    compute_transmission_windows, crosstalk_scan, find_spikes, fit_scaling_exponent, CrosstalkMode, CrosstalkScanSpec,
    IdleGate, ScanInitial, SpectatorPenaltySpec,
};
use reigate::{
    integrate_with, CutGaussianParams, DensityMatrix, ErrorSourceMask, IntegratorSettings, IonConfig, IonId, NamedGate,
    SimulationModel, SqGateSpec, TqGateSpec, TrajectoryOptions, C64,
};
use serde::Serialize;
use serde_json::json;

use crate::artifact::{csv_artifact, csv_body, json_artifact, num, Artifact, Metadata};
use crate::spec::{ExperimentSpec, Kind, MaskName, PulseBlock, SechscanBlock};
use crate::CliError;

pub struct Context<'a> {
    pub spec: &'a ExperimentSpec,
    pub config: IonConfig,
    pub settings: IntegratorSettings,
    pub seed: Option<u64>,
    pub meta: Metadata,
}

impl Context<'_> {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Spec(format!("`{}` is stochastic and needs a seed", self.meta.kind)))
    }
}

fn spec_err(msg: impl Into<String>) -> CliError {
    CliError::Spec(msg.into())
}

fn sq_pulse(b: &PulseBlock) -> Result<CutGaussianParams, CliError> {
    Ok(CutGaussianParams::new(b.t_g, b.sigma, PI / SQRT_2)?.with_drag(b.drag_alpha_y))
}

fn mask(m: MaskName) -> ErrorSourceMask {
    match m {
        MaskName::Physical => ErrorSourceMask::PHYSICAL,
        MaskName::DecayOnly => ErrorSourceMask::DECAY_ONLY,
        MaskName::CrosstalkOnly => ErrorSourceMask::CROSSTALK_ONLY,
        MaskName::Ideal => ErrorSourceMask::IDEAL,
    }
}

fn named_gate(s: &str) -> Result<NamedGate, CliError> {
    NamedGate::parse(s).ok_or_else(|| spec_err(format!("unknown gate `{s}`")))
}

pub fn run(kind: Kind, ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    match kind {
        Kind::Simulate => simulate(ctx),
        Kind::SqError => sq_error(ctx),
        Kind::Benchmark => benchmark(ctx),
        Kind::Crosstalk => crosstalk(ctx),
        Kind::TqError => tq_error(ctx),
        Kind::Optimize => optimize(ctx),
        Kind::Windows => windows(ctx),
        Kind::Sensitivity => sensitivity(ctx),
    }
}

fn simulate(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.simulate.as_ref().expect("checked");
    let pulse = sq_pulse(&b.pulse)?;
    let (phi, theta) = match (&b.gate, b.phi, b.theta) {
        (Some(g), None, None) => named_gate(g)?.angles(),
        (None, Some(p), Some(t)) => (p, t),
        _ => return Err(spec_err("simulate needs either `gate` or both `phi` and `theta`")),
    };
    let [a, c] = bowdrey_states()
        .into_iter()
        .find(|(n, _)| *n == b.initial)
        .ok_or_else(|| spec_err(format!("unknown initial state `{}`", b.initial)))?
        .1;
    let model = SimulationModel::single(&ctx.config).with_mask(mask(b.mask));
    let lv = model.qubit_levels(0)?;
    let gate = SqGateSpec { phi, theta, pulse };
    let sched = sq_schedule(&gate, IonId::A, &ctx.config.qubit);
    let mut psi = vec![C64::new(0.0, 0.0); model.dim()];
    psi[lv.q0] = a;
    psi[lv.q1] = c;
    let traj = integrate_with(
        &model,
        &sched,
        &DensityMatrix::from_pure(&psi),
        &ctx.settings,
        &TrajectoryOptions { samples: b.samples },
    )?;
    let u = ideal_sq_unitary(phi, theta);
    let mut target = vec![C64::new(0.0, 0.0); model.dim()];
    target[lv.q0] = u[(0, 0)] * a + u[(0, 1)] * c;
    target[lv.q1] = u[(1, 0)] * a + u[(1, 1)] * c;
    let fin = traj.final_state();
    let mut body = Vec::new();
    traj.write_csv(&mut body, &[(lv.q0, lv.q1), (lv.q0, lv.e), (lv.q1, lv.e)])?;
    let summary = json!({
        "phi": phi,
        "theta": theta,
        "duration_us": sched.duration(),
        "error": state_error(fin, &target)?,
        "final_populations": (0..model.dim()).map(|i| fin.population(i)).collect::<Vec<_>>(),
        "steps": traj.steps,
    });
    Ok(vec![csv_artifact("trajectory.csv", &ctx.meta, body)?, json_artifact("simulate.json", &ctx.meta, &summary)?])
}

fn sq_error(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.sq_error.as_ref().expect("checked");
    let pulse = sq_pulse(&b.pulse)?;
    let gates: Vec<NamedGate> = match &b.gates {
        Some(g) if g.is_empty() => return Err(spec_err("gates must not be empty")),
        Some(g) => g.iter().map(|s| named_gate(s)).collect::<Result<_, _>>()?,
        None => NamedGate::ALL.to_vec(),
    };
    let model = SimulationModel::single(&ctx.config).with_mask(mask(b.mask));
    let report = sq_report(&model, &sq_cases(&model, &pulse, &gates), &ctx.settings)?;
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    let summary = json!({
        "mean_error": report.mean_error,
        "std_error": report.std_error,
        "n_samples": report.samples.len(),
        "pulse": pulse,
    });
    Ok(vec![csv_artifact("sq_error.csv", &ctx.meta, body)?, json_artifact("sq_error.json", &ctx.meta, &summary)?])
}

fn benchmark(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.benchmark.as_ref().expect("checked");
    let seed = ctx.seed()?;
    let pulse = sq_pulse(&b.pulse)?;
    let model = SimulationModel::single(&ctx.config);
    let mut opts = BenchmarkOptions::new(b.n_gates, b.repeats, seed);
    opts.phase_grid = b.phase_grid;
    let r = run_benchmark(&model, &pulse, &opts, &ctx.settings)?;
    let mut body = Vec::new();
    r.write_csv(&mut body)?;
    let checkpoints: Vec<_> = [1usize, 10, 100, 500, 1000]
        .into_iter()
        .filter(|&n| n <= b.n_gates)
        .map(|n| {
            json!({
                "n": n,
                "mean": r.epsilon_n[n - 1],
                "std": r.epsilon_std[n - 1],
                "closed_form": closed_form_error(r.fitted_p, n),
            })
        })
        .collect();
    let summary = json!({ "fitted_p": r.fitted_p, "repeats": r.repeats, "n_gates": b.n_gates, "checkpoints": checkpoints });
    Ok(vec![csv_artifact("benchmark.csv", &ctx.meta, body)?, json_artifact("benchmark.json", &ctx.meta, &summary)?])
}

fn crosstalk(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.crosstalk.as_ref().expect("checked");
    let pulse = sq_pulse(&b.pulse)?;
    let mode = match b.mode.as_str() {
        "sequential" => CrosstalkMode::Sequential,
        "parallel" => CrosstalkMode::Parallel,
        m => return Err(spec_err(format!("unknown crosstalk mode `{m}`"))),
    };
    let idle_gate = match b.idle_gate.as_deref() {
        None => None,
        Some("none") => Some(IdleGate::None),
        Some("not") => Some(IdleGate::Not),
        Some(g) => return Err(spec_err(format!("unknown idle gate `{g}`"))),
    };
    let initial = match b.initial.as_str() {
        "qubit" => ScanInitial::Qubit,
        "aux" => ScanInitial::Aux,
        i => return Err(spec_err(format!("unknown scan initial state `{i}`"))),
    };
    let scan = CrosstalkScanSpec {
        detuning_grid: b.detunings_mhz.clone(),
        mode,
        idle_gate,
        initial,
        tolerances: ctx.settings,
    };
    scan.validate()?;
    let model = SimulationModel::single(&ctx.config);
    let points = crosstalk_scan(&model, &scan, &pulse)?;
    let body = csv_body(
        &["detuning_mhz", "mean_additional_error", "std", "reverse_error"],
        points.iter().map(|p| {
            vec![format!("{:.6}", p.detuning), num(p.mean_error), num(p.std_error), p.reverse_error.map(num).unwrap_or_default()]
        }),
    )?;
    // Slope over the positive far-detuned points, where the error is a clean power law.
    let far: Vec<_> = points.iter().filter(|p| (1000.0..=10000.0).contains(&p.detuning) && p.mean_error > 0.0).collect();
    let slope = if far.len() >= 4 {
        fit_scaling_exponent(&far.iter().map(|p| p.mean_error).collect::<Vec<_>>(), &far.iter().map(|p| p.detuning).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    let spikes = if initial == ScanInitial::Aux { Some(find_spikes(&points, 1e-3)) } else { None };
    let summary = json!({ "points": points.len(), "loglog_slope": slope, "spike_centers_mhz": spikes });
    Ok(vec![csv_artifact("crosstalk.csv", &ctx.meta, body)?, json_artifact("crosstalk.json", &ctx.meta, &summary)?])
}

fn tq_error(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.tq_error.as_ref().expect("checked");
    if b.delta_nu_mhz.is_empty() {
        return Err(spec_err("delta_nu_mhz must not be empty"));
    }
    let hsh = b.sechscan.map(Into::into).unwrap_or(HSH_3MHZ);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &d in &b.delta_nu_mhz {
        let model = tq_model(&ctx.config, d)?;
        let spec = match b.gate.as_str() {
            "blockade" => TqGateSpec::blockade(NamedGate::X, d)?,
            "interaction" => match b.wait_us {
                Some(w) => TqGateSpec::interaction(hsh, w, d)?,
                None => calibrated_interaction(hsh, &model, &ctx.settings)?,
            },
            g => return Err(spec_err(format!("unknown TQ gate `{g}`"))),
        };
        let r = average_tq_error(&model, &spec, &ctx.settings)?;
        rows.push(vec![format!("{d:.6}"), num(r.mean_error), num(r.std_error), format!("{:.9}", spec.wait)]);
        summary.push(json!({ "delta_nu_mhz": d, "mean_error": r.mean_error, "std_error": r.std_error, "wait_us": spec.wait }));
    }
    let body = csv_body(&["delta_nu_mhz", "mean_error", "std_error", "wait_us"], rows)?;
    Ok(vec![csv_artifact("tq_error.csv", &ctx.meta, body)?, json_artifact("tq_error.json", &ctx.meta, &summary)?])
}

#[derive(Serialize)]
struct OptimizeSummary {
    params: Vec<f64>,
    score: f64,
    search_score: f64,
    gate_term: f64,
    isd_term: f64,
    excitation_term: f64,
    trace_length: usize,
    n_starts: usize,
    local_max_iters: usize,
}

fn optimize(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.optimize.as_ref().expect("checked");
    let seed = ctx.seed()?;
    let kind = match b.objective.as_str() {
        "sq" => ObjectiveKind::Sq,
        "sq_drag" => ObjectiveKind::SqDrag,
        "blockade_control" => ObjectiveKind::BlockadeControl,
        "interaction" => ObjectiveKind::Interaction {
            delta_nu: b.delta_nu_mhz.ok_or_else(|| spec_err("interaction objective needs delta_nu_mhz"))?,
        },
        o => return Err(spec_err(format!("unknown objective `{o}`"))),
    };
    let mut search = SearchSpec::new(b.bounds.iter().map(|&[lo, hi]| (lo, hi)).collect(), seed);
    search.n_starts = b.n_starts;
    search.local_max_iters = b.local_max_iters;
    search.tol = b.tol;
    search.initial = b.initial.clone();
    search.validate()?;
    let objective = ObjectiveSpec {
        config: ctx.config.clone(),
        kind,
        isd: b.isd.then(SpectatorPenaltySpec::default),
        settings: ctx.settings,
        reduced: b.reduced,
    };
    let (res, opt) = optimize_objective(&objective, &search)?;
    ctx.meta.notes.push(format!("budget: {} starts, {} local iterations", b.n_starts, b.local_max_iters));
    let summary = OptimizeSummary {
        params: res.params.clone(),
        score: res.final_parts.total(),
        search_score: res.search_score,
        gate_term: res.final_parts.gate,
        isd_term: res.final_parts.isd,
        excitation_term: res.final_parts.excitation,
        trace_length: opt.trace.len(),
        n_starts: b.n_starts,
        local_max_iters: b.local_max_iters,
    };
    let body = csv_body(
        &["eval", "score", "params"],
        opt.trace.iter().enumerate().map(|(i, e)| {
            vec![i.to_string(), num(e.score), e.params.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")]
        }),
    )?;
    Ok(vec![json_artifact("optimize.json", &ctx.meta, &summary)?, csv_artifact("optimize_trace.csv", &ctx.meta, body)?])
}

fn windows(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let span = ctx.spec.windows.as_ref().map(|w| w.span_mhz).unwrap_or(2000.0);
    if !(span > 0.0) {
        return Err(spec_err("span_mhz must be positive"));
    }
    let r = compute_transmission_windows(&ctx.config.scheme, &ctx.config.qubit, span)?;
    Ok(vec![json_artifact("windows.json", &ctx.meta, &r)?])
}

fn policies(name: &str) -> Result<Vec<(&'static str, RetunePolicy)>, CliError> {
    Ok(match name {
        "blind" => vec![("blind", RetunePolicy::blind())],
        "retuned" => vec![("retuned", RetunePolicy::retuned())],
        "both" => vec![("blind", RetunePolicy::blind()), ("retuned", RetunePolicy::retuned())],
        p => return Err(spec_err(format!("unknown policy `{p}`"))),
    })
}

fn sensitivity(ctx: &mut Context) -> Result<Vec<Artifact>, CliError> {
    let b = ctx.spec.sensitivity.as_ref().expect("checked");
    let pulse = sq_pulse(&b.pulse)?;
    let with_residuals = |mut p: RetunePolicy| {
        p.rabi_residual = b.rabi_residual;
        p.freq_residual_khz = b.freq_residual_khz;
        p
    };
    match b.analysis.as_str() {
        "rabi_grid" => {
            let model = SimulationModel::single(&ctx.config);
            let pts = rabi_scale_grid(&model, &pulse, &rabi_box(b.rabi_box, b.rabi_box_points), &ctx.settings)?;
            let body = csv_body(
                &["rabi_scale_0", "rabi_scale_1", "mean_error"],
                pts.iter().map(|p| vec![format!("{:.6}", p.s0), format!("{:.6}", p.s1), num(p.mean_error)]),
            )?;
            let max = pts.iter().map(|p| p.mean_error).fold(0.0, f64::max);
            let summary = json!({ "max_error": max, "points": pts });
            Ok(vec![csv_artifact("sensitivity.csv", &ctx.meta, body)?, json_artifact("sensitivity.json", &ctx.meta, &summary)?])
        }
        "osc_strength" | "splitting" => {
            let seed = ctx.seed()?;
            if b.axis_values.is_empty() {
                return Err(spec_err("axis_values must not be empty"));
            }
            let axis = if b.analysis == "splitting" { ScanAxis::Splitting } else { ScanAxis::OscStrength };
            let spec = PerturbationSpec {
                rabi_scale: (1.0, 1.0),
                osc_strength_max_dev: b.osc_strength_max_dev,
                splitting_max_dev_khz: b.splitting_max_dev_khz,
                n_draws: b.draws,
                seed,
            };
            ctx.meta.notes.push("oscillator strengths clipped to [0, 1], not renormalized".into());
            let mut rows = Vec::new();
            let mut summary = Vec::new();
            for (name, p) in policies(&b.policy)? {
                let r = randomized_param_scan(&ctx.config, &pulse, &spec, axis, &b.axis_values, &with_residuals(p), &ctx.settings)?;
                for d in &r.records {
                    rows.push(vec![name.to_string(), format!("{}", d.axis_value), d.draw.to_string(), num(d.error)]);
                }
                summary.push(json!({ "policy": name, "means": r.means }));
            }
            let body = csv_body(&["policy", "axis_value", "draw", "error"], rows)?;
            Ok(vec![csv_artifact("sensitivity.csv", &ctx.meta, body)?, json_artifact("sensitivity.json", &ctx.meta, &summary)?])
        }
        "tq" => {
            let seed = ctx.seed()?;
            let hsh = b.sechscan.map(|s: SechscanBlock| s.into()).unwrap_or(HSH_3MHZ);
            let gates = b
                .delta_nu_mhz
                .iter()
                .map(|&d| match b.gate.as_deref() {
                    Some("blockade") => Ok(TqGateSpec::blockade(NamedGate::X, d)?),
                    Some("interaction") => {
                        let model = tq_model(&ctx.config, d)?;
                        Ok(calibrated_interaction(hsh, &model, &ctx.settings)?)
                    }
                    _ => Err(spec_err("tq sensitivity needs gate = blockade | interaction")),
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            if gates.is_empty() {
                return Err(spec_err("delta_nu_mhz must not be empty"));
            }
            let spec = PerturbationSpec {
                rabi_scale: (1.0, 1.0),
                osc_strength_max_dev: b.osc_strength_max_dev,
                splitting_max_dev_khz: b.splitting_max_dev_khz,
                n_draws: b.draws,
                seed,
            };
            let pts = tq_uncertainty_scan(&ctx.config, &gates, &spec, &with_residuals(RetunePolicy::retuned()), &ctx.settings)?;
            let mut rows = Vec::new();
            for p in &pts {
                for (k, e) in p.draws.iter().enumerate() {
                    rows.push(vec![format!("{:.6}", p.delta_nu), k.to_string(), num(*e)]);
                }
            }
            let body = csv_body(&["delta_nu_mhz", "draw", "error"], rows)?;
            let summary: Vec<_> = pts
                .iter()
                .map(|p| json!({ "delta_nu_mhz": p.delta_nu, "mean_error": p.mean_error, "std_error": p.std_error }))
                .collect();
            Ok(vec![csv_artifact("sensitivity.csv", &ctx.meta, body)?, json_artifact("sensitivity.json", &ctx.meta, &summary)?])
        }
        a => Err(spec_err(format!("unknown sensitivity analysis `{a}`"))),
    }
}
