//! Derivative-free pulse optimization: low-discrepancy multi-start sampling
//! followed by bounded Nelder-Mead descents.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{IntegratorSettings, JumpExpansion};
use crate::error::{Error, Result};
use crate::gates::{
    calibrate_wait, double_excitation, embed_two_qubit, interaction_schedule, sq_schedule, NamedGate, SqGateSpec, TqGateSpec,
};
use crate::ion_model::{DipoleCoupling, IonConfig};
use crate::metrics::{average_tq_error, clip_error, clip_tol, sq_cases, sq_report};
use crate::model::{build_two_ion_model, compile, SimulationModel};
use crate::pulse::{CutGaussianParams, Envelope, SechscanParams};
use crate::schedule::{GateSchedule, IonId, TargetIon, Tone};
use crate::spectral::{spectator_penalty, SpectatorPenaltySpec};

/// Optical separation of the two ions in TQ objectives (MHz).
pub const TQ_ION_SEPARATION: f64 = 10_000.0;

/// Least |ee> population the first interaction pulse must reach from |00>.
pub const MIN_DOUBLE_EXCITATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub bounds: Vec<(f64, f64)>,
    pub n_starts: usize,
    pub local_max_iters: usize,
    pub seed: u64,
    /// Descent stops once the simplex scores agree to this.
    pub tol: f64,
    /// Optional hand-picked start, used in addition to the sampled ones.
    pub initial: Option<Vec<f64>>,
}

impl SearchSpec {
    pub fn new(bounds: Vec<(f64, f64)>, seed: u64) -> Self {
        SearchSpec { bounds, n_starts: 32, local_max_iters: 500, seed, tol: 1e-6, initial: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::invalid("bounds", "no parameters"));
        }
        for &(lo, hi) in &self.bounds {
            if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
                return Err(Error::invalid("bounds", format!("[{lo}, {hi}] is not a finite nonempty interval")));
            }
        }
        if self.n_starts == 0 {
            return Err(Error::invalid("n_starts", "must be at least 1"));
        }
        if let Some(x) = &self.initial {
            if x.len() != self.bounds.len() {
                return Err(Error::invalid("initial", "length differs from bounds"));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol", "must be non-negative"));
        }
        Ok(())
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub params: Vec<f64>,
    /// `inf` when the objective failed at this point.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub params: Vec<f64>,
    pub score: f64,
    /// Every evaluation: the start samples first, then each descent in start order.
    pub trace: Vec<Evaluation>,
}

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Randomly shifted Halton points in the box.
pub fn halton_starts(bounds: &[(f64, f64)], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if bounds.len() > PRIMES.len() {
        return Err(Error::invalid("bounds", format!("at most {} parameters", PRIMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = bounds.iter().map(|_| rng.gen::<f64>()).collect();
    Ok((1..=n as u64)
        .map(|i| {
            bounds
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect())
}

fn eval<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64], trace: &mut Vec<Evaluation>) -> f64 {
    let s = match f(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    };
    trace.push(Evaluation { params: x.to_vec(), score: s });
    s
}

/// Nelder-Mead with every trial point clamped into the bounds.
fn nelder_mead<F: Fn(&[f64]) -> Result<f64>>(
    f: &F,
    x0: &[f64],
    f0: f64,
    search: &SearchSpec,
) -> (Vec<f64>, f64, Vec<Evaluation>) {
    let n = x0.len();
    let mut trace = Vec::new();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for d in 0..n {
        let (lo, hi) = search.bounds[d];
        let step = 0.1 * (hi - lo);
        let mut x = x0.to_vec();
        x[d] = if x[d] + step <= hi { x[d] + step } else { x[d] - step };
        search.clamp(&mut x);
        let fx = eval(f, &x, &mut trace);
        simplex.push((x, fx));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        let mut x: Vec<f64> = c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect();
        search.clamp(&mut x);
        x
    };
    for _ in 0..search.local_max_iters {
        order(&mut simplex);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= search.tol {
            break;
        }
        let mut c = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let w = simplex[n].0.clone();
        let xr = point(&c, &w, -1.0);
        let fr = eval(f, &xr, &mut trace);
        if fr < simplex[0].1 {
            let xe = point(&c, &w, -2.0);
            let fe = eval(f, &xe, &mut trace);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = point(&c, &w, -0.5);
                let fx = eval(f, &x, &mut trace);
                (x, fx)
            } else {
                let x = point(&c, &w, 0.5);
                let fx = eval(f, &x, &mut trace);
                (x, fx)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for k in 1..=n {
                    let x = point(&x0, &simplex[k].0, 0.5);
                    let fx = eval(f, &x, &mut trace);
                    simplex[k] = (x, fx);
                }
            }
        }
    }
    order(&mut simplex);
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, trace)
}

/// Minimizes `f` over the box. Failed evaluations score `inf`.
pub fn optimize<F>(f: F, search: &SearchSpec) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    search.validate()?;
    let mut starts = Vec::new();
    if let Some(x) = &search.initial {
        let mut x = x.clone();
        search.clamp(&mut x);
        starts.push(x);
    }
    let sampled = search.n_starts.saturating_sub(starts.len());
    starts.extend(halton_starts(&search.bounds, sampled, search.seed)?);
    let scores: Vec<f64> = starts
        .par_iter()
        .map(|x| match f(x) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        })
        .collect();
    let mut trace: Vec<Evaluation> =
        starts.iter().zip(&scores).map(|(x, &s)| Evaluation { params: x.clone(), score: s }).collect();
    let runs: Vec<(Vec<f64>, f64, Vec<Evaluation>)> = starts
        .par_iter()
        .zip(&scores)
        .map(|(x, &s)| if s.is_finite() { nelder_mead(&f, x, s, search) } else { (x.clone(), s, Vec::new()) })
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, s, t) in runs {
        trace.extend(t);
        if best.as_ref().map_or(true, |b| s < b.1) {
            best = Some((x, s));
        }
    }
    let (params, score) = best.unwrap();
    Ok(OptimizeResult { params, score, trace })
}

/// What a parameter vector describes and how it is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// (t_g, sigma) of the SQ cut Gaussian.
    Sq,
    /// (t_g, sigma, alpha_y in seconds).
    SqDrag,
    /// (t_g, t_fwhm, f_width, f_scan, omega0) at a dipole-dipole shift (MHz).
    Interaction { delta_nu: f64 },
    /// (t_g, sigma) of the single-color control pulse of the blockade gate.
    BlockadeControl,
}

impl ObjectiveKind {
    pub fn n_params(&self) -> usize {
        match self {
            ObjectiveKind::Sq | ObjectiveKind::BlockadeControl => 2,
            ObjectiveKind::SqDrag => 3,
            ObjectiveKind::Interaction { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub config: IonConfig,
    pub kind: ObjectiveKind,
    /// Spectator penalty, weighted equally with the gate term.
    pub isd: Option<SpectatorPenaltySpec>,
    pub settings: IntegratorSettings,
    /// Use a smaller averaging set for the gate term.
    pub reduced: bool,
}

/// Gate and spectator terms of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreParts {
    pub gate: f64,
    pub isd: f64,
    /// Exterior penalty, zero on the feasible set.
    pub excitation: f64,
}

impl ScoreParts {
    fn new(gate: f64, isd: f64) -> Self {
        ScoreParts { gate, isd, excitation: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.gate + self.isd + self.excitation
    }
}

const REDUCED_SQ_GATES: [NamedGate; 3] = [NamedGate::X, NamedGate::SqrtX, NamedGate::SqrtY];

fn sq_pulse(kind: ObjectiveKind, p: &[f64]) -> Result<CutGaussianParams> {
    let pulse = CutGaussianParams::new(p[0], p[1], PI / SQRT_2)?;
    Ok(match kind {
        ObjectiveKind::SqDrag => pulse.with_drag(p[2]),
        _ => pulse,
    })
}

pub fn sechscan_from(p: &[f64]) -> SechscanParams {
    SechscanParams { t_g: p[0], t_fwhm: p[1], f_width: p[2], f_scan: p[3], omega0: p[4] }
}

/// Interaction gate spec with its wait calibrated on `model`.
pub fn calibrated_interaction(
    hsh: SechscanParams,
    model: &SimulationModel,
    settings: &IntegratorSettings,
) -> Result<TqGateSpec> {
    let delta_nu = model.coupling.delta_nu;
    let mut spec = TqGateSpec::interaction(hsh, 0.0, delta_nu)?;
    spec.wait = calibrate_wait(&spec, model, settings)?;
    Ok(spec)
}

/// Two identical ions of `config`, far apart optically, with shift `delta_nu`.
pub fn tq_model(config: &IonConfig, delta_nu: f64) -> Result<SimulationModel> {
    build_two_ion_model(config, config, DipoleCoupling::new(delta_nu), TQ_ION_SEPARATION)
}

fn isd_term(spec: &Option<SpectatorPenaltySpec>, schedules: &[GateSchedule], config: &IonConfig) -> Result<f64> {
    let Some(isd) = spec else { return Ok(0.0) };
    let mut total = 0.0;
    for s in schedules {
        total += spectator_penalty(s, isd, config)?.penalty;
    }
    Ok(total / schedules.len() as f64)
}

/// Error of (|0>+|1>)(|0>+|1>)/2 under the interaction gate.
fn interaction_single_state(model: &SimulationModel, spec: &TqGateSpec, settings: &IntegratorSettings) -> Result<f64> {
    let qa = &model.ions[0].qubit;
    let qb = &model.ions[1].qubit;
    let (sched, u) = interaction_schedule(spec, qa, qb)?;
    let c = compile(model, &sched, 0.0)?;
    let h = C64::new(0.5, 0.0);
    let input = [h, h, h, h];
    let target = u * nalgebra::Vector4::from_column_slice(&input);
    let one = C64::new(1.0, 0.0);
    let psi = embed_two_qubit(model, &input)?;
    let t = embed_two_qubit(model, &[target[0], target[1], target[2], target[3]])?;
    let r = JumpExpansion::run(&c, &[psi], &[t], settings)?;
    clip_error(1.0 - r.fidelity(&[one], &[one]), clip_tol(settings))
}

/// Excitation and deexcitation halves of the control pulse on superpositions
/// of |0>,|1> and of |e>,|1> (six each).
fn control_pulse_error(config: &IonConfig, pulse: &CutGaussianParams, settings: &IntegratorSettings) -> Result<f64> {
    let model = SimulationModel::single(config);
    let lv = model.qubit_levels(0)?;
    let q = &config.qubit;
    let env = Envelope::CutGaussian(*pulse);
    let mut total = 0.0;
    let mut count = 0;
    for (phase, from) in [(0.0, lv.q0), (PI, lv.e)] {
        let sched = GateSchedule::new(TargetIon::A).pulse(vec![Tone::new(IonId::A, &q.q0, &q.e, phase, env)], pulse.t_g);
        let c = compile(&model, &sched, 0.0)?;
        let basis = |l: usize| {
            let mut v = vec![C64::new(0.0, 0.0); model.dim()];
            v[l] = C64::new(1.0, 0.0);
            v
        };
        let other = if from == lv.q0 { lv.e } else { lv.q0 };
        let r = JumpExpansion::run(&c, &[basis(from), basis(lv.q1)], &[basis(other), basis(lv.q1)], settings)?;
        // Ideal: |from> -> -i e^{+-i phase}|other>, |1> unchanged.
        let sign = if from == lv.q0 { 1.0 } else { -1.0 };
        let k = C64::new(0.0, -1.0) * C64::from_polar(1.0, sign * phase);
        for (_, [a, b]) in crate::metrics::bowdrey_states() {
            let f = r.fidelity(&[a, b], &[a * k, b]);
            total += clip_error(1.0 - f, clip_tol(settings))?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

impl ObjectiveSpec {
    pub fn validate(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.kind.n_params() {
            return Err(Error::invalid("params", format!("expected {} values", self.kind.n_params())));
        }
        Ok(())
    }

    /// Gate and spectator terms at `params`; `full` forces the complete
    /// averaging set.
    pub fn evaluate(&self, params: &[f64], full: bool) -> Result<ScoreParts> {
        self.validate(params)?;
        let reduced = self.reduced && !full;
        let cfg = &self.config;
        match self.kind {
            ObjectiveKind::Sq | ObjectiveKind::SqDrag => {
                let pulse = sq_pulse(self.kind, params)?;
                let model = SimulationModel::single(cfg);
                let gates: &[NamedGate] = if reduced { &REDUCED_SQ_GATES } else { &NamedGate::ALL };
                let gate = sq_report(&model, &sq_cases(&model, &pulse, gates), &self.settings)?.mean_error;
                let isd_gates: &[NamedGate] = if reduced { &[NamedGate::X] } else { &NamedGate::ALL };
                let schedules: Vec<GateSchedule> = isd_gates
                    .iter()
                    .map(|&g| sq_schedule(&SqGateSpec::named(g, pulse), IonId::A, &cfg.qubit))
                    .collect();
                Ok(ScoreParts::new(gate, isd_term(&self.isd, &schedules, cfg)?))
            }
            ObjectiveKind::Interaction { delta_nu } => {
                let model = tq_model(cfg, delta_nu)?;
                let spec = calibrated_interaction(sechscan_from(params), &model, &self.settings)?;
                // The gate works by exciting both ions; pulses too narrow to
                // reach |ee> through the shift are a different (blockade) gate.
                let excitation = (MIN_DOUBLE_EXCITATION - double_excitation(&spec, &model, &self.settings)?).max(0.0);
                let gate = if reduced {
                    interaction_single_state(&model, &spec, &self.settings)?
                } else {
                    average_tq_error(&model, &spec, &self.settings)?.mean_error
                };
                let (sched, _) = interaction_schedule(&spec, &cfg.qubit, &cfg.qubit)?;
                Ok(ScoreParts { gate, isd: isd_term(&self.isd, &[sched], cfg)?, excitation })
            }
            ObjectiveKind::BlockadeControl => {
                let pulse = CutGaussianParams::new(params[0], params[1], PI)?;
                let gate = control_pulse_error(cfg, &pulse, &self.settings)?;
                let env = Envelope::CutGaussian(pulse);
                let q = &cfg.qubit;
                let sched = GateSchedule::new(TargetIon::A)
                    .pulse(vec![Tone::new(IonId::A, &q.q0, &q.e, 0.0, env)], pulse.t_g);
                Ok(ScoreParts::new(gate, isd_term(&self.isd, &[sched], cfg)?))
            }
        }
    }
}

/// Gate term plus spectator term, equally weighted.
pub fn score(objective: &ObjectiveSpec, params: &[f64]) -> Result<f64> {
    Ok(objective.evaluate(params, false)?.total())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveResult {
    pub params: Vec<f64>,
    /// Score of the search (reduced set if enabled).
    pub search_score: f64,
    /// Terms at the optimum with the full averaging set.
    pub final_parts: ScoreParts,
    pub evaluations: usize,
}

/// Optimizes an objective and rescores the optimum with the full set.
pub fn optimize_objective(objective: &ObjectiveSpec, search: &SearchSpec) -> Result<(ObjectiveResult, OptimizeResult)> {
    if search.bounds.len() != objective.kind.n_params() {
        return Err(Error::invalid("bounds", format!("expected {} parameters", objective.kind.n_params())));
    }
    let r = optimize(|x| score(objective, x), search)?;
    if !r.score.is_finite() {
        return Err(Error::Invariant("no start point could be evaluated".into()));
    }
    let parts = objective.evaluate(&r.params, true)?;
    Ok((
        ObjectiveResult { params: r.params.clone(), search_score: r.score, final_parts: parts, evaluations: r.trace.len() },
        r,
    ))
}

/// Default search box for sechscan parameters.
pub fn interaction_bounds() -> Vec<(f64, f64)> {
    vec![(1.0, 2.5), (0.15, 0.5), (6.0, 18.0), (0.0, 3.0), (3.0, 7.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftOptimum {
    pub delta_nu: f64,
    pub params: SechscanParams,
    pub result: ObjectiveResult,
}

/// Separate sechscan optimization for every dipole-dipole shift. Shifts are
/// visited in order and each search also starts from the previous optimum.
pub fn optimize_interaction_per_shift(
    config: &IonConfig,
    shifts: &[f64],
    search: &SearchSpec,
    isd: Option<SpectatorPenaltySpec>,
    settings: &IntegratorSettings,
) -> Result<Vec<ShiftOptimum>> {
    let mut out: Vec<ShiftOptimum> = Vec::with_capacity(shifts.len());
    for &d in shifts {
        if !(d.abs() > 0.0) {
            return Err(Error::invalid("shift", "must be nonzero"));
        }
        let objective = ObjectiveSpec {
            config: config.clone(),
            kind: ObjectiveKind::Interaction { delta_nu: d },
            isd: isd.clone(),
            settings: *settings,
            reduced: true,
        };
        let mut search = search.clone();
        if let Some(prev) = out.last() {
            search.initial = Some(prev.result.params.clone());
        }
        let (res, _) = optimize_objective(&objective, &search)?;
        out.push(ShiftOptimum { delta_nu: d, params: sechscan_from(&res.params), result: res });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let mut s = SearchSpec::new(vec![(-2.0, 2.0), (-2.0, 2.0)], 7);
        s.n_starts = 4;
        s.tol = 1e-16;
        let r = optimize(|x| Ok((x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2)), &s).unwrap();
        assert!((r.params[0] - 0.3).abs() < 1e-6 && (r.params[1] + 0.7).abs() < 1e-6, "{:?}", r.params);
    }

    #[test]
    fn failures_score_infinite() {
        let mut s = SearchSpec::new(vec![(0.0, 1.0)], 1);
        s.n_starts = 3;
        s.local_max_iters = 20;
        let r = optimize(|x| if x[0] < 0.5 { Err(Error::Invariant("bad".into())) } else { Ok(x[0]) }, &s).unwrap();
        assert!(r.trace.iter().any(|e| e.score.is_infinite()));
        assert!((r.params[0] - 0.5).abs() < 1e-3);
    }
}
