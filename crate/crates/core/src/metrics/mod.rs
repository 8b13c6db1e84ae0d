//! Gate errors, averaging over the six Bloch-axis states, randomized gate
//! sequences, and per-gate error-rate fits.

mod benchmark;

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

pub use benchmark::{run_benchmark, BenchmarkOptions, BenchmarkResult, ChannelCache};

use crate::engine::{evolve_operators, unit_operator, DensityMatrix, IntegratorSettings, JumpExpansion};
use crate::error::{Error, Result};
use crate::gates::{
    blockade_schedule, embed_two_qubit, ideal_sq_unitary, interaction_schedule, sq_schedule, NamedGate, SqGateSpec,
    TqGateSpec, TqKind,
};
use crate::ion_model::ErrorSourceMask;
use crate::model::{compile, SimulationModel};
use crate::pulse::CutGaussianParams;
use crate::schedule::{GateSchedule, IonId};

/// Round-off allowance when clipping exact errors to [0, 1].
const CLIP_TOL: f64 = 1e-9;

/// Clipping allowance for errors of integrated states (global error is
/// about ten times the local tolerance).
pub(crate) fn clip_tol(settings: &IntegratorSettings) -> f64 {
    CLIP_TOL + 10.0 * settings.rel_tol.max(settings.abs_tol)
}

/// One (initial state, gate) point of an averaging grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    pub state: String,
    pub gate: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mean_error: f64,
    pub std_error: f64,
    pub samples: Vec<ErrorSample>,
}

impl ErrorReport {
    pub fn from_samples(samples: Vec<ErrorSample>) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().map(|s| s.error).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.error - mean).powi(2)).sum::<f64>() / n;
        ErrorReport { mean_error: mean, std_error: var.sqrt(), samples }
    }

    /// CSV with columns state, gate, error.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        out.write_record(["state", "gate", "error"]).map_err(io)?;
        for s in &self.samples {
            out.write_record([s.state.as_str(), s.gate.as_str(), &format!("{:.12e}", s.error)]).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Maps a raw error to [0, 1], tolerating round-off at the bounds.
pub(crate) fn clip_error(e: f64, tol: f64) -> Result<f64> {
    if !e.is_finite() || e < -tol || e > 1.0 + tol {
        return Err(Error::Invariant(format!("error {e} outside [0, 1]")));
    }
    Ok(e.clamp(0.0, 1.0))
}

/// `1 - <Psi|rho|Psi>` for a normalized target embedded in the full space.
pub fn state_error(rho: &DensityMatrix, target: &[C64]) -> Result<f64> {
    state_error_within(rho, target, CLIP_TOL)
}

/// `state_error` with an explicit clipping allowance.
pub fn state_error_within(rho: &DensityMatrix, target: &[C64], tol: f64) -> Result<f64> {
    if target.len() != rho.dim() {
        return Err(Error::invalid("target", "dimension does not match the state"));
    }
    let norm: f64 = target.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("target", format!("not normalized (norm^2 = {norm})")));
    }
    let f = rho.expectation(target);
    if f.im.abs() > tol {
        return Err(Error::Invariant(format!("fidelity has imaginary part {}", f.im)));
    }
    clip_error(1.0 - f.re, tol)
}

/// The six Bloch-axis states (a|0> + b|1>).
pub fn bowdrey_states() -> [(&'static str, [C64; 2]); 6] {
    let h = FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re, im);
    [
        ("0", [c(1.0, 0.0), c(0.0, 0.0)]),
        ("1", [c(0.0, 0.0), c(1.0, 0.0)]),
        ("+", [c(h, 0.0), c(h, 0.0)]),
        ("-", [c(h, 0.0), c(-h, 0.0)]),
        ("+i", [c(h, 0.0), c(0.0, h)]),
        ("-i", [c(h, 0.0), c(0.0, -h)]),
    ]
}

/// A gate to evaluate on one ion: label, schedule, ideal qubit unitary.
#[derive(Debug, Clone)]
pub struct SqCase {
    pub gate: String,
    pub schedule: GateSchedule,
    pub ideal: Matrix2<C64>,
}

/// SQ gate cases for a pulse shape.
pub fn sq_cases(model: &SimulationModel, pulse: &CutGaussianParams, gates: &[NamedGate]) -> Vec<SqCase> {
    gates
        .iter()
        .map(|&g| {
            let spec = SqGateSpec::named(g, *pulse);
            SqCase {
                gate: g.name().to_string(),
                schedule: sq_schedule(&spec, IonId::A, &model.ions[0].qubit),
                ideal: ideal_sq_unitary(spec.phi, spec.theta),
            }
        })
        .collect()
}

/// Errors of every Bloch-axis input for each case on a single-ion model.
///
/// Each gate is integrated once for |0><0|, |1><1| and |0><1|; the 6 input
/// states follow by linearity.
pub fn sq_report(model: &SimulationModel, cases: &[SqCase], settings: &IntegratorSettings) -> Result<ErrorReport> {
    if model.n_ions() != 1 {
        return Err(Error::invalid("model", "SQ averaging needs a single-ion model"));
    }
    let lv = model.qubit_levels(0)?;
    let dim = model.dim();
    let per_gate: Vec<Result<Vec<ErrorSample>>> = cases
        .par_iter()
        .map(|case| {
            let inputs = [unit_operator(dim, lv.q0, lv.q0), unit_operator(dim, lv.q1, lv.q1), unit_operator(dim, lv.q0, lv.q1)];
            let out = evolve_operators(model, &case.schedule, &inputs, settings, 0.0)?;
            let mut samples = Vec::with_capacity(6);
            for (name, [a, b]) in bowdrey_states() {
                let ab = a * b.conj();
                let rho: Vec<C64> = (0..dim * dim)
                    .map(|k| {
                        let (i, j) = (k / dim, k % dim);
                        out[0][k] * a.norm_sqr() + out[1][k] * b.norm_sqr() + out[2][k] * ab + (out[2][j * dim + i] * ab).conj()
                    })
                    .collect();
                let rho = DensityMatrix::from_row_major(dim, rho)?;
                let t = case.ideal * nalgebra::Vector2::new(a, b);
                let mut psi = vec![C64::new(0.0, 0.0); dim];
                psi[lv.q0] = t[0];
                psi[lv.q1] = t[1];
                samples.push(ErrorSample { state: name.to_string(), gate: case.gate.clone(), error: state_error_within(&rho, &psi, clip_tol(settings))? });
            }
            Ok(samples)
        })
        .collect();
    let mut samples = Vec::with_capacity(6 * cases.len());
    for r in per_gate {
        samples.extend(r?);
    }
    Ok(ErrorReport::from_samples(samples))
}

/// 6 states x 6 gates average for a cut-Gaussian SQ pulse.
pub fn average_sq_error(
    model: &SimulationModel,
    pulse: &CutGaussianParams,
    mask: ErrorSourceMask,
    settings: &IntegratorSettings,
) -> Result<ErrorReport> {
    let m = model.with_mask(mask);
    sq_report(&m, &sq_cases(&m, pulse, &NamedGate::ALL), settings)
}

/// 36 product states of the Bloch-axis set, for each schedule, with
/// fidelities from the first-order jump expansion.
pub fn tq_report(
    model: &SimulationModel,
    cases: &[(String, GateSchedule, Matrix4<C64>)],
    settings: &IntegratorSettings,
) -> Result<ErrorReport> {
    if model.n_ions() != 2 {
        return Err(Error::invalid("model", "TQ averaging needs a two-ion model"));
    }
    let one = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    let basis: Vec<Vec<C64>> = (0..4)
        .map(|k| {
            let mut a = [z; 4];
            a[k] = one;
            embed_two_qubit(model, &a)
        })
        .collect::<Result<_>>()?;
    let per_case: Vec<Result<Vec<ErrorSample>>> = cases
        .par_iter()
        .map(|(gate, sched, ideal)| {
            let c = compile(model, sched, 0.0)?;
            let r = JumpExpansion::run(&c, &basis, &basis, settings)?;
            let mut samples = Vec::with_capacity(36);
            for (na, a) in bowdrey_states() {
                for (nb, b) in bowdrey_states() {
                    let input = nalgebra::Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]);
                    let target = ideal * input;
                    let f = r.fidelity(input.as_slice(), target.as_slice());
                    samples.push(ErrorSample { state: format!("{na},{nb}"), gate: gate.clone(), error: clip_error(1.0 - f, clip_tol(settings))? });
                }
            }
            Ok(samples)
        })
        .collect();
    let mut samples = Vec::new();
    for r in per_case {
        samples.extend(r?);
    }
    Ok(ErrorReport::from_samples(samples))
}

/// Average TQ error. Blockade averages additionally over the six target
/// gates; the gate in `spec.target_gate` only supplies the pulse shape.
pub fn average_tq_error(model: &SimulationModel, spec: &TqGateSpec, settings: &IntegratorSettings) -> Result<ErrorReport> {
    let qa = &model.ions[0].qubit;
    let qb = &model.ions.get(1).ok_or_else(|| Error::invalid("model", "TQ averaging needs a two-ion model"))?.qubit;
    let mut cases = Vec::new();
    match spec.kind {
        TqKind::Blockade => {
            for g in NamedGate::ALL {
                let mut s = *spec;
                s.target_gate = SqGateSpec::named(g, spec.target_gate.pulse);
                let (sched, u) = blockade_schedule(&s, qa, qb)?;
                cases.push((g.name().to_string(), sched, u));
            }
        }
        TqKind::Interaction => {
            let (sched, u) = interaction_schedule(spec, qa, qb)?;
            cases.push(("CZ".to_string(), sched, u));
        }
    }
    tq_report(model, &cases, settings)
}

/// Closed form of the error recursion: `(1 - (1 - 2p)^n) / 2`.
pub fn closed_form_error(p: f64, n: usize) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * p).powi(n as i32))
}

/// Least-squares error rate p in [0, 0.5] for `eps[k]` at n = k + 1.
pub fn fit_error_rate(eps: &[f64]) -> Result<f64> {
    if eps.is_empty() {
        return Err(Error::invalid("epsilon_n", "sequence is empty"));
    }
    if eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("epsilon_n", "non-finite entry"));
    }
    if eps.iter().all(|&e| e == 0.0) {
        return Ok(0.0);
    }
    let cost = |p: f64| -> f64 {
        eps.iter().enumerate().map(|(k, &e)| (e - closed_form_error(p, k + 1)).powi(2)).sum()
    };
    // Coarse log grid, then golden section around the best grid point.
    let mut grid = vec![0.0];
    grid.extend((0..=300).map(|k| 0.5 * 10f64.powf(-15.0 * (1.0 - k as f64 / 300.0))));
    let best = (0..grid.len())
        .min_by(|&i, &j| cost(grid[i]).partial_cmp(&cost(grid[j])).unwrap())
        .unwrap();
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let mut p = 0.5 * (lo + hi);
    for cand in [grid[best], 0.0, 0.5] {
        if cost(cand) < cost(p) {
            p = cand;
        }
    }
    Ok(p.clamp(0.0, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_inverts_generator() {
        for p in [1e-5, 3.4e-4, 1e-3, 0.02] {
            let eps: Vec<f64> = (1..=1000).map(|n| closed_form_error(p, n)).collect();
            let fit = fit_error_rate(&eps).unwrap();
            assert!((fit - p).abs() < 1e-9 * p.max(1e-3), "{p} -> {fit}");
        }
    }

    #[test]
    fn fit_edges() {
        assert_eq!(fit_error_rate(&[0.0; 10]).unwrap(), 0.0);
        let p = fit_error_rate(&[0.5; 50]).unwrap();
        assert!(p > 0.49);
        assert!(fit_error_rate(&[]).is_err());
    }

    #[test]
    fn closed_form_value() {
        assert!((closed_form_error(3.4e-4, 1000) - 0.2467).abs() < 1e-3);
    }

    #[test]
    fn state_error_basics() {
        let h = FRAC_1_SQRT_2;
        let psi = [C64::new(h, 0.0), C64::new(0.0, h), C64::new(0.0, 0.0)];
        let rho = DensityMatrix::from_pure(&psi);
        assert!(state_error(&rho, &psi).unwrap().abs() < 1e-15);
        let mut mixed = vec![C64::new(0.0, 0.0); 9];
        mixed[0] = C64::new(0.5, 0.0);
        mixed[4] = C64::new(0.5, 0.0);
        let mixed = DensityMatrix::from_row_major(3, mixed).unwrap();
        assert!((state_error(&mixed, &psi).unwrap() - 0.5).abs() < 1e-15);
        assert!(state_error(&mixed, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).is_err());
    }
}
