//! Gate error under Rabi-amplitude errors and uncertain level data, with
//! pulses built either from the nominal data (blind) or retuned to the
//! perturbed system up to small residuals.

use nalgebra::Vector4;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{IntegratorSettings, JumpExpansion};
use crate::error::{Error, Result};
use crate::gates::{blockade_schedule, embed_two_qubit, interaction_schedule, TqGateSpec, TqKind};
use crate::ion_model::{IonConfig, LevelScheme};
use crate::metrics::{clip_error, clip_tol, sq_cases, sq_report, SqCase};
use crate::model::{compile, SimulationModel};
use crate::optimize::tq_model;
use crate::pulse::CutGaussianParams;
use crate::schedule::GateSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec {
    /// Multiplies the Rabi frequencies of the |0> and |1> tones.
    pub rabi_scale: (f64, f64),
    /// Largest absolute change of an oscillator strength.
    pub osc_strength_max_dev: f64,
    /// Largest change of a level splitting (kHz).
    pub splitting_max_dev_khz: f64,
    pub n_draws: usize,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(seed: u64) -> Self {
        PerturbationSpec { rabi_scale: (1.0, 1.0), osc_strength_max_dev: 0.0, splitting_max_dev_khz: 0.0, n_draws: 100, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_scale.0 > 0.0 && self.rabi_scale.1 > 0.0) {
            return Err(Error::invalid("rabi_scale", "scales must be positive"));
        }
        if !(self.osc_strength_max_dev >= 0.0) || !(self.splitting_max_dev_khz >= 0.0) {
            return Err(Error::invalid("deviation", "must be non-negative"));
        }
        if self.n_draws == 0 {
            return Err(Error::invalid("n_draws", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RetuneMode {
    /// Pulses built from the nominal level data.
    Blind,
    /// Frequencies and amplitudes re-derived for the perturbed system.
    Retuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetunePolicy {
    pub mode: RetuneMode,
    /// Relative amplitude residual after retuning.
    pub rabi_residual: f64,
    /// Frequency residual after retuning (kHz).
    pub freq_residual_khz: f64,
}

impl RetunePolicy {
    pub fn blind() -> Self {
        RetunePolicy { mode: RetuneMode::Blind, rabi_residual: 0.005, freq_residual_khz: 1.0 }
    }

    pub fn retuned() -> Self {
        RetunePolicy { mode: RetuneMode::Retuned, ..Self::blind() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_residual >= 0.0) || !(self.freq_residual_khz >= 0.0) {
            return Err(Error::invalid("residual", "must be non-negative"));
        }
        Ok(())
    }
}

/// Uniform draw in [-1, 1].
fn sym(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.gen::<f64>() - 1.0
}

/// Level data with every oscillator strength and every splitting between
/// neighbouring levels of a manifold shifted independently. Strengths are
/// clipped to [0, 1] and not renormalized.
pub fn perturb_scheme(nominal: &LevelScheme, osc_dev: f64, split_dev_khz: f64, rng: &mut ChaCha8Rng) -> LevelScheme {
    let mut s = nominal.clone();
    for row in s.osc.iter_mut() {
        for f in row.iter_mut() {
            *f = (*f + osc_dev * sym(rng)).clamp(0.0, 1.0);
        }
    }
    for manifold in [&mut s.ground, &mut s.excited] {
        let nominal_offsets: Vec<f64> = manifold.iter().map(|l| l.offset_mhz).collect();
        for k in 1..manifold.len() {
            let split = nominal_offsets[k] - nominal_offsets[k - 1] + 1e-3 * split_dev_khz * sym(rng);
            manifold[k].offset_mhz = manifold[k - 1].offset_mhz + split;
        }
    }
    s
}

/// Adapts nominal schedules to a perturbed scheme according to the policy.
fn adapt(
    schedule: &GateSchedule,
    nominal: &LevelScheme,
    truth: &LevelScheme,
    scale: (f64, f64),
    q1_label: &str,
    policy: &RetunePolicy,
    rng: &mut ChaCha8Rng,
) -> Result<GateSchedule> {
    let mut out = schedule.clone();
    for tone in out.tones_mut() {
        let g = nominal.index_of(&tone.target.0)?;
        let e = nominal.index_of(&tone.target.1)?;
        let s = if tone.target.0 == q1_label { scale.1 } else { scale.0 };
        match policy.mode {
            RetuneMode::Blind => {
                tone.carrier_detuning += nominal.transition_mhz(g, e) - truth.transition_mhz(g, e);
                tone.reference_strength = Some(nominal.strength(g, e));
                tone.amplitude_scale *= s;
            }
            RetuneMode::Retuned => {
                tone.carrier_detuning += 1e-3 * policy.freq_residual_khz * sym(rng);
                tone.reference_strength = None;
                tone.amplitude_scale *= s * (1.0 + policy.rabi_residual * sym(rng));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiGridPoint {
    pub s0: f64,
    pub s1: f64,
    pub mean_error: f64,
}

/// SQ average error with the two tones' Rabi frequencies scaled.
pub fn rabi_scale_grid(
    model: &SimulationModel,
    pulse: &CutGaussianParams,
    grid: &[(f64, f64)],
    settings: &IntegratorSettings,
) -> Result<Vec<RabiGridPoint>> {
    let q1 = model.ions[0].qubit.q1.clone();
    let base = sq_cases(model, pulse, &crate::gates::NamedGate::ALL);
    grid.iter()
        .map(|&(s0, s1)| {
            if !(0.9..=1.1).contains(&s0) || !(0.9..=1.1).contains(&s1) {
                return Err(Error::invalid("rabi scale grid", "points must lie in [0.9, 1.1]^2"));
            }
            let cases: Vec<SqCase> = base
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    for t in c.schedule.tones_mut() {
                        t.amplitude_scale *= if t.target.0 == q1 { s1 } else { s0 };
                    }
                    c
                })
                .collect();
            Ok(RabiGridPoint { s0, s1, mean_error: sq_report(model, &cases, settings)?.mean_error })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    OscStrength,
    Splitting,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawRecord {
    pub axis_value: f64,
    pub draw: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub axis_value: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub records: Vec<DrawRecord>,
    pub means: Vec<ScanPoint>,
}

fn summarize(axis: &[f64], records: &[DrawRecord]) -> Vec<ScanPoint> {
    axis.iter()
        .map(|&v| {
            let e: Vec<f64> = records.iter().filter(|r| r.axis_value == v).map(|r| r.error).collect();
            let n = e.len().max(1) as f64;
            let mean = e.iter().sum::<f64>() / n;
            let std = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            ScanPoint { axis_value: v, mean_error: mean, std_error: std }
        })
        .collect()
}

/// Draw `d` uses stream `d` of the seed at every axis value and in both
/// modes, so curves are paired draw by draw.
fn draw_rng(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

/// SQ average error over random level-data perturbations whose largest
/// deviation runs over `axis_values`; the other deviation stays as in `spec`.
pub fn randomized_param_scan(
    config: &IonConfig,
    pulse: &CutGaussianParams,
    spec: &PerturbationSpec,
    axis: ScanAxis,
    axis_values: &[f64],
    policy: &RetunePolicy,
    settings: &IntegratorSettings,
) -> Result<ScanResult> {
    spec.validate()?;
    policy.validate()?;
    let nominal_model = SimulationModel::single(config);
    let cases = sq_cases(&nominal_model, pulse, &crate::gates::NamedGate::ALL);
    let jobs: Vec<(f64, usize)> =
        axis_values.iter().flat_map(|&v| (0..spec.n_draws).map(move |d| (v, d))).collect();
    let records: Vec<Result<DrawRecord>> = jobs
        .par_iter()
        .map(|&(v, d)| {
            if !(v >= 0.0) {
                return Err(Error::invalid("axis value", "deviations must be non-negative"));
            }
            let (osc, split) = match axis {
                ScanAxis::OscStrength => (v, spec.splitting_max_dev_khz),
                ScanAxis::Splitting => (spec.osc_strength_max_dev, v),
            };
            let mut rng = draw_rng(spec.seed, d);
            let truth = perturb_scheme(&config.scheme, osc, split, &mut rng);
            let mut model = nominal_model.clone();
            model.ions[0].scheme = truth.clone();
            let adapted: Vec<SqCase> = cases
                .iter()
                .map(|c| {
                    Ok(SqCase {
                        schedule: adapt(&c.schedule, &config.scheme, &truth, spec.rabi_scale, &config.qubit.q1, policy, &mut rng)?,
                        ..c.clone()
                    })
                })
                .collect::<Result<_>>()?;
            let error = sq_report(&model, &adapted, settings)?.mean_error;
            Ok(DrawRecord { axis_value: v, draw: d, error })
        })
        .collect();
    let records: Vec<DrawRecord> = records.into_iter().collect::<Result<_>>()?;
    let means = summarize(axis_values, &records);
    Ok(ScanResult { records, means })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TqUncertaintyPoint {
    pub delta_nu: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub draws: Vec<f64>,
}

/// Single-state TQ errors over random perturbations (both ions share the
/// perturbed level data). Blockade uses (|0>+|1>)(|0>+i|1>)/2 with the
/// target gate given in the spec; interaction uses (|0>+|1>)(|0>+|1>)/2.
pub fn tq_uncertainty_scan(
    config: &IonConfig,
    cases: &[TqGateSpec],
    spec: &PerturbationSpec,
    policy: &RetunePolicy,
    settings: &IntegratorSettings,
) -> Result<Vec<TqUncertaintyPoint>> {
    spec.validate()?;
    policy.validate()?;
    if policy.mode != RetuneMode::Retuned {
        return Err(Error::invalid("policy", "TQ uncertainty scans use the retuned mode"));
    }
    let q = &config.qubit;
    let h = C64::new(0.5, 0.0);
    let mut out = Vec::with_capacity(cases.len());
    for gate in cases {
        let (sched, u) = match gate.kind {
            TqKind::Blockade => blockade_schedule(gate, q, q)?,
            TqKind::Interaction => interaction_schedule(gate, q, q)?,
        };
        let input = match gate.kind {
            TqKind::Blockade => [h, h * C64::new(0.0, 1.0), h, h * C64::new(0.0, 1.0)],
            TqKind::Interaction => [h, h, h, h],
        };
        let target = u * Vector4::from_column_slice(&input);
        let draws: Vec<Result<f64>> = (0..spec.n_draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = draw_rng(spec.seed, d);
                let truth = perturb_scheme(&config.scheme, spec.osc_strength_max_dev, spec.splitting_max_dev_khz, &mut rng);
                let mut model = tq_model(config, gate.delta_nu)?;
                for ion in model.ions.iter_mut() {
                    ion.scheme = truth.clone();
                }
                let s = adapt(&sched, &config.scheme, &truth, spec.rabi_scale, &q.q1, policy, &mut rng)?;
                let c = compile(&model, &s, 0.0)?;
                let psi = embed_two_qubit(&model, &input)?;
                let t = embed_two_qubit(&model, &[target[0], target[1], target[2], target[3]])?;
                let r = JumpExpansion::run(&c, &[psi], &[t], settings)?;
                let one = C64::new(1.0, 0.0);
                clip_error(1.0 - r.fidelity(&[one], &[one]), clip_tol(settings))
            })
            .collect();
        let draws: Vec<f64> = draws.into_iter().collect::<Result<_>>()?;
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        out.push(TqUncertaintyPoint { delta_nu: gate.delta_nu, mean_error: mean, std_error: std, draws });
    }
    Ok(out)
}

/// `n` x `n` grid over the box [1 - frac, 1 + frac]^2.
pub fn rabi_box(frac: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(2);
    let axis: Vec<f64> = (0..n).map(|k| 1.0 - frac + 2.0 * frac * k as f64 / (n - 1) as f64).collect();
    axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect()
}
