use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{evolve_pure, IntegratorSettings};
use crate::error::{Error, Result};
use crate::gates::{ideal_sq_unitary, sq_schedule, NamedGate, SqGateSpec};
use crate::ion_model::ErrorSourceMask;
use crate::metrics::bowdrey_states;
use crate::model::{compile, DriveRoute, SimulationModel};
use crate::pulse::CutGaussianParams;
use crate::schedule::{GateSchedule, IonId, TargetIon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CrosstalkMode {
    /// Qubit A idles while B is driven.
    Sequential,
    /// A runs its own gate at the same time.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IdleGate {
    None,
    Not,
}

/// What qubit A starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanInitial {
    /// The six Bloch-axis qubit states.
    Qubit,
    /// The auxiliary ground level.
    Aux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkScanSpec {
    /// Offset of B's lines from A's (MHz).
    pub detuning_grid: Vec<f64>,
    pub mode: CrosstalkMode,
    pub idle_gate: Option<IdleGate>,
    pub initial: ScanInitial,
    pub tolerances: IntegratorSettings,
}

impl CrosstalkScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.detuning_grid.is_empty() {
            return Err(Error::invalid("detuning_grid", "must not be empty"));
        }
        if self.detuning_grid.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("detuning_grid", "must be finite"));
        }
        if self.mode == CrosstalkMode::Parallel && self.idle_gate.is_none() {
            return Err(Error::invalid("idle_gate", "parallel mode needs a gate choice for qubit A"));
        }
        self.tolerances.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrosstalkPoint {
    pub detuning: f64,
    /// Additional error on A, averaged over initial states and B's gates.
    pub mean_error: f64,
    pub std_error: f64,
    /// Mean error at -detuning: the same pair seen from B.
    pub reverse_error: Option<f64>,
}

/// Additional error on qubit A caused by SQ gates addressed `detuning` MHz
/// away. Only A is simulated; B's tones reach it through a second route.
/// Decay is left out: it is the same with and without the foreign tones.
pub fn crosstalk_scan(
    model: &SimulationModel,
    spec: &CrosstalkScanSpec,
    pulse: &CutGaussianParams,
) -> Result<Vec<CrosstalkPoint>> {
    spec.validate()?;
    if model.n_ions() != 1 {
        return Err(Error::invalid("model", "crosstalk scans simulate qubit A alone"));
    }
    let lv = model.qubit_levels(0)?;
    let qubit = model.ions[0].qubit.clone();
    let base = model.with_mask(ErrorSourceMask { decay_decoherence: false, ..model.mask });
    let a_gate = match (spec.mode, spec.idle_gate) {
        (CrosstalkMode::Parallel, Some(IdleGate::Not)) => Some(SqGateSpec::named(NamedGate::X, *pulse)),
        _ => None,
    };
    let ideal_a = match a_gate {
        Some(g) => ideal_sq_unitary(g.phi, g.theta),
        None => Matrix2::identity(),
    };
    let a_sched = a_gate.map(|g| sq_schedule(&g, IonId::A, &qubit));
    let dim = base.dim();
    let basis = |l: usize| {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[l] = C64::new(1.0, 0.0);
        v
    };
    let inputs = match spec.initial {
        ScanInitial::Qubit => vec![basis(lv.q0), basis(lv.q1)],
        ScanInitial::Aux => vec![basis(lv.aux)],
    };
    let settings = spec.tolerances;

    // Errors for each initial state given the final images of the inputs.
    let errors = |out: &[Vec<C64>]| -> Vec<f64> {
        match spec.initial {
            ScanInitial::Aux => vec![(1.0 - out[0][lv.aux].norm_sqr()).max(0.0)],
            ScanInitial::Qubit => bowdrey_states()
                .iter()
                .map(|(_, [a, b])| {
                    let t = ideal_a * nalgebra::Vector2::new(*a, *b);
                    let overlap: C64 = [(lv.q0, t[0]), (lv.q1, t[1])]
                        .iter()
                        .map(|&(l, w)| w.conj() * (a * out[0][l] + b * out[1][l]))
                        .sum();
                    1.0 - overlap.norm_sqr()
                })
                .collect(),
        }
    };

    let baseline = match &a_sched {
        Some(s) => {
            let c = compile(&base, s, 0.0)?;
            errors(&evolve_pure(&c, &inputs, &settings)?)
        }
        None => vec![0.0; if spec.initial == ScanInitial::Qubit { 6 } else { 1 }],
    };

    let points: Vec<Result<(f64, f64)>> = spec
        .detuning_grid
        .par_iter()
        .map(|&delta| {
            let mut m = base.clone();
            m.routes[1] = DriveRoute { reference_offset_mhz: delta, driven: vec![0] };
            let mut samples = Vec::new();
            for g in NamedGate::ALL {
                let b = sq_schedule(&SqGateSpec::named(g, *pulse), IonId::B, &qubit);
                let sched: GateSchedule = match &a_sched {
                    Some(a) => a.parallel(&b)?,
                    None => GateSchedule { target_ion: TargetIon::A, ..b },
                };
                let c = compile(&m, &sched, 0.0)?;
                let out = evolve_pure(&c, &inputs, &settings)?;
                for (e, e0) in errors(&out).into_iter().zip(&baseline) {
                    samples.push(e - e0);
                }
            }
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let std = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            Ok((mean, std))
        })
        .collect();
    let points: Vec<(f64, f64)> = points.into_iter().collect::<Result<_>>()?;
    let grid = &spec.detuning_grid;
    Ok(grid
        .iter()
        .zip(&points)
        .map(|(&d, &(mean, std))| CrosstalkPoint {
            detuning: d,
            mean_error: mean,
            std_error: std,
            reverse_error: grid.iter().position(|&x| (x + d).abs() < 1e-9).map(|k| points[k].0),
        })
        .collect())
}

/// Local maxima of a scan that stand above `threshold`, refined to the
/// center of a parabola through the three neighbouring points.
pub fn find_spikes(points: &[CrosstalkPoint], threshold: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..points.len().saturating_sub(1) {
        let (a, b, c) = (points[k - 1].mean_error, points[k].mean_error, points[k + 1].mean_error);
        if b > threshold && b >= a && b > c {
            let h = points[k + 1].detuning - points[k].detuning;
            let denom = a - 2.0 * b + c;
            let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            out.push(points[k].detuning + shift.clamp(-1.0, 1.0) * h);
        }
    }
    out
}
