use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::windows::{park_ground_state, scheme_lines};
use crate::engine::{evolve_pure, IntegratorSettings};
use crate::error::{Error, Result};
use crate::ion_model::{ErrorSourceMask, IonConfig};
use crate::model::{compile, DriveRoute, SimulationModel};
use crate::schedule::{GateSchedule, IonId};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectatorPenaltySpec {
    /// Offsets from each driven qubit line (MHz).
    pub detuning_grid: Vec<f64>,
    /// Range of ion offsets the parking rule is applied over (MHz).
    pub span_mhz: f64,
    pub tolerances: IntegratorSettings,
}

impl Default for SpectatorPenaltySpec {
    fn default() -> Self {
        SpectatorPenaltySpec {
            detuning_grid: vec![-11.0, -10.5, -10.0, -9.5, -9.0],
            span_mhz: 2000.0,
            tolerances: IntegratorSettings::with_tol(1e-8),
        }
    }
}

impl SpectatorPenaltySpec {
    pub fn validate(&self) -> Result<()> {
        let g = &self.detuning_grid;
        if g.len() < 5 {
            return Err(Error::invalid("detuning_grid", "needs at least 5 points"));
        }
        let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi - lo >= 1.0) {
            return Err(Error::invalid("detuning_grid", "must span at least 1 MHz"));
        }
        self.tolerances.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectatorReport {
    pub penalty: f64,
    /// (detuning, mean error of the spectators at that detuning).
    pub per_detuning: Vec<(f64, f64)>,
}

/// One parked spectator: addressed through `ion`'s tones, optical offset,
/// ground state it sits in, grid index.
struct Spectator {
    ion: IonId,
    offset: f64,
    ground: usize,
    slot: usize,
}

/// Excitation of parked non-qubit ions whose transitions lie near the
/// driven qubit lines. For every driven line f and grid detuning d, every
/// ion whose parked ground state has a transition at f + d is simulated
/// with the full level scheme; its error is the population that leaves the
/// parked state.
pub fn spectator_penalty(
    schedule: &GateSchedule,
    spec: &SpectatorPenaltySpec,
    config: &IonConfig,
) -> Result<SpectatorReport> {
    spec.validate()?;
    schedule.validate()?;
    let scheme = &config.scheme;
    let lv = scheme.qubit_levels(&config.qubit)?;
    let qubit_lines = [scheme.transition_mhz(lv.q0, lv.e), scheme.transition_mhz(lv.q1, lv.e)];
    let lines = scheme_lines(scheme);

    // Ions whose tones repeat another ion's tones exactly see the same
    // spectators; only the first of them is simulated.
    let tones_of = |ion: IonId| -> Vec<Vec<crate::schedule::Tone>> {
        schedule
            .segments
            .iter()
            .map(|seg| {
                seg.tones()
                    .iter()
                    .filter(|t| t.ion == ion)
                    .map(|t| crate::schedule::Tone { ion: IonId::A, ..t.clone() })
                    .collect()
            })
            .collect()
    };
    let skip_b = tones_of(IonId::A) == tones_of(IonId::B);

    let mut driven: Vec<(IonId, f64)> = Vec::new();
    for seg in &schedule.segments {
        for tone in seg.tones() {
            if skip_b && tone.ion == IonId::B {
                continue;
            }
            let g = scheme.index_of(&tone.target.0)?;
            let e = scheme.index_of(&tone.target.1)?;
            let f = scheme.transition_mhz(g, e) + tone.carrier_detuning;
            if !driven.iter().any(|&(i, x)| i == tone.ion && (x - f).abs() < 1e-9) {
                driven.push((tone.ion, f));
            }
        }
    }

    let mut spectators = Vec::new();
    for &(ion, f) in &driven {
        for (slot, &d) in spec.detuning_grid.iter().enumerate() {
            let target = f + d;
            for (g, ls) in lines.iter().enumerate() {
                for &t in ls {
                    let x = target - t;
                    if x.abs() <= 0.5 * spec.span_mhz && park_ground_state(&lines, x, qubit_lines) == g {
                        spectators.push(Spectator { ion, offset: x, ground: g, slot });
                    }
                }
            }
        }
    }

    let errors: Vec<Result<f64>> = spectators
        .par_iter()
        .map(|s| {
            let mut model = SimulationModel::single(config).with_mask(ErrorSourceMask::CROSSTALK_ONLY);
            model.ions[0].offset_mhz = s.offset;
            let other = match s.ion {
                IonId::A => 1,
                IonId::B => 0,
            };
            model.routes[s.ion.index()] = DriveRoute { reference_offset_mhz: 0.0, driven: vec![0] };
            model.routes[other] = DriveRoute { reference_offset_mhz: 0.0, driven: Vec::new() };
            let c = compile(&model, schedule, 0.0)?;
            let mut psi = vec![C64::new(0.0, 0.0); model.dim()];
            psi[s.ground] = C64::new(1.0, 0.0);
            let out = evolve_pure(&c, &[psi], &spec.tolerances)?;
            Ok((1.0 - out[0][s.ground].norm_sqr()).clamp(0.0, 1.0))
        })
        .collect();
    let n_slots = spec.detuning_grid.len();
    let mut sums = vec![0.0; n_slots];
    let mut counts = vec![0usize; n_slots];
    for (s, e) in spectators.iter().zip(errors) {
        sums[s.slot] += e?;
        counts[s.slot] += 1;
    }
    let per_detuning: Vec<(f64, f64)> = spec
        .detuning_grid
        .iter()
        .enumerate()
        .map(|(k, &d)| (d, if counts[k] > 0 { sums[k] / counts[k] as f64 } else { 0.0 }))
        .collect();
    let penalty = per_detuning.iter().map(|p| p.1).sum::<f64>() / n_slots as f64;
    Ok(SpectatorReport { penalty, per_detuning })
}
