//! Simulation model for one or two ions: drive routing, error masks, and
//! compilation of a schedule into sparse Hamiltonian and dissipator terms.
//!
//! Frame: every level rotates at its own bare frequency, so undriven ground
//! levels carry no phase. Each tone k couples ground g to excited e of every
//! ion it drives with
//! `(Omega_k(t)/2) sqrt(f(g,e)/f_ref) exp(i(phi_k + 2pi (nu_ge - nu_k) t)) |e><g|`
//! plus the Hermitian conjugate. An optional per-ion frame shift `s` moves
//! the excited manifold to rotate at `nu + s`, which adds a static `-2pi s`
//! on excited levels and is useful when all tones on an ion are far detuned.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::engine::IntegratorSettings;
use crate::error::{Error, Result};
use crate::ion_model::{
    build_collapse_ops, CollapseKind, DipoleCoupling, ErrorSourceMask, IonConfig, LevelScheme, QubitAssignment,
    QubitLevels,
};
use crate::pulse::Envelope;
use crate::schedule::{GateSchedule, Segment};

pub const LEVELS: usize = 6;

/// Largest phase (rad) any term may rotate through in one step.
const MAX_PHASE_PER_STEP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IonSite {
    pub scheme: LevelScheme,
    pub qubit: QubitAssignment,
    /// Optical offset of this ion (MHz).
    pub offset_mhz: f64,
    /// Excited-manifold frame shift (MHz); physics does not depend on it.
    pub frame_shift_mhz: f64,
}

/// Where the tones addressed to one logical ion go.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveRoute {
    /// Optical offset used to place the tone frequencies (MHz).
    pub reference_offset_mhz: f64,
    /// Physical ions the tones act on.
    pub driven: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationModel {
    pub ions: Vec<IonSite>,
    pub coupling: DipoleCoupling,
    pub mask: ErrorSourceMask,
    /// Routes for logical ions A and B.
    pub routes: [DriveRoute; 2],
}

impl SimulationModel {
    /// One ion at zero offset; tones for A and B both act on it.
    pub fn single(config: &IonConfig) -> Self {
        SimulationModel {
            ions: vec![IonSite {
                scheme: config.scheme.clone(),
                qubit: config.qubit.clone(),
                offset_mhz: 0.0,
                frame_shift_mhz: 0.0,
            }],
            coupling: DipoleCoupling::new(0.0),
            mask: ErrorSourceMask::PHYSICAL,
            routes: [
                DriveRoute { reference_offset_mhz: 0.0, driven: vec![0] },
                DriveRoute { reference_offset_mhz: 0.0, driven: vec![0] },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        LEVELS.pow(self.ions.len() as u32)
    }

    pub fn n_ions(&self) -> usize {
        self.ions.len()
    }

    pub fn qubit_levels(&self, ion: usize) -> Result<QubitLevels> {
        let site = &self.ions[ion];
        site.scheme.qubit_levels(&site.qubit)
    }

    /// Joint basis index of per-ion levels (ion A most significant).
    pub fn joint_index(&self, levels: &[usize]) -> usize {
        levels.iter().fold(0, |acc, &l| acc * LEVELS + l)
    }

    pub fn with_mask(&self, mask: ErrorSourceMask) -> Self {
        apply_error_mask(self, mask)
    }

    /// Frequency of a tone addressed through `route` (MHz).
    fn tone_frequency(&self, route: &DriveRoute, ion: usize, g: usize, e: usize, detuning: f64) -> f64 {
        route.reference_offset_mhz + self.ions[ion].scheme.transition_mhz(g, e) + detuning
    }
}

/// Model variant with the requested error sources; idempotent.
pub fn apply_error_mask(model: &SimulationModel, mask: ErrorSourceMask) -> SimulationModel {
    let mut m = model.clone();
    m.mask = mask;
    m
}

/// Two ions in a tensor-product space. Ion B sits `detuning` MHz above ion A;
/// each ion's tones drive only that ion.
pub fn build_two_ion_model(
    a: &IonConfig,
    b: &IonConfig,
    coupling: DipoleCoupling,
    detuning: f64,
) -> Result<SimulationModel> {
    a.scheme.validate()?;
    b.scheme.validate()?;
    if !coupling.delta_nu.is_finite() {
        return Err(Error::invalid("delta_nu", "must be finite"));
    }
    Ok(SimulationModel {
        ions: vec![
            IonSite { scheme: a.scheme.clone(), qubit: a.qubit.clone(), offset_mhz: 0.0, frame_shift_mhz: 0.0 },
            IonSite { scheme: b.scheme.clone(), qubit: b.qubit.clone(), offset_mhz: detuning, frame_shift_mhz: 0.0 },
        ],
        coupling,
        mask: ErrorSourceMask::PHYSICAL,
        routes: [
            DriveRoute { reference_offset_mhz: 0.0, driven: vec![0] },
            DriveRoute { reference_offset_mhz: detuning, driven: vec![1] },
        ],
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ToneTerm {
    pub transition: usize,
    pub weight: f64,
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ActiveTone {
    pub envelope: Envelope,
    pub phase: f64,
    pub terms: Vec<ToneTerm>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Link {
    pub row: usize,
    pub col: usize,
    pub transition: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledSegment {
    pub start: f64,
    pub duration: f64,
    pub tones: Vec<ActiveTone>,
    pub links: Vec<Link>,
}

/// Partial isometry L = sqrt(strength) sum_p |to_p><from_p|.
#[derive(Debug, Clone)]
pub(crate) struct Jump {
    pub strength: f64,
    pub pairs: Vec<(usize, usize)>,
}

/// A schedule compiled against a model.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub(crate) dim: usize,
    pub(crate) h_diag: Vec<f64>,
    pub(crate) n_transitions: usize,
    pub(crate) jumps: Vec<Jump>,
    pub(crate) loss: Vec<f64>,
    pub(crate) segments: Vec<CompiledSegment>,
}

impl Compiled {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.segments.first().map(|s| s.start).unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map(|s| s.start + s.duration).unwrap_or(0.0)
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub(crate) fn segment_bounds(&self, k: usize) -> (f64, f64) {
        let s = &self.segments[k];
        (s.start, s.start + s.duration)
    }

    /// Settings for segment `k` with the step capped at a fraction of the
    /// fastest phase rotation, keeping the explicit integrator well inside
    /// its stability region and its error estimate meaningful.
    pub(crate) fn segment_settings(&self, k: usize, s: &IntegratorSettings) -> IntegratorSettings {
        let seg = &self.segments[k];
        let (lo, hi) = self.h_diag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
        let mut w = hi - lo;
        for tone in &seg.tones {
            for term in &tone.terms {
                w = w.max(term.omega.abs());
            }
        }
        let mut out = *s;
        if w > 0.0 {
            out.max_step = out.max_step.min(MAX_PHASE_PER_STEP / w);
        }
        out
    }

    /// Transition coefficients c_tr(t); H = sum c |e><g| + h.c. over links.
    #[inline]
    pub(crate) fn coefficients(&self, seg: usize, t: f64, out: &mut [C64]) {
        let s = &self.segments[seg];
        for c in out.iter_mut() {
            *c = C64::new(0.0, 0.0);
        }
        let local = t - s.start;
        for tone in &s.tones {
            let a = tone.envelope.value(local);
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            for term in &tone.terms {
                let (sn, cs) = (tone.phase + term.omega * t).sin_cos();
                out[term.transition] += a * C64::new(term.weight * cs, term.weight * sn);
            }
        }
    }

    /// Dense Hamiltonian (rad/us) at absolute time t.
    pub fn hamiltonian(&self, t: f64) -> DMatrix<C64> {
        let n = self.dim;
        let mut h = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(self.h_diag[i], 0.0) } else { C64::new(0.0, 0.0) });
        let seg = self
            .segments
            .iter()
            .rposition(|s| t >= s.start - 1e-15)
            .unwrap_or(0);
        if self.segments.is_empty() {
            return h;
        }
        let mut coeff = vec![C64::new(0.0, 0.0); self.n_transitions];
        self.coefficients(seg, t, &mut coeff);
        for l in &self.segments[seg].links {
            h[(l.row, l.col)] += coeff[l.transition];
            h[(l.col, l.row)] += coeff[l.transition].conj();
        }
        h
    }

    /// Collapse operators as dense matrices (for checks).
    pub fn collapse_matrices(&self) -> Vec<DMatrix<C64>> {
        self.jumps
            .iter()
            .map(|j| {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for &(to, from) in &j.pairs {
                    m[(to, from)] = C64::new(j.strength.sqrt(), 0.0);
                }
                m
            })
            .collect()
    }
}

/// All per-ion level tuples of the joint space that have `level` on `ion`.
fn lifted_pairs(n_ions: usize, ion: usize, to: usize, from: usize) -> Vec<(usize, usize)> {
    let dim = LEVELS.pow(n_ions as u32);
    let stride = LEVELS.pow((n_ions - 1 - ion) as u32);
    (0..dim)
        .filter(|idx| (idx / stride) % LEVELS == from)
        .map(|idx| {
            let base = idx - from * stride;
            (base + to * stride, idx)
        })
        .collect()
}

/// Compiles `schedule` starting at absolute time `t_start`.
pub fn compile(model: &SimulationModel, schedule: &GateSchedule, t_start: f64) -> Result<Compiled> {
    schedule.validate()?;
    let n_ions = model.ions.len();
    if n_ions == 0 || n_ions > 2 {
        return Err(Error::invalid("model", "one or two ions supported"));
    }
    let dim = model.dim();
    let level_of = |idx: usize, ion: usize| (idx / LEVELS.pow((n_ions - 1 - ion) as u32)) % LEVELS;

    let mut h_diag = vec![0.0; dim];
    for (idx, h) in h_diag.iter_mut().enumerate() {
        let mut all_excited = true;
        for (i, site) in model.ions.iter().enumerate() {
            if LevelScheme::is_excited(level_of(idx, i)) {
                *h -= TAU * site.frame_shift_mhz;
            } else {
                all_excited = false;
            }
        }
        if n_ions == 2 && all_excited {
            *h += TAU * model.coupling.delta_nu;
        }
    }

    let mut jumps = Vec::new();
    if model.mask.decay_decoherence {
        for (i, site) in model.ions.iter().enumerate() {
            for op in build_collapse_ops(&site.scheme)? {
                let (to, from) = match op.kind {
                    CollapseKind::Decay { from, to } => (to, from),
                    CollapseKind::Dephasing { level } => (level, level),
                };
                jumps.push(Jump { strength: op.strength(), pairs: lifted_pairs(n_ions, i, to, from) });
            }
        }
    }
    let mut loss = vec![0.0; dim];
    for j in &jumps {
        for &(_, from) in &j.pairs {
            loss[from] += j.strength;
        }
    }

    // Transition index: ion * 9 + g * 3 + (e - 3).
    let n_transitions = 9 * n_ions;
    let mut segments = Vec::with_capacity(schedule.segments.len());
    let mut t = t_start;
    for seg in &schedule.segments {
        let mut tones = Vec::new();
        let mut used = vec![false; n_transitions];
        for tone in seg.tones() {
            let route = &model.routes[tone.ion.index()];
            let mut terms = Vec::new();
            for &ion in &route.driven {
                if ion >= n_ions {
                    return Err(Error::invalid("route", format!("ion {ion} not in model")));
                }
                let site = &model.ions[ion];
                let scheme = &site.scheme;
                let gt = scheme.index_of(&tone.target.0)?;
                let et = scheme.index_of(&tone.target.1)?;
                if gt >= 3 || et < 3 {
                    return Err(Error::invalid("tone target", "must be a ground -> excited transition"));
                }
                let f_ref = tone.reference_strength.unwrap_or_else(|| scheme.strength(gt, et));
                if !(f_ref > 0.0) {
                    return Err(Error::invalid("tone target", "target transition has zero strength"));
                }
                let first = route.driven[0];
                let nu_k = model.tone_frequency(route, first, gt, et, tone.carrier_detuning);
                for g in 0..3 {
                    for e in 3..6 {
                        let f = scheme.strength(g, e);
                        if f <= 0.0 {
                            continue;
                        }
                        if !model.mask.internal_crosstalk && (g, e) != (gt, et) {
                            continue;
                        }
                        let nu_ge = site.offset_mhz + scheme.transition_mhz(g, e);
                        let tr = ion * 9 + g * 3 + (e - 3);
                        used[tr] = true;
                        terms.push(ToneTerm {
                            transition: tr,
                            weight: 0.5 * tone.amplitude_scale * (f / f_ref).sqrt(),
                            omega: TAU * (nu_ge + site.frame_shift_mhz - nu_k),
                        });
                    }
                }
            }
            tones.push(ActiveTone { envelope: tone.envelope, phase: tone.phase, terms });
        }
        let mut links = Vec::new();
        for (tr, &u) in used.iter().enumerate() {
            if !u {
                continue;
            }
            let ion = tr / 9;
            let g = (tr % 9) / 3;
            let e = 3 + tr % 3;
            for (row, col) in lifted_pairs(n_ions, ion, e, g) {
                links.push(Link { row, col, transition: tr });
            }
        }
        let duration = match seg {
            Segment::Pulse { duration, .. } | Segment::Wait { duration } => *duration,
        };
        segments.push(CompiledSegment { start: t, duration, tones, links });
        t += duration;
    }
    Ok(Compiled { dim, h_diag, n_transitions, jumps, loss, segments })
}

/// Dense Hamiltonian of `schedule` on `model` at time t (rad/us).
pub fn assemble_hamiltonian(model: &SimulationModel, schedule: &GateSchedule, t: f64) -> Result<DMatrix<C64>> {
    let c = compile(model, schedule, 0.0)?;
    if t < -1e-12 || t > c.end() + 1e-12 {
        return Err(Error::invalid("t", format!("{t} outside schedule span [0, {}]", c.end())));
    }
    Ok(c.hamiltonian(t))
}
