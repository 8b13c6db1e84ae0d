//! Gate schedules and their ideal unitaries: two-pulse SQ gates, the
//! dipole-blockade controlled gate, and the interaction phase gate.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;

use crate::engine::{evolve_pure, IntegratorSettings};
use crate::error::{Error, Result};
use crate::ion_model::{ErrorSourceMask, QubitAssignment};
use crate::model::{compile, SimulationModel};
use crate::pulse::{CutGaussianParams, Envelope, SechscanParams};
use crate::schedule::{GateSchedule, IonId, Segment, TargetIon, Tone};

/// Arbitrary SQ gate `e^{i theta}|B><B| + |D><D|` with relative phase phi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqGateSpec {
    pub phi: f64,
    pub theta: f64,
    pub pulse: CutGaussianParams,
}

impl SqGateSpec {
    /// Gate with pulses of area pi/sqrt(2) per tone.
    pub fn new(phi: f64, theta: f64, t_g: f64, sigma: f64) -> Result<Self> {
        Ok(SqGateSpec { phi, theta, pulse: CutGaussianParams::new(t_g, sigma, PI / SQRT_2)? })
    }

    pub fn named(gate: NamedGate, pulse: CutGaussianParams) -> Self {
        let (phi, theta) = gate.angles();
        SqGateSpec { phi, theta, pulse }
    }
}

/// The six benchmark gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedGate {
    I,
    X,
    SqrtX,
    SqrtMinusX,
    SqrtY,
    SqrtMinusY,
}

impl NamedGate {
    pub const ALL: [NamedGate; 6] =
        [NamedGate::I, NamedGate::X, NamedGate::SqrtX, NamedGate::SqrtMinusX, NamedGate::SqrtY, NamedGate::SqrtMinusY];

    /// (phi, theta). U(phi, theta) is a rotation by theta about (-cos phi, sin phi, 0).
    pub fn angles(self) -> (f64, f64) {
        match self {
            NamedGate::I => (0.0, 0.0),
            NamedGate::X => (0.0, PI),
            NamedGate::SqrtX => (PI, FRAC_PI_2),
            NamedGate::SqrtMinusX => (0.0, FRAC_PI_2),
            NamedGate::SqrtY => (FRAC_PI_2, FRAC_PI_2),
            NamedGate::SqrtMinusY => (3.0 * FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NamedGate::I => "I",
            NamedGate::X => "X",
            NamedGate::SqrtX => "sqrtX",
            NamedGate::SqrtMinusX => "sqrt-X",
            NamedGate::SqrtY => "sqrtY",
            NamedGate::SqrtMinusY => "sqrt-Y",
        }
    }

    pub fn parse(s: &str) -> Option<NamedGate> {
        NamedGate::ALL.into_iter().find(|g| g.name().eq_ignore_ascii_case(s))
    }
}

/// Two two-color pulses on `ion`: phases (0, phi), then both advanced by pi - theta.
pub fn sq_schedule(spec: &SqGateSpec, ion: IonId, qubit: &QubitAssignment) -> GateSchedule {
    let env = Envelope::CutGaussian(spec.pulse);
    let tones = |shift: f64| {
        vec![
            Tone::new(ion, &qubit.q0, &qubit.e, shift, env),
            Tone::new(ion, &qubit.q1, &qubit.e, spec.phi + shift, env),
        ]
    };
    let target = match ion {
        IonId::A => TargetIon::A,
        IonId::B => TargetIon::B,
    };
    GateSchedule::new(target).pulse(tones(0.0), spec.pulse.t_g).pulse(tones(PI - spec.theta), spec.pulse.t_g)
}

/// Bright state (|0> + e^{-i phi}|1>)/sqrt 2, dark state (|0> - e^{-i phi}|1>)/sqrt 2.
pub fn ideal_sq_unitary(phi: f64, theta: f64) -> Matrix2<C64> {
    let b = nalgebra::Vector2::new(C64::new(1.0, 0.0), C64::from_polar(1.0, -phi)) / C64::new(SQRT_2, 0.0);
    let d = nalgebra::Vector2::new(C64::new(1.0, 0.0), -C64::from_polar(1.0, -phi)) / C64::new(SQRT_2, 0.0);
    b * b.adjoint() * C64::from_polar(1.0, theta) + d * d.adjoint()
}

/// Zero-duration Z rotation: later pulses on `ion` see the phase of |1>
/// advanced by `angle`, i.e. the relative two-color phase phi grows by it.
pub fn virtual_z(schedule: &GateSchedule, ion: IonId, angle: f64, qubit: &QubitAssignment) -> GateSchedule {
    let mut out = schedule.clone();
    for tone in out.tones_mut() {
        if tone.ion == ion && tone.target.0 == qubit.q1 {
            tone.shift_phase(angle);
        }
    }
    out
}

/// diag(1, e^{-i angle}); `virtual_z` conjugates gates by this matrix.
pub fn z_frame(angle: f64) -> Matrix2<C64> {
    Matrix2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, -angle))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqKind {
    Blockade,
    Interaction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqGateSpec {
    pub kind: TqKind,
    /// Single-color control pulse, area pi (blockade).
    pub control_pulse: CutGaussianParams,
    /// Gate applied to the target ion (blockade).
    pub target_gate: SqGateSpec,
    /// Sechscan pulse (interaction).
    pub hsh: SechscanParams,
    /// Wait between the sechscan pulses (us).
    pub wait: f64,
    pub delta_nu: f64,
}

/// SQ pulse optimized with the spectator penalty.
pub const SQ_T_G: f64 = 1.68;
pub const SQ_SIGMA: f64 = 4.16;
pub const CONTROL_T_G: f64 = 2.17;
pub const CONTROL_SIGMA: f64 = 6.75;

/// Sechscan parameters of the 3 MHz interaction gate.
pub const HSH_3MHZ: SechscanParams = SechscanParams { t_g: 1.7, t_fwhm: 0.28, f_width: 9.5, f_scan: 2.2, omega0: 5.8 };

impl TqGateSpec {
    pub fn blockade(target: NamedGate, delta_nu: f64) -> Result<Self> {
        let control = CutGaussianParams::new(CONTROL_T_G, CONTROL_SIGMA, PI)?;
        let sq = CutGaussianParams::new(SQ_T_G, SQ_SIGMA, PI / SQRT_2)?;
        Ok(TqGateSpec {
            kind: TqKind::Blockade,
            control_pulse: control,
            target_gate: SqGateSpec::named(target, sq),
            hsh: HSH_3MHZ,
            wait: 0.0,
            delta_nu,
        })
    }

    pub fn interaction(hsh: SechscanParams, wait: f64, delta_nu: f64) -> Result<Self> {
        hsh.derived()?;
        let sq = CutGaussianParams::new(SQ_T_G, SQ_SIGMA, PI / SQRT_2)?;
        Ok(TqGateSpec {
            kind: TqKind::Interaction,
            control_pulse: CutGaussianParams::new(CONTROL_T_G, CONTROL_SIGMA, PI)?,
            target_gate: SqGateSpec::named(NamedGate::I, sq),
            hsh,
            wait,
            delta_nu,
        })
    }
}

fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// Ideal controlled gate |0><0| x I + |1><1| x U in {|00>,|01>,|10>,|11>}.
pub fn ideal_blockade_unitary(phi: f64, theta: f64) -> Matrix4<C64> {
    let p0 = Matrix2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let p1 = Matrix2::identity() - p0;
    kron2(&p0, &Matrix2::identity()) + kron2(&p1, &ideal_sq_unitary(phi, theta))
}

pub fn ideal_interaction_unitary() -> Matrix4<C64> {
    let mut u = Matrix4::identity();
    u[(0, 0)] = C64::new(-1.0, 0.0);
    u
}

/// Control excitation on A, target gate on B, control deexcitation with +pi.
pub fn blockade_schedule(
    spec: &TqGateSpec,
    qa: &QubitAssignment,
    qb: &QubitAssignment,
) -> Result<(GateSchedule, Matrix4<C64>)> {
    if spec.kind != TqKind::Blockade {
        return Err(Error::invalid("tq gate", "blockade_schedule needs kind = blockade"));
    }
    if (spec.control_pulse.target_area - PI).abs() > 1e-12 {
        return Err(Error::invalid("control pulse", "area must be pi"));
    }
    let env = Envelope::CutGaussian(spec.control_pulse);
    let t = spec.control_pulse.t_g;
    let control = |phase: f64| vec![Tone::new(IonId::A, &qa.q0, &qa.e, phase, env)];
    let mut s = GateSchedule::new(TargetIon::Both).pulse(control(0.0), t);
    s = s.then(sq_schedule(&spec.target_gate, IonId::B, qb));
    s = s.pulse(control(PI), t);
    s.target_ion = TargetIon::Both;
    Ok((s, ideal_blockade_unitary(spec.target_gate.phi, spec.target_gate.theta)))
}

/// Simultaneous sechscan excitation of both ions, wait, deexcitation with +pi.
pub fn interaction_schedule(
    spec: &TqGateSpec,
    qa: &QubitAssignment,
    qb: &QubitAssignment,
) -> Result<(GateSchedule, Matrix4<C64>)> {
    if spec.kind != TqKind::Interaction {
        return Err(Error::invalid("tq gate", "interaction_schedule needs kind = interaction"));
    }
    if !(spec.wait >= 0.0) {
        return Err(Error::invalid("wait", "must be non-negative"));
    }
    let env = Envelope::sechscan(spec.hsh)?;
    let pulse = |phase: f64| {
        vec![Tone::new(IonId::A, &qa.q0, &qa.e, phase, env), Tone::new(IonId::B, &qb.q0, &qb.e, phase, env)]
    };
    let mut s = GateSchedule::new(TargetIon::Both).pulse(pulse(0.0), spec.hsh.t_g);
    if spec.wait > 0.0 {
        s = s.wait(spec.wait);
    }
    s = s.pulse(pulse(PI), spec.hsh.t_g);
    Ok((s, ideal_interaction_unitary()))
}

/// Embeds two-qubit amplitudes (basis |00>,|01>,|10>,|11>) into the model space.
pub fn embed_two_qubit(model: &SimulationModel, amps: &[C64; 4]) -> Result<Vec<C64>> {
    let la = model.qubit_levels(0)?;
    let lb = model.qubit_levels(1)?;
    let mut v = vec![C64::new(0.0, 0.0); model.dim()];
    for (k, &amp) in amps.iter().enumerate() {
        let a = if k / 2 == 0 { la.q0 } else { la.q1 };
        let b = if k % 2 == 0 { lb.q0 } else { lb.q1 };
        v[model.joint_index(&[a, b])] += amp;
    }
    Ok(v)
}

/// Phase picked up by |00> relative to |01> when the interaction sequence
/// runs without a wait, from the no-jump evolution of |0>(|0>+|1>)/sqrt 2.
pub fn interaction_phase(spec: &TqGateSpec, model: &SimulationModel, settings: &IntegratorSettings) -> Result<f64> {
    let ions = [&model.ions[0].qubit, &model.ions[1].qubit];
    let (sched, _) = interaction_schedule(spec, ions[0], ions[1])?;
    let c = compile(model, &sched, 0.0)?;
    let h = C64::new(1.0 / SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    let psi = embed_two_qubit(model, &[h, h, z, z])?;
    let out = evolve_pure(&c, &[psi], settings)?;
    let la = model.qubit_levels(0)?;
    let lb = model.qubit_levels(1)?;
    let c00 = out[0][model.joint_index(&[la.q0, lb.q0])];
    let c01 = out[0][model.joint_index(&[la.q0, lb.q1])];
    Ok((c00 * c01.conj()).arg())
}

/// Population of |ee> after the first interaction pulse acting on |00>,
/// without decay.
pub fn double_excitation(spec: &TqGateSpec, model: &SimulationModel, settings: &IntegratorSettings) -> Result<f64> {
    let model = model.with_mask(ErrorSourceMask::CROSSTALK_ONLY);
    let qa = &model.ions[0].qubit;
    let qb = &model.ions[1].qubit;
    let env = Envelope::sechscan(spec.hsh)?;
    let tones = vec![Tone::new(IonId::A, &qa.q0, &qa.e, 0.0, env), Tone::new(IonId::B, &qb.q0, &qb.e, 0.0, env)];
    let sched = GateSchedule::new(TargetIon::Both).pulse(tones, spec.hsh.t_g);
    let c = compile(&model, &sched, 0.0)?;
    let one = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    let psi = embed_two_qubit(&model, &[one, z, z, z])?;
    let out = evolve_pure(&c, &[psi], settings)?;
    let la = model.qubit_levels(0)?;
    let lb = model.qubit_levels(1)?;
    Ok(out[0][model.joint_index(&[la.e, lb.e])].norm_sqr())
}

/// Wait that brings the |00> phase to pi for the given no-wait phase.
pub fn wait_for_phase(phi_d: f64, delta_nu: f64) -> Result<f64> {
    if delta_nu == 0.0 || !delta_nu.is_finite() {
        return Err(Error::invalid("delta_nu", "wait calibration needs a nonzero shift"));
    }
    // |ee> accrues exp(-i 2pi delta_nu t) during the wait.
    let need = (delta_nu.signum() * (phi_d - PI)).rem_euclid(2.0 * PI);
    let need = if (2.0 * PI - need) < 1e-12 { 0.0 } else { need };
    Ok(need / (2.0 * PI * delta_nu.abs()))
}

/// Calibrated wait for an interaction gate (spec.wait is ignored).
pub fn calibrate_wait(spec: &TqGateSpec, model: &SimulationModel, settings: &IntegratorSettings) -> Result<f64> {
    if spec.kind != TqKind::Interaction {
        return Err(Error::invalid("tq gate", "calibrate_wait needs kind = interaction"));
    }
    if spec.delta_nu == 0.0 {
        return Err(Error::invalid("delta_nu", "wait calibration needs a nonzero shift"));
    }
    let mut s = *spec;
    s.wait = 0.0;
    let phi_d = interaction_phase(&s, model, settings)?;
    wait_for_phase(phi_d, spec.delta_nu)
}

/// Optional dark-state compensation: repeats the gate pulses with the bright
/// and dark roles exchanged (phi + pi) and theta = 0. Off by default.
pub fn with_dark_compensation(schedule: &GateSchedule, spec: &SqGateSpec, ion: IonId, qubit: &QubitAssignment) -> GateSchedule {
    let comp = SqGateSpec { phi: spec.phi + PI, theta: 0.0, pulse: spec.pulse };
    let mut out = schedule.clone().then(sq_schedule(&comp, ion, qubit));
    out.target_ion = schedule.target_ion;
    out
}

/// Time spent driving (waits excluded).
pub fn pulse_time(schedule: &GateSchedule) -> f64 {
    schedule.segments.iter().filter(|s| matches!(s, Segment::Pulse { .. })).map(Segment::duration).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close_up_to_phase(a: &Matrix2<C64>, b: &Matrix2<C64>) -> bool {
        let overlap = (a.adjoint() * b).trace().norm() / 2.0;
        (overlap - 1.0).abs() < 1e-12
    }

    #[test]
    fn named_gate_table() {
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let x = Matrix2::new(zero, one, one, zero);
        let y = Matrix2::new(zero, -i, i, zero);
        let rot = |m: &Matrix2<C64>, ang: f64| {
            Matrix2::identity() * C64::new((ang / 2.0).cos(), 0.0) - m * i * C64::new((ang / 2.0).sin(), 0.0)
        };
        let cases = [
            (NamedGate::I, Matrix2::identity()),
            (NamedGate::X, x),
            (NamedGate::SqrtX, rot(&x, FRAC_PI_2)),
            (NamedGate::SqrtMinusX, rot(&x, -FRAC_PI_2)),
            (NamedGate::SqrtY, rot(&y, FRAC_PI_2)),
            (NamedGate::SqrtMinusY, rot(&y, -FRAC_PI_2)),
        ];
        for (g, m) in cases {
            let (phi, theta) = g.angles();
            assert!(close_up_to_phase(&ideal_sq_unitary(phi, theta), &m), "{g:?}");
        }
    }

    #[test]
    fn wait_examples() {
        assert_eq!(wait_for_phase(PI, 2.0).unwrap(), 0.0);
        assert!((wait_for_phase(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(wait_for_phase(0.0, 0.0).is_err());
    }

    #[test]
    fn blockade_duration() {
        let spec = TqGateSpec::blockade(NamedGate::X, 50.0).unwrap();
        let q = QubitAssignment::default();
        let (s, u) = blockade_schedule(&spec, &q, &q).unwrap();
        assert!((s.duration() - 7.7).abs() < 1e-12);
        assert!((u * u.adjoint() - Matrix4::identity()).norm() < 1e-12);
    }
}
