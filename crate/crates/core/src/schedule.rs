//! Gate schedules: ordered pulse and wait segments carrying drive tones.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::pulse::Envelope;

/// Logical ion a tone is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IonId {
    A,
    B,
}

impl IonId {
    pub fn index(self) -> usize {
        match self {
            IonId::A => 0,
            IonId::B => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetIon {
    A,
    B,
    Both,
}

/// One drive frequency component.
#[derive(Debug, Clone, PartialEq)]
pub struct Tone {
    pub ion: IonId,
    /// (ground label, excited label) of the transition the tone addresses.
    pub target: (String, String),
    /// Offset of the tone from the target transition (MHz).
    pub carrier_detuning: f64,
    /// Phase in [0, 2pi).
    pub phase: f64,
    pub envelope: Envelope,
    /// Multiplies the Rabi frequency (1 = nominal).
    pub amplitude_scale: f64,
    /// Oscillator strength the Rabi frequency refers to; `None` uses the
    /// target transition of the simulated ion.
    pub reference_strength: Option<f64>,
}

impl Tone {
    pub fn new(ion: IonId, ground: &str, excited: &str, phase: f64, envelope: Envelope) -> Self {
        Tone {
            ion,
            target: (ground.to_string(), excited.to_string()),
            carrier_detuning: 0.0,
            phase: phase.rem_euclid(TAU),
            envelope,
            amplitude_scale: 1.0,
            reference_strength: None,
        }
    }

    pub fn with_detuning(mut self, mhz: f64) -> Self {
        self.carrier_detuning = mhz;
        self
    }

    pub fn shift_phase(&mut self, angle: f64) {
        self.phase = (self.phase + angle).rem_euclid(TAU);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Pulse { tones: Vec<Tone>, duration: f64 },
    Wait { duration: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Pulse { duration, .. } | Segment::Wait { duration } => *duration,
        }
    }

    pub fn tones(&self) -> &[Tone] {
        match self {
            Segment::Pulse { tones, .. } => tones,
            Segment::Wait { .. } => &[],
        }
    }

    pub fn tones_mut(&mut self) -> &mut [Tone] {
        match self {
            Segment::Pulse { tones, .. } => tones,
            Segment::Wait { .. } => &mut [],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    pub segments: Vec<Segment>,
    pub target_ion: TargetIon,
}

impl GateSchedule {
    pub fn new(target_ion: TargetIon) -> Self {
        GateSchedule { segments: Vec::new(), target_ion }
    }

    pub fn pulse(mut self, tones: Vec<Tone>, duration: f64) -> Self {
        self.segments.push(Segment::Pulse { tones, duration });
        self
    }

    pub fn wait(mut self, duration: f64) -> Self {
        self.segments.push(Segment::Wait { duration });
        self
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Appends another schedule after this one.
    pub fn then(mut self, other: GateSchedule) -> Self {
        self.segments.extend(other.segments);
        self.target_ion = if self.target_ion == other.target_ion { self.target_ion } else { TargetIon::Both };
        self
    }

    /// Plays both schedules at the same time. Segment boundaries must line up.
    pub fn parallel(&self, other: &GateSchedule) -> Result<GateSchedule> {
        if self.segments.len() != other.segments.len() {
            return Err(Error::invalid("schedule", "parallel schedules need matching segments"));
        }
        let mut out = GateSchedule::new(TargetIon::Both);
        for (a, b) in self.segments.iter().zip(&other.segments) {
            if (a.duration() - b.duration()).abs() > 1e-12 {
                return Err(Error::invalid("schedule", "parallel segment durations differ"));
            }
            let mut tones = a.tones().to_vec();
            tones.extend_from_slice(b.tones());
            out.segments.push(if tones.is_empty() {
                Segment::Wait { duration: a.duration() }
            } else {
                Segment::Pulse { tones, duration: a.duration() }
            });
        }
        Ok(out)
    }

    /// Every tone in every segment.
    pub fn tones_mut(&mut self) -> impl Iterator<Item = &mut Tone> {
        self.segments.iter_mut().flat_map(|s| s.tones_mut().iter_mut())
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            let d = s.duration();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::invalid("segment duration", format!("{d} is not positive")));
            }
            for t in s.tones() {
                if t.envelope.duration() > d + 1e-12 {
                    return Err(Error::invalid("tone envelope", "envelope longer than its segment"));
                }
            }
        }
        Ok(())
    }
}
