//! Level structure of a single ion: hyperfine levels, oscillator strengths,
//! optical relaxation, qubit assignment, and the dipole-dipole coupling
//! between two ions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Shipped level data for 153Eu:Y2SiO5 site 1.
pub const DEFAULT_ION_CONFIG: &str = include_str!("../data/eu153_yso_site1.toml");

/// Microseconds per second; relaxation times are stored in seconds.
const US_PER_S: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub label: String,
    pub offset_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifetime {
    Infinite,
    Seconds(f64),
}

/// Three ground and three excited levels of one ion species/site.
///
/// Level indices used throughout the crate: ground levels are `0..3` in
/// config order, excited levels are `3..6`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    pub ground: Vec<Level>,
    pub excited: Vec<Level>,
    pub optical_carrier: String,
    /// `osc[i][j]` = f(ground i, excited j).
    pub osc: [[f64; 3]; 3],
    pub t1_optical: f64,
    pub t2_optical: f64,
    pub ground_lifetime: Lifetime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitAssignment {
    pub q0: String,
    pub q1: String,
    pub e: String,
    pub aux: String,
}

impl Default for QubitAssignment {
    fn default() -> Self {
        QubitAssignment {
            q0: "1/2g".into(),
            q1: "3/2g".into(),
            e: "5/2e".into(),
            aux: "5/2g".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonConfig {
    pub scheme: LevelScheme,
    pub qubit: QubitAssignment,
}

/// Level indices of the qubit assignment within a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitLevels {
    pub q0: usize,
    pub q1: usize,
    pub e: usize,
    pub aux: usize,
}

/// Dipole-dipole shift of one ion's optical lines while the other is excited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleCoupling {
    pub delta_nu: f64,
    /// k in delta_nu = k / r^3 (MHz nm^3), if known.
    pub distance_constant: Option<f64>,
}

impl DipoleCoupling {
    pub fn new(delta_nu: f64) -> Self {
        DipoleCoupling { delta_nu, distance_constant: None }
    }

    pub fn from_distance(k: f64, r_nm: f64) -> Result<Self> {
        if !(r_nm > 0.0) || !k.is_finite() {
            return Err(Error::invalid("distance", "r must be positive and k finite"));
        }
        Ok(DipoleCoupling { delta_nu: k / r_nm.powi(3), distance_constant: Some(k) })
    }

    /// Shift at distance `r_nm`, requires the distance constant.
    pub fn shift_at(&self, r_nm: f64) -> Option<f64> {
        self.distance_constant.map(|k| k / r_nm.powi(3))
    }
}

/// Which error sources are kept in a simulation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ErrorSourceMask {
    pub decay_decoherence: bool,
    pub internal_crosstalk: bool,
}

impl ErrorSourceMask {
    pub const PHYSICAL: Self = ErrorSourceMask { decay_decoherence: true, internal_crosstalk: true };
    pub const DECAY_ONLY: Self = ErrorSourceMask { decay_decoherence: true, internal_crosstalk: false };
    pub const CROSSTALK_ONLY: Self = ErrorSourceMask { decay_decoherence: false, internal_crosstalk: true };
    pub const IDEAL: Self = ErrorSourceMask { decay_decoherence: false, internal_crosstalk: false };
}

impl Default for ErrorSourceMask {
    fn default() -> Self {
        Self::PHYSICAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollapseKind {
    /// |to><from|, from an excited to a ground level.
    Decay { from: usize, to: usize },
    /// Projector onto one level.
    Dephasing { level: usize },
}

/// Collapse operator on the 6-level space of one ion.
///
/// `rate` is in 1/us. For decay, L = sqrt(rate) |to><from|. For dephasing,
/// `rate` is the induced coherence decay rate and L = sqrt(2 rate) |l><l|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseOp {
    pub kind: CollapseKind,
    pub rate: f64,
}

impl CollapseOp {
    /// Prefactor squared of the operator, gamma in L = sqrt(gamma) A.
    pub fn strength(&self) -> f64 {
        match self.kind {
            CollapseKind::Decay { .. } => self.rate,
            CollapseKind::Dephasing { .. } => 2.0 * self.rate,
        }
    }
}

impl LevelScheme {
    pub fn n_levels(&self) -> usize {
        6
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        if let Some(i) = self.ground.iter().position(|l| l.label == label) {
            return Ok(i);
        }
        if let Some(j) = self.excited.iter().position(|l| l.label == label) {
            return Ok(3 + j);
        }
        Err(Error::UnknownLabel(label.to_string()))
    }

    pub fn is_excited(index: usize) -> bool {
        index >= 3
    }

    /// Level energy offset within its manifold (MHz).
    pub fn level_offset(&self, index: usize) -> f64 {
        if index < 3 {
            self.ground[index].offset_mhz
        } else {
            self.excited[index - 3].offset_mhz
        }
    }

    /// Optical transition frequency g -> e relative to the manifold origins (MHz).
    pub fn transition_mhz(&self, g: usize, e: usize) -> f64 {
        self.level_offset(e) - self.level_offset(g)
    }

    pub fn strength(&self, g: usize, e: usize) -> f64 {
        self.osc[g][e - 3]
    }

    /// Fraction of decays from excited level `e` ending in ground level `g`.
    pub fn branching(&self, g: usize, e: usize) -> f64 {
        let col: f64 = (0..3).map(|i| self.osc[i][e - 3]).sum();
        if col > 0.0 {
            self.osc[g][e - 3] / col
        } else {
            0.0
        }
    }

    pub fn qubit_levels(&self, q: &QubitAssignment) -> Result<QubitLevels> {
        let levels = QubitLevels {
            q0: self.index_of(&q.q0)?,
            q1: self.index_of(&q.q1)?,
            e: self.index_of(&q.e)?,
            aux: self.index_of(&q.aux)?,
        };
        if levels.q0 >= 3 || levels.q1 >= 3 || levels.aux >= 3 {
            return Err(Error::invalid("qubit", "q0, q1 and aux must be ground levels"));
        }
        if levels.e < 3 {
            return Err(Error::invalid("qubit", "e must be an excited level"));
        }
        if levels.q0 == levels.q1 || levels.q0 == levels.aux || levels.q1 == levels.aux {
            return Err(Error::invalid("qubit", "q0, q1 and aux must be distinct"));
        }
        Ok(levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ground.len() != 3 || self.excited.len() != 3 {
            return Err(Error::invalid(
                "level count",
                format!("need 3 ground and 3 excited levels, got {} and {}", self.ground.len(), self.excited.len()),
            ));
        }
        for manifold in [&self.ground, &self.excited] {
            for w in manifold.windows(2) {
                if !(w[1].offset_mhz > w[0].offset_mhz) {
                    return Err(Error::invalid(
                        "level offsets",
                        format!("offsets must increase within a manifold ({} -> {})", w[0].label, w[1].label),
                    ));
                }
            }
        }
        let mut labels: Vec<&str> =
            self.ground.iter().chain(self.excited.iter()).map(|l| l.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != 6 {
            return Err(Error::invalid("level labels", "labels must be unique"));
        }
        for row in &self.osc {
            for &f in row {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::invalid("oscillator strength range", format!("{f} not in [0, 1]")));
                }
            }
        }
        if !(self.t1_optical > 0.0) || !(self.t2_optical > 0.0) {
            return Err(Error::invalid("coherence", "t1_optical and t2_optical must be positive"));
        }
        if self.t2_optical > 2.0 * self.t1_optical {
            return Err(Error::invalid("t2_optical", "t2_optical must not exceed 2 t1_optical"));
        }
        if let Lifetime::Seconds(t) = self.ground_lifetime {
            if !(t > 0.0) {
                return Err(Error::invalid("ground_lifetime", "must be positive or \"infinite\""));
            }
        }
        if self.ground.iter().chain(&self.excited).all(|l| l.label != self.optical_carrier)
            && self.optical_carrier.split('-').count() != 2
        {
            return Err(Error::invalid("optical_carrier", "must name a level or a g-e transition"));
        }
        Ok(())
    }

    /// Optical decay rate 1/t1 in 1/us.
    pub fn gamma_optical(&self) -> f64 {
        1.0 / (self.t1_optical * US_PER_S)
    }

    /// Pure dephasing rate 1/t2 - 1/(2 t1) in 1/us.
    pub fn gamma_dephasing(&self) -> f64 {
        1.0 / (self.t2_optical * US_PER_S) - 0.5 * self.gamma_optical()
    }
}

/// Decay from every excited to every ground level, dephasing of every
/// excited level, and ground dephasing only for a finite ground lifetime.
pub fn build_collapse_ops(scheme: &LevelScheme) -> Result<Vec<CollapseOp>> {
    let gamma = scheme.gamma_optical();
    let dephasing = scheme.gamma_dephasing();
    if dephasing < -1e-15 {
        return Err(Error::invalid("t2_optical", "negative pure dephasing rate (t2 > 2 t1)"));
    }
    let dephasing = dephasing.max(0.0);
    let mut ops = Vec::with_capacity(15);
    for e in 3..6 {
        for g in 0..3 {
            let b = scheme.branching(g, e);
            if b > 0.0 {
                ops.push(CollapseOp { kind: CollapseKind::Decay { from: e, to: g }, rate: gamma * b });
            }
        }
    }
    for e in 3..6 {
        if dephasing > 0.0 {
            ops.push(CollapseOp { kind: CollapseKind::Dephasing { level: e }, rate: dephasing });
        }
    }
    if let Lifetime::Seconds(t) = scheme.ground_lifetime {
        // Coherence between two ground levels then decays at 1/t.
        let rate = 0.5 / (t * US_PER_S);
        for g in 0..3 {
            ops.push(CollapseOp { kind: CollapseKind::Dephasing { level: g }, rate });
        }
    }
    Ok(ops)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    levels: RawLevels,
    oscillator_strengths: BTreeMap<String, Vec<f64>>,
    coherence: RawCoherence,
    qubit: Option<RawQubit>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevels {
    optical_carrier: String,
    ground: Vec<RawLevel>,
    excited: Vec<RawLevel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevel {
    label: String,
    offset_mhz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoherence {
    t1_optical: f64,
    t2_optical: f64,
    #[serde(default)]
    ground_lifetime: Option<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQubit {
    q0: String,
    q1: String,
    e: String,
    aux: String,
}

/// Parses and validates an ion config from TOML text.
pub fn parse_ion_config(text: &str) -> Result<IonConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let ground: Vec<Level> =
        raw.levels.ground.into_iter().map(|l| Level { label: l.label, offset_mhz: l.offset_mhz }).collect();
    let excited: Vec<Level> =
        raw.levels.excited.into_iter().map(|l| Level { label: l.label, offset_mhz: l.offset_mhz }).collect();
    if ground.len() != 3 || excited.len() != 3 {
        return Err(Error::invalid(
            "level count",
            format!("need 3 ground and 3 excited levels, got {} and {}", ground.len(), excited.len()),
        ));
    }
    let mut osc = [[0.0; 3]; 3];
    for (label, row) in &raw.oscillator_strengths {
        let i = ground
            .iter()
            .position(|l| &l.label == label)
            .ok_or_else(|| Error::invalid("oscillator_strengths", format!("unknown ground level `{label}`")))?;
        if row.len() != 3 {
            return Err(Error::invalid("oscillator_strengths", format!("row `{label}` needs 3 entries")));
        }
        osc[i].copy_from_slice(row);
    }
    if raw.oscillator_strengths.len() != 3 {
        return Err(Error::invalid("oscillator_strengths", "need one row per ground level"));
    }
    let ground_lifetime = match raw.coherence.ground_lifetime {
        None => Lifetime::Infinite,
        Some(toml::Value::String(s)) if s == "infinite" => Lifetime::Infinite,
        Some(toml::Value::Float(t)) => Lifetime::Seconds(t),
        Some(toml::Value::Integer(t)) => Lifetime::Seconds(t as f64),
        Some(other) => {
            return Err(Error::invalid("ground_lifetime", format!("expected seconds or \"infinite\", got {other}")))
        }
    };
    let scheme = LevelScheme {
        ground,
        excited,
        optical_carrier: raw.levels.optical_carrier,
        osc,
        t1_optical: raw.coherence.t1_optical,
        t2_optical: raw.coherence.t2_optical,
        ground_lifetime,
    };
    scheme.validate()?;
    let qubit = match raw.qubit {
        Some(q) => QubitAssignment { q0: q.q0, q1: q.q1, e: q.e, aux: q.aux },
        None => QubitAssignment::default(),
    };
    scheme.qubit_levels(&qubit)?;
    Ok(IonConfig { scheme, qubit })
}

pub fn load_ion_config(path: impl AsRef<Path>) -> Result<IonConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_ion_config(&text)
}

pub fn default_ion_config() -> IonConfig {
    parse_ion_config(DEFAULT_ION_CONFIG).expect("shipped config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_anchors() {
        let cfg = default_ion_config();
        let q = cfg.scheme.qubit_levels(&cfg.qubit).unwrap();
        assert_eq!(cfg.scheme.strength(q.q0, q.e), 0.75);
        assert_eq!(cfg.scheme.strength(q.q1, q.e), 0.20);
        let f0 = cfg.scheme.transition_mhz(q.q0, q.e);
        let f1 = cfg.scheme.transition_mhz(q.q1, q.e);
        assert!((f1 - f0 - 90.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_two_ground_levels() {
        let text = DEFAULT_ION_CONFIG.replace("    { label = \"5/2g\", offset_mhz = 0.0 },\n", "");
        let err = parse_ion_config(&text).unwrap_err().to_string();
        assert!(err.contains("level count"), "{err}");
    }

    #[test]
    fn rejects_strength_above_one() {
        let text = DEFAULT_ION_CONFIG.replace("[0.80, 0.15, 0.05]", "[1.2, 0.15, 0.05]");
        let err = parse_ion_config(&text).unwrap_err().to_string();
        assert!(err.contains("oscillator strength range"), "{err}");
    }

    #[test]
    fn rejects_long_t2() {
        let text = DEFAULT_ION_CONFIG.replace("t2_optical = 2.6e-3", "t2_optical = 4.0e-3");
        let err = parse_ion_config(&text).unwrap_err().to_string();
        assert!(err.contains("t2_optical"), "{err}");
    }

    #[test]
    fn lifetime_limited_dephasing_is_zero() {
        let mut s = default_ion_config().scheme;
        s.t2_optical = 2.0 * s.t1_optical;
        let ops = build_collapse_ops(&s).unwrap();
        assert!(ops.iter().all(|o| matches!(o.kind, CollapseKind::Decay { .. })));
        assert_eq!(s.gamma_dephasing(), 0.0);
    }

    #[test]
    fn branching_sums_to_one() {
        let s = default_ion_config().scheme;
        for e in 3..6 {
            let total: f64 = (0..3).map(|g| s.branching(g, e)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let ops = build_collapse_ops(&s).unwrap();
        assert!(ops.iter().all(|o| o.rate >= 0.0));
    }

    #[test]
    fn distance_conversion_decreases() {
        let a = DipoleCoupling::from_distance(100.0, 2.0).unwrap();
        let b = DipoleCoupling::from_distance(100.0, 3.0).unwrap();
        assert!(a.delta_nu > b.delta_nu);
        assert!((a.delta_nu - 12.5).abs() < 1e-12);
    }
}
