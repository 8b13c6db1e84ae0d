//! Experiment spec files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Simulate,
    SqError,
    Benchmark,
    Crosstalk,
    TqError,
    Optimize,
    Windows,
    Sensitivity,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::SqError => "sq-error",
            Kind::Benchmark => "benchmark",
            Kind::Crosstalk => "crosstalk",
            Kind::TqError => "tq-error",
            Kind::Optimize => "optimize",
            Kind::Windows => "windows",
            Kind::Sensitivity => "sensitivity",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel_tol: 1e-8, abs_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    #[serde(default = "default_t_g")]
    pub t_g: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// DRAG coefficient (s).
    #[serde(default)]
    pub drag_alpha_y: f64,
}

fn default_t_g() -> f64 {
    reigate::gates::SQ_T_G
}
fn default_sigma() -> f64 {
    reigate::gates::SQ_SIGMA
}

impl Default for PulseBlock {
    fn default() -> Self {
        PulseBlock { t_g: default_t_g(), sigma: default_sigma(), drag_alpha_y: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MaskName {
    #[default]
    Physical,
    DecayOnly,
    CrosstalkOnly,
    Ideal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default)]
    pub pulse: PulseBlock,
    pub gate: Option<String>,
    pub phi: Option<f64>,
    pub theta: Option<f64>,
    /// Initial qubit state: 0, 1, +, -, +i, -i.
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub mask: MaskName,
}

fn default_initial() -> String {
    "0".into()
}
fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqErrorBlock {
    #[serde(default)]
    pub pulse: PulseBlock,
    #[serde(default)]
    pub mask: MaskName,
    pub gates: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkBlock {
    #[serde(default)]
    pub pulse: PulseBlock,
    pub n_gates: usize,
    pub repeats: usize,
    #[serde(default = "default_phase_grid")]
    pub phase_grid: usize,
}

fn default_phase_grid() -> usize {
    15
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkBlock {
    #[serde(default)]
    pub pulse: PulseBlock,
    pub detunings_mhz: Vec<f64>,
    pub mode: String,
    pub idle_gate: Option<String>,
    #[serde(default = "default_scan_initial")]
    pub initial: String,
}

fn default_scan_initial() -> String {
    "qubit".into()
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SechscanBlock {
    pub t_g: f64,
    pub t_fwhm: f64,
    pub f_width: f64,
    pub f_scan: f64,
    pub omega0: f64,
}

impl From<SechscanBlock> for reigate::SechscanParams {
    fn from(b: SechscanBlock) -> Self {
        reigate::SechscanParams { t_g: b.t_g, t_fwhm: b.t_fwhm, f_width: b.f_width, f_scan: b.f_scan, omega0: b.omega0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TqErrorBlock {
    /// blockade | interaction
    pub gate: String,
    pub delta_nu_mhz: Vec<f64>,
    pub sechscan: Option<SechscanBlock>,
    /// Wait between sechscan pulses (us); calibrated per shift when absent.
    pub wait_us: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeBlock {
    /// sq | sq_drag | interaction | blockade_control
    pub objective: String,
    pub delta_nu_mhz: Option<f64>,
    pub bounds: Vec<[f64; 2]>,
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    #[serde(default = "default_iters")]
    pub local_max_iters: usize,
    #[serde(default = "default_opt_tol")]
    pub tol: f64,
    pub initial: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub isd: bool,
    #[serde(default = "default_true")]
    pub reduced: bool,
}

fn default_starts() -> usize {
    32
}
fn default_iters() -> usize {
    500
}
fn default_opt_tol() -> f64 {
    1e-6
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsBlock {
    #[serde(default = "default_span")]
    pub span_mhz: f64,
}

fn default_span() -> f64 {
    2000.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityBlock {
    /// rabi_grid | osc_strength | splitting | tq
    pub analysis: String,
    #[serde(default)]
    pub pulse: PulseBlock,
    /// Half-width of the Rabi box (fraction).
    #[serde(default = "default_box")]
    pub rabi_box: f64,
    #[serde(default = "default_box_points")]
    pub rabi_box_points: usize,
    #[serde(default)]
    pub axis_values: Vec<f64>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// blind | retuned | both
    #[serde(default = "default_policy")]
    pub policy: String,
    #[serde(default)]
    pub osc_strength_max_dev: f64,
    #[serde(default)]
    pub splitting_max_dev_khz: f64,
    #[serde(default = "default_rabi_residual")]
    pub rabi_residual: f64,
    #[serde(default = "default_freq_residual")]
    pub freq_residual_khz: f64,
    /// For analysis = tq.
    pub gate: Option<String>,
    #[serde(default)]
    pub delta_nu_mhz: Vec<f64>,
    pub sechscan: Option<SechscanBlock>,
}

fn default_box() -> f64 {
    0.005
}
fn default_box_points() -> usize {
    3
}
fn default_draws() -> usize {
    100
}
fn default_policy() -> String {
    "both".into()
}
fn default_rabi_residual() -> f64 {
    0.005
}
fn default_freq_residual() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Must match the command line kind when given.
    pub kind: Option<String>,
    pub ion_config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub simulate: Option<SimulateBlock>,
    pub sq_error: Option<SqErrorBlock>,
    pub benchmark: Option<BenchmarkBlock>,
    pub crosstalk: Option<CrosstalkBlock>,
    pub tq_error: Option<TqErrorBlock>,
    pub optimize: Option<OptimizeBlock>,
    pub windows: Option<WindowsBlock>,
    pub sensitivity: Option<SensitivityBlock>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
        let mut spec = Self::parse(&text)?;
        if let Some(p) = &spec.ion_config {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                spec.ion_config = Some(base.join(p));
            }
        }
        Ok(spec)
    }

    /// Checks the parts shared by every kind.
    pub fn check(&self, kind: Kind) -> Result<(), CliError> {
        if let Some(k) = &self.kind {
            if k != kind.name() {
                return Err(CliError::Spec(format!("spec is for `{k}`, not `{}`", kind.name())));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::Spec("workers must be at least 1".into()));
        }
        let missing = |name: &str| CliError::Spec(format!("missing [{name}] block"));
        match kind {
            Kind::Simulate if self.simulate.is_none() => Err(missing("simulate")),
            Kind::SqError if self.sq_error.is_none() => Err(missing("sq_error")),
            Kind::Benchmark if self.benchmark.is_none() => Err(missing("benchmark")),
            Kind::Crosstalk if self.crosstalk.is_none() => Err(missing("crosstalk")),
            Kind::TqError if self.tq_error.is_none() => Err(missing("tq_error")),
            Kind::Optimize if self.optimize.is_none() => Err(missing("optimize")),
            Kind::Sensitivity if self.sensitivity.is_none() => Err(missing("sensitivity")),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentSpec::parse("seed = 1\nbogus = 2\n").is_err());
        assert!(ExperimentSpec::parse("[windows]\nspan = 3\n").is_err());
    }

    #[test]
    fn missing_block() {
        let s = ExperimentSpec::parse("seed = 1\n").unwrap();
        assert!(s.check(Kind::Benchmark).is_err());
        assert!(s.check(Kind::Windows).is_ok());
    }

    #[test]
    fn kind_mismatch() {
        let s = ExperimentSpec::parse("kind = \"windows\"\n").unwrap();
        assert!(s.check(Kind::SqError).is_err());
    }
}
