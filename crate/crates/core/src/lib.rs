//! Simulation and pulse design for rare-earth-ion qubit gates.
//!
//! Units: time in microseconds, frequencies in MHz, Rabi frequencies and
//! Hamiltonians in rad/us.

pub mod engine;
pub mod error;
pub mod gates;
pub mod metrics;
pub mod ion_model;
pub mod model;
pub mod optimize;
pub mod pulse;
pub mod schedule;
pub mod sensitivity;
pub mod spectral;

pub use engine::{
    evolve_operators, final_state, integrate, integrate_with, DensityMatrix, IntegratorSettings, JumpExpansion,
    JumpExpansionResult, Trajectory, TrajectoryOptions,
};
pub use error::{Error, Result};
pub use gates::{NamedGate, SqGateSpec, TqGateSpec, TqKind};
pub use ion_model::{
    build_collapse_ops, default_ion_config, load_ion_config, parse_ion_config, CollapseKind, CollapseOp,
    DipoleCoupling, ErrorSourceMask, IonConfig, LevelScheme, Lifetime, QubitAssignment,
};
pub use model::{apply_error_mask, assemble_hamiltonian, build_two_ion_model, compile, Compiled, SimulationModel};
pub use pulse::{CutGaussianParams, Envelope, SechscanParams};
pub use schedule::{GateSchedule, IonId, Segment, TargetIon, Tone};

pub use num_complex::Complex64 as C64;
