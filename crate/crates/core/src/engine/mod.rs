//! Lindblad master-equation engine.

pub(crate) mod jumps;
pub(crate) mod lindblad;
pub(crate) mod ode;
mod state;

use std::io::Write;

use num_complex::Complex64 as C64;

pub use jumps::{evolve_pure, JumpExpansion, JumpExpansionResult};
pub use ode::IntegratorSettings;
pub use state::DensityMatrix;

use crate::error::{Error, Result};
use crate::model::{compile, Compiled, SimulationModel};
use crate::schedule::GateSchedule;
use lindblad::LindbladRhs;
use ode::Dopri;

/// Sampled solution of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has the initial state")
    }

    /// Writes t, all populations and the listed coherences as CSV.
    pub fn write_csv<W: Write>(&self, w: W, coherences: &[(usize, usize)]) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let dim = self.states.first().map(|s| s.dim()).unwrap_or(0);
        let mut header = vec!["t_us".to_string()];
        header.extend((0..dim).map(|i| format!("p{i}")));
        for &(i, j) in coherences {
            header.push(format!("re_{i}_{j}"));
            header.push(format!("im_{i}_{j}"));
        }
        out.write_record(&header).map_err(csv_err)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![format!("{t:.9}")];
            row.extend((0..dim).map(|i| format!("{:.12e}", s.population(i))));
            for &(i, j) in coherences {
                let z = s.get(i, j);
                row.push(format!("{:.12e}", z.re));
                row.push(format!("{:.12e}", z.im));
            }
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Extra sampling of a trajectory besides the segment boundaries.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryOptions {
    /// Uniform samples across the schedule (0 = segment boundaries only).
    pub samples: usize,
}

/// Integrates the Lindblad equation for `schedule` from `rho0`.
pub fn integrate(
    model: &SimulationModel,
    schedule: &GateSchedule,
    rho0: &DensityMatrix,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    integrate_with(model, schedule, rho0, settings, &TrajectoryOptions::default())
}

pub fn integrate_with(
    model: &SimulationModel,
    schedule: &GateSchedule,
    rho0: &DensityMatrix,
    settings: &IntegratorSettings,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    settings.validate()?;
    let c = compile(model, schedule, 0.0)?;
    if rho0.dim() != c.dim() {
        return Err(Error::invalid("rho0", format!("dimension {} does not match model {}", rho0.dim(), c.dim())));
    }
    rho0.check(settings.rel_tol)?;
    let mut grid: Vec<f64> = (0..c.n_segments()).map(|k| c.segment_bounds(k).1).collect();
    if opts.samples > 0 {
        let end = c.end();
        grid.extend((1..opts.samples).map(|k| end * k as f64 / opts.samples as f64));
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    }
    let mut traj = Trajectory { times: vec![0.0], states: vec![rho0.clone()], steps: 0, rejected: 0 };
    let mut y = rho0.as_slice().to_vec();
    let mut rhs = LindbladRhs::new(&c, 1);
    let mut dp = Dopri::new(y.len());
    let mut t = 0.0;
    let mut gi = 0;
    for k in 0..c.n_segments() {
        rhs.set_segment(k);
        let (_, end) = c.segment_bounds(k);
        let seg_settings = c.segment_settings(k, settings);
        while gi < grid.len() && grid[gi] <= end + 1e-12 {
            let stop = grid[gi].min(end);
            dp.integrate(&mut rhs, t, stop, &mut y, &seg_settings, None)?;
            t = stop;
            let mut s = DensityMatrix::from_row_major(c.dim(), y.clone())?;
            s.symmetrize();
            traj.times.push(t);
            traj.states.push(s);
            gi += 1;
        }
    }
    traj.steps = dp.steps;
    traj.rejected = dp.rejected;
    let last = traj.states.last_mut().unwrap();
    let herm = DensityMatrix::from_row_major(c.dim(), y)?.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::Invariant(format!("hermiticity error {herm:e}")));
    }
    last.check(settings.rel_tol)?;
    Ok(traj)
}

/// Final state only.
pub fn final_state(
    model: &SimulationModel,
    schedule: &GateSchedule,
    rho0: &DensityMatrix,
    settings: &IntegratorSettings,
) -> Result<DensityMatrix> {
    Ok(integrate(model, schedule, rho0, settings)?.final_state().clone())
}

/// Propagates a batch of arbitrary operators (row-major, dim x dim) through
/// the Lindblad evolution of a compiled schedule. Linear, so no state checks.
pub fn evolve_compiled(c: &Compiled, inputs: &[Vec<C64>], settings: &IntegratorSettings) -> Result<Vec<Vec<C64>>> {
    settings.validate()?;
    let nn = c.dim() * c.dim();
    let batch = inputs.len();
    let mut y = Vec::with_capacity(nn * batch);
    for op in inputs {
        if op.len() != nn {
            return Err(Error::invalid("operator", "size must be dim^2"));
        }
        y.extend_from_slice(op);
    }
    let mut rhs = LindbladRhs::new(c, batch);
    let mut dp = Dopri::new(y.len());
    for k in 0..c.n_segments() {
        rhs.set_segment(k);
        let (a, b) = c.segment_bounds(k);
        dp.integrate(&mut rhs, a, b, &mut y, &c.segment_settings(k, settings), None)?;
    }
    Ok(y.chunks(nn).map(|ch| ch.to_vec()).collect())
}

pub fn evolve_operators(
    model: &SimulationModel,
    schedule: &GateSchedule,
    inputs: &[Vec<C64>],
    settings: &IntegratorSettings,
    t_start: f64,
) -> Result<Vec<Vec<C64>>> {
    let c = compile(model, schedule, t_start)?;
    evolve_compiled(&c, inputs, settings)
}

/// Row-major |i><j| in dimension `dim`.
pub fn unit_operator(dim: usize, i: usize, j: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim * dim];
    v[i * dim + j] = C64::new(1.0, 0.0);
    v
}
