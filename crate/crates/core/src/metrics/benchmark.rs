//! Randomized SQ gate sequences.
//!
//! Every pulse of a sequence is the same two-color cut Gaussian with tone
//! phases (p0, p1) starting at some time tau. Diagonal frame changes relate
//! all of these channels to the family E_phi of a pulse at tau = 0 with
//! phases (0, phi): a start time tau only adds 2pi E_l tau to level l and
//! -2pi nu_k tau to tone k, and a common tone phase is a phase on the excited
//! levels. E_phi itself is tabulated on an odd grid in phi (after removing
//! the phi dependence of the resonant Lambda system) and interpolated with
//! its Fourier series, so a sequence costs a few small matrix products per
//! pulse instead of an integration.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{clip_error, clip_tol, fit_error_rate};
use crate::engine::{evolve_operators, unit_operator, IntegratorSettings};
use crate::error::{Error, Result};
use crate::gates::ideal_sq_unitary;
use crate::ion_model::LevelScheme;
use crate::model::SimulationModel;
use crate::pulse::{CutGaussianParams, Envelope};
use crate::schedule::{GateSchedule, IonId, TargetIon, Tone};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkOptions {
    pub n_gates: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Phase grid size of the channel table (odd).
    pub phase_grid: usize,
}

impl BenchmarkOptions {
    pub fn new(n_gates: usize, repeats: usize, seed: u64) -> Self {
        BenchmarkOptions { n_gates, repeats, seed, phase_grid: 15 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Mean error after n = 1..N gates.
    pub epsilon_n: Vec<f64>,
    /// Spread of the error over repeats.
    pub epsilon_std: Vec<f64>,
    pub fitted_p: f64,
    pub repeats: usize,
}

impl BenchmarkResult {
    /// CSV with columns n, mean, std.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        out.write_record(["n", "epsilon_mean", "epsilon_std"]).map_err(io)?;
        for (k, (m, s)) in self.epsilon_n.iter().zip(&self.epsilon_std).enumerate() {
            out.write_record([(k + 1).to_string(), format!("{m:.12e}"), format!("{s:.12e}")]).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Tabulated channel of one two-color pulse.
#[derive(Debug, Clone)]
pub struct ChannelCache {
    dim: usize,
    q1: usize,
    energies: Vec<f64>,
    excited: Vec<bool>,
    nu: [f64; 2],
    /// Fourier coefficients (m, nonzero entries (out * dim^2 + in, value)
    /// of the superoperator).
    harmonics: Vec<(i32, Vec<(u32, u32, C64)>)>,
    t_g: f64,
}

impl ChannelCache {
    pub fn build(
        model: &SimulationModel,
        pulse: &CutGaussianParams,
        settings: &IntegratorSettings,
        phase_grid: usize,
    ) -> Result<Self> {
        if model.n_ions() != 1 {
            return Err(Error::invalid("model", "benchmark needs a single-ion model"));
        }
        if phase_grid < 3 || phase_grid % 2 == 0 {
            return Err(Error::invalid("phase_grid", "must be odd and at least 3"));
        }
        let site = &model.ions[0];
        if site.offset_mhz != 0.0 || site.frame_shift_mhz != 0.0 || model.routes[0].reference_offset_mhz != 0.0 {
            return Err(Error::invalid("model", "benchmark expects the ion at zero offset"));
        }
        let lv = model.qubit_levels(0)?;
        let dim = model.dim();
        let nn = dim * dim;
        let energies: Vec<f64> = (0..dim).map(|l| site.scheme.level_offset(l)).collect();
        let excited: Vec<bool> = (0..dim).map(LevelScheme::is_excited).collect();
        let nu = [site.scheme.transition_mhz(lv.q0, lv.e), site.scheme.transition_mhz(lv.q1, lv.e)];
        let env = Envelope::CutGaussian(*pulse);
        let q = &site.qubit;

        let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        let inputs: Vec<Vec<C64>> = pairs.iter().map(|&(i, j)| unit_operator(dim, i, j)).collect();
        let tables: Vec<Result<Vec<C64>>> = (0..phase_grid)
            .into_par_iter()
            .map(|k| {
                let phi = TAU * k as f64 / phase_grid as f64;
                let sched = GateSchedule::new(TargetIon::A).pulse(
                    vec![Tone::new(IonId::A, &q.q0, &q.e, 0.0, env), Tone::new(IonId::A, &q.q1, &q.e, phi, env)],
                    pulse.t_g,
                );
                let out = evolve_operators(model, &sched, &inputs, settings, 0.0)?;
                // s[out * nn + in], conjugated by the Lambda-system gauge.
                let d: Vec<C64> =
                    (0..dim).map(|l| if l == lv.q1 { C64::from_polar(1.0, -phi) } else { C64::new(1.0, 0.0) }).collect();
                let mut s = vec![C64::new(0.0, 0.0); nn * nn];
                for (col, &(i, j)) in pairs.iter().enumerate() {
                    let o = &out[col];
                    for r in 0..dim {
                        for c in 0..dim {
                            let v = o[r * dim + c];
                            let pre = d[r].conj() * d[c];
                            s[(r * dim + c) * nn + i * dim + j] = pre * v * d[i] * d[j].conj();
                            if i != j {
                                let vt = o[c * dim + r].conj();
                                s[(r * dim + c) * nn + j * dim + i] = pre * vt * d[j] * d[i].conj();
                            }
                        }
                    }
                }
                Ok(s)
            })
            .collect();
        let tables: Vec<Vec<C64>> = tables.into_iter().collect::<Result<_>>()?;
        let m_max = (phase_grid / 2) as i32;
        let mut dense = Vec::new();
        let mut c0_norm = 0.0;
        for m in 0..=m_max {
            for sign in [1, -1] {
                let mm = sign * m;
                if m == 0 && sign == -1 {
                    continue;
                }
                let mut c = vec![C64::new(0.0, 0.0); nn * nn];
                for (k, t) in tables.iter().enumerate() {
                    let w = C64::from_polar(1.0 / phase_grid as f64, -(mm as f64) * TAU * k as f64 / phase_grid as f64);
                    for (a, b) in c.iter_mut().zip(t) {
                        *a += w * b;
                    }
                }
                let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if m == 0 {
                    c0_norm = norm;
                }
                if norm > 1e-14 * c0_norm {
                    dense.push((mm, c));
                }
            }
        }
        // Entries far below the integration error are dropped.
        let cut = 1e-15 * c0_norm;
        let harmonics = dense
            .into_iter()
            .map(|(m, c)| {
                let nz = c.iter().enumerate().filter(|(_, v)| v.norm() > cut).map(|(k, v)| ((k / nn) as u32, (k % nn) as u32, *v)).collect();
                (m, nz)
            })
            .collect();
        Ok(ChannelCache { dim, q1: lv.q1, energies, excited, nu, harmonics, t_g: pulse.t_g })
    }

    pub fn pulse_duration(&self) -> f64 {
        self.t_g
    }

    /// Largest Fourier order kept.
    pub fn max_harmonic(&self) -> i32 {
        self.harmonics.iter().map(|(m, _)| m.abs()).max().unwrap_or(0)
    }

    /// Applies the pulse starting at `start` with tone phases (p0, p1) to a
    /// row-major operator.
    pub fn apply(&self, rho: &mut [C64], start: f64, p0: f64, p1: f64) {
        let dim = self.dim;
        let nn = dim * dim;
        let a = p0 - TAU * self.nu[0] * start;
        let phi = (p1 - TAU * self.nu[1] * start) - a;
        let g: Vec<C64> = (0..dim)
            .map(|l| {
                let mut ph = TAU * self.energies[l] * start;
                if self.excited[l] {
                    ph += a;
                }
                if l == self.q1 {
                    ph -= phi;
                }
                C64::from_polar(1.0, ph.rem_euclid(TAU))
            })
            .collect();
        let x: Vec<C64> = (0..nn).map(|k| g[k / dim].conj() * rho[k] * g[k % dim]).collect();
        let mut y = vec![C64::new(0.0, 0.0); nn];
        for (order, c) in &self.harmonics {
            let w = C64::from_polar(1.0, (*order as f64 * phi).rem_euclid(TAU));
            let mut acc = vec![C64::new(0.0, 0.0); nn];
            for &(r, k, v) in c {
                acc[r as usize] += v * x[k as usize];
            }
            for (a, b) in y.iter_mut().zip(&acc) {
                *a += w * b;
            }
        }
        for k in 0..nn {
            rho[k] = g[k / dim] * y[k] * g[k % dim].conj();
        }
    }

    /// Applies the SQ gate (phi, theta) starting at `start`.
    pub fn apply_gate(&self, rho: &mut [C64], start: f64, phi: f64, theta: f64) {
        self.apply(rho, start, 0.0, phi);
        self.apply(rho, start + self.t_g, PI - theta, phi + PI - theta);
    }
}

/// Runs `repeats` sequences of `n_gates` random SQ gates (phi uniform in
/// [0, 2pi), theta uniform in [0, pi]) from |0>, tracking the ideal state.
pub fn run_benchmark(
    model: &SimulationModel,
    pulse: &CutGaussianParams,
    opts: &BenchmarkOptions,
    settings: &IntegratorSettings,
) -> Result<BenchmarkResult> {
    if opts.n_gates == 0 || opts.repeats == 0 {
        return Err(Error::invalid("benchmark", "n_gates and repeats must be positive"));
    }
    let cache = ChannelCache::build(model, pulse, settings, opts.phase_grid)?;
    let lv = model.qubit_levels(0)?;
    let dim = model.dim();
    let tol = clip_tol(settings) * opts.n_gates as f64;
    let runs: Vec<Result<Vec<f64>>> = (0..opts.repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let mut rho = unit_operator(dim, lv.q0, lv.q0);
            let mut psi = nalgebra::Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
            let mut eps = Vec::with_capacity(opts.n_gates);
            for n in 0..opts.n_gates {
                let phi = rng.gen::<f64>() * TAU;
                let theta = rng.gen::<f64>() * PI;
                cache.apply_gate(&mut rho, n as f64 * 2.0 * cache.t_g, phi, theta);
                psi = ideal_sq_unitary(phi, theta) * psi;
                let idx = [lv.q0, lv.q1];
                let mut f = C64::new(0.0, 0.0);
                for (x, &i) in idx.iter().enumerate() {
                    for (y, &j) in idx.iter().enumerate() {
                        f += psi[x].conj() * rho[i * dim + j] * psi[y];
                    }
                }
                eps.push(clip_error(1.0 - f.re, tol)?);
            }
            Ok(eps)
        })
        .collect();
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let k = opts.repeats as f64;
    let mut mean = vec![0.0; opts.n_gates];
    let mut std = vec![0.0; opts.n_gates];
    for n in 0..opts.n_gates {
        let m = runs.iter().map(|r| r[n]).sum::<f64>() / k;
        mean[n] = m;
        std[n] = (runs.iter().map(|r| (r[n] - m).powi(2)).sum::<f64>() / k).sqrt();
    }
    let fitted_p = fit_error_rate(&mean)?;
    Ok(BenchmarkResult { epsilon_n: mean, epsilon_std: std, fitted_p, repeats: opts.repeats })
}
