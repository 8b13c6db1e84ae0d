//! Pure-state evaluation of gate fidelities through first order in quantum
//! jumps.
//!
//! For input psi and pure target Psi,
//! `F = |<Psi|U(T)|psi>|^2 + sum_k int |<Psi|U(T,t) L_k U(t)|psi>|^2 dt`
//! with `U` the no-jump propagator of `H - (i/2) sum L^dag L`. Dropped terms
//! involve two or more jumps and are O((Gamma T)^2). By linearity a handful
//! of basis inputs `v_a` and targets `u_b` give F for every superposition.

use num_complex::Complex64 as C64;

use super::ode::{Dopri, IntegratorSettings, Rhs};
use crate::error::{Error, Result};
use crate::model::Compiled;

/// No-jump amplitudes and first-jump Gram matrix for basis inputs/targets.
#[derive(Debug, Clone)]
pub struct JumpExpansionResult {
    pub na: usize,
    pub nb: usize,
    /// `m[b * na + a] = <u_b| U(T) |v_a>`.
    pub m: Vec<C64>,
    /// Hermitian `(nb na) x (nb na)` matrix, row-major over pairs `(b, a)`.
    pub q: Vec<C64>,
}

impl JumpExpansionResult {
    /// Fidelity of input `sum c_a v_a` to target `sum d_b u_b`.
    pub fn fidelity(&self, c: &[C64], d: &[C64]) -> f64 {
        let (na, nb) = (self.na, self.nb);
        let p = na * nb;
        let mut x = vec![C64::new(0.0, 0.0); p];
        for b in 0..nb {
            for a in 0..na {
                x[b * na + a] = d[b].conj() * c[a];
            }
        }
        let amp: C64 = (0..p).map(|k| x[k] * self.m[k]).sum();
        let mut jump = C64::new(0.0, 0.0);
        for i in 0..p {
            if x[i] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut row = C64::new(0.0, 0.0);
            for j in 0..p {
                row += self.q[i * p + j] * x[j].conj();
            }
            jump += x[i] * row;
        }
        amp.norm_sqr() + jump.re
    }
}

pub struct JumpExpansion;

struct PureRhs<'a> {
    c: &'a Compiled,
    seg: usize,
    na: usize,
    nb: usize,
    accumulate: bool,
    coeff: Vec<C64>,
    g: Vec<C64>,
}

impl PureRhs<'_> {
    fn apply_h(&self, psi: &[C64], out: &mut [C64], sign_loss: f64) {
        let c = self.c;
        let n = c.dim;
        for i in 0..n {
            out[i] = psi[i] * C64::new(sign_loss * 0.5 * c.loss[i], -c.h_diag[i]);
        }
        for l in &c.segments[self.seg].links {
            let k = self.coeff[l.transition];
            if k.re == 0.0 && k.im == 0.0 {
                continue;
            }
            let mk = C64::new(k.im, -k.re);
            let mkc = C64::new(-k.im, -k.re);
            out[l.row] += mk * psi[l.col];
            out[l.col] += mkc * psi[l.row];
        }
    }
}

impl Rhs for PureRhs<'_> {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let c = self.c;
        let n = c.dim;
        c.coefficients(self.seg, t, &mut self.coeff);
        for a in 0..self.na {
            self.apply_h(&y[a * n..(a + 1) * n], &mut dy[a * n..(a + 1) * n], -1.0);
        }
        let off = self.na * n;
        for b in 0..self.nb {
            let r = off + b * n..off + (b + 1) * n;
            self.apply_h(&y[r.clone()], &mut dy[r], 1.0);
        }
        if !self.accumulate {
            return;
        }
        let p = self.na * self.nb;
        let qoff = off + self.nb * n;
        let dq = &mut dy[qoff..qoff + p * p];
        for z in dq.iter_mut() {
            *z = C64::new(0.0, 0.0);
        }
        for j in &c.jumps {
            for b in 0..self.nb {
                let lam = &y[off + b * n..off + (b + 1) * n];
                for a in 0..self.na {
                    let psi = &y[a * n..(a + 1) * n];
                    let mut s = C64::new(0.0, 0.0);
                    for &(to, from) in &j.pairs {
                        s += lam[to].conj() * psi[from];
                    }
                    self.g[b * self.na + a] = s * j.strength.sqrt();
                }
            }
            // Upper triangle only; mirrored after integration.
            for i in 0..p {
                let gi = self.g[i];
                if gi == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in i..p {
                    dq[i * p + k] -= gi * self.g[k].conj();
                }
            }
        }
    }
}

/// Forward no-jump evolution of state vectors. With decay masked out this
/// is the Schrodinger evolution.
pub fn evolve_pure(c: &Compiled, inputs: &[Vec<C64>], settings: &IntegratorSettings) -> Result<Vec<Vec<C64>>> {
    settings.validate()?;
    let n = c.dim();
    if inputs.iter().any(|v| v.len() != n) {
        return Err(Error::invalid("state", "vector length must equal model dimension"));
    }
    let mut rhs = PureRhs {
        c,
        seg: 0,
        na: inputs.len(),
        nb: 0,
        accumulate: false,
        coeff: vec![C64::new(0.0, 0.0); c.n_transitions],
        g: Vec::new(),
    };
    let mut y: Vec<C64> = inputs.iter().flat_map(|v| v.iter().cloned()).collect();
    let mut dp = Dopri::new(y.len());
    for k in 0..c.n_segments() {
        rhs.seg = k;
        let (a, b) = c.segment_bounds(k);
        dp.integrate(&mut rhs, a, b, &mut y, &c.segment_settings(k, settings), None)?;
    }
    Ok(y.chunks(n).map(|ch| ch.to_vec()).collect())
}

impl JumpExpansion {
    /// Runs the forward no-jump pass for `inputs`, then a backward pass for
    /// `targets` accumulating first-jump overlaps.
    pub fn run(
        c: &Compiled,
        inputs: &[Vec<C64>],
        targets: &[Vec<C64>],
        settings: &IntegratorSettings,
    ) -> Result<JumpExpansionResult> {
        settings.validate()?;
        let n = c.dim();
        let (na, nb) = (inputs.len(), targets.len());
        if inputs.iter().chain(targets).any(|v| v.len() != n) {
            return Err(Error::invalid("jump expansion", "vector length must equal model dimension"));
        }
        let p = na * nb;
        let mut fwd = PureRhs {
            c,
            seg: 0,
            na,
            nb: 0,
            accumulate: false,
            coeff: vec![C64::new(0.0, 0.0); c.n_transitions],
            g: vec![C64::new(0.0, 0.0); p],
        };
        let mut y: Vec<C64> = inputs.iter().flat_map(|v| v.iter().cloned()).collect();
        let mut dp = Dopri::new(y.len());
        for k in 0..c.n_segments() {
            fwd.seg = k;
            let (a, b) = c.segment_bounds(k);
            dp.integrate(&mut fwd, a, b, &mut y, &c.segment_settings(k, settings), None)?;
        }
        let mut m = vec![C64::new(0.0, 0.0); p];
        for b in 0..nb {
            for a in 0..na {
                m[b * na + a] = (0..n).map(|i| targets[b][i].conj() * y[a * n + i]).sum();
            }
        }

        let mut z = y;
        for t in targets {
            z.extend_from_slice(t);
        }
        z.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(p * p));
        let mut bwd = PureRhs { nb, accumulate: true, ..fwd };
        let mut dp = Dopri::new(z.len());
        dp.norm_len = (na + nb) * n;
        for k in (0..c.n_segments()).rev() {
            bwd.seg = k;
            let (a, b) = c.segment_bounds(k);
            dp.integrate(&mut bwd, b, a, &mut z, &c.segment_settings(k, settings), None)?;
        }
        // Integrated backwards from T, so the accumulator holds the integral itself.
        let qoff = (na + nb) * n;
        let mut q = z[qoff..qoff + p * p].to_vec();
        for i in 0..p {
            q[i * p + i].im = 0.0;
            for k in i + 1..p {
                q[k * p + i] = q[i * p + k].conj();
            }
        }
        Ok(JumpExpansionResult { na, nb, m, q })
    }
}
