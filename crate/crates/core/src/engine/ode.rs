//! Dormand-Prince 5(4) integrator with FSAL, embedded error control and
//! Hairer's initial step heuristic, over complex state vectors.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step (us).
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings { rel_tol: 1e-6, abs_tol: 1e-6, max_step: f64::INFINITY }
    }
}

impl IntegratorSettings {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorSettings { rel_tol: tol, abs_tol: tol, max_step: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(1e-12..=1e-3).contains(&v) {
                return Err(Error::Invalid { field: "tolerance", reason: format!("{name} = {v:e} outside [1e-12, 1e-3]") });
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step", "must be positive"));
        }
        Ok(())
    }
}

pub(crate) trait Rhs {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]);
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Work buffers plus the step-size memory carried between calls.
pub(crate) struct Dopri {
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    pub h: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Only the first `norm_len` components enter the error norm.
    pub norm_len: usize,
}

impl Dopri {
    pub fn new(n: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); n];
        Dopri {
            k: [z(), z(), z(), z(), z(), z(), z()],
            ytmp: z(),
            ynew: z(),
            h: 0.0,
            steps: 0,
            rejected: 0,
            norm_len: n,
        }
    }

    fn norm(&self, s: &IntegratorSettings, y: &[C64], v: &[C64]) -> f64 {
        let n = self.norm_len;
        let mut acc = 0.0;
        for i in 0..n {
            let sc = s.abs_tol + s.rel_tol * y[i].norm();
            let r = v[i].norm() / sc;
            acc += r * r;
        }
        (acc / n as f64).sqrt()
    }

    fn initial_step<R: Rhs>(&mut self, rhs: &mut R, t: f64, y: &[C64], dir: f64, s: &IntegratorSettings) -> f64 {
        let n = y.len();
        let d0 = self.norm(s, y, y);
        let d1 = self.norm(s, y, &self.k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(s.max_step);
        for i in 0..n {
            self.ytmp[i] = y[i] + self.k[0][i] * (dir * h0);
        }
        let (k0, rest) = self.k.split_at_mut(1);
        rhs.eval(t + dir * h0, &self.ytmp, &mut rest[0]);
        for i in 0..n {
            self.ynew[i] = (rest[0][i] - k0[0][i]) / h0;
        }
        let d2 = self.norm(s, y, &self.ynew);
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
        (100.0 * h0).min(h1).min(s.max_step)
    }

    /// Advances `y` from `t0` to `t1` (either direction). `observe` is called
    /// after every accepted step.
    pub fn integrate<R: Rhs>(
        &mut self,
        rhs: &mut R,
        t0: f64,
        t1: f64,
        y: &mut [C64],
        s: &IntegratorSettings,
        mut observe: Option<&mut dyn FnMut(f64, &[C64])>,
    ) -> Result<()> {
        let n = y.len();
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let mut t = t0;
        rhs.eval(t, y, &mut self.k[0]);
        if !(self.h > 0.0) {
            self.h = self.initial_step(rhs, t, y, dir, s);
        }
        let mut h = self.h.min(s.max_step);
        let mut last_rejected = false;
        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 1e-13 * t1.abs().max(1.0) {
                break;
            }
            let clipped = h >= remaining;
            let hs = if clipped { remaining } else { h };
            if hs < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h: hs });
            }
            let dt = dir * hs;
            self.stages(rhs, t, y, dt);
            // Error estimate into ytmp.
            {
                let k = &self.k;
                for i in 0..n {
                    self.ytmp[i] = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6
                        + k[6][i] * E7)
                        * dt;
                }
            }
            let nl = self.norm_len;
            let mut acc = 0.0;
            for i in 0..nl {
                let sc = s.abs_tol + s.rel_tol * y[i].norm().max(self.ynew[i].norm());
                acc = f64::max(acc, self.ytmp[i].norm() / sc);
            }
            let err = acc;
            if !err.is_finite() {
                h = hs * 0.1;
                last_rejected = true;
                self.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                t = if clipped { t1 } else { t + dt };
                y.copy_from_slice(&self.ynew);
                self.k.swap(0, 6);
                self.steps += 1;
                if let Some(obs) = observe.as_mut() {
                    obs(t, y);
                }
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                let hn = (hs * fac).min(s.max_step);
                // A step clipped at the interval end says little about the natural size.
                h = if clipped { h.max(hn) } else { hn };
                last_rejected = false;
            } else {
                let fac = (0.9 * err.powf(-0.2)).max(0.2);
                h = hs * fac;
                last_rejected = true;
                self.rejected += 1;
            }
        }
        self.h = h;
        Ok(())
    }

    fn stages<R: Rhs>(&mut self, rhs: &mut R, t: f64, y: &[C64], h: f64) {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, $($kk:expr => $a:expr),+) => {{
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    $( acc += self.k[$kk][i] * $a; )+
                    self.ytmp[i] = y[i] + acc * h;
                }
                let (ytmp, k) = (&self.ytmp, &mut self.k);
                rhs.eval(t + $c * h, ytmp, &mut k[$dst]);
            }};
        }
        stage!(1, C2, 0 => A21);
        stage!(2, C3, 0 => A31, 1 => A32);
        stage!(3, C4, 0 => A41, 1 => A42, 2 => A43);
        stage!(4, C5, 0 => A51, 1 => A52, 2 => A53, 3 => A54);
        stage!(5, 1.0, 0 => A61, 1 => A62, 2 => A63, 3 => A64, 4 => A65);
        for i in 0..n {
            let k = &self.k;
            self.ynew[i] = y[i] + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
        }
        let (ynew, k) = (&self.ynew, &mut self.k);
        rhs.eval(t + h, ynew, &mut k[6]);
    }
}
