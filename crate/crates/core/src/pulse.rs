//! Drive envelopes: the cut Gaussian with optional DRAG quadrature, and the
//! hyperbolic-square-hyperbolic (sechscan) chirped pulse.
//!
//! Times are in microseconds. Envelope values are complex Rabi frequencies in
//! rad/us, evaluated in pulse-local time `0 <= t <= t_g`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds to microseconds, for the DRAG coefficient.
const US_PER_S: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutGaussianParams {
    pub t_g: f64,
    pub sigma: f64,
    pub target_area: f64,
    /// DRAG coefficient in seconds; the off-quadrature term is alpha_y dOmega/dt.
    #[serde(default)]
    pub drag_alpha_y: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CutGaussianParams {
    /// Builds the pulse and solves C1, C2 for the requested area.
    pub fn new(t_g: f64, sigma: f64, target_area: f64) -> Result<Self> {
        let mut p = CutGaussianParams { t_g, sigma, target_area, drag_alpha_y: 0.0, c1: 0.0, c2: 0.0 };
        let (c1, c2) = solve_amplitude(&p)?;
        p.c1 = c1;
        p.c2 = c2;
        Ok(p)
    }

    pub fn with_drag(mut self, alpha_y_seconds: f64) -> Self {
        self.drag_alpha_y = alpha_y_seconds;
        self
    }

    fn gauss(&self, t: f64) -> f64 {
        let x = t - 0.5 * self.t_g;
        (-x * x / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Rabi amplitude of the cut Gaussian, zero outside `[0, t_g]`.
pub fn eval_cut_gaussian(p: &CutGaussianParams, t: f64) -> f64 {
    if !(0.0..=p.t_g).contains(&t) {
        return 0.0;
    }
    if t == 0.0 || t == p.t_g {
        return 0.0;
    }
    p.c1 * p.gauss(t) - p.c2
}

/// Time derivative of the cut Gaussian (rad/us^2).
pub fn cut_gaussian_derivative(p: &CutGaussianParams, t: f64) -> f64 {
    if !(0.0..=p.t_g).contains(&t) {
        return 0.0;
    }
    let x = t - 0.5 * p.t_g;
    -p.c1 * p.gauss(t) * x / (p.sigma * p.sigma)
}

/// (sqrt(pi) / 2x) erf(x) - exp(-x^2), with a series for small x where the
/// two terms cancel.
fn area_kernel(x: f64) -> f64 {
    if x < 0.5 {
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 1..40 {
            term *= -x2 / n as f64;
            let k = 2.0 * n as f64;
            let c = -term * k / (k + 1.0);
            sum += c;
            if c.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        PI.sqrt() / (2.0 * x) * libm::erf(x) - (-x * x).exp()
    }
}

/// C1 and C2 such that the cut Gaussian has area `target_area`.
pub fn solve_amplitude(p: &CutGaussianParams) -> Result<(f64, f64)> {
    if !(p.t_g > 0.0) || !(p.sigma > 0.0) || !p.t_g.is_finite() {
        return Err(Error::invalid("cut gaussian", "t_g and sigma must be positive"));
    }
    if !p.target_area.is_finite() || p.target_area < 0.0 {
        return Err(Error::invalid("cut gaussian", "target area must be finite and non-negative"));
    }
    let x = p.t_g / (2.0 * SQRT_2 * p.sigma);
    // Area per unit C1.
    let unit = p.t_g * area_kernel(x);
    if !(unit > 0.0) {
        return Err(Error::invalid("cut gaussian", "non-positive achievable area"));
    }
    let c1 = p.target_area / unit;
    let c2 = c1 * (-p.t_g * p.t_g / (8.0 * p.sigma * p.sigma)).exp();
    Ok((c1, c2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SechscanParams {
    pub t_g: f64,
    pub t_fwhm: f64,
    pub f_width: f64,
    pub f_scan: f64,
    /// Peak Rabi frequency in MHz (cyclic).
    pub omega0: f64,
}

/// Quantities derived from [`SechscanParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechscanDerived {
    pub beta: f64,
    pub mu: f64,
    pub t_scan: f64,
    pub t0: f64,
}

impl SechscanParams {
    pub fn derived(&self) -> Result<SechscanDerived> {
        if !(self.t_g > 0.0) || !(self.t_fwhm > 0.0) || !(self.f_width > 0.0) || self.f_scan < 0.0 {
            return Err(Error::invalid("sechscan", "t_g, t_fwhm, f_width must be positive, f_scan >= 0"));
        }
        let beta = 2.0 * (1.0 + SQRT_2).ln() / self.t_fwhm;
        let mu = PI * self.f_width / beta;
        let t_scan = 2.0 * PI * self.f_scan / (mu * beta * beta);
        if t_scan > self.t_g {
            return Err(Error::invalid("sechscan", format!("t_scan = {t_scan} exceeds t_g = {}", self.t_g)));
        }
        Ok(SechscanDerived { beta, mu, t_scan, t0: 0.5 * (self.t_g - t_scan) })
    }
}

/// ln(sech(x)) without overflow.
fn ln_sech(x: f64) -> f64 {
    let a = x.abs();
    -a + std::f64::consts::LN_2 - (-2.0 * a).exp().ln_1p()
}

fn sech(x: f64) -> f64 {
    let a = x.abs();
    let e = (-a).exp();
    2.0 * e / (1.0 + e * e)
}

/// Amplitude (rad/us) and phase (rad) of the sechscan pulse at local time t.
/// The complex Rabi frequency is `amplitude * exp(-i phase)`.
pub fn eval_sechscan(p: &SechscanParams, d: &SechscanDerived, t: f64) -> (f64, f64) {
    if !(0.0..=p.t_g).contains(&t) {
        return (0.0, 0.0);
    }
    let w = 2.0 * PI * p.f_scan / 2.0;
    let peak = 2.0 * PI * p.omega0;
    if t < d.t0 {
        let x = d.beta * (t - d.t0);
        (peak * sech(x), -d.mu * ln_sech(x) - w * t)
    } else if t <= d.t0 + d.t_scan {
        let s = t - d.t0;
        let quad = if d.t_scan > 0.0 { s * s / d.t_scan } else { 0.0 };
        (peak, w * (-t + quad))
    } else {
        let s = t - d.t0 - d.t_scan;
        let x = d.beta * s;
        (peak * sech(x), -d.mu * ln_sech(x) + w * (-d.t0 + s))
    }
}

/// Instantaneous frequency (1/2pi) dphi/dt in MHz.
pub fn sechscan_frequency(p: &SechscanParams, d: &SechscanDerived, t: f64) -> f64 {
    if !(0.0..=p.t_g).contains(&t) {
        return 0.0;
    }
    let w = PI * p.f_scan;
    let rate = if t < d.t0 {
        d.mu * d.beta * (d.beta * (t - d.t0)).tanh() - w
    } else if t <= d.t0 + d.t_scan {
        if d.t_scan > 0.0 {
            w * (-1.0 + 2.0 * (t - d.t0) / d.t_scan)
        } else {
            0.0
        }
    } else {
        d.mu * d.beta * (d.beta * (t - d.t0 - d.t_scan)).tanh() + w
    };
    rate / (2.0 * PI)
}

/// Pulse envelope attached to a tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    CutGaussian(CutGaussianParams),
    Sechscan(SechscanParams, SechscanDerived),
}

impl Envelope {
    pub fn sechscan(p: SechscanParams) -> Result<Self> {
        Ok(Envelope::Sechscan(p, p.derived()?))
    }

    pub fn duration(&self) -> f64 {
        match self {
            Envelope::CutGaussian(p) => p.t_g,
            Envelope::Sechscan(p, _) => p.t_g,
        }
    }

    /// Complex Rabi frequency (rad/us) at local time t, DRAG included.
    #[inline]
    pub fn value(&self, t: f64) -> C64 {
        match self {
            Envelope::CutGaussian(p) => {
                if !(0.0..=p.t_g).contains(&t) {
                    return C64::new(0.0, 0.0);
                }
                let re = eval_cut_gaussian(p, t);
                let im = if p.drag_alpha_y != 0.0 { drag_quadrature(self, p.drag_alpha_y, t) } else { 0.0 };
                C64::new(re, im)
            }
            Envelope::Sechscan(p, d) => {
                let (a, phi) = eval_sechscan(p, d, t);
                C64::from_polar(a, -phi)
            }
        }
    }

    /// Real envelope magnitude |Omega(t)| without quadrature terms.
    pub fn magnitude(&self, t: f64) -> f64 {
        match self {
            Envelope::CutGaussian(p) => eval_cut_gaussian(p, t).abs(),
            Envelope::Sechscan(p, d) => eval_sechscan(p, d, t).0,
        }
    }

    /// d|Omega|/dt in rad/us^2.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Envelope::CutGaussian(p) => cut_gaussian_derivative(p, t),
            Envelope::Sechscan(p, d) => {
                if !(0.0..=p.t_g).contains(&t) {
                    return 0.0;
                }
                let peak = 2.0 * PI * p.omega0;
                let s = if t < d.t0 {
                    t - d.t0
                } else if t <= d.t0 + d.t_scan {
                    return 0.0;
                } else {
                    t - d.t0 - d.t_scan
                };
                let x = d.beta * s;
                -peak * d.beta * sech(x) * x.tanh()
            }
        }
    }
}

/// Off-quadrature DRAG amplitude alpha_y dOmega/dt (rad/us), alpha_y in seconds.
pub fn drag_quadrature(envelope: &Envelope, alpha_y_seconds: f64, t: f64) -> f64 {
    if alpha_y_seconds == 0.0 {
        return 0.0;
    }
    alpha_y_seconds * US_PER_S * envelope.derivative(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_gaussian_endpoints_vanish() {
        let p = CutGaussianParams::new(1.68, 4.16, PI / SQRT_2).unwrap();
        assert_eq!(eval_cut_gaussian(&p, 0.0), 0.0);
        assert_eq!(eval_cut_gaussian(&p, p.t_g), 0.0);
        assert_eq!(eval_cut_gaussian(&p, -0.1), 0.0);
        assert!((p.c1 * (-p.t_g * p.t_g / (8.0 * p.sigma * p.sigma)).exp() - p.c2).abs() < 1e-14);
    }

    #[test]
    fn zero_area_gives_zero_amplitude() {
        let p = CutGaussianParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(p.c1, 0.0);
    }

    #[test]
    fn wide_limit_is_parabolic() {
        // Peak of a parabola with area A over t_g is 1.5 A / t_g.
        let p = CutGaussianParams::new(2.0, 1e6, 1.0).unwrap();
        assert!(((p.c1 - p.c2) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn kernel_branches_agree() {
        let x = 0.5;
        let series = {
            let x2 = x * x;
            let mut term = 1.0;
            let mut sum = 0.0;
            for n in 1..60 {
                term *= -x2 / n as f64;
                let k = 2.0 * n as f64;
                sum += -term * k / (k + 1.0);
            }
            sum
        };
        assert!((series - area_kernel(x)).abs() < 1e-14);
    }

    #[test]
    fn sechscan_peak_and_joints() {
        let p = SechscanParams { t_g: 1.7, t_fwhm: 0.28, f_width: 9.5, f_scan: 2.2, omega0: 5.8 };
        let d = p.derived().unwrap();
        let (a, _) = eval_sechscan(&p, &d, d.t0);
        assert_eq!(a, 2.0 * PI * p.omega0);
        for tj in [d.t0, d.t0 + d.t_scan] {
            let (a1, p1) = eval_sechscan(&p, &d, tj - 1e-12);
            let (a2, p2) = eval_sechscan(&p, &d, tj + 1e-12);
            assert!((a1 - a2).abs() < 1e-8 && (p1 - p2).abs() < 1e-8);
        }
    }

    #[test]
    fn sechscan_rejects_long_scan() {
        let p = SechscanParams { t_g: 0.1, t_fwhm: 0.28, f_width: 1.0, f_scan: 50.0, omega0: 5.8 };
        assert!(p.derived().is_err());
    }

    #[test]
    fn drag_zero_alpha() {
        let p = CutGaussianParams::new(0.77, 1.4, PI / SQRT_2).unwrap();
        assert_eq!(drag_quadrature(&Envelope::CutGaussian(p), 0.0, 0.3), 0.0);
    }
}
