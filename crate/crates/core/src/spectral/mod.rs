//! Spectral environment of a qubit: transmission windows, cross-driving by
//! pulses addressed at other qubits, and excitation of parked spectator ions.

mod crosstalk;
mod spectator;
mod windows;

pub use crosstalk::{
    crosstalk_scan, find_spikes, CrosstalkMode, CrosstalkPoint, CrosstalkScanSpec, IdleGate, ScanInitial,
};
pub use spectator::{spectator_penalty, SpectatorPenaltySpec, SpectatorReport};
pub use windows::{compute_transmission_windows, park_ground_state, windows_from_lines, WindowReport};

use crate::error::{Error, Result};

/// Slope of log(error) against log|detuning| by least squares.
pub fn fit_scaling_exponent(errors: &[f64], detunings: &[f64]) -> Result<f64> {
    if errors.len() != detunings.len() {
        return Err(Error::invalid("scaling fit", "errors and detunings differ in length"));
    }
    if errors.len() < 4 {
        return Err(Error::invalid("scaling fit", "needs at least 4 points"));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::invalid("scaling fit", format!("error {e} is not positive")));
    }
    if detunings.iter().any(|&d| d == 0.0 || !d.is_finite()) {
        return Err(Error::invalid("scaling fit", "detunings must be nonzero"));
    }
    let x: Vec<f64> = detunings.iter().map(|d| d.abs().ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("scaling fit", "detunings must not all have the same magnitude"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_slope() {
        let d: Vec<f64> = (1..=10).map(|k| 1000.0 * k as f64).collect();
        let e: Vec<f64> = d.iter().map(|x| 3.0 / (x * x)).collect();
        assert!((fit_scaling_exponent(&e, &d).unwrap() + 2.0).abs() < 1e-12);
        assert!(fit_scaling_exponent(&[1.0, 0.0, 1.0, 1.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
