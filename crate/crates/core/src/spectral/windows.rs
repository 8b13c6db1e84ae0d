use serde::Serialize;

use crate::error::{Error, Result};
use crate::ion_model::{LevelScheme, QubitAssignment};

/// Distances closer than this count as ties when choosing a parking state.
const TIE: f64 = 1e-9;

/// Burned-out regions around the two qubit lines, relative to each line (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowReport {
    pub window_0: (f64, f64),
    pub window_1: (f64, f64),
}

/// Optical transitions of each ground state (relative to the manifold
/// origins), keeping only transitions with nonzero strength.
fn ground_lines(scheme: &LevelScheme) -> Vec<Vec<f64>> {
    (0..3)
        .map(|g| (3..6).filter(|&e| scheme.strength(g, e) > 0.0).map(|e| scheme.transition_mhz(g, e)).collect())
        .collect()
}

/// Ground state an ion at optical offset `x` is pumped into: the one whose
/// transitions stay farthest from the qubit lines, ties going to the larger
/// summed distance.
pub fn park_ground_state(lines: &[Vec<f64>], x: f64, qubit_lines: [f64; 2]) -> usize {
    let mut best = 0;
    let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (g, ls) in lines.iter().enumerate() {
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        for &t in ls {
            for &f in &qubit_lines {
                let d = (x + t - f).abs();
                min = min.min(d);
                sum += d;
            }
        }
        let better = min > best_key.0 + TIE || ((min - best_key.0).abs() <= TIE && sum > best_key.1);
        if better {
            best = g;
            best_key = (min, sum);
        }
    }
    best
}

/// Windows around `f0` and `f1` left by ions parked across `span` MHz.
///
/// The parking choice is constant between offsets where two ground states
/// tie or a line crosses a qubit line, so the edges follow exactly from the
/// ends of those intervals (a grid of offsets converges to the same values).
pub fn windows_from_lines(lines: &[Vec<f64>], f0: f64, f1: f64, span: f64) -> Result<((f64, f64), (f64, f64))> {
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::invalid("span", "must be positive"));
    }
    let half = 0.5 * span;
    if lines.len() < 2 {
        // No choice of ground state, so nothing can be parked.
        return Ok(((-half, half), (-half, half)));
    }
    let f = [f0, f1];
    let all: Vec<f64> = lines.iter().flatten().cloned().collect();
    let mut cuts = vec![-half, half];
    for &t1 in &all {
        for &q1 in &f {
            cuts.push(q1 - t1);
            for &t2 in &all {
                for &q2 in &f {
                    cuts.push(0.5 * (q1 + q2 - t1 - t2));
                }
            }
        }
    }
    cuts.retain(|x| x.abs() <= half);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut low = [-half; 2];
    let mut high = [half; 2];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let g = park_ground_state(lines, 0.5 * (a + b), f);
        for &t in &lines[g] {
            for q in 0..2 {
                let (da, db) = (a + t - f[q], b + t - f[q]);
                if da < -1e-9 && db > 1e-9 {
                    return Err(Error::invalid("scheme", "a parked ion absorbs on a qubit line; window has zero width"));
                }
                if db <= 1e-9 {
                    low[q] = low[q].max(db);
                } else {
                    high[q] = high[q].min(da);
                }
            }
        }
    }
    for q in 0..2 {
        if low[q] > -1e-9 || high[q] < 1e-9 {
            return Err(Error::invalid("scheme", "window has zero width"));
        }
    }
    Ok(((low[0], high[0]), (low[1], high[1])))
}

/// Transmission windows for ions spread uniformly over `span_mhz`.
pub fn compute_transmission_windows(
    scheme: &LevelScheme,
    qubit: &QubitAssignment,
    span_mhz: f64,
) -> Result<WindowReport> {
    let lv = scheme.qubit_levels(qubit)?;
    let f0 = scheme.transition_mhz(lv.q0, lv.e);
    let f1 = scheme.transition_mhz(lv.q1, lv.e);
    let (w0, w1) = windows_from_lines(&ground_lines(scheme), f0, f1, span_mhz)?;
    Ok(WindowReport { window_0: w0, window_1: w1 })
}

pub(crate) fn scheme_lines(scheme: &LevelScheme) -> Vec<Vec<f64>> {
    ground_lines(scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ground_state_is_unbounded() {
        let (w0, w1) = windows_from_lines(&[vec![0.0]], 0.0, 10.0, 100.0).unwrap();
        assert_eq!(w0, (-50.0, 50.0));
        assert_eq!(w1, (-50.0, 50.0));
    }
}
