//! Lindblad right-hand side over batches of operators sharing one
//! Hamiltonian, using the sparse coupling links of a compiled schedule.

use num_complex::Complex64 as C64;

use super::ode::Rhs;
use crate::model::Compiled;

pub(crate) struct LindbladRhs<'a> {
    c: &'a Compiled,
    seg: usize,
    batch: usize,
    coeff: Vec<C64>,
    /// -i(h_i - h_j) - (loss_i + loss_j)/2 per element.
    fac: Vec<C64>,
}

impl<'a> LindbladRhs<'a> {
    pub fn new(c: &'a Compiled, batch: usize) -> Self {
        let n = c.dim;
        let mut fac = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                fac[i * n + j] = C64::new(-0.5 * (c.loss[i] + c.loss[j]), -(c.h_diag[i] - c.h_diag[j]));
            }
        }
        LindbladRhs { c, seg: 0, batch, coeff: vec![C64::new(0.0, 0.0); c.n_transitions], fac }
    }

    pub fn set_segment(&mut self, seg: usize) {
        self.seg = seg;
    }
}

impl Rhs for LindbladRhs<'_> {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let c = self.c;
        let n = c.dim;
        let nn = n * n;
        c.coefficients(self.seg, t, &mut self.coeff);
        let links = &c.segments[self.seg].links;
        for b in 0..self.batch {
            let rho = &y[b * nn..(b + 1) * nn];
            let d = &mut dy[b * nn..(b + 1) * nn];
            for k in 0..nn {
                d[k] = self.fac[k] * rho[k];
            }
            for l in links {
                let k = self.coeff[l.transition];
                if k.re == 0.0 && k.im == 0.0 {
                    continue;
                }
                let mk = C64::new(k.im, -k.re); // -i k
                let mkc = C64::new(-k.im, -k.re); // -i conj(k)
                let (r, col) = (l.row, l.col);
                // -i [H, rho] with H_rc = k, H_cr = conj(k).
                for j in 0..n {
                    d[r * n + j] += mk * rho[col * n + j];
                    d[col * n + j] += mkc * rho[r * n + j];
                }
                for i in 0..n {
                    // + i rho H: (rho H)_{ic} = rho_{ir} k, (rho H)_{ir} = rho_{ic} conj(k).
                    d[i * n + col] -= mk * rho[i * n + r];
                    d[i * n + r] -= mkc * rho[i * n + col];
                }
            }
            for jmp in &c.jumps {
                let s = jmp.strength;
                for &(tp, fp) in &jmp.pairs {
                    for &(tq, fq) in &jmp.pairs {
                        d[tp * n + tq] += rho[fp * n + fq] * s;
                    }
                }
            }
        }
    }
}
