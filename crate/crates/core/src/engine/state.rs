use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Density matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &[C64]) -> Self {
        let dim = psi.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        DensityMatrix { dim, data }
    }

    pub fn basis(dim: usize, level: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        data[level * dim + level] = C64::new(1.0, 0.0);
        DensityMatrix { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid("density matrix", "data length must be dim^2"));
        }
        Ok(DensityMatrix { dim, data })
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let dim = m.nrows();
        let data = (0..dim * dim).map(|k| m[(k / dim, k % dim)]).collect();
        DensityMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn population(&self, i: usize) -> f64 {
        self.get(i, i).re
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest |rho_ij - conj(rho_ji)|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let a = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = a;
                self.data[j * n + i] = a.conj();
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mut m = self.to_matrix();
        // Hermitian part, in case of round-off asymmetry.
        m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(m);
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// <psi| rho |psi>.
    pub fn expectation(&self, psi: &[C64]) -> C64 {
        let n = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            if psi[i] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += self.data[i * n + j] * psi[j];
            }
            acc += psi[i].conj() * row;
        }
        acc
    }

    /// Checks Hermiticity, trace and positivity against a tolerance.
    pub fn check(&self, rel_tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::Invariant(format!("hermiticity error {herm:e}")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 10.0 * rel_tol {
            return Err(Error::Invariant(format!("trace deviates: {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -10.0 * rel_tol {
            return Err(Error::Invariant(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}
