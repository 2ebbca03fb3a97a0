//! Symmetric tridiagonal kernels: a pre-factored Thomas solver and the
//! dense eigensolve behind the spectral oracle.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// LU factors of a symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    off: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl ThomasFactor {
    /// Factors the matrix. Fails on a zero, negative or non-finite pivot; the
    /// systems built by the time steppers are SPD, so a bad pivot means the
    /// operator was assembled wrong.
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || off.len() + 1 != n {
            return Err(Error::Solver(format!(
                "tridiagonal shape: diag {}, off {}",
                n,
                off.len()
            )));
        }
        let mut pivots = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n - 1);
        let mut piv = diag[0];
        for i in 0..n {
            if !(piv > 0.0 && piv.is_finite()) {
                return Err(Error::Solver(format!("pivot {piv} at row {i}")));
            }
            pivots.push(piv);
            if i + 1 < n {
                let w = off[i] / piv;
                upper.push(w);
                piv = diag[i + 1] - off[i] * w;
            }
        }
        Ok(Self {
            off: off.to_vec(),
            pivots,
            upper,
        })
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.pivots.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] /= self.pivots[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off[i - 1] * rhs[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Eigenpairs of a symmetric tridiagonal matrix, sorted by non-increasing
/// eigenvalue. `vectors[k]` is the unit-norm eigenvector of `values[k]`.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Dense symmetric eigensolve of the tridiagonal matrix.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<TridiagEigen> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::Shape {
            expected: n.saturating_sub(1),
            got: off.len(),
        });
    }
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        dense[(i, i)] = diag[i];
    }
    for (i, &e) in off.iter().enumerate() {
        dense[(i, i + 1)] = e;
        dense[(i + 1, i)] = e;
    }
    let eig = dense
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::Solver("symmetric eigensolve did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    Ok(TridiagEigen {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect(),
    })
}
