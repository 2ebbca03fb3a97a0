//! Conjugate gradients for operators that are self-adjoint and positive
//! definite in a weighted inner product.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Outcome of a CG solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Field,
    pub iterations: usize,
    pub converged: bool,
    /// Recomputed `||b - A x||_M / ||b||_M` at exit.
    pub true_residual: f64,
    /// Recursive relative residuals `||r_k||_M / ||b||_M`, starting at `k = 0`.
    pub residuals: Vec<f64>,
    /// Relative energy-norm error estimates `||x* - x_k||_A / ||x* - x_0||_A`,
    /// from the tail sums `Σ_{j≥k} α_j ||r_j||²`.
    pub energy_errors: Vec<f64>,
}

impl CgOutcome {
    pub fn energy_monotone(&self) -> bool {
        self.energy_errors.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn residuals_monotone(&self) -> bool {
        self.residuals.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Tolerances and budget for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Restarts from the true residual when the recursive one has converged
    /// but the recomputed one has not.
    pub max_restarts: usize,
}

/// Solves `A x = b` with `A` self-adjoint positive definite in `grid`'s
/// mass inner product. `x0` is the initial guess.
pub fn solve<F>(grid: &Grid, mut apply: F, b: &Field, x0: Option<&Field>, settings: CgSettings) -> Result<CgOutcome>
where
    F: FnMut(&Field) -> Result<Field>,
{
    grid.check(b)?;
    let b_norm = grid.norm(b);
    let n = b.len();
    let mut x = match x0 {
        Some(x0) => {
            grid.check(x0)?;
            x0.clone()
        }
        None => Field::zeros(n),
    };
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: Field::zeros(n),
            iterations: 0,
            converged: true,
            true_residual: 0.0,
            residuals: vec![0.0],
            energy_errors: vec![0.0],
        });
    }

    let mut residuals = Vec::new();
    let mut steps: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let mut r = b.sub(&apply(&x)?);
        let mut rr = grid.inner(&r, &r);
        residuals.push(rr.sqrt() / b_norm);
        let mut p = r.clone();
        while rr.sqrt() > settings.tol * b_norm && iterations < settings.max_iter {
            let ap = apply(&p)?;
            let pap = grid.inner(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Solver(format!(
                    "operator not positive definite (p'Ap = {pap:e}) at iteration {iterations}"
                )));
            }
            let alpha = rr / pap;
            steps.push(alpha * rr);
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            let rr_next = grid.inner(&r, &r);
            let beta = rr_next / rr;
            rr = rr_next;
            p = r.add(&p.scaled(beta));
            iterations += 1;
            residuals.push(rr.sqrt() / b_norm);
        }
        let true_residual = grid.norm(&b.sub(&apply(&x)?)) / b_norm;
        let converged = true_residual <= settings.tol;
        if converged || iterations >= settings.max_iter || restarts >= settings.max_restarts {
            return Ok(CgOutcome {
                x,
                iterations,
                converged,
                true_residual,
                residuals,
                energy_errors: energy_tail(&steps),
            });
        }
        restarts += 1;
    }
}

fn energy_tail(steps: &[f64]) -> Vec<f64> {
    let mut tail = vec![0.0; steps.len() + 1];
    for k in (0..steps.len()).rev() {
        tail[k] = tail[k + 1] + steps[k];
    }
    let total = tail[0];
    if total > 0.0 {
        tail.iter().map(|t| (t / total).sqrt()).collect()
    } else {
        tail
    }
}
