//! Finite-volume realization of `u ↦ (x^α u_x)_x` with the Robin flux
//! `x^α u_x = (β₀/β₁) u` at x = 0 and `u(1) = 0`.
//!
//! The operator is stored as `A = M⁻¹ K` where `K` is a symmetric tridiagonal
//! stiffness matrix and `M` the diagonal mass. `A` is therefore self-adjoint
//! in `<·,·>_M` and, when `β₀β₁ ≥ 0`, dissipative.

use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct DegenOperator {
    grid: Grid,
    alpha: f64,
    robin_coeff: f64,
    /// `x_{i+1/2}^α / dx` for `i = 0..n-1`.
    conductance: Vec<f64>,
    diag: Vec<f64>,
    /// Off-diagonal of `K` (length `n - 1`); `K` is symmetric.
    off: Vec<f64>,
}

impl DegenOperator {
    pub fn assemble(grid: &Grid, spec: &ProblemSpec) -> Result<Self> {
        spec.validate_operator()?;
        let n = grid.n();
        let dx = grid.dx();
        let alpha = spec.alpha;
        let robin_coeff = spec.robin_coeff();
        let conductance: Vec<f64> = (0..n).map(|i| grid.midpoint(i).powf(alpha) / dx).collect();
        let mut diag = vec![0.0; n];
        diag[0] = -robin_coeff - conductance[0];
        for i in 1..n {
            diag[i] = -(conductance[i - 1] + conductance[i]);
        }
        let off = conductance[..n - 1].to_vec();
        Ok(Self {
            grid: grid.clone(),
            alpha,
            robin_coeff,
            conductance,
            diag,
            off,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn robin_coeff(&self) -> f64 {
        self.robin_coeff
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    /// Stiffness diagonal.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Stiffness sub-diagonal (equal to the super-diagonal).
    pub fn sub(&self) -> &[f64] {
        &self.off
    }

    pub fn sup(&self) -> &[f64] {
        &self.off
    }

    /// `K u` (flux differences, not yet divided by the mass).
    pub fn stiffness_apply(&self, u: &Field) -> Result<Field> {
        self.grid.check(u)?;
        let v = u.values();
        let n = v.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * v[i + 1];
            }
            out.push(acc);
        }
        Ok(Field::new(out).expect("finite input gives finite output"))
    }

    /// `A u = M⁻¹ K u`.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        let mut ku = self.stiffness_apply(u)?;
        for (x, m) in ku.values_mut().iter_mut().zip(self.grid.mass()) {
            *x /= m;
        }
        Ok(ku)
    }

    /// Symmetric tridiagonal `M^{-1/2} K M^{-1/2}` as `(diag, off)`.
    pub fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.grid.mass();
        let diag = self.diag.iter().zip(m).map(|(d, mi)| d / mi).collect();
        let off = self
            .off
            .iter()
            .enumerate()
            .map(|(i, k)| k / (m[i] * m[i + 1]).sqrt())
            .collect();
        (diag, off)
    }

    /// Σ over interfaces of `x_{i+1/2}^α (u_{i+1} - u_i)² / dx`, with `u_n = 0`.
    pub fn gradient_energy(&self, u: &Field) -> f64 {
        let v = u.values();
        self.conductance
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let d = v.get(i + 1).copied().unwrap_or(0.0) - v[i];
                c * d * d
            })
            .sum()
    }

    /// `-(β₀/β₁) u₀² - Σ x_{i+1/2}^α (u_{i+1}-u_i)²/dx`; equals `<Au,u>_M`.
    pub fn quadratic_form(&self, u: &Field) -> Result<f64> {
        self.grid.check(u)?;
        let u0 = u.values()[0];
        Ok(-self.robin_coeff * u0 * u0 - self.gradient_energy(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn spec(alpha: f64, b0: f64, b1: f64) -> ProblemSpec {
        ProblemSpec {
            alpha,
            beta0: b0,
            beta1: b1,
            kappa: 0.3,
            tau: 0.5,
            horizon: 1.0,
            eps: 0.1,
        }
    }

    #[test]
    fn hand_evaluated_two_cell_operator() {
        let g = Grid::with_floor(2, 2).unwrap();
        let op = DegenOperator::assemble(&g, &spec(0.5, 0.0, 1.0)).unwrap();
        let (u0, u1) = (0.7, -1.3);
        let au = op.apply(&Field::new(vec![u0, u1]).unwrap()).unwrap();
        let au = au.values();
        assert!((au[0] - 4.0 * (u1 - u0)).abs() < 1e-14);
        let expected = 2.0 * u0 - (2.0 + 4.0 * 0.75f64.sqrt()) * u1;
        assert!((au[1] - expected).abs() < 1e-13);
        assert!((2.0 + 4.0 * 0.75f64.sqrt() - 5.464_101_6).abs() < 1e-7);
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = Grid::new(16).unwrap();
        let op = DegenOperator::assemble(&g, &spec(0.3, 1.0, 2.0)).unwrap();
        assert!(op.apply(&Field::zeros(16)).unwrap().is_zero());
        assert_eq!(op.quadratic_form(&Field::zeros(16)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = Grid::new(8).unwrap();
        assert!(matches!(
            DegenOperator::assemble(&g, &spec(0.5, 1.0, 0.0)),
            Err(Error::RobinParameter(_))
        ));
        assert!(matches!(
            DegenOperator::assemble(&g, &spec(1.0, 1.0, 1.0)),
            Err(Error::Domain { name: "alpha", .. })
        ));
    }

    #[test]
    fn quadratic_form_two_cell() {
        let g = Grid::with_floor(2, 2).unwrap();
        let op = DegenOperator::assemble(&g, &spec(0.5, 1.0, 1.0)).unwrap();
        let q = op.quadratic_form(&Field::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert!((q + 2.0).abs() < 1e-15);
    }

    #[test]
    fn neumann_limit_has_zero_robin_gain() {
        let g = Grid::new(8).unwrap();
        let op = DegenOperator::assemble(&g, &spec(0.5, 0.0, 3.0)).unwrap();
        assert_eq!(op.robin_coeff(), 0.0);
        // constant field: only the Dirichlet interface contributes
        let q = op.quadratic_form(&g.sample(|_| 1.0)).unwrap();
        assert!((q + op.conductance()[7]).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let g = Grid::new(8).unwrap();
        let op = DegenOperator::assemble(&g, &spec(0.5, 1.0, 1.0)).unwrap();
        assert!(matches!(
            op.quadratic_form(&Field::zeros(7)),
            Err(Error::Shape { .. })
        ));
    }
}
