//! Uniform mesh on [0,1) with a half-width boundary cell and grid functions
//! living in the mass-weighted discrete L² space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest cell count accepted by [`Grid::new`].
pub const MIN_CELLS: usize = 4;

/// Unknown nodes `x_i = i dx`, `i = 0..n-1`; the Dirichlet node `x_n = 1` is
/// eliminated. Mass weights are `dx/2` at `x_0` and `dx` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    dx: f64,
    nodes: Vec<f64>,
    mass: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_floor(n, MIN_CELLS)
    }

    /// Same layout rule with a caller-chosen lower bound on `n` (never below 2).
    pub fn with_floor(n: usize, floor: usize) -> Result<Self> {
        let min = floor.max(2);
        if n < min {
            return Err(Error::Grid { n, min });
        }
        let dx = 1.0 / n as f64;
        let nodes = (0..n).map(|i| i as f64 * dx).collect();
        let mut mass = vec![dx; n];
        mass[0] = 0.5 * dx;
        Ok(Self { n, dx, nodes, mass })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Cell interface `x_{i+1/2}` for `i = 0..n-1`.
    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        if u.len() == self.n {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: self.n,
                got: u.len(),
            })
        }
    }

    /// `<u, v>_M = sum m_i u_i v_i`.
    pub fn inner(&self, u: &Field, v: &Field) -> f64 {
        debug_assert_eq!(u.len(), self.n);
        debug_assert_eq!(v.len(), self.n);
        self.mass
            .iter()
            .zip(u.iter().zip(v.iter()))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }

    pub fn norm(&self, u: &Field) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Samples `f` at the unknown nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// Zeroes the entries at nodes `x_i >= kappa`.
    pub fn mask(&self, u: &Field, kappa: f64) -> Field {
        Field(
            self.nodes
                .iter()
                .zip(u.iter())
                .map(|(&x, &v)| if x < kappa { v } else { 0.0 })
                .collect(),
        )
    }

    /// Number of unknown nodes inside the control region `x_i < kappa`.
    pub fn nodes_below(&self, kappa: f64) -> usize {
        self.nodes.iter().take_while(|&&x| x < kappa).count()
    }
}

/// Point values at the unknown nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    /// Wraps `values`, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    /// Wraps `values` on `grid`, checking both length and finiteness.
    pub fn on(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(values)?;
        grid.check(&f)?;
        Ok(f)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Field) {
        for (s, v) in self.0.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }

    pub fn add(&self, other: &Field) -> Self {
        Self(self.0.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Field) -> Self {
        Self(self.0.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }
}

/// `(L², H¹_α)` norms; the gradient term uses the interface coefficients with
/// the ghost value `u_n = 0`.
pub fn weighted_norms(grid: &Grid, u: &Field, alpha: f64) -> Result<(f64, f64)> {
    grid.check(u)?;
    let l2_sq = grid.inner(u, u);
    let v = u.values();
    let dx = grid.dx();
    let grad: f64 = (0..grid.n())
        .map(|i| {
            let next = v.get(i + 1).copied().unwrap_or(0.0);
            let slope = (next - v[i]) / dx;
            grid.midpoint(i).powf(alpha) * slope * slope * dx
        })
        .sum();
    Ok((l2_sq.sqrt(), (l2_sq + grad).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_n4() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75]);
        assert_eq!(g.mass(), &[0.125, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn layout_n2_with_relaxed_floor() {
        let g = Grid::with_floor(2, 2).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5]);
        assert_eq!(g.mass(), &[0.25, 0.5]);
    }

    #[test]
    fn rejects_small_grids() {
        assert_eq!(Grid::new(3), Err(Error::Grid { n: 3, min: 4 }));
    }

    #[test]
    fn mass_sums_to_one_minus_half_cell() {
        for n in [4, 7, 100, 401] {
            let g = Grid::new(n).unwrap();
            let total: f64 = g.mass().iter().sum();
            assert!((total - (1.0 - 0.5 * g.dx())).abs() < 1e-13);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            assert_eq!(g.nodes()[0], 0.0);
        }
    }

    #[test]
    fn norms_of_zero_and_one() {
        let g = Grid::new(4).unwrap();
        assert_eq!(
            weighted_norms(&g, &Field::zeros(4), 0.5).unwrap(),
            (0.0, 0.0)
        );
        let (l2, h1) = weighted_norms(&g, &g.sample(|_| 1.0), 0.5).unwrap();
        assert!((l2 - 0.875f64.sqrt()).abs() < 1e-15);
        assert!(h1 >= l2);
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        assert_eq!(Field::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1)));
        let g = Grid::new(4).unwrap();
        assert!(matches!(
            Field::on(&g, vec![0.0; 5]),
            Err(Error::Shape { expected: 4, got: 5 })
        ));
    }

    #[test]
    fn mask_cuts_at_kappa() {
        let g = Grid::new(4).unwrap();
        let m = g.mask(&g.sample(|_| 1.0), 0.5);
        assert_eq!(m.values(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(g.nodes_below(0.5), 2);
    }
}
