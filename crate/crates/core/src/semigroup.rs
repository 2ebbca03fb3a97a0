//! Time stepping for `u' = A u`, a dense spectral oracle, and the impulsive
//! mild solution `y(T) = e^{(T-τ)A}(e^{τA} y₀ + 1_ω f)`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::{fmt_f64, write_row};
use crate::operator::DegenOperator;
use crate::problem::ProblemSpec;
use crate::tridiag::{symmetric_tridiagonal_eigen, ThomasFactor};

/// Largest grid accepted by [`spectral_decomposition`].
pub const MAX_DENSE_N: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    #[default]
    CrankNicolson,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

/// Step size and θ-scheme used by every propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStepping {
    pub dt: f64,
    pub scheme: Scheme,
}

impl TimeStepping {
    pub fn new(dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { dt, scheme })
    }

    /// Crank–Nicolson with `dt = T/2000`.
    pub fn default_for(horizon: f64) -> Self {
        Self {
            dt: horizon / 2000.0,
            scheme: Scheme::CrankNicolson,
        }
    }
}

/// Splits `span` into full steps of `dt` plus a shortened last step.
/// Spans within 1e-9 relative of a multiple of `dt` use full steps only, so
/// aligned sub-intervals reproduce the same step sequence.
fn step_plan(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, 0.0);
    }
    let q = span / dt;
    let rounded = q.round();
    if rounded >= 1.0 && (q - rounded).abs() <= 1e-9 * q.max(1.0) {
        (rounded as usize, dt)
    } else {
        let k = q.ceil().max(1.0) as usize;
        (k, span - (k - 1) as f64 * dt)
    }
}

/// One θ-step `(M - θhK) u⁺ = (M + (1-θ)hK) u`, pre-factored for a fixed `h`.
#[derive(Debug, Clone)]
struct ThetaStep {
    h: f64,
    theta: f64,
    factor: ThomasFactor,
}

impl ThetaStep {
    fn new(op: &DegenOperator, h: f64, theta: f64) -> Result<Self> {
        let m = op.grid().mass();
        let diag: Vec<f64> = op
            .diag()
            .iter()
            .zip(m)
            .map(|(k, mi)| mi - theta * h * k)
            .collect();
        let off: Vec<f64> = op.sub().iter().map(|k| -theta * h * k).collect();
        Ok(Self {
            h,
            theta,
            factor: ThomasFactor::new(&diag, &off)?,
        })
    }

    fn apply(&self, op: &DegenOperator, u: &mut [f64], scratch: &mut [f64]) {
        let m = op.grid().mass();
        let d = op.diag();
        let e = op.sub();
        let n = u.len();
        let w = (1.0 - self.theta) * self.h;
        for i in 0..n {
            let mut ku = d[i] * u[i];
            if i > 0 {
                ku += e[i - 1] * u[i - 1];
            }
            if i + 1 < n {
                ku += e[i] * u[i + 1];
            }
            scratch[i] = m[i] * u[i] + w * ku;
        }
        self.factor.solve_in_place(scratch);
        u.copy_from_slice(scratch);
    }
}

/// Reusable propagator for `e^{tA}` approximated by a θ-scheme.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    op: &'a DegenOperator,
    stepping: TimeStepping,
    full: ThetaStep,
}

impl<'a> Propagator<'a> {
    pub fn new(op: &'a DegenOperator, stepping: TimeStepping) -> Result<Self> {
        TimeStepping::new(stepping.dt, stepping.scheme)?;
        let full = ThetaStep::new(op, stepping.dt, stepping.scheme.theta())?;
        Ok(Self { op, stepping, full })
    }

    pub fn operator(&self) -> &DegenOperator {
        self.op
    }

    pub fn stepping(&self) -> TimeStepping {
        self.stepping
    }

    fn last_step(&self, h: f64) -> Result<Option<ThetaStep>> {
        if h == self.stepping.dt {
            Ok(None)
        } else {
            ThetaStep::new(self.op, h, self.stepping.scheme.theta()).map(Some)
        }
    }

    /// Approximates `e^{duration·A} u` without storing intermediate states.
    pub fn advance(&self, u: &Field, duration: f64) -> Result<Field> {
        self.op.grid().check(u)?;
        if duration < 0.0 {
            return Err(Error::Argument(format!("negative duration {duration}")));
        }
        let (steps, last) = step_plan(duration, self.stepping.dt);
        let short = self.last_step(last)?;
        let mut v = u.values().to_vec();
        let mut scratch = vec![0.0; v.len()];
        for k in 0..steps {
            match (&short, k + 1 == steps) {
                (Some(s), true) => s.apply(self.op, &mut v, &mut scratch),
                _ => self.full.apply(self.op, &mut v, &mut scratch),
            }
        }
        Field::new(v)
    }

    /// Evolves over `t_span`, storing every `store_every`-th state plus the
    /// initial and final ones.
    pub fn trajectory(&self, u0: &Field, t_span: (f64, f64), store_every: usize) -> Result<Trajectory> {
        self.op.grid().check(u0)?;
        let (t0, t1) = t_span;
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::Argument(format!("degenerate time span ({t0}, {t1})")));
        }
        let stride = store_every.max(1);
        let dt = self.stepping.dt;
        let (steps, last) = step_plan(t1 - t0, dt);
        let short = self.last_step(last)?;
        let mut v = u0.values().to_vec();
        let mut scratch = vec![0.0; v.len()];
        let mut times = vec![t0];
        let mut states = vec![u0.clone()];
        for k in 0..steps {
            let is_last = k + 1 == steps;
            match (&short, is_last) {
                (Some(s), true) => s.apply(self.op, &mut v, &mut scratch),
                _ => self.full.apply(self.op, &mut v, &mut scratch),
            }
            if is_last || (k + 1) % stride == 0 {
                times.push(if is_last { t1 } else { t0 + (k + 1) as f64 * dt });
                states.push(Field::new(v.clone())?);
            }
        }
        Ok(Trajectory { times, states })
    }
}

/// Sampled solution: `states[k]` is the field at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn norms(&self, grid: &Grid) -> Vec<f64> {
        self.states.iter().map(|s| grid.norm(s)).collect()
    }

    /// Long-format CSV with header `t,x,u`, one row per stored time and node.
    pub fn write_csv<W: Write + ?Sized>(&self, grid: &Grid, w: &mut W) -> io::Result<()> {
        write_row(w, &["t".into(), "x".into(), "u".into()])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let t = fmt_f64(*t);
            for (x, v) in grid.nodes().iter().zip(s.iter()) {
                write_row(w, &[t.clone(), fmt_f64(*x), fmt_f64(*v)])?;
            }
        }
        Ok(())
    }
}

/// Time-steps `u' = Au` over `t_span`, storing every step.
pub fn evolve(
    op: &DegenOperator,
    u0: &Field,
    t_span: (f64, f64),
    stepping: TimeStepping,
) -> Result<Trajectory> {
    Propagator::new(op, stepping)?.trajectory(u0, t_span, 1)
}

/// Eigenpairs of `A` with M-orthonormal eigenfields, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<Field>,
    grid: Grid,
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `<u, e_k>_M` for every k.
    pub fn coefficients(&self, u: &Field) -> Result<Vec<f64>> {
        self.grid.check(u)?;
        Ok(self
            .eigenfields
            .iter()
            .map(|e| self.grid.inner(u, e))
            .collect())
    }

    pub fn leading(&self) -> (f64, &Field) {
        (self.eigenvalues[0], &self.eigenfields[0])
    }
}

/// Dense eigendecomposition of `M^{1/2} A M^{-1/2}` mapped back to fields.
pub fn spectral_decomposition(op: &DegenOperator) -> Result<SpectralDecomposition> {
    let grid = op.grid();
    let n = grid.n();
    if n > MAX_DENSE_N {
        return Err(Error::Capacity { n, max: MAX_DENSE_N });
    }
    let (diag, off) = op.symmetrized();
    let eig = symmetric_tridiagonal_eigen(&diag, &off)?;
    let inv_sqrt_m: Vec<f64> = grid.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let eigenfields = eig
        .vectors
        .into_iter()
        .map(|z| {
            let mut v: Vec<f64> = z.iter().zip(&inv_sqrt_m).map(|(a, b)| a * b).collect();
            // fix the sign: largest-magnitude entry positive
            let pivot = v
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            Field::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralDecomposition {
        eigenvalues: eig.values,
        eigenfields,
        grid: grid.clone(),
    })
}

/// `Σ_k e^{λ_k t} <u0, e_k>_M e_k`.
pub fn propagate_spectral(sd: &SpectralDecomposition, u0: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("negative time {t}")));
    }
    let coeffs = sd.coefficients(u0)?;
    let mut out = Field::zeros(u0.len());
    for ((lam, c), e) in sd.eigenvalues.iter().zip(coeffs).zip(&sd.eigenfields) {
        let w = (lam * t).exp() * c;
        if w != 0.0 {
            out.axpy(w, e);
        }
    }
    Ok(out)
}

/// Trajectory of the impulsive problem, split at the jump.
#[derive(Debug, Clone)]
pub struct ImpulsiveSolution {
    pub y_final: Field,
    /// `[0, τ]`, ending with the pre-jump state `y(τ⁻)`.
    pub before: Trajectory,
    /// `[τ, T]`, starting with the post-jump state `y(τ)`; a single sample
    /// when `τ = T`.
    pub after: Trajectory,
}

/// Checks that `f` vanishes at nodes `x_i >= kappa`.
pub fn check_support(grid: &Grid, f: &Field, kappa: f64) -> Result<()> {
    grid.check(f)?;
    for (i, (&x, &v)) in grid.nodes().iter().zip(f.iter()).enumerate() {
        if x >= kappa && v != 0.0 {
            return Err(Error::Support { node: i, x });
        }
    }
    Ok(())
}

/// Mild solution with a single jump `y(τ) = y(τ⁻) + 1_ω f` at `τ`.
pub fn solve_impulsive(
    op: &DegenOperator,
    y0: &Field,
    f: &Field,
    spec: &ProblemSpec,
    stepping: TimeStepping,
    store_every: usize,
) -> Result<ImpulsiveSolution> {
    spec.validate_limiting()?;
    let grid = op.grid();
    grid.check(y0)?;
    check_support(grid, f, spec.kappa)?;
    let prop = Propagator::new(op, stepping)?;
    let before = prop.trajectory(y0, (0.0, spec.tau), store_every)?;
    let jumped = before.last().add(&grid.mask(f, spec.kappa));
    let after = if spec.tau < spec.horizon {
        prop.trajectory(&jumped, (spec.tau, spec.horizon), store_every)?
    } else {
        Trajectory {
            times: vec![spec.tau],
            states: vec![jumped],
        }
    };
    Ok(ImpulsiveSolution {
        y_final: after.last().clone(),
        before,
        after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(n: usize) -> DegenOperator {
        let g = Grid::new(n).unwrap();
        let spec = ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.1).unwrap();
        DegenOperator::assemble(&g, &spec).unwrap()
    }

    #[test]
    fn step_plan_handles_alignment() {
        assert_eq!(step_plan(1.0, 0.1), (10, 0.1));
        assert_eq!(step_plan(0.3, 0.1), (3, 0.1));
        let (k, last) = step_plan(0.35, 0.1);
        assert_eq!(k, 4);
        assert!((last - 0.05).abs() < 1e-15);
        assert_eq!(step_plan(0.0, 0.1), (0, 0.0));
        assert_eq!(step_plan(0.01, 0.1), (1, 0.01));
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let a = op(32);
        let tr = evolve(&a, &Field::zeros(32), (0.0, 0.1), TimeStepping::new(1e-3, Scheme::CrankNicolson).unwrap()).unwrap();
        assert!(tr.states.iter().all(Field::is_zero));
        assert_eq!(tr.times.len(), 101);
    }

    #[test]
    fn final_time_is_hit_exactly() {
        let a = op(16);
        let u0 = a.grid().sample(|x| 1.0 - x * x);
        let tr = evolve(&a, &u0, (0.0, 0.123), TimeStepping::new(0.01, Scheme::ImplicitEuler).unwrap()).unwrap();
        assert_eq!(*tr.times.last().unwrap(), 0.123);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn split_evolution_is_bitwise_identical() {
        let a = op(40);
        let u0 = a.grid().sample(|x| (3.0 * x).sin() + 1.0 - x);
        let st = TimeStepping::new(1e-3, Scheme::CrankNicolson).unwrap();
        let p = Propagator::new(&a, st).unwrap();
        let whole = p.advance(&u0, 0.25).unwrap();
        let half = p.advance(&p.advance(&u0, 0.1).unwrap(), 0.15).unwrap();
        assert_eq!(whole, half);
    }

    #[test]
    fn leading_mode_decays_exponentially() {
        let a = op(200);
        let sd = spectral_decomposition(&a).unwrap();
        let (lam, e1) = sd.leading();
        let t = 0.2;
        let u = Propagator::new(&a, TimeStepping::new(1e-4, Scheme::CrankNicolson).unwrap())
            .unwrap()
            .advance(e1, t)
            .unwrap();
        let exact = e1.scaled((lam * t).exp());
        let err = a.grid().norm(&u.sub(&exact)) / a.grid().norm(&exact);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn spectral_identity_at_zero() {
        let a = op(64);
        let sd = spectral_decomposition(&a).unwrap();
        let u0 = a.grid().sample(|x| (7.0 * x).cos() * (1.0 - x));
        let back = propagate_spectral(&sd, &u0, 0.0).unwrap();
        let err = a.grid().norm(&back.sub(&u0));
        assert!(err <= 1e-10 * a.grid().norm(&u0));
    }

    #[test]
    fn capacity_guard() {
        let a = op(MAX_DENSE_N + 1);
        assert!(matches!(
            spectral_decomposition(&a),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn impulse_outside_region_is_rejected() {
        let a = op(20);
        let spec = ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.1).unwrap();
        let f = a.grid().sample(|x| if x > 0.5 { 1.0 } else { 0.0 });
        let st = TimeStepping::default_for(1.0);
        assert!(matches!(
            solve_impulsive(&a, &Field::zeros(20), &f, &spec, st, 1),
            Err(Error::Support { .. })
        ));
    }

    #[test]
    fn jump_equals_masked_impulse() {
        let a = op(50);
        let g = a.grid();
        let spec = ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.1).unwrap();
        let y0 = g.sample(|x| 1.0 - x);
        let f = g.mask(&g.sample(|x| (10.0 * x).sin() + 2.0), spec.kappa);
        let sol = solve_impulsive(&a, &y0, &f, &spec, TimeStepping::default_for(1.0), 50).unwrap();
        let jump = sol.after.states[0].sub(sol.before.last());
        assert!((g.norm(&jump) - g.norm(&f)).abs() <= 1e-14 * g.norm(&f));
        assert_eq!(sol.after.times[0], spec.tau);
        assert_eq!(*sol.before.times.last().unwrap(), spec.tau);
    }

    #[test]
    fn trajectory_csv_is_long_format() {
        let g = Grid::new(4).unwrap();
        let tr = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![g.sample(|x| 1.0 - x), g.sample(|_| 0.0)],
        };
        let mut buf = Vec::new();
        tr.write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,u\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 4);
    }
}
