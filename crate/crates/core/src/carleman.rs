//! Carleman weight machinery: the gauge `w = e^{Φ/2} u` with
//! `Φ = s φ(x)/θ(t)`, the symmetric form `<-Sw, w>`, the frequency function
//! and numerical checks of the inequalities that drive log-convexity.
//!
//! Only quadratic forms are evaluated; no operator matrices for `S` or the
//! antisymmetric part are assembled. Gradient terms use the same interface
//! quadrature as [`DegenOperator`] and zeroth-order terms the mass weights,
//! so the two routes to `<-Sw, w>` agree algebraically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operator::DegenOperator;
use crate::semigroup::{Propagator, TimeStepping, Trajectory};

/// Weight parameters. `h_w` is the time shift in `θ(t) = T - t + h_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub s: f64,
    pub h_w: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha: f64,
}

impl CarlemanParams {
    pub fn new(s: f64, h_w: f64, horizon: f64, alpha: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain {
                name: "s",
                value: s,
                expected: "(0, 1)",
            });
        }
        if !(h_w > 0.0 && h_w <= 1.0) {
            return Err(Error::Domain {
                name: "h_w",
                value: h_w,
                expected: "(0, 1]",
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain {
                name: "T",
                value: horizon,
                expected: "T > 0",
            });
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                expected: "(0, 1)",
            });
        }
        Ok(Self {
            s,
            h_w,
            horizon,
            alpha,
        })
    }

    /// `C₀ = 1 - s/2`.
    pub fn c0(&self) -> f64 {
        1.0 - 0.5 * self.s
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.horizon - t + self.h_w
    }

    fn two_minus_alpha(&self) -> f64 {
        2.0 - self.alpha
    }

    /// `φ(x) = -x^{2-α} / (2(2-α)²)`.
    pub fn phi(&self, x: f64) -> f64 {
        let k = self.two_minus_alpha();
        -x.powf(k) / (2.0 * k * k)
    }

    /// `φ'(x) = -x^{1-α} / (2(2-α))`.
    pub fn phi_prime(&self, x: f64) -> f64 {
        -x.powf(1.0 - self.alpha) / (2.0 * self.two_minus_alpha())
    }

    /// `η = Φ_t/2 + x^α Φ_x²/4`, from the closed-form weight.
    pub fn eta(&self, x: f64, t: f64) -> f64 {
        let th = self.theta(t);
        let phi_t = self.s * self.phi(x) / (th * th);
        let phi_x = self.s * self.phi_prime(x) / th;
        0.5 * phi_t + 0.25 * x.powf(self.alpha) * phi_x * phi_x
    }

    /// Coefficient `s(4-s) / (16(2-α)²θ²)` of `∫ x^{2-α} w²` in `<-Sw, w>`.
    fn zeroth_order_coeff(&self, t: f64) -> f64 {
        let k = self.two_minus_alpha();
        let th = self.theta(t);
        self.s * (4.0 - self.s) / (16.0 * k * k * th * th)
    }
}

/// `Φ(x,t) = s φ(x) / θ(t)`.
pub fn weight_phi(x: f64, t: f64, p: &CarlemanParams) -> f64 {
    p.s * p.phi(x) / p.theta(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `u ↦ e^{Φ/2} u`
    Forward,
    /// `w ↦ e^{-Φ/2} w`
    Inverse,
}

pub fn gauge_transform(
    grid: &Grid,
    u: &Field,
    t: f64,
    p: &CarlemanParams,
    direction: Direction,
) -> Result<Field> {
    grid.check(u)?;
    let sign = match direction {
        Direction::Forward => 0.5,
        Direction::Inverse => -0.5,
    };
    let values = grid
        .nodes()
        .iter()
        .zip(u.iter())
        .map(|(&x, &v)| (sign * weight_phi(x, t, p)).exp() * v)
        .collect();
    Field::new(values)
}

/// `Σ m_i x_i^{2-α} w_i²`.
fn degenerate_moment(grid: &Grid, w: &Field, alpha: f64) -> f64 {
    grid.nodes()
        .iter()
        .zip(grid.mass())
        .zip(w.iter())
        .map(|((&x, m), &v)| m * x.powf(2.0 - alpha) * v * v)
        .sum()
}

/// `<-Sw, w> = (β₀/β₁) w(0)² + ∫ x^α w_x² + s(4-s)/(16(2-α)²θ²) ∫ x^{2-α} w²`.
pub fn symmetric_form(op: &DegenOperator, w: &Field, t: f64, p: &CarlemanParams) -> Result<f64> {
    let grid = op.grid();
    grid.check(w)?;
    let w0 = w.values()[0];
    Ok(op.robin_coeff() * w0 * w0
        + op.gradient_energy(w)
        + p.zeroth_order_coeff(t) * degenerate_moment(grid, w, p.alpha))
}

/// Same form assembled as `-<Aw,w>_M - Σ m_i η(x_i,t) w_i²`.
pub fn symmetric_form_via_eta(
    op: &DegenOperator,
    w: &Field,
    t: f64,
    p: &CarlemanParams,
) -> Result<f64> {
    let grid = op.grid();
    let q = op.quadratic_form(w)?;
    let eta_mass: f64 = grid
        .nodes()
        .iter()
        .zip(grid.mass())
        .zip(w.iter())
        .map(|((&x, m), &v)| m * p.eta(x, t) * v * v)
        .sum();
    Ok(-q - eta_mass)
}

/// Frequency function `N(t) = <-Sw, w> / ||w||²_M`.
pub fn frequency(op: &DegenOperator, w: &Field, t: f64, p: &CarlemanParams) -> Result<f64> {
    let norm_sq = op.grid().inner(w, w);
    if norm_sq == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(symmetric_form(op, w, t, p)? / norm_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub ok: bool,
}

/// Compares `Qw` against `((1+C₀)/θ) <-Sw, w>`.
///
/// `ok` allows a rounding slack of `1e-12 · max(1, |rhs|)`.
pub fn carleman_bound_check(
    op: &DegenOperator,
    w: &Field,
    t: f64,
    p: &CarlemanParams,
) -> Result<BoundCheck> {
    let grid = op.grid();
    grid.check(w)?;
    let s = p.s;
    let k = 2.0 - p.alpha;
    let th = p.theta(t);
    let w0 = w.values()[0];
    let boundary = op.robin_coeff() * w0 * w0;
    let grad = op.gradient_energy(w);
    let moment = degenerate_moment(grid, w, p.alpha);
    let lhs = boundary * s / (2.0 * k * th)
        + grad * s / (2.0 * th)
        + moment * s * (4.0 - s) * (4.0 - s) / (32.0 * k * k * th * th * th);
    let rhs = (1.0 + p.c0()) / th * symmetric_form(op, w, t, p)?;
    let slack = rhs - lhs;
    Ok(BoundCheck {
        lhs,
        rhs,
        slack,
        ok: slack >= -1e-12 * rhs.abs().max(1.0),
    })
}

/// Residuals of `½ d/dt ||w||² + N ||w||² = 0` and of the frequency growth
/// bound `N' ≤ ((1+C₀)/θ) N` along a solution.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// Interior sample times.
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `max |r| / max(||w||²/θ)`.
    pub normalized_residual: f64,
    /// Positive part of `N' - ((1+C₀)/θ) N`, per interior time.
    pub frequency_excess: Vec<f64>,
    /// `max excess / max(N/θ)`.
    pub normalized_frequency_excess: f64,
}

/// Three-point derivative at the middle of `(t_-, t, t_+)`, exact for quadratics.
fn centered_derivative(tm: f64, t: f64, tp: f64, fm: f64, f: f64, fp: f64) -> f64 {
    let hm = t - tm;
    let hp = tp - t;
    (hm * hm * fp - hp * hp * fm + (hp * hp - hm * hm) * f) / (hm * hp * (hm + hp))
}

/// Gauges each state of a solution trajectory `u(t)` to `w = e^{Φ/2} u`
/// and evaluates the energy identity and frequency growth residuals.
pub fn check_energy_ode(
    op: &DegenOperator,
    traj: &Trajectory,
    p: &CarlemanParams,
) -> Result<EnergyReport> {
    if traj.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: traj.len(),
        });
    }
    let grid = op.grid();
    let mut norm_sq = Vec::with_capacity(traj.len());
    let mut form = Vec::with_capacity(traj.len());
    for (&t, u) in traj.times.iter().zip(&traj.states) {
        let w = gauge_transform(grid, u, t, p, Direction::Forward)?;
        norm_sq.push(grid.inner(&w, &w));
        form.push(symmetric_form(op, &w, t, p)?);
    }
    let freq: Vec<f64> = norm_sq
        .iter()
        .zip(&form)
        .map(|(&n, &f)| if n > 0.0 { f / n } else { 0.0 })
        .collect();

    let growth = 1.0 + p.c0();
    let tt = &traj.times;
    let mut times = Vec::new();
    let mut residuals = Vec::new();
    let mut excess = Vec::new();
    for k in 1..tt.len() - 1 {
        let dn = centered_derivative(tt[k - 1], tt[k], tt[k + 1], norm_sq[k - 1], norm_sq[k], norm_sq[k + 1]);
        residuals.push(0.5 * dn + form[k]);
        let df = centered_derivative(tt[k - 1], tt[k], tt[k + 1], freq[k - 1], freq[k], freq[k + 1]);
        excess.push((df - growth / p.theta(tt[k]) * freq[k]).max(0.0));
        times.push(tt[k]);
    }
    let energy_scale = tt
        .iter()
        .zip(&norm_sq)
        .map(|(&t, &n)| n / p.theta(t))
        .fold(0.0, f64::max);
    let freq_scale = tt
        .iter()
        .zip(&freq)
        .map(|(&t, &n)| n / p.theta(t))
        .fold(0.0, f64::max);
    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let max_excess = excess.iter().fold(0.0f64, |a, &r| a.max(r));
    Ok(EnergyReport {
        times,
        residuals,
        normalized_residual: if energy_scale > 0.0 { max_abs / energy_scale } else { 0.0 },
        frequency_excess: excess,
        normalized_frequency_excess: if freq_scale > 0.0 { max_excess / freq_scale } else { 0.0 },
    })
}

/// `∫_{a}^{b} θ^{-(1+C₀)} dt` via the antiderivative `θ^{-C₀}/C₀`.
fn theta_integral(c0: f64, horizon: f64, h_w: f64, a: f64, b: f64) -> f64 {
    let th = |t: f64| horizon - t + h_w;
    (th(b).powf(-c0) - th(a).powf(-c0)) / c0
}

/// Ratio `∫_{t2}^{t3} θ^{-(1+C₀)} / ∫_{t1}^{t2} θ^{-(1+C₀)}` for an explicit `C₀`.
pub fn interpolation_exponent_with_c0(
    c0: f64,
    horizon: f64,
    h_w: f64,
    t1: f64,
    t2: f64,
    t3: f64,
) -> Result<f64> {
    if !(0.0 <= t1 && t1 < t2 && t2 < t3 && t3 <= horizon) {
        return Err(Error::Argument(format!(
            "need 0 <= t1 < t2 < t3 <= T, got ({t1}, {t2}, {t3}) with T = {horizon}"
        )));
    }
    if !(c0 > 0.0) {
        return Err(Error::Argument(format!("C0 must be positive, got {c0}")));
    }
    Ok(theta_integral(c0, horizon, h_w, t2, t3) / theta_integral(c0, horizon, h_w, t1, t2))
}

/// Interpolation exponent `M` of the three-point inequality.
pub fn interpolation_exponent(t1: f64, t2: f64, t3: f64, p: &CarlemanParams) -> Result<f64> {
    interpolation_exponent_with_c0(p.c0(), p.horizon, p.h_w, t1, t2, t3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePointCheck {
    pub m: f64,
    /// `(1+M) log ||w(t2)||`
    pub lhs_log: f64,
    /// `M log ||w(t1)|| + log ||w(t3)||`
    pub rhs_log: f64,
    /// `lhs / rhs`
    pub ratio: f64,
    pub ok: bool,
}

/// Evaluates `||w(t2)||^{1+M} ≤ ||w(t1)||^M ||w(t3)||` along the solution
/// started from `u0`, in log form; `ok` tolerates a factor `1 + 1e-6`.
pub fn check_three_point(
    op: &DegenOperator,
    u0: &Field,
    times: (f64, f64, f64),
    p: &CarlemanParams,
    stepping: TimeStepping,
) -> Result<ThreePointCheck> {
    let (t1, t2, t3) = times;
    let m = interpolation_exponent(t1, t2, t3, p)?;
    let grid = op.grid();
    grid.check(u0)?;
    if u0.is_zero() {
        return Err(Error::ZeroState);
    }
    let prop = Propagator::new(op, stepping)?;
    let u1 = prop.advance(u0, t1)?;
    let u2 = prop.advance(&u1, t2 - t1)?;
    let u3 = prop.advance(&u2, t3 - t2)?;
    let log_norm = |u: &Field, t: f64| -> Result<f64> {
        let w = gauge_transform(grid, u, t, p, Direction::Forward)?;
        Ok(grid.norm(&w).ln())
    };
    let lhs_log = (1.0 + m) * log_norm(&u2, t2)?;
    let rhs_log = m * log_norm(&u1, t1)? + log_norm(&u3, t3)?;
    Ok(ThreePointCheck {
        m,
        lhs_log,
        rhs_log,
        ratio: (lhs_log - rhs_log).exp(),
        ok: lhs_log <= rhs_log + 1e-6f64.ln_1p(),
    })
}
