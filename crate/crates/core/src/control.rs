//! Penalized-HUM synthesis of a single impulse.
//!
//! The minimizer of
//! `J(v) = (K²/2)||1_ω e^{(T-τ)A} v||² + (ε²/2)||v||² + <y0, e^{TA} v>`
//! solves `(ε² I + K² G) v = -e^{TA} y0` with the Gramian
//! `G = e^{(T-τ)A} 1_ω e^{(T-τ)A}`. The solve is carried out in the scaled
//! unknown `g = K² v`, i.e. `(δ I + G) g = -e^{TA} y0` with `δ = ε²/K²`, which
//! stays finite when `K²` itself overflows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cg::{self, CgOutcome, CgSettings};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operator::DegenOperator;
use crate::problem::ProblemSpec;
use crate::semigroup::{solve_impulsive, Propagator, TimeStepping};

/// Bisection window for automatic `K`, in `log10 K`.
pub const AUTO_LOG10_RANGE: (f64, f64) = (-6.0, 12.0);
pub const AUTO_ITERATIONS: usize = 60;
/// Largest admissible condition bound `(ε² + K²)/ε²` for a requested `K`.
pub const MAX_LOG10_CONDITION: f64 = 14.0;
/// Relative tolerance of the terminal identity `y(T) = -ε² v`.
pub const TERMINAL_TOL: f64 = 1e-6;
/// Normalized slack below which the cost inequality is reported as failed.
pub const COST_TOL: f64 = 1e-8;

/// How the penalty weight `K` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum KMode {
    /// `K = e^{log_k}` from the closed-form constants.
    Theoretical { log_k: f64 },
    Practical { k: f64 },
    /// Smallest `K` on the bisection window whose certificates pass.
    Auto,
}

impl KMode {
    pub fn name(&self) -> &'static str {
        match self {
            KMode::Theoretical { .. } => "theoretical",
            KMode::Practical { .. } => "practical",
            KMode::Auto => "auto",
        }
    }
}

/// Regime actually used for the reported solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRegime {
    Practical,
    Theoretical,
    /// Requested theoretical `K` was beyond a stable solve; auto-`K` used.
    TheoreticalFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub ok: bool,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// `||y(T)|| ≤ ε ||y0||`; slack `ε - ||y(T)||/||y0||`.
    pub target_met: Certificate,
    /// `y(T) = -ε² v` within [`TERMINAL_TOL`]; slack `TERMINAL_TOL - rel. error`.
    pub terminal_identity: Certificate,
    /// `||f||²/K² + ||y(T)||²/ε² ≤ ||y0||²`; slack normalized by `||y0||²`.
    pub cost_inequality: Certificate,
}

impl Certificates {
    pub fn all_ok(&self) -> bool {
        self.target_met.ok && self.terminal_identity.ok && self.cost_inequality.ok
    }
}

/// Result of [`synthesize`]. The impulse `f` is the same datum the
/// controllability definition calls `h(·, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisReport {
    #[serde(skip)]
    pub f: Field,
    #[serde(skip)]
    pub v0_min: Field,
    #[serde(skip)]
    pub y_t: Field,
    pub norm_y0: f64,
    #[serde(rename = "norm_yT")]
    pub norm_y_t: f64,
    pub norm_f_omega: f64,
    /// `||e^{TA} y0||`, the uncontrolled terminal norm.
    pub norm_free: f64,
    pub k_mode: String,
    pub k_regime: KRegime,
    #[serde(rename = "log10K_used")]
    pub log10_k_used: f64,
    #[serde(rename = "log10K_requested")]
    pub log10_k_requested: Option<f64>,
    pub eps: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub cg_converged: bool,
    pub cg_tol: f64,
    #[serde(skip)]
    pub cg_residual_history: Vec<f64>,
    #[serde(skip)]
    pub cg_energy_history: Vec<f64>,
    /// Energy-norm (A-norm) error sequence is non-increasing.
    pub cg_energy_monotone: bool,
    /// Plain M-norm residual sequence is non-increasing (not guaranteed by CG).
    pub cg_residual_monotone: bool,
    /// Number of CG solves in the `K` search (1 outside auto mode).
    pub solves: usize,
    pub failed_solves: usize,
    pub certificates: Certificates,
}

/// `G v = e^{(T-τ)A} 1_ω e^{(T-τ)A} v`.
pub fn gramian_apply(op: &DegenOperator, v0: &Field, spec: &ProblemSpec, stepping: TimeStepping) -> Result<Field> {
    let prop = Propagator::new(op, stepping)?;
    gramian_with(&prop, v0, spec)
}

fn gramian_with(prop: &Propagator<'_>, v: &Field, spec: &ProblemSpec) -> Result<Field> {
    let grid = prop.operator().grid();
    let gap = spec.remaining();
    let forward = prop.advance(v, gap)?;
    prop.advance(&grid.mask(&forward, spec.kappa), gap)
}

/// `J(v0)` evaluated with two propagations.
pub fn functional_value(
    op: &DegenOperator,
    v0: &Field,
    y0: &Field,
    spec: &ProblemSpec,
    k: f64,
    stepping: TimeStepping,
) -> Result<f64> {
    let grid = op.grid();
    grid.check(v0)?;
    grid.check(y0)?;
    let prop = Propagator::new(op, stepping)?;
    let late = prop.advance(v0, spec.remaining())?;
    let observed = grid.norm(&grid.mask(&late, spec.kappa));
    let full = prop.advance(&late, spec.tau)?;
    let eps = spec.eps;
    Ok(0.5 * k * k * observed * observed + 0.5 * eps * eps * grid.norm(v0).powi(2) + grid.inner(y0, &full))
}

struct Solve {
    log_k: f64,
    cg: CgOutcome,
    f: Field,
    y_t: Field,
    v0: Field,
    certificates: Certificates,
}

struct Synth<'a> {
    prop: Propagator<'a>,
    spec: &'a ProblemSpec,
    stepping: TimeStepping,
    y0: &'a Field,
    free: Field,
    settings: CgSettings,
}

impl<'a> Synth<'a> {
    fn grid(&self) -> &Grid {
        self.prop.operator().grid()
    }

    fn solve(&self, log_k: f64, warm: Option<&Field>) -> Result<Solve> {
        let grid = self.grid();
        let spec = self.spec;
        let ln_eps = spec.eps.ln();
        let delta = (2.0 * (ln_eps - log_k)).exp();
        let rhs = self.free.scaled(-1.0);
        let cg = cg::solve(
            grid,
            |g: &Field| {
                let mut out = gramian_with(&self.prop, g, spec)?;
                out.axpy(delta, g);
                Ok(out)
            },
            &rhs,
            warm,
            self.settings,
        )?;
        let g = &cg.x;
        let f = grid.mask(&self.prop.advance(g, spec.remaining())?, spec.kappa);
        let y_t = solve_impulsive(self.prop.operator(), self.y0, &f, spec, self.stepping, usize::MAX)?.y_final;
        let v0 = g.scaled((-2.0 * log_k).exp());
        let certificates = self.certify(log_k, delta, g, &f, &y_t);
        Ok(Solve {
            log_k,
            cg,
            f,
            y_t,
            v0,
            certificates,
        })
    }

    fn certify(&self, log_k: f64, delta: f64, g: &Field, f: &Field, y_t: &Field) -> Certificates {
        let grid = self.grid();
        let eps = self.spec.eps;
        let norm_y0 = grid.norm(self.y0);
        let norm_yt = grid.norm(y_t);

        let target_slack = eps - norm_yt / norm_y0;

        // -ε² v = -δ g
        let mut defect = y_t.clone();
        defect.axpy(delta, g);
        let rel = if norm_yt > 0.0 {
            grid.norm(&defect) / norm_yt
        } else {
            grid.norm(&defect) / norm_y0
        };
        let terminal_slack = TERMINAL_TOL - rel;

        let control_term = (grid.norm(f) / norm_y0).powi(2) * (-2.0 * log_k).exp();
        let state_term = (norm_yt / (eps * norm_y0)).powi(2);
        let cost_slack = 1.0 - control_term - state_term;

        Certificates {
            target_met: Certificate {
                ok: target_slack >= 0.0,
                slack: target_slack,
            },
            terminal_identity: Certificate {
                ok: terminal_slack >= 0.0,
                slack: terminal_slack,
            },
            cost_inequality: Certificate {
                ok: cost_slack >= -COST_TOL,
                slack: cost_slack,
            },
        }
    }

    fn feasible(s: &Solve) -> bool {
        s.cg.converged && s.certificates.target_met.ok && s.certificates.cost_inequality.slack >= 0.0
    }

    /// Bisects `log10 K` for the smallest `K` meeting the target and the cost
    /// inequality; the cost inequality implies the target and is monotone in
    /// `K`, which makes the predicate bisectable.
    fn auto(&self) -> Result<(Solve, usize, usize)> {
        let ln10 = std::f64::consts::LN_10;
        let (lo, hi) = AUTO_LOG10_RANGE;
        let mut solves = 0;
        let mut failed = 0;
        let mut attempt = |log10_k: f64, warm: Option<&Field>| -> Result<Solve> {
            solves += 1;
            let s = self.solve(log10_k * ln10, warm)?;
            if !s.cg.converged {
                failed += 1;
            }
            Ok(s)
        };

        let low = attempt(lo, None)?;
        if Self::feasible(&low) {
            return Ok((low, solves, failed));
        }
        let mut warm = low.cg.x.clone();
        let mut best: Option<Solve> = None;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..AUTO_ITERATIONS {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let s = attempt(mid, Some(&warm))?;
            if s.cg.converged {
                warm = s.cg.x.clone();
            }
            if Self::feasible(&s) {
                b = mid;
                best = Some(s);
            } else {
                a = mid;
            }
        }
        // cold re-solve so the reported CG history starts from zero
        let log10_k = best.map_or(hi, |s| s.log_k / ln10);
        let best = attempt(log10_k, None)?;
        Ok((best, solves, failed))
    }
}

/// Synthesizes the impulse for `y0`. Errors with [`Error::Solver`] when a
/// practical-mode solve does not converge within `n` iterations.
pub fn synthesize(
    op: &DegenOperator,
    y0: &Field,
    spec: &ProblemSpec,
    mode: KMode,
    stepping: TimeStepping,
    cg_tol: f64,
) -> Result<SynthesisReport> {
    spec.validate_limiting()?;
    let grid = op.grid();
    grid.check(y0)?;
    if y0.is_zero() {
        return Err(Error::ZeroState);
    }
    if !(cg_tol > 0.0) {
        return Err(Error::Domain {
            name: "cg_tol",
            value: cg_tol,
            expected: "> 0",
        });
    }
    let prop = Propagator::new(op, stepping)?;
    let free = prop.advance(&prop.advance(y0, spec.tau)?, spec.remaining())?;
    let synth = Synth {
        prop,
        spec,
        stepping,
        y0,
        free,
        settings: CgSettings {
            tol: cg_tol,
            max_iter: grid.n(),
            max_restarts: 3,
        },
    };

    let ln10 = std::f64::consts::LN_10;
    let (solve, regime, requested, solves, failed) = match mode {
        KMode::Practical { k } => {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::Domain {
                    name: "K",
                    value: k,
                    expected: "finite and > 0",
                });
            }
            let s = synth.solve(k.ln(), None)?;
            if !s.cg.converged {
                return Err(Error::Solver(format!(
                    "CG did not reach {cg_tol:e} within {} iterations (residual {:e})",
                    grid.n(),
                    s.cg.true_residual
                )));
            }
            (s, KRegime::Practical, None, 1, 0)
        }
        KMode::Auto => {
            let (s, solves, failed) = synth.auto()?;
            (s, KRegime::Practical, None, solves, failed)
        }
        KMode::Theoretical { log_k } => {
            let log10_cond = 2.0 * (log_k - spec.eps.ln()).max(0.0) / ln10;
            let direct = if log_k.is_finite() && log10_cond <= MAX_LOG10_CONDITION {
                let s = synth.solve(log_k, None)?;
                s.cg.converged.then_some(s)
            } else {
                None
            };
            match direct {
                Some(s) => (s, KRegime::Theoretical, Some(log_k / ln10), 1, 0),
                None => {
                    let (s, solves, failed) = synth.auto()?;
                    (s, KRegime::TheoreticalFallback, Some(log_k / ln10), solves + 1, failed + 1)
                }
            }
        }
    };

    Ok(SynthesisReport {
        norm_y0: grid.norm(y0),
        norm_y_t: grid.norm(&solve.y_t),
        norm_f_omega: grid.norm(&solve.f),
        norm_free: grid.norm(&synth.free),
        k_mode: mode.name().to_string(),
        k_regime: regime,
        log10_k_used: solve.log_k / ln10,
        log10_k_requested: requested,
        eps: spec.eps,
        cg_iterations: solve.cg.iterations,
        cg_residual: solve.cg.true_residual,
        cg_converged: solve.cg.converged,
        cg_tol,
        cg_energy_monotone: solve.cg.energy_monotone(),
        cg_residual_monotone: solve.cg.residuals_monotone(),
        cg_residual_history: solve.cg.residuals.clone(),
        cg_energy_history: solve.cg.energy_errors.clone(),
        solves,
        failed_solves: failed,
        certificates: solve.certificates,
        f: solve.f,
        v0_min: solve.v0,
        y_t: solve.y_t,
    })
}

/// Empirical cost over an ensemble, with the theoretical bound alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// `max ||f||_ω` over the (normalized) ensemble.
    pub cost: f64,
    pub argmax: usize,
    pub log10_cost: f64,
    /// `log10(e^{𝒞(1+1/(T-τ))} ε^{-β})` when constants were supplied.
    pub log10_bound: Option<f64>,
    pub per_sample: Vec<f64>,
    pub all_certified: bool,
}

/// Runs [`synthesize`] on every member (each rescaled to unit norm) in
/// parallel and reduces in index order.
pub fn estimate_cost(
    op: &DegenOperator,
    spec: &ProblemSpec,
    mode: KMode,
    ensemble: &[Field],
    stepping: TimeStepping,
    cg_tol: f64,
    log10_bound: Option<f64>,
) -> Result<CostEstimate> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let grid = op.grid();
    let reports: Vec<SynthesisReport> = ensemble
        .par_iter()
        .map(|y0| {
            grid.check(y0)?;
            let norm = grid.norm(y0);
            if norm == 0.0 {
                return Err(Error::ZeroState);
            }
            synthesize(op, &y0.scaled(1.0 / norm), spec, mode, stepping, cg_tol)
        })
        .collect::<Result<_>>()?;
    let per_sample: Vec<f64> = reports.iter().map(|r| r.norm_f_omega).collect();
    let (argmax, cost) = per_sample
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, c)| if c > acc.1 { (i, c) } else { acc });
    Ok(CostEstimate {
        cost,
        argmax,
        log10_cost: cost.log10(),
        log10_bound,
        per_sample,
        all_certified: reports.iter().all(|r| r.certificates.all_ok()),
    })
}
