//! Closed-form constants of the one-time observation estimate and the cost
//! bound: the integer `l`, `M_l`, `C₁`, `C₂`, `ρ`, `𝒞`, `β` and `log K`.
//!
//! `K` itself overflows f64 for any realistic `ε`; it is carried as `ln K`
//! and `log₁₀ K`.

use serde::{Deserialize, Serialize};

use crate::carleman::CarlemanParams;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

/// Upper end of the search for `l`.
pub const MAX_L: u64 = 1_000_000_000;

/// Below this the search is a plain scan; above it the (monotone) ratio
/// `(1+M_l)/(1+l)` is bracketed by doubling and bisected.
const LINEAR_SCAN_LIMIT: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub l: u64,
    #[serde(rename = "M_l")]
    pub m_l: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub rho: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub beta: f64,
    /// Natural log of `K = ε^{-β} e^{𝒞(1 + 1/(T-τ))}`.
    #[serde(rename = "logK")]
    pub log_k: f64,
    #[serde(rename = "log10K")]
    pub log10_k: f64,
}

impl TheoryConstants {
    /// `𝒞 (1 + 1/gap)`, the log of the observation prefactor.
    pub fn observation_log_factor(&self, gap: f64) -> f64 {
        self.big_c * (1.0 + 1.0 / gap)
    }

    /// `ln K` for an arbitrary target and time gap.
    pub fn log_k_for(&self, eps: f64, gap: f64) -> f64 {
        self.observation_log_factor(gap) - self.beta * eps.ln()
    }
}

/// `M_l = ((l+1)^{C₀} - 1) / (1 - ((l+1)/(2l+1))^{C₀})`, evaluated in log space.
pub fn m_l(l: u64, c0: f64) -> f64 {
    let lp = l as f64 + 1.0;
    let num = (c0 * lp.ln()).exp_m1();
    let den = -(c0 * (lp / (2.0 * l as f64 + 1.0)).ln()).exp_m1();
    num / den
}

/// `(1 + M_l) / (1 + l)`.
pub fn index_ratio(l: u64, c0: f64) -> f64 {
    (1.0 + m_l(l, c0)) / (l as f64 + 1.0)
}

/// Negativity of the exponent on the complement of ω:
/// `(1+M_l)/(1+l) < κ^{2-α}`.
pub fn complement_condition(l: u64, c0: f64, kappa: f64, alpha: f64) -> bool {
    index_ratio(l, c0) < kappa.powf(2.0 - alpha)
}

/// Positivity of the exponent on ω, `-(1+M_l)/(1+l) · φ(1) > 0`.
pub fn omega_condition(l: u64, c0: f64, alpha: f64) -> bool {
    let c = 1.0 / (2.0 * (2.0 - alpha).powi(2));
    index_ratio(l, c0) * c > 0.0
}

fn smallest_l(c0: f64, kappa: f64, alpha: f64) -> Result<u64> {
    let ok = |l: u64| complement_condition(l, c0, kappa, alpha);
    for l in 2..=LINEAR_SCAN_LIMIT {
        if ok(l) {
            return Ok(l);
        }
    }
    let mut lo = LINEAR_SCAN_LIMIT;
    let mut hi = LINEAR_SCAN_LIMIT;
    loop {
        hi = (hi * 2).min(MAX_L);
        if ok(hi) {
            break;
        }
        if hi == MAX_L {
            return Err(Error::Constants { max_l: MAX_L });
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Picks the smallest admissible `l` and derives the remaining constants.
pub fn theoretical_constants(spec: &ProblemSpec, p: &CarlemanParams) -> Result<TheoryConstants> {
    spec.validate()?;
    let alpha = spec.alpha;
    let c0 = p.c0();
    let l = smallest_l(c0, spec.kappa, alpha)?;
    let m = m_l(l, c0);
    let ratio = (1.0 + m) / (l as f64 + 1.0);
    let c = 1.0 / (2.0 * (2.0 - alpha).powi(2));
    let c1 = 0.5 * p.s * ratio * c;
    let c2 = 0.5 * p.s * c * (spec.kappa.powf(2.0 - alpha) - ratio);
    let rho = 1.0 / (1.0 + m + (1.0 + m) * c1 / c2);
    let big_c = 2.0 * l as f64 * (1.0 + c1 / c2) * c1.max(1.0);
    let beta = (1.0 - rho) / rho;
    let log_k = big_c * (1.0 + 1.0 / spec.remaining()) - beta * spec.eps.ln();
    Ok(TheoryConstants {
        l,
        m_l: m,
        c0,
        c1,
        c2,
        rho,
        big_c,
        beta,
        log_k,
        log10_k: log_k / std::f64::consts::LN_10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_l_reference_value() {
        let direct = (4f64.powf(0.75) - 1.0) / (1.0 - (4.0f64 / 7.0).powf(0.75));
        assert!((m_l(3, 0.75) - direct).abs() < 1e-13);
        assert!((m_l(3, 0.75) - 5.3352).abs() < 5e-3);
    }

    #[test]
    fn m_l_matches_interpolation_exponent() {
        // t3 = T, t2 = T - l h, t1 = T - 2 l h
        let (l, h) = (3u64, 0.1);
        let horizon = 1.0;
        let m = crate::carleman::interpolation_exponent_with_c0(
            0.75,
            horizon,
            h,
            horizon - 2.0 * l as f64 * h,
            horizon - l as f64 * h,
            horizon,
        )
        .unwrap();
        assert!((m - m_l(l, 0.75)).abs() < 1e-12 * m);
    }

    #[test]
    fn ratio_is_decreasing() {
        for c0 in [0.5001, 0.75, 0.99] {
            let mut prev = index_ratio(2, c0);
            for l in (3..5000).chain((1..30).map(|k| 5000u64 << k)) {
                let r = index_ratio(l, c0);
                assert!(r < prev, "c0={c0}, l={l}");
                prev = r;
            }
        }
    }

    #[test]
    fn default_constants_are_consistent() {
        let spec = ProblemSpec::new(0.5, 1.0, 1.0, 0.5, 0.5, 1.0, 0.1).unwrap();
        let p = CarlemanParams::new(0.5, 0.5, 1.0, 0.5).unwrap();
        let tc = theoretical_constants(&spec, &p).unwrap();
        assert_eq!(tc.c0, 0.75);
        assert!(tc.l > 1_000 && tc.l < 10_000, "l = {}", tc.l);
        assert!(complement_condition(tc.l, 0.75, 0.5, 0.5));
        assert!(!complement_condition(tc.l - 1, 0.75, 0.5, 0.5));
        assert!(omega_condition(tc.l, 0.75, 0.5));
        assert!(tc.rho > 0.0 && tc.rho < 1.0);
        assert!((tc.beta - (1.0 - tc.rho) / tc.rho).abs() <= 1e-12 * tc.beta);
        assert!(tc.c1 > 0.0 && tc.c2 > 0.0 && tc.big_c > 0.0);
    }

    #[test]
    fn galloping_branch_agrees_with_scan_definition() {
        // kappa = 0.2 needs l beyond the linear scan range
        let spec = ProblemSpec::new(0.5, 1.0, 1.0, 0.2, 0.5, 1.0, 0.1).unwrap();
        let p = CarlemanParams::new(0.5, 0.5, 1.0, 0.5).unwrap();
        let tc = theoretical_constants(&spec, &p).unwrap();
        assert!(tc.l > LINEAR_SCAN_LIMIT);
        assert!(complement_condition(tc.l, tc.c0, 0.2, 0.5));
        assert!(!complement_condition(tc.l - 1, tc.c0, 0.2, 0.5));
    }

    #[test]
    fn tiny_control_region_exhausts_search() {
        let spec = ProblemSpec::new(0.5, 1.0, 1.0, 1e-3, 0.5, 1.0, 0.1).unwrap();
        let p = CarlemanParams::new(0.5, 0.5, 1.0, 0.5).unwrap();
        assert_eq!(
            theoretical_constants(&spec, &p),
            Err(Error::Constants { max_l: MAX_L })
        );
    }
}
