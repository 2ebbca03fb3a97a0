//! Physical and control parameters of the impulsive degenerate heat problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of `y_t = (x^alpha y_x)_x` on (0,1) with Robin flux at x = 0,
/// Dirichlet at x = 1 and a single impulse supported on (0, kappa) at time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub kappa: f64,
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub eps: f64,
}

impl ProblemSpec {
    /// Builds a validated spec (`0 < kappa < 1`, `0 < tau < T`).
    pub fn new(
        alpha: f64,
        beta0: f64,
        beta1: f64,
        kappa: f64,
        tau: f64,
        horizon: f64,
        eps: f64,
    ) -> Result<Self> {
        let spec = Self {
            alpha,
            beta0,
            beta1,
            kappa,
            tau,
            horizon,
            eps,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Like [`ProblemSpec::new`] but admits the limiting cases `kappa = 1`
    /// and `tau = T`, where the Gramian collapses to the identity.
    pub fn new_limiting(
        alpha: f64,
        beta0: f64,
        beta1: f64,
        kappa: f64,
        tau: f64,
        horizon: f64,
        eps: f64,
    ) -> Result<Self> {
        let spec = Self {
            alpha,
            beta0,
            beta1,
            kappa,
            tau,
            horizon,
            eps,
        };
        spec.validate_limiting()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_operator()?;
        check_open("kappa", self.kappa, 0.0, 1.0, "(0, 1)")?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(domain("T", self.horizon, "T > 0"));
        }
        if !(self.tau > 0.0 && self.tau < self.horizon) {
            return Err(domain("tau", self.tau, "0 < tau < T"));
        }
        check_eps(self.eps)
    }

    pub fn validate_limiting(&self) -> Result<()> {
        self.validate_operator()?;
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(domain("kappa", self.kappa, "(0, 1]"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(domain("T", self.horizon, "T > 0"));
        }
        if !(self.tau > 0.0 && self.tau <= self.horizon) {
            return Err(domain("tau", self.tau, "0 < tau <= T"));
        }
        check_eps(self.eps)
    }

    /// Only the invariants the elliptic operator depends on.
    pub fn validate_operator(&self) -> Result<()> {
        check_open("alpha", self.alpha, 0.0, 1.0, "(0, 1)")?;
        if !self.beta0.is_finite() || !self.beta1.is_finite() {
            return Err(Error::RobinParameter("coefficients must be finite".into()));
        }
        if self.beta1 == 0.0 {
            return Err(Error::RobinParameter("beta1 must be nonzero".into()));
        }
        if self.beta0 * self.beta1 < 0.0 {
            return Err(Error::RobinParameter(
                "beta0 * beta1 must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Boundary flux gain `beta0 / beta1`.
    pub fn robin_coeff(&self) -> f64 {
        self.beta0 / self.beta1
    }

    /// Length of the interval between the impulse and the horizon.
    pub fn remaining(&self) -> f64 {
        self.horizon - self.tau
    }
}

fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}

fn check_open(name: &'static str, v: f64, lo: f64, hi: f64, expected: &'static str) -> Result<()> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(domain(name, v, expected))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(domain("eps", eps, "eps > 0"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ProblemSpec {
        ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.1).unwrap()
    }

    #[test]
    fn accepts_default_problem() {
        let p = base();
        assert_eq!(p.robin_coeff(), 1.0);
        assert_eq!(p.remaining(), 0.5);
    }

    #[test]
    fn rejects_zero_beta1() {
        let err = ProblemSpec::new(0.5, 1.0, 0.0, 0.3, 0.5, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::RobinParameter(_)));
    }

    #[test]
    fn rejects_opposite_signs() {
        assert!(ProblemSpec::new(0.5, 1.0, -1.0, 0.3, 0.5, 1.0, 0.1).is_err());
        assert!(ProblemSpec::new(0.5, -1.0, -2.0, 0.3, 0.5, 1.0, 0.1).is_ok());
    }

    #[test]
    fn rejects_out_of_range_alpha_and_times() {
        assert!(matches!(
            ProblemSpec::new(1.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.1),
            Err(Error::Domain { name: "alpha", .. })
        ));
        assert!(ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 1.0, 1.0, 0.1).is_err());
        assert!(ProblemSpec::new(0.5, 1.0, 1.0, 1.0, 0.5, 1.0, 0.1).is_err());
        assert!(ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn limiting_admits_tau_eq_horizon() {
        assert!(ProblemSpec::new_limiting(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.1).is_ok());
        assert!(ProblemSpec::new_limiting(0.5, 1.0, 1.0, 1.0, 1.1, 1.0, 0.1).is_err());
    }
}
