//! JSON run configuration shared by the command-line driver.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::carleman::CarlemanParams;
use crate::control::KMode;
use crate::ensemble::{gaussian_field, EnsembleSpec};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operator::DegenOperator;
use crate::problem::ProblemSpec;
use crate::semigroup::{spectral_decomposition, Scheme, TimeStepping};

pub const DEFAULT_N: usize = 400;
pub const DEFAULT_STEPS_PER_HORIZON: f64 = 2000.0;
pub const DEFAULT_SWEEP_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Filled with `T/2000` by [`parse_config`] when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Stored-state stride for trajectory output.
    #[serde(default = "default_store_every")]
    pub store_every: usize,
}

fn default_n() -> usize {
    DEFAULT_N
}
fn default_cg_tol() -> f64 {
    1e-10
}
fn default_store_every() -> usize {
    20
}
fn default_half() -> f64 {
    0.5
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_outputs() -> String {
    "out".into()
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            dt: None,
            cg_tol: default_cg_tol(),
            scheme: Scheme::default(),
            store_every: default_store_every(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanSection {
    #[serde(default = "default_half")]
    pub s: f64,
    #[serde(default = "default_half")]
    pub h_w: f64,
}

impl Default for CarlemanSection {
    fn default() -> Self {
        Self { s: 0.5, h_w: 0.5 }
    }
}

/// Initial datum for `evolve` and `synthesize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Unit-normal nodal values seeded by `seed`, or by the run's base seed.
    Gaussian { seed: Option<u64> },
    /// Eigenfield of index `mode` (0 = slowest).
    Eigen { mode: usize },
    Constant { value: f64 },
}

impl InitialData {
    pub fn realize(&self, op: &DegenOperator, base_seed: u64) -> Result<Field> {
        let grid = op.grid();
        match self {
            InitialData::Gaussian { seed } => Ok(gaussian_field(grid, seed.unwrap_or(base_seed))),
            InitialData::Eigen { mode } => {
                let sd = spectral_decomposition(op)?;
                sd.eigenfields
                    .get(*mode)
                    .cloned()
                    .ok_or_else(|| Error::Argument(format!("mode {mode} beyond {} eigenfields", grid.n())))
            }
            InitialData::Constant { value } => Field::new(vec![*value; grid.n()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(default = "default_evolve_initial")]
    pub initial: InitialData,
}

fn default_evolve_initial() -> InitialData {
    InitialData::Gaussian { seed: None }
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            initial: default_evolve_initial(),
        }
    }
}

/// Penalty weight selection as written in a config; the theoretical value
/// is derived from the closed-form constants at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum KChoice {
    Theoretical,
    Practical { k: f64 },
    Auto,
}

impl KChoice {
    /// Resolves to a solver mode; `log_k` is needed only for the theoretical choice.
    pub fn resolve(self, log_k: impl FnOnce() -> Result<f64>) -> Result<KMode> {
        Ok(match self {
            KChoice::Theoretical => KMode::Theoretical { log_k: log_k()? },
            KChoice::Practical { k } => KMode::Practical { k },
            KChoice::Auto => KMode::Auto,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default = "default_k_mode")]
    pub k: KChoice,
    #[serde(default = "default_control_initial")]
    pub initial: InitialData,
}

fn default_k_mode() -> KChoice {
    KChoice::Auto
}
fn default_control_initial() -> InitialData {
    InitialData::Eigen { mode: 0 }
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            k: default_k_mode(),
            initial: default_control_initial(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveSection {
    #[serde(default = "default_gaussian_count")]
    pub gaussian: usize,
    #[serde(default = "default_eigen_count")]
    pub eigen: usize,
    #[serde(default = "default_outside_count")]
    pub outside: usize,
    /// ε values for the split estimate.
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    /// Δ in `𝒞(1 + 1/Δ)`; `T - τ` when absent.
    #[serde(default)]
    pub time_gap: Option<f64>,
}

fn default_gaussian_count() -> usize {
    EnsembleSpec::default().gaussian
}
fn default_eigen_count() -> usize {
    EnsembleSpec::default().eigen
}
fn default_outside_count() -> usize {
    EnsembleSpec::default().outside
}
fn default_eps_list() -> Vec<f64> {
    vec![0.5, 0.1, 0.02]
}

impl Default for ObserveSection {
    fn default() -> Self {
        Self {
            gaussian: default_gaussian_count(),
            eigen: default_eigen_count(),
            outside: default_outside_count(),
            eps_list: default_eps_list(),
            time_gap: None,
        }
    }
}

impl ObserveSection {
    pub fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            gaussian: self.gaussian,
            eigen: self.eigen,
            outside: self.outside,
        }
    }
}

/// One sweep axis: a dotted path into the config and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Column name: the last path segment.
    pub fn column(&self) -> &str {
        self.path.rsplit('.').next().unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "default_sweep_outputs")]
    pub outputs: Vec<String>,
    #[serde(default = "default_sweep_cap")]
    pub cap: usize,
}

fn default_sweep_outputs() -> Vec<String> {
    vec!["lambda1".into(), "log10K".into(), "rho".into()]
}
fn default_sweep_cap() -> usize {
    DEFAULT_SWEEP_CAP
}

/// Complete configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub carleman: CarlemanSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_outputs")]
    pub outputs: String,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub observe: ObserveSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn base_seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(0)
    }

    /// Holdout ensembles use the second seed, or the base seed shifted by 10⁴.
    pub fn holdout_seed(&self) -> u64 {
        self.seeds
            .get(1)
            .copied()
            .unwrap_or_else(|| self.base_seed().wrapping_add(10_000))
    }

    pub fn dt(&self) -> f64 {
        self.numerics
            .dt
            .unwrap_or(self.problem.horizon / DEFAULT_STEPS_PER_HORIZON)
    }

    pub fn stepping(&self) -> TimeStepping {
        TimeStepping {
            dt: self.dt(),
            scheme: self.numerics.scheme,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.numerics.n)
    }

    pub fn operator(&self) -> Result<DegenOperator> {
        DegenOperator::assemble(&self.grid()?, &self.problem)
    }

    pub fn carleman_params(&self) -> Result<CarlemanParams> {
        CarlemanParams::new(self.carleman.s, self.carleman.h_w, self.problem.horizon, self.problem.alpha)
    }

    /// Checks every field, naming the first offending one. The problem may
    /// take the limiting values `kappa = 1`, `tau = T`.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite, got {v}")))
            }
        };
        for (name, v) in [
            ("problem.alpha", p.alpha),
            ("problem.beta0", p.beta0),
            ("problem.beta1", p.beta1),
            ("problem.kappa", p.kappa),
            ("problem.tau", p.tau),
            ("problem.T", p.horizon),
            ("problem.eps", p.eps),
        ] {
            finite(name, v)?;
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(invalid("problem.alpha", format!("{} not in (0, 1)", p.alpha)));
        }
        if p.beta1 == 0.0 {
            return Err(invalid("problem.beta1", "must be nonzero"));
        }
        if p.beta0 * p.beta1 < 0.0 {
            return Err(invalid("problem.beta0", "beta0 * beta1 must be nonnegative"));
        }
        if !(p.kappa > 0.0 && p.kappa <= 1.0) {
            return Err(invalid("problem.kappa", format!("{} not in (0, 1]", p.kappa)));
        }
        if !(p.horizon > 0.0) {
            return Err(invalid("problem.T", "must be positive"));
        }
        if !(p.tau > 0.0 && p.tau <= p.horizon) {
            return Err(invalid("problem.tau", format!("{} not in (0, T]", p.tau)));
        }
        if !(p.eps > 0.0) {
            return Err(invalid("problem.eps", "must be positive"));
        }
        let num = &self.numerics;
        if num.n < crate::grid::MIN_CELLS {
            return Err(invalid(
                "numerics.n",
                format!("need at least {} cells", crate::grid::MIN_CELLS),
            ));
        }
        if let Some(dt) = num.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("numerics.dt", "must be positive"));
            }
        }
        if !(num.cg_tol > 0.0 && num.cg_tol < 1.0) {
            return Err(invalid("numerics.cg_tol", "must lie in (0, 1)"));
        }
        if num.store_every == 0 {
            return Err(invalid("numerics.store_every", "must be at least 1"));
        }
        let c = &self.carleman;
        if !(c.s > 0.0 && c.s < 1.0) {
            return Err(invalid("carleman.s", format!("{} not in (0, 1)", c.s)));
        }
        if !(c.h_w > 0.0 && c.h_w <= 1.0) {
            return Err(invalid("carleman.h_w", format!("{} not in (0, 1]", c.h_w)));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "need at least one seed"));
        }
        if self.outputs.is_empty() {
            return Err(invalid("outputs", "empty path"));
        }
        if let KChoice::Practical { k } = self.control.k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(invalid("control.k.k", "must be finite and positive"));
            }
        }
        if let InitialData::Eigen { mode } = self.control.initial {
            if mode >= num.n {
                return Err(invalid("control.initial.mode", "beyond the number of nodes"));
            }
        }
        if let InitialData::Eigen { mode } = self.evolve.initial {
            if mode >= num.n {
                return Err(invalid("evolve.initial.mode", "beyond the number of nodes"));
            }
        }
        let o = &self.observe;
        if o.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("observe.eps_list", "entries must be positive"));
        }
        if let Some(gap) = o.time_gap {
            if !(gap > 0.0 && gap.is_finite()) {
                return Err(invalid("observe.time_gap", "must be positive"));
            }
        }
        if let Some(sw) = &self.sweep {
            sweep_spec(self, sw)?;
        }
        Ok(())
    }

    /// Canonical JSON with every default filled in.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical JSON.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Parses and validates a configuration, filling defaults (`n = 400`,
/// `dt = T/2000`, `s = h_w = 0.5`, `cg_tol = 1e-10`, Crank–Nicolson).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    cfg.numerics.dt = Some(cfg.dt());
    Ok(cfg)
}

/// Sweep over the Cartesian product of the axes of a base config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axes: Vec<SweepAxis>,
    pub outputs: Vec<String>,
    pub cap: usize,
}

impl SweepSpec {
    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values of point `index`, last axis varying fastest.
    pub fn coordinates(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let len = axis.values.len();
            out[k] = axis.values[index % len];
            index /= len;
        }
        out
    }

    /// Config of point `index` with the sweep section removed.
    pub fn point(&self, index: usize) -> Result<RunConfig> {
        let mut value = serde_json::to_value(&self.base).expect("config serializes");
        for (axis, v) in self.axes.iter().zip(self.coordinates(index)) {
            set_path(&mut value, &axis.path, v)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| invalid("sweep.axes", e.to_string()))?;
        cfg.sweep = None;
        cfg.validate()?;
        cfg.numerics.dt = Some(cfg.dt());
        Ok(cfg)
    }
}

fn set_path(value: &mut Value, path: &str, v: f64) -> Result<()> {
    let mut cur = value;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .get_mut(*part)
            .ok_or_else(|| invalid("sweep.axes", format!("unknown path `{path}`")))?;
    }
    let last = parts[parts.len() - 1];
    let slot = cur
        .get_mut(last)
        .ok_or_else(|| invalid("sweep.axes", format!("unknown path `{path}`")))?;
    *slot = if slot.is_u64() && v >= 0.0 && v.fract() == 0.0 {
        Value::from(v as u64)
    } else {
        Value::from(v)
    };
    Ok(())
}

fn sweep_spec(cfg: &RunConfig, sw: &SweepSection) -> Result<SweepSpec> {
    if sw.axes.is_empty() {
        return Err(invalid("sweep.axes", "need at least one axis"));
    }
    let mut size: usize = 1;
    for axis in &sw.axes {
        if axis.values.is_empty() {
            return Err(invalid("sweep.axes", format!("axis `{}` has no values", axis.path)));
        }
        size = size.saturating_mul(axis.values.len());
    }
    if size > sw.cap {
        return Err(invalid("sweep.cap", format!("{size} points exceed the cap {}", sw.cap)));
    }
    let mut base = cfg.clone();
    base.sweep = None;
    let spec = SweepSpec {
        base,
        axes: sw.axes.clone(),
        outputs: sw.outputs.clone(),
        cap: sw.cap,
    };
    // probe the path of every axis once
    let mut probe = serde_json::to_value(&spec.base).expect("config serializes");
    for axis in &spec.axes {
        set_path(&mut probe, &axis.path, axis.values[0])?;
    }
    Ok(spec)
}

/// Sweep described by the config's `sweep` section.
pub fn sweep_from(cfg: &RunConfig) -> Result<SweepSpec> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| invalid("sweep", "missing sweep section"))?;
    sweep_spec(cfg, sw)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"problem":{"alpha":0.5,"beta0":1,"beta1":1,"kappa":0.3,"tau":0.5,"T":1,"eps":0.1}}"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.numerics.n, 400);
        assert_eq!(cfg.numerics.dt, Some(1.0 / 2000.0));
        assert_eq!(cfg.numerics.cg_tol, 1e-10);
        assert_eq!(cfg.numerics.scheme, Scheme::CrankNicolson);
        assert_eq!(cfg.carleman, CarlemanSection { s: 0.5, h_w: 0.5 });
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&cfg.emit()).unwrap(), cfg);
        assert_eq!(parse_config(&cfg.emit()).unwrap().hash(), cfg.hash());
    }

    #[test]
    fn validation_names_field() {
        let bad = MINIMAL.replace("\"beta1\":1", "\"beta1\":0");
        match parse_config(&bad) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "problem.beta1"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("\"alpha\":0.5", "\"alpha\":1.5");
        match parse_config(&bad) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "problem.alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_config("{\n  \"problem\": {,\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_points_enumerate_product() {
        let text = MINIMAL.replace(
            "}}",
            r#"},"sweep":{"axes":[{"path":"problem.alpha","values":[0.1,0.2,0.3]},{"path":"numerics.n","values":[50,100]}]}}"#,
        );
        let cfg = parse_config(&text).unwrap();
        let sw = sweep_from(&cfg).unwrap();
        assert_eq!(sw.size(), 6);
        let p = sw.point(3).unwrap();
        assert_eq!(p.problem.alpha, 0.2);
        assert_eq!(p.numerics.n, 100);
        assert!(p.sweep.is_none());
    }

    #[test]
    fn sweep_cap_enforced() {
        let text = MINIMAL.replace(
            "}}",
            r#"},"sweep":{"axes":[{"path":"problem.alpha","values":[0.1,0.2,0.3]}],"cap":2}}"#,
        );
        assert!(matches!(parse_config(&text), Err(Error::Validation { .. })));
    }
}
