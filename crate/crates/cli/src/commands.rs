//! One function per subcommand. Each writes its artifacts and reports
//! whether every check it performs passed.

use impctl_core::config::RunConfig;
use impctl_core::constants::{complement_condition, theoretical_constants};
use impctl_core::control::{synthesize, SynthesisReport};
use impctl_core::ensemble::build_ensemble;
use impctl_core::observability::{
    fit_from_norms, local_norm_decay, measure_samples, report_from_norms, split_report_from_norms,
    ObservabilityReport, ObservationConstants, SampleNorms, SplitConstants,
};
use impctl_core::semigroup::{spectral_decomposition, Propagator};
use impctl_core::TheoryConstants;
use serde::Serialize;

use crate::artifacts::ArtifactDir;
use crate::error::CliResult;

/// Contraction tolerance on consecutive stored norms.
const CONTRACTION_TOL: f64 = 1e-12;
/// Log-space tolerance for the fitted observation and split estimates.
const FIT_TOL: f64 = 1e-8;

pub fn spectrum(cfg: &RunConfig, out: &mut ArtifactDir) -> CliResult<bool> {
    let op = cfg.operator()?;
    let sd = spectral_decomposition(&op)?;
    out.csv(
        "spectrum.csv",
        &["index", "eigenvalue"],
        sd.eigenvalues.iter().enumerate().map(|(i, l)| vec![i as f64, *l]),
    )?;
    Ok(sd.eigenvalues.iter().all(|l| *l < 0.0))
}

pub fn evolve(cfg: &RunConfig, out: &mut ArtifactDir) -> CliResult<bool> {
    let op = cfg.operator()?;
    let u0 = cfg.evolve.initial.realize(&op, cfg.base_seed())?;
    let prop = Propagator::new(&op, cfg.stepping())?;
    let traj = prop.trajectory(&u0, (0.0, cfg.problem.horizon), cfg.numerics.store_every)?;
    let grid = op.grid();
    let hash = out.hash().to_string();
    out.stream("trajectory.csv", |w| {
        writeln!(w, "# config_hash={hash}")?;
        traj.write_csv(grid, w)
    })?;
    let norms = traj.norms(grid);
    let mut ok = true;
    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(k, (t, n))| {
            let ratio = if k == 0 || norms[k - 1] == 0.0 { 1.0 } else { n / norms[k - 1] };
            ok &= ratio <= 1.0 + CONTRACTION_TOL;
            vec![*t, *n, ratio]
        })
        .collect();
    out.csv("norms.csv", &["t", "norm", "ratio"], rows)?;
    Ok(ok)
}

#[derive(Serialize)]
struct SplitSummary {
    eps_list: Vec<f64>,
    max_violation: f64,
}

#[derive(Serialize)]
struct LocalDecaySummary {
    samples: usize,
    violations: usize,
    max_ratio: f64,
}

#[derive(Serialize)]
struct ObserveSummary<'a> {
    time_gap: f64,
    train_seed: u64,
    holdout_seed: u64,
    /// Theoretical constants on the training ensemble.
    theoretical: &'a ObservabilityReport,
    theoretical_holdout_max_violation: f64,
    fitted_constants: ObservationConstants,
    fitted_train_max_violation: f64,
    /// Fitted constants on the held-out ensemble.
    fitted_holdout: &'a ObservabilityReport,
    split_fitted_holdout: SplitSummary,
    split_theoretical: SplitSummary,
    local_norm_decay: LocalDecaySummary,
    passed: bool,
}

fn sample_rows(report: &ObservabilityReport) -> Vec<Vec<f64>> {
    report
        .records
        .iter()
        .map(|r| vec![r.sample as f64, r.norms.norm_t, r.norms.norm_t_omega, r.norms.norm0, r.slack])
        .collect()
}

pub fn observe(cfg: &RunConfig, out: &mut ArtifactDir) -> CliResult<bool> {
    cfg.problem.validate()?;
    let op = cfg.operator()?;
    let grid = op.grid();
    let stepping = cfg.stepping();
    let tc = theoretical_constants(&cfg.problem, &cfg.carleman_params()?)?;
    let gap = cfg.observe.time_gap.unwrap_or(cfg.problem.remaining());
    let sd = spectral_decomposition(&op)?;
    let spec = cfg.observe.ensemble();
    let train = build_ensemble(grid, &sd, cfg.problem.kappa, cfg.base_seed(), spec);
    let holdout = build_ensemble(grid, &sd, cfg.problem.kappa, cfg.holdout_seed(), spec);
    let train_norms: Vec<SampleNorms> = measure_samples(&op, &train, &cfg.problem, stepping)?;
    let hold_norms = measure_samples(&op, &holdout, &cfg.problem, stepping)?;

    let theory = ObservationConstants::from(&tc);
    let theoretical = report_from_norms(&train_norms, &theory, gap);
    let theoretical_hold = report_from_norms(&hold_norms, &theory, gap);
    let fitted = fit_from_norms(&train_norms, gap)?;
    let fitted_train = report_from_norms(&train_norms, &fitted, gap);
    let fitted_holdout = report_from_norms(&hold_norms, &fitted, gap);

    let mut eps_list = cfg.observe.eps_list.clone();
    if !eps_list.contains(&cfg.problem.eps) {
        eps_list.push(cfg.problem.eps);
    }
    let split_fit = split_report_from_norms(&hold_norms, &SplitConstants::from(&fitted), &eps_list, gap)?;
    let mut all = train_norms.clone();
    all.extend_from_slice(&hold_norms);
    let split_theory = split_report_from_norms(&all, &SplitConstants::from(&tc), &eps_list, gap)?;
    let decay = local_norm_decay(&op, &train, &cfg.problem, stepping)?;

    let contraction = all.iter().all(|n| n.norm_t <= n.norm0 * (1.0 + CONTRACTION_TOL));
    let passed = contraction
        && theoretical.holds()
        && theoretical_hold.holds()
        && fitted_train.max_violation <= FIT_TOL
        && fitted_holdout.max_violation <= FIT_TOL
        && split_fit.max_violation <= FIT_TOL
        && split_theory.max_violation <= 0.0;

    let summary = ObserveSummary {
        time_gap: gap,
        train_seed: cfg.base_seed(),
        holdout_seed: cfg.holdout_seed(),
        theoretical: &theoretical,
        theoretical_holdout_max_violation: theoretical_hold.max_violation,
        fitted_constants: fitted,
        fitted_train_max_violation: fitted_train.max_violation,
        fitted_holdout: &fitted_holdout,
        split_fitted_holdout: SplitSummary {
            eps_list: eps_list.clone(),
            max_violation: split_fit.max_violation,
        },
        split_theoretical: SplitSummary {
            eps_list,
            max_violation: split_theory.max_violation,
        },
        local_norm_decay: LocalDecaySummary {
            samples: decay.ratios.len(),
            violations: decay.violations,
            max_ratio: decay.max_ratio,
        },
        passed,
    };
    out.json("observe.json", &summary)?;
    let header = ["sample", "normT", "normT_omega", "norm0", "slack"];
    out.csv("observe_samples.csv", &header, sample_rows(&theoretical))?;
    out.csv("observe_fitted_samples.csv", &header, sample_rows(&fitted_holdout))?;
    Ok(passed)
}

#[derive(Serialize)]
struct ConstantsArtifact {
    #[serde(flatten)]
    constants: TheoryConstants,
    alpha: f64,
    kappa: f64,
    s: f64,
    passed: bool,
}

pub fn constants_checks(tc: &TheoryConstants, cfg: &RunConfig) -> bool {
    let (kappa, alpha) = (cfg.problem.kappa, cfg.problem.alpha);
    complement_condition(tc.l, tc.c0, kappa, alpha)
        && (tc.l <= 2 || !complement_condition(tc.l - 1, tc.c0, kappa, alpha))
        && tc.rho > 0.0
        && tc.rho < 1.0
        && tc.beta > 0.0
}

pub fn constants(cfg: &RunConfig, out: &mut ArtifactDir) -> CliResult<bool> {
    cfg.problem.validate()?;
    let tc = theoretical_constants(&cfg.problem, &cfg.carleman_params()?)?;
    let passed = constants_checks(&tc, cfg);
    out.json(
        "constants.json",
        &ConstantsArtifact {
            constants: tc,
            alpha: cfg.problem.alpha,
            kappa: cfg.problem.kappa,
            s: cfg.carleman.s,
            passed,
        },
    )?;
    Ok(passed)
}

/// Runs the configured synthesis; also used by sweeps.
pub fn run_synthesis(cfg: &RunConfig) -> CliResult<(SynthesisReport, Option<f64>)> {
    let op = cfg.operator()?;
    let y0 = cfg.control.initial.realize(&op, cfg.base_seed())?;
    let theory = cfg
        .problem
        .validate()
        .and_then(|_| theoretical_constants(&cfg.problem, &cfg.carleman_params()?));
    let log10_bound = theory.as_ref().ok().map(|tc| tc.log10_k);
    let mode = cfg.control.k.resolve(|| theory.clone().map(|tc| tc.log_k))?;
    let report = synthesize(&op, &y0, &cfg.problem, mode, cfg.stepping(), cfg.numerics.cg_tol)?;
    Ok((report, log10_bound))
}

#[derive(Serialize)]
struct SynthesisArtifact<'a> {
    #[serde(flatten)]
    report: &'a SynthesisReport,
    /// `log10` of the theoretical cost bound `e^{𝒞(1+1/(T-τ))} ε^{-β}`.
    log10_cost_bound: Option<f64>,
    passed: bool,
}

pub fn synthesize_cmd(cfg: &RunConfig, out: &mut ArtifactDir) -> CliResult<bool> {
    let (report, log10_bound) = run_synthesis(cfg)?;
    let passed = report.certificates.all_ok() && report.cg_converged;
    out.csv(
        "control.csv",
        &["node", "f"],
        report.f.iter().enumerate().map(|(i, v)| vec![i as f64, *v]),
    )?;
    out.json(
        "report.json",
        &SynthesisArtifact {
            report: &report,
            log10_cost_bound: log10_bound,
            passed,
        },
    )?;
    Ok(passed)
}
