//! Parameter sweeps: points run concurrently, each writing its own file
//! under `sweep_points/`; `sweep.csv` is merged serially in point order.

use std::fs;

use impctl_core::config::{sweep_from, RunConfig};
use impctl_core::constants::theoretical_constants;
use impctl_core::semigroup::{spectral_decomposition, Propagator};
use impctl_core::TheoryConstants;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::ArtifactDir;
use crate::commands::run_synthesis;
use crate::error::{CliError, CliResult};

/// Scalar outputs a sweep can request.
pub const SWEEP_OUTPUTS: &[&str] = &[
    "lambda1",
    "l",
    "rho",
    "C",
    "beta",
    "log10K",
    "decay",
    "log10K_used",
    "norm_yT",
    "norm_f",
    "certified",
];

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    index: usize,
    config_hash: String,
    coordinates: Vec<f64>,
    /// `null` marks an output that could not be computed at this point.
    values: Vec<Option<f64>>,
}

#[derive(Default)]
struct Lazy {
    theory: Option<Option<TheoryConstants>>,
    synthesis: Option<Option<(f64, f64, f64, bool)>>,
}

fn evaluate(cfg: &RunConfig, outputs: &[String]) -> Vec<Option<f64>> {
    let mut cache = Lazy::default();
    let op = cfg.operator().ok();
    outputs
        .iter()
        .map(|name| {
            let op = op.as_ref()?;
            match name.as_str() {
                "lambda1" => spectral_decomposition(op).ok().map(|sd| sd.eigenvalues[0]),
                "decay" => {
                    let u0 = cfg.evolve.initial.realize(op, cfg.base_seed()).ok()?;
                    let prop = Propagator::new(op, cfg.stepping()).ok()?;
                    let ut = prop.advance(&u0, cfg.problem.horizon).ok()?;
                    Some(op.grid().norm(&ut) / op.grid().norm(&u0))
                }
                "l" | "rho" | "C" | "beta" | "log10K" => {
                    let tc = (*cache.theory.get_or_insert_with(|| {
                        cfg.problem.validate().ok()?;
                        theoretical_constants(&cfg.problem, &cfg.carleman_params().ok()?).ok()
                    }))?;
                    Some(match name.as_str() {
                        "l" => tc.l as f64,
                        "rho" => tc.rho,
                        "C" => tc.big_c,
                        "beta" => tc.beta,
                        _ => tc.log10_k,
                    })
                }
                _ => {
                    let (log10_k, norm_yt, norm_f, certified) = (*cache.synthesis.get_or_insert_with(|| {
                        run_synthesis(cfg).ok().map(|(r, _)| {
                            (r.log10_k_used, r.norm_y_t, r.norm_f_omega, r.certificates.all_ok())
                        })
                    }))?;
                    Some(match name.as_str() {
                        "log10K_used" => log10_k,
                        "norm_yT" => norm_yt,
                        "norm_f" => norm_f,
                        _ => f64::from(u8::from(certified)),
                    })
                }
            }
            .filter(|v| v.is_finite())
        })
        .collect()
}

pub fn sweep(cfg: &RunConfig, workers: usize, out: &mut ArtifactDir) -> CliResult<bool> {
    let spec = sweep_from(cfg)?;
    if let Some(bad) = spec.outputs.iter().find(|o| !SWEEP_OUTPUTS.contains(&o.as_str())) {
        return Err(CliError::UnknownOutput(bad.clone()));
    }
    let points: Vec<RunConfig> = (0..spec.size()).map(|i| spec.point(i)).collect::<Result<_, _>>()?;
    let dir = out.root().join("sweep_points");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let hash = out.hash().to_string();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        points.par_iter().enumerate().try_for_each(|(i, point)| -> CliResult<()> {
            let record = PointRecord {
                index: i,
                config_hash: hash.clone(),
                coordinates: spec.coordinates(i),
                values: evaluate(point, &spec.outputs),
            };
            let path = dir.join(format!("point_{i:05}.json"));
            let text = serde_json::to_string_pretty(&record).expect("record serializes");
            fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
        })
    })?;

    let mut rows = Vec::with_capacity(points.len());
    let mut passed = true;
    for i in 0..points.len() {
        let path = dir.join(format!("point_{i:05}.json"));
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let record: PointRecord = serde_json::from_str(&text)
            .map_err(|e| CliError::io(&path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        let mut row = record.coordinates;
        for (name, v) in spec.outputs.iter().zip(&record.values) {
            passed &= v.is_some() && (name != "certified" || *v == Some(1.0));
            row.push(v.unwrap_or(f64::NAN));
        }
        rows.push(row);
    }
    let mut header: Vec<&str> = spec.axes.iter().map(|a| a.column()).collect();
    header.extend(spec.outputs.iter().map(String::as_str));
    out.csv("sweep.csv", &header, rows)?;
    Ok(passed)
}
