//! Reproducible ensembles of initial data: i.i.d. Gaussian nodal values,
//! leading eigenfields, and indicator profiles supported outside ω.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{Field, Grid};
use crate::semigroup::SpectralDecomposition;

/// Unit-normal nodal values; the stream is fixed by `seed`.
pub fn gaussian_field(grid: &Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..grid.n()).map(|_| StandardNormal.sample(&mut rng)).collect();
    Field::new(values).expect("normal samples are finite")
}

/// Indicators of `count` equal sub-intervals of `[kappa, 1)`. Empty
/// sub-intervals fall back to the first node at or beyond `kappa`; returns
/// nothing when no such node exists.
pub fn outside_profiles(grid: &Grid, kappa: f64, count: usize) -> Vec<Field> {
    let nodes = grid.nodes();
    let Some(first) = nodes.iter().position(|&x| x >= kappa) else {
        return Vec::new();
    };
    let width = (1.0 - kappa) / count as f64;
    (0..count)
        .map(|j| {
            let a = kappa + j as f64 * width;
            let b = a + width;
            let mut v: Vec<f64> = nodes
                .iter()
                .map(|&x| if x >= kappa && x >= a && x < b { 1.0 } else { 0.0 })
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                v[first] = 1.0;
            }
            Field::new(v).expect("indicator is finite")
        })
        .collect()
}

/// Composition of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub gaussian: usize,
    pub eigen: usize,
    pub outside: usize,
}

impl Default for EnsembleSpec {
    /// 85 Gaussian + 10 eigenfields + 5 outside-ω indicators.
    fn default() -> Self {
        Self {
            gaussian: 85,
            eigen: 10,
            outside: 5,
        }
    }
}

impl EnsembleSpec {
    pub fn total(&self) -> usize {
        self.gaussian + self.eigen + self.outside
    }
}

/// Gaussian members use seeds `base_seed + index`; eigenfields and
/// indicators follow in that order.
pub fn build_ensemble(
    grid: &Grid,
    sd: &SpectralDecomposition,
    kappa: f64,
    base_seed: u64,
    spec: EnsembleSpec,
) -> Vec<Field> {
    let mut out: Vec<Field> = (0..spec.gaussian)
        .map(|i| gaussian_field(grid, base_seed.wrapping_add(i as u64)))
        .collect();
    out.extend(sd.eigenfields.iter().take(spec.eigen).cloned());
    out.extend(outside_profiles(grid, kappa, spec.outside));
    out
}
