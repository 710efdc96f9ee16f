//! Synthetic instances: Gaussian-factor low-rank matrices, the same plus
//! Gaussian noise, and observation sets drawn from a known matrix.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::completion::CompletionConfig;
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, MatrixOracle};
use crate::observation::{ObservationMode, ObservationSet, PartialColumn};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    /// Rank of the clean part.
    pub r: usize,
    /// Noise standard deviation; 0 for an exactly low-rank matrix.
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn lowrank(m: usize, n: usize, r: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            r,
            sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::config(format!(
                "dimensions must be positive, got {}x{}",
                self.m, self.n
            )));
        }
        if self.r == 0 || self.r > self.m.min(self.n) {
            return Err(Error::config(format!(
                "rank {} must satisfy 1 <= r <= min(m, n) = {}",
                self.r,
                self.m.min(self.n)
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut rng::Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    // Filled row by row so the draw order is independent of storage layout.
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Clean factor product followed by the generator state, so that the
/// noisy generator reproduces the same clean part for the same seed.
fn factor_product(spec: &SyntheticSpec) -> (DMatrix<f64>, rng::Rng) {
    let mut rng = rng::stream(spec.seed, rng::STREAM_MATRIX);
    let left = gaussian_matrix(&mut rng, spec.m, spec.r, 1.0);
    let right = gaussian_matrix(&mut rng, spec.r, spec.n, 1.0);
    (left * right, rng)
}

/// `M = M_L M_R` with i.i.d. standard normal factors of inner dimension `r`.
pub fn gen_lowrank(spec: &SyntheticSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    if spec.sigma != 0.0 {
        return Err(Error::config("gen_lowrank expects sigma = 0; use gen_noisy"));
    }
    DenseMatrix::new(factor_product(spec).0)
}

/// A noisy instance and its clean low-rank part.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyInstance {
    /// `C + R`.
    pub observed: DenseMatrix,
    /// `C`.
    pub clean: DenseMatrix,
}

/// `M = C + R` where `C` is a Gaussian-factor rank-`r` matrix and `R` has
/// i.i.d. `N(0, sigma^2)` entries.
pub fn gen_noisy(spec: &SyntheticSpec) -> Result<NoisyInstance> {
    spec.validate()?;
    if spec.sigma <= 0.0 {
        return Err(Error::config("gen_noisy expects sigma > 0; use gen_lowrank"));
    }
    let (clean, mut rng) = factor_product(spec);
    let noise = gaussian_matrix(&mut rng, spec.m, spec.n, spec.sigma);
    Ok(NoisyInstance {
        observed: DenseMatrix::new(&clean + noise)?,
        clean: DenseMatrix::new(clean)?,
    })
}

/// Draws an observation set from a known matrix.
///
/// `config.num_full_columns` columns are drawn with replacement from
/// `config.distribution`; every column never drawn receives
/// `config.entries_per_column` row samples, drawn uniformly with
/// replacement. In [`ObservationMode::Aligned`] one row multiset is shared
/// by all partial columns; in [`ObservationMode::Independent`] each column
/// draws its own.
pub fn gen_observation<O: MatrixOracle + ?Sized>(
    source: &O,
    config: &CompletionConfig,
    mode: ObservationMode,
) -> Result<ObservationSet> {
    let (m, n) = source.shape();
    config.validate(m, n)?;
    let s = config.entries_per_column;
    let draws = config
        .distribution
        .draw(config.num_full_columns, config.rng_seed);
    let full: BTreeMap<_, _> = draws.iter().map(|&i| (i, source.column(i))).collect();

    let mut rng = rng::stream(config.rng_seed, rng::STREAM_ENTRIES);
    let draw_rows = |rng: &mut rng::Rng| -> Vec<usize> {
        (0..s).map(|_| rng.random_range(0..m)).collect()
    };
    let shared = match mode {
        ObservationMode::Aligned => Some(draw_rows(&mut rng)),
        ObservationMode::Independent => None,
    };
    let partial = (0..n)
        .filter(|j| !full.contains_key(j))
        .map(|index| {
            let rows = shared.clone().unwrap_or_else(|| draw_rows(&mut rng));
            let values = rows.iter().map(|&i| source.entry(i, index)).collect();
            PartialColumn {
                index,
                rows,
                values,
            }
        })
        .collect();

    ObservationSet::new(m, n, s, mode, draws, full, partial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_minors_vanish() {
        let m = gen_lowrank(&SyntheticSpec::lowrank(3, 3, 1, 5)).unwrap();
        let a = m.as_matrix();
        for (r0, r1) in [(0, 1), (0, 2), (1, 2)] {
            for (c0, c1) in [(0, 1), (0, 2), (1, 2)] {
                let minor = a[(r0, c0)] * a[(r1, c1)] - a[(r0, c1)] * a[(r1, c0)];
                assert!(minor.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_rank_product() {
        let m = gen_lowrank(&SyntheticSpec::lowrank(6, 9, 6, 1)).unwrap();
        assert_eq!(m.numerical_rank(1e-9).unwrap(), 6);
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let spec = SyntheticSpec::lowrank(8, 7, 2, 3);
        assert_eq!(gen_lowrank(&spec).unwrap(), gen_lowrank(&spec).unwrap());
        let other = SyntheticSpec { seed: 4, ..spec };
        assert_ne!(gen_lowrank(&spec).unwrap(), gen_lowrank(&other).unwrap());
    }

    #[test]
    fn noisy_shares_clean_part_with_lowrank() {
        let spec = SyntheticSpec {
            m: 10,
            n: 12,
            r: 3,
            sigma: 1e-12,
            seed: 9,
        };
        let noisy = gen_noisy(&spec).unwrap();
        let clean = gen_lowrank(&SyntheticSpec { sigma: 0.0, ..spec }).unwrap();
        assert_eq!(noisy.clean, clean);
        assert!(noisy.observed.distance(&noisy.clean).unwrap() <= 1e-9 * (120f64).sqrt());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(gen_lowrank(&SyntheticSpec::lowrank(3, 3, 4, 0)).is_err());
        assert!(gen_noisy(&SyntheticSpec::lowrank(3, 3, 1, 0)).is_err());
        let neg = SyntheticSpec {
            sigma: -1.0,
            ..SyntheticSpec::lowrank(3, 3, 1, 0)
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn aligned_mode_shares_rows() {
        let m = gen_lowrank(&SyntheticSpec::lowrank(20, 30, 2, 1)).unwrap();
        let cfg = CompletionConfig::uniform(30, 2, 5, 6, 77);
        let obs = gen_observation(&m, &cfg, ObservationMode::Aligned).unwrap();
        let first = &obs.partial_columns()[0].rows;
        assert!(obs.partial_columns().iter().all(|p| &p.rows == first));
        for p in obs.partial_columns() {
            for (&i, &v) in p.rows.iter().zip(&p.values) {
                assert_eq!(v, m.get(i, p.index));
            }
        }
        for (&i, col) in obs.full_columns() {
            assert_eq!(col, &m.column(i));
        }
    }
}
