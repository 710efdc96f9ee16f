//! Nystrom-type (CUR) baseline: uniformly sampled columns and rows glued
//! through the rank-truncated pseudo-inverse of their intersection,
//! `M_hat = C W_r^+ R`.

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{DenseMatrix, MatrixOracle};
use crate::rng;

/// Singular values of `W` below this fraction of the largest are dropped.
pub const PINV_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NystromConfig {
    pub num_columns: usize,
    pub num_rows: usize,
    pub target_rank: usize,
    pub seed: u64,
}

impl NystromConfig {
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let (c, rho, r) = (self.num_columns, self.num_rows, self.target_rank);
        if c == 0 || c > n {
            return Err(Error::config(format!(
                "Nystrom column count {c} must lie in 1..={n}"
            )));
        }
        if rho == 0 || rho > m {
            return Err(Error::config(format!(
                "Nystrom row count {rho} must lie in 1..={m}"
            )));
        }
        if r == 0 || r > c.min(rho) {
            return Err(Error::config(format!(
                "Nystrom rank {r} must satisfy 1 <= r <= min(c, rows) = {}",
                c.min(rho)
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromApprox {
    pub approx: DenseMatrix,
    /// Rank actually kept in the pseudo-inverse of `W`.
    pub effective_rank: usize,
    pub columns: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Samples columns and rows uniformly without replacement and returns
/// `C pinv_r(W) R`.
pub fn nystrom_approx<O: MatrixOracle + ?Sized>(
    source: &O,
    config: &NystromConfig,
) -> Result<NystromApprox> {
    let (m, n) = source.shape();
    config.validate(m, n)?;
    let mut rng = rng::stream(config.seed, rng::STREAM_NYSTROM);
    let columns = index::sample(&mut rng, n, config.num_columns).into_vec();
    let rows = index::sample(&mut rng, m, config.num_rows).into_vec();

    let c_s = DMatrix::from_columns(&columns.iter().map(|&j| source.column(j)).collect::<Vec<_>>());
    let r_s = DMatrix::from_rows(&rows.iter().map(|&i| source.row(i)).collect::<Vec<_>>());
    let w = c_s.select_rows(&rows);

    let svd = linalg::thin_svd(&w)?;
    let kept = config
        .target_rank
        .min(linalg::numerical_rank(&svd.singular_values, PINV_RCOND));
    if kept < config.target_rank {
        log::warn!(
            "Nystrom intersection has numerical rank {kept} < target rank {}; truncating",
            config.target_rank
        );
    }
    if kept == 0 {
        return Ok(NystromApprox {
            approx: DenseMatrix::zeros(m, n),
            effective_rank: 0,
            columns,
            rows,
        });
    }

    // pinv_r(W) R = V_k diag(1/sigma) U_k^T R
    let mut core = svd.u.columns(0, kept).tr_mul(&r_s);
    for k in 0..kept {
        core.row_mut(k).scale_mut(1.0 / svd.singular_values[k]);
    }
    let approx = c_s * (svd.v.columns(0, kept) * core);
    Ok(NystromApprox {
        approx: DenseMatrix::new(approx)?,
        effective_rank: kept,
        columns,
        rows,
    })
}

/// A Nystrom configuration with the same budget as `d` full columns plus
/// `s` entries per remaining column, under the convention
/// `alpha r + alpha r^2 = d + s`, `c = ceil(alpha r)`, `rows = ceil(alpha r^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetMatch {
    pub config: NystromConfig,
    pub alpha: f64,
    /// True when `c` or `rows` had to be clamped to the matrix shape, or
    /// the rank lowered to fit them.
    pub clamped: bool,
    /// Distinct entries Nystrom observes: `c m + rows n - c rows`.
    pub nystrom_entries: usize,
    /// Entries the completion method observes: `d m + (n - d) s`.
    pub completion_entries: usize,
}

pub fn match_budget(d: usize, s: usize, n: usize, m: usize, r: usize) -> Result<BudgetMatch> {
    if d == 0 || s == 0 || n == 0 || m == 0 || r == 0 {
        return Err(Error::config(format!(
            "budget inputs must be positive (d={d}, s={s}, n={n}, m={m}, r={r})"
        )));
    }
    let total = d + s;
    let denom = r + r * r;
    let alpha = total as f64 / denom as f64;
    let c_raw = (total * r).div_ceil(denom);
    let rho_raw = (total * r * r).div_ceil(denom);
    let c = c_raw.min(n);
    let rho = rho_raw.min(m);
    let rank = r.min(c).min(rho);
    let clamped = c != c_raw || rho != rho_raw || rank != r;
    if c != c_raw || rho != rho_raw {
        log::warn!(
            "budget mismatch: Nystrom wants {c_raw} columns and {rho_raw} rows, clamped to {c}x{rho}"
        );
    }
    if rank != r {
        log::warn!("Nystrom budget too small for rank {r}; using rank {rank}");
    }
    Ok(BudgetMatch {
        config: NystromConfig {
            num_columns: c,
            num_rows: rho,
            target_rank: rank,
            seed: 0,
        },
        alpha,
        clamped,
        nystrom_entries: c * m + rho * n - c * rho,
        completion_entries: d * m + n.saturating_sub(d) * s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_arithmetic() {
        let r = 4;
        let b = match_budget(r + r * r, r + r * r, 1000, 1000, r).unwrap();
        assert_eq!(b.alpha, 2.0);
        assert_eq!(b.config.num_columns, 2 * r);
        assert_eq!(b.config.num_rows, 2 * r * r);
        assert!(!b.clamped);
        assert_eq!(b.nystrom_entries, 8 * 1000 + 32 * 1000 - 8 * 32);
        assert_eq!(b.completion_entries, 20 * 1000 + 980 * 20);
    }

    #[test]
    fn budget_clamps_rows() {
        let b = match_budget(400, 400, 1000, 100, 10).unwrap();
        assert_eq!(b.config.num_rows, 100);
        assert!(b.clamped);
    }

    #[test]
    fn zero_intersection_gives_zero_output() {
        let mut m = DMatrix::zeros(6, 6);
        m[(0, 0)] = 1.0;
        let m = DenseMatrix::new(m).unwrap();
        let cfg = NystromConfig {
            num_columns: 1,
            num_rows: 1,
            target_rank: 1,
            seed: 0,
        };
        // Search for a seed whose sample misses entry (0, 0).
        let out = (0..100)
            .map(|seed| nystrom_approx(&m, &cfg.with_seed(seed)).unwrap())
            .find(|a| a.columns != vec![0] || a.rows != vec![0])
            .unwrap();
        assert_eq!(out.effective_rank, 0);
        assert_eq!(out.approx, DenseMatrix::zeros(6, 6));
    }

    #[test]
    fn config_validation() {
        let cfg = NystromConfig {
            num_columns: 3,
            num_rows: 2,
            target_rank: 3,
            seed: 0,
        };
        assert!(cfg.validate(10, 10).is_err());
        assert!(NystromConfig { target_rank: 2, ..cfg }.validate(10, 10).is_ok());
        assert!(NystromConfig { num_columns: 11, ..cfg }.validate(10, 10).is_err());
    }
}
