//! Coherence measures of singular subspaces, column norms and vectors, and
//! the sampling thresholds that are stated in terms of them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::completion::{ColumnSpaceBasis, DEFAULT_RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;

/// `mu(r)` together with its left and right row-concentration terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCoherence {
    pub value: f64,
    /// `max_i (m/r) ||U_(i)||^2` over the top-r left singular vectors.
    pub left: f64,
    /// `max_j (n/r) ||V_(j)||^2` over the top-r right singular vectors.
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProfile {
    pub mu_r: f64,
    pub mu_r_left: f64,
    pub mu_r_right: f64,
    /// Coherence of an estimated basis, when one was supplied.
    pub mu_hat: Option<f64>,
    pub mu_m: f64,
    /// `mu(x)` for every nonzero column, keyed by column index.
    pub per_vector: Option<BTreeMap<usize, f64>>,
}

/// Largest scaled squared row norm of the first `r` columns of `basis`.
fn row_concentration(basis: &DMatrix<f64>, r: usize) -> f64 {
    let rows = basis.nrows() as f64;
    let top = basis.columns(0, r);
    let max_sq = top
        .row_iter()
        .map(|row| row.norm_squared())
        .fold(0.0, f64::max);
    rows / r as f64 * max_sq
}

/// Coherence of the top-`r` singular subspaces of `m`.
///
/// Under repeated singular values the singular vectors are not unique and
/// the value depends on the basis the SVD returns.
pub fn mu_r(m: &DenseMatrix, r: usize) -> Result<SubspaceCoherence> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::config(format!(
            "rank r = {r} must satisfy 1 <= r <= min(m, n) = {}",
            rows.min(cols)
        )));
    }
    let svd = linalg::thin_svd(m.as_matrix())?;
    let rank = linalg::numerical_rank(&svd.singular_values, DEFAULT_RANK_TOLERANCE);
    if r > rank {
        log::warn!("mu(r) requested for r = {r} but the numerical rank is {rank}");
    }
    let left = row_concentration(&svd.u, r);
    let right = row_concentration(&svd.v, r);
    Ok(SubspaceCoherence {
        value: left.max(right),
        left,
        right,
    })
}

/// `max_i (m / r_hat) ||U_(i)||^2` of an orthonormal basis.
pub fn mu_hat(basis: &ColumnSpaceBasis) -> f64 {
    row_concentration(basis.basis(), basis.effective_rank())
}

/// Column-norm coherence `n max_i ||m_i||^2 / ||M||_F^2`.
pub fn mu_matrix(m: &DenseMatrix) -> Result<f64> {
    let total = m.frobenius_norm_sq();
    if total == 0.0 {
        return Err(Error::degenerate("column-norm coherence of a zero matrix"));
    }
    let max_col = m
        .as_matrix()
        .column_iter()
        .map(|c| c.norm_squared())
        .fold(0.0, f64::max);
    Ok(m.ncols() as f64 * max_col / total)
}

/// Vector coherence `m ||x||_inf^2 / ||x||_2^2`.
pub fn mu_vector(x: &DVector<f64>) -> Result<f64> {
    let norm_sq = x.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::degenerate("coherence of a zero vector"));
    }
    let inf = x.amax();
    Ok(x.len() as f64 * inf * inf / norm_sq)
}

pub fn coherence_profile(
    m: &DenseMatrix,
    r: usize,
    basis: Option<&ColumnSpaceBasis>,
    per_vector: bool,
) -> Result<CoherenceProfile> {
    let sub = mu_r(m, r)?;
    let per_vector = per_vector.then(|| {
        m.as_matrix()
            .column_iter()
            .enumerate()
            .filter_map(|(j, c)| mu_vector(&c.into_owned()).ok().map(|mu| (j, mu)))
            .collect()
    });
    Ok(CoherenceProfile {
        mu_r: sub.value,
        mu_r_left: sub.left,
        mu_r_right: sub.right,
        mu_hat: basis.map(mu_hat),
        mu_m: mu_matrix(m)?,
        per_vector,
    })
}

/// Minimal sample sizes for exact recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Number of fully observed column draws.
    pub d_min: usize,
    /// Number of observed entries per remaining column.
    pub s_min: usize,
}

/// Sampling thresholds for exact recovery of a rank-`r` matrix:
///
/// ```text
/// d >= 7 mu(r) r ln(2r/delta) / (n p_min)      s >= 7 mu(r) r ln(2rn/delta)
/// ```
///
/// With `p_min = None` the column distribution is taken to be uniform
/// (`n p_min = 1`). Both values are rounded up and floored at 1.
pub fn theorem_thresholds(
    m: usize,
    n: usize,
    r: usize,
    mu_r_value: f64,
    delta: f64,
    p_min: Option<f64>,
) -> Result<Thresholds> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("delta must lie in (0, 1), got {delta}")));
    }
    if r == 0 || r > m.min(n) {
        return Err(Error::config(format!(
            "rank r = {r} must satisfy 1 <= r <= min(m, n) = {}",
            m.min(n)
        )));
    }
    if !(mu_r_value.is_finite() && mu_r_value > 0.0) {
        return Err(Error::config(format!("mu(r) must be positive, got {mu_r_value}")));
    }
    let n_pmin = match p_min {
        None => 1.0,
        Some(p) if p > 0.0 && p <= 1.0 => n as f64 * p,
        Some(p) => return Err(Error::config(format!("p_min must lie in (0, 1], got {p}"))),
    };
    let rf = r as f64;
    let base = 7.0 * mu_r_value * rf;
    let d = base * (2.0 * rf / delta).ln() / n_pmin;
    let s = base * (2.0 * rf * n as f64 / delta).ln();
    let ceil_at_least_one = |x: f64| x.ceil().max(1.0) as usize;
    Ok(Thresholds {
        d_min: ceil_at_least_one(d),
        s_min: ceil_at_least_one(s),
    })
}
