//! Matrix completion from a few fully observed columns plus uniformly
//! sampled entries in every other column.
//!
//! The column space of the unknown matrix is estimated from the rescaled
//! column sample `A` (its top left singular vectors `U`). Every partially
//! observed column is then the vector in `span(U)` that best fits its
//! observed entries:
//!
//! ```text
//! z* = (U_O^T U_O)^{-1} U_O^T m_O,    m_hat = U z*
//! ```
//!
//! where `U_O` stacks the rows of `U` indexed by the observed multiset `O`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;
use crate::observation::{ObservationSet, PartialColumn};
use crate::sampling::{column_scale, ColumnSamplingDistribution};

/// Default relative cut-off for the numerical rank of `A`.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-9;

/// A restricted Gram matrix whose smallest eigenvalue falls below this
/// fraction of its largest is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Suggested Tikhonov fallback for a column observed through `s` of `m` rows.
pub fn suggested_regularization(s: usize, m: usize) -> f64 {
    1e-10 * s as f64 / m as f64
}

/// Orthonormal basis of the estimated column space.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpaceBasis {
    basis: DMatrix<f64>,
    singular_values: DVector<f64>,
}

impl ColumnSpaceBasis {
    /// Wraps an `m x r` matrix with orthonormal columns.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::dims(format!(
                "basis must be m x r with 1 <= r <= m, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if dev > 1e-8 {
            return Err(Error::config(format!(
                "basis columns are not orthonormal (max deviation {dev:.2e})"
            )));
        }
        let r = basis.ncols();
        Ok(Self {
            basis,
            singular_values: DVector::from_element(r, 1.0),
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `r_hat`, the number of basis vectors.
    pub fn effective_rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.basis.nrows()
    }

    /// All singular values of the sample the basis was extracted from.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// `U U^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Top-`r_hat` left singular vectors of `a`, with
/// `r_hat = min(r, #{k : sigma_k > rank_tolerance * sigma_1})`.
pub fn column_space(a: &DenseMatrix, r: usize, rank_tolerance: f64) -> Result<ColumnSpaceBasis> {
    if r == 0 {
        return Err(Error::config("target rank must be at least 1"));
    }
    let svd = linalg::thin_svd(a.as_matrix())?;
    let sigma = svd.singular_values;
    if sigma.max() == 0.0 {
        return Err(Error::degenerate(
            "sampled columns are identically zero; no column space",
        ));
    }
    let r_hat = r.min(linalg::numerical_rank(&sigma, rank_tolerance));
    Ok(ColumnSpaceBasis {
        basis: svd.u.columns(0, r_hat).into_owned(),
        singular_values: sigma,
    })
}

/// One partially observed column, recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRecovery {
    pub values: DVector<f64>,
    /// Smallest eigenvalue of `U_O^T U_O` before regularization.
    pub min_eigenvalue: f64,
}

/// Solves the restricted least-squares problem for one column.
///
/// Returns `U (U_O^T U_O + regularization I)^{-1} U_O^T m_O`. Rows in
/// `rows` may repeat; each occurrence contributes one equation.
pub fn recover_column(
    basis: &ColumnSpaceBasis,
    rows: &[usize],
    values: &[f64],
    regularization: f64,
) -> Result<ColumnRecovery> {
    if rows.is_empty() {
        return Err(Error::config("a partial column needs at least one observed row"));
    }
    if rows.len() != values.len() {
        return Err(Error::dims(format!(
            "{} observed rows but {} values",
            rows.len(),
            values.len()
        )));
    }
    if !(regularization >= 0.0 && regularization.is_finite()) {
        return Err(Error::config(format!(
            "regularization must be finite and non-negative, got {regularization}"
        )));
    }
    let u = basis.basis();
    if let Some(&bad) = rows.iter().find(|&&i| i >= u.nrows()) {
        return Err(Error::dims(format!(
            "observed row {bad} out of range 0..{}",
            u.nrows()
        )));
    }

    let u_obs = u.select_rows(rows);
    let rhs = u_obs.tr_mul(&DVector::from_column_slice(values));
    let gram = u_obs.tr_mul(&u_obs);

    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let min_eig = eig.min();
    let max_eig = eig.max();
    let singular = max_eig <= 0.0 || min_eig <= SINGULAR_RCOND * max_eig;
    if singular && regularization == 0.0 {
        return Err(Error::SingularSystem {
            column: None,
            min_eigenvalue: min_eig,
        });
    }

    let k = gram.nrows();
    let system = gram + DMatrix::identity(k, k) * regularization;
    let chol = system.cholesky().ok_or(Error::SingularSystem {
        column: None,
        min_eigenvalue: min_eig,
    })?;
    let z = chol.solve(&rhs);
    Ok(ColumnRecovery {
        values: u * z,
        min_eigenvalue: min_eig,
    })
}

/// Parameters of one completion run.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionConfig {
    pub target_rank: usize,
    pub num_full_columns: usize,
    pub entries_per_column: usize,
    pub distribution: ColumnSamplingDistribution,
    pub rng_seed: u64,
    pub rank_tolerance: f64,
    /// Tikhonov term added to every per-column system (default 0).
    pub regularization: f64,
    /// When set, a column whose system is singular under `regularization`
    /// is re-solved with this value instead of failing the run.
    pub singular_fallback: Option<f64>,
}

impl CompletionConfig {
    /// Uniform column sampling over `n` columns, no regularization.
    pub fn uniform(n: usize, r: usize, d: usize, s: usize, seed: u64) -> Self {
        Self {
            target_rank: r,
            num_full_columns: d,
            entries_per_column: s,
            distribution: ColumnSamplingDistribution::uniform(n),
            rng_seed: seed,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            regularization: 0.0,
            singular_fallback: None,
        }
    }

    pub fn with_fallback(mut self, regularization: f64) -> Self {
        self.singular_fallback = Some(regularization);
        self
    }

    /// Checks the configuration against an `m x n` matrix.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let r = self.target_rank;
        if r == 0 || r > m.min(n) {
            return Err(Error::config(format!(
                "target rank r = {r} must satisfy 1 <= r <= min(m, n) = {}",
                m.min(n)
            )));
        }
        if self.num_full_columns == 0 || self.num_full_columns > n {
            return Err(Error::config(format!(
                "number of full columns d = {} must satisfy 1 <= d <= n = {n}",
                self.num_full_columns
            )));
        }
        if self.entries_per_column == 0 {
            return Err(Error::config("entries per column s must be at least 1"));
        }
        if self.entries_per_column > m {
            log::warn!(
                "s = {} exceeds m = {m}; rows are sampled with replacement",
                self.entries_per_column
            );
        }
        if self.distribution.len() != n {
            return Err(Error::config(format!(
                "column distribution has {} entries, matrix has {n} columns",
                self.distribution.len()
            )));
        }
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0) {
            return Err(Error::config(format!(
                "rank tolerance must lie in (0, 1), got {}",
                self.rank_tolerance
            )));
        }
        for (name, v) in [
            ("regularization", Some(self.regularization)),
            ("singular fallback", self.singular_fallback),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::config(format!(
                        "{name} must be finite and non-negative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Output of [`complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionReport {
    pub recovered: DenseMatrix,
    pub effective_rank: usize,
    /// `(column, lambda_min(U_O^T U_O))` for every partial column, by column.
    pub per_column_min_eigenvalue: Vec<(usize, f64)>,
    /// Partial columns that needed the singular-system fallback.
    pub regularized_columns: Vec<usize>,
    pub relative_frobenius_error: Option<f64>,
}

impl CompletionReport {
    /// Records `||M - M_hat||_F / ||M||_F` against the known matrix.
    pub fn with_ground_truth(mut self, truth: &DenseMatrix) -> Result<Self> {
        self.relative_frobenius_error = Some(truth.relative_error(&self.recovered)?);
        Ok(self)
    }

    /// Smallest restricted-Gram eigenvalue over all partial columns.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.per_column_min_eigenvalue
            .iter()
            .map(|&(_, e)| e)
            .reduce(f64::min)
    }
}

/// Recovers the whole matrix from an observation set.
///
/// Fully observed columns are copied verbatim; all randomness lives in the
/// observation set, so the result is a deterministic function of its inputs.
/// Partial columns are solved concurrently against the shared basis.
pub fn complete(obs: &ObservationSet, config: &CompletionConfig) -> Result<CompletionReport> {
    let (m, n) = obs.shape();
    config.validate(m, n)?;
    if obs.d() != config.num_full_columns {
        return Err(Error::config(format!(
            "observation set has d = {} full-column draws, config expects {}",
            obs.d(),
            config.num_full_columns
        )));
    }
    if obs.s() != config.entries_per_column {
        return Err(Error::config(format!(
            "observation set has s = {}, config expects {}",
            obs.s(),
            config.entries_per_column
        )));
    }

    let a = scaled_sample(obs, &config.distribution)?;
    let basis = column_space(&a, config.target_rank, config.rank_tolerance)?;

    let solved: Vec<(ColumnRecovery, bool)> = obs
        .partial_columns()
        .par_iter()
        .map(|p| solve_partial(&basis, p, config))
        .collect::<Result<_>>()?;

    let mut out = DMatrix::zeros(m, n);
    for (&i, col) in obs.full_columns() {
        out.set_column(i, col);
    }
    let mut per_column = Vec::with_capacity(solved.len());
    let mut regularized = Vec::new();
    for (p, (rec, fell_back)) in obs.partial_columns().iter().zip(solved) {
        out.set_column(p.index, &rec.values);
        per_column.push((p.index, rec.min_eigenvalue));
        if fell_back {
            regularized.push(p.index);
        }
    }
    if !regularized.is_empty() {
        log::warn!(
            "{} column(s) were solved with the singular-system fallback",
            regularized.len()
        );
    }

    Ok(CompletionReport {
        recovered: DenseMatrix::new(out)?,
        effective_rank: basis.effective_rank(),
        per_column_min_eigenvalue: per_column,
        regularized_columns: regularized,
        relative_frobenius_error: None,
    })
}

fn solve_partial(
    basis: &ColumnSpaceBasis,
    p: &PartialColumn,
    config: &CompletionConfig,
) -> Result<(ColumnRecovery, bool)> {
    let tag = |e: Error| match e {
        Error::SingularSystem { min_eigenvalue, .. } => Error::SingularSystem {
            column: Some(p.index),
            min_eigenvalue,
        },
        other => other,
    };
    match (
        recover_column(basis, &p.rows, &p.values, config.regularization),
        config.singular_fallback,
    ) {
        (Ok(rec), _) => Ok((rec, false)),
        (Err(Error::SingularSystem { .. }), Some(lambda)) => {
            recover_column(basis, &p.rows, &p.values, lambda)
                .map(|rec| (rec, true))
                .map_err(tag)
        }
        (Err(e), _) => Err(tag(e)),
    }
}

/// The scaled sample `A` rebuilt from the observed draws; duplicates are
/// kept so that `E[A A^T] = M M^T`.
pub fn scaled_sample(
    obs: &ObservationSet,
    dist: &ColumnSamplingDistribution,
) -> Result<DenseMatrix> {
    if dist.len() != obs.ncols() {
        return Err(Error::config(format!(
            "column distribution has {} entries, observation set has {} columns",
            dist.len(),
            obs.ncols()
        )));
    }
    let d = obs.d();
    let mut a = DMatrix::zeros(obs.nrows(), d);
    for (j, &i) in obs.draws().iter().enumerate() {
        let col = &obs.full_columns()[&i] * column_scale(d, dist.prob(i));
        a.set_column(j, &col);
    }
    DenseMatrix::new(a)
}

/// Best rank-`r` approximation of `m` in Frobenius norm (truncated SVD).
pub fn best_rank_r(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::config(format!(
            "rank r = {r} must satisfy 1 <= r <= min(m, n) = {}",
            rows.min(cols)
        )));
    }
    let svd = linalg::thin_svd(m.as_matrix())?;
    let mut ur = svd.u.columns(0, r).into_owned();
    for k in 0..r {
        ur.column_mut(k).scale_mut(svd.singular_values[k]);
    }
    DenseMatrix::new(ur * svd.v.columns(0, r).transpose())
}

/// `||M - M_r||_F^2`, the energy outside the top `r` singular directions.
pub fn rank_r_residual_sq(m: &DenseMatrix, r: usize) -> Result<f64> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::config(format!(
            "rank r = {r} must satisfy 1 <= r <= min(m, n) = {}",
            rows.min(cols)
        )));
    }
    let sv = linalg::singular_values(m.as_matrix())?;
    Ok(sv.iter().skip(r).map(|s| s * s).sum())
}
