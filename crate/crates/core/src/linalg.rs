//! Singular value decompositions of nalgebra matrices, computed by faer.
//!
//! nalgebra's own SVD occasionally loses several digits in the leading
//! singular vectors of exactly rank-deficient inputs, which is the common
//! case here (sampled columns of a low-rank matrix).

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD `A = U diag(sigma) V^T`, singular values in non-increasing order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn no_convergence() -> Error {
    Error::degenerate("singular value decomposition did not converge")
}

fn non_finite() -> Error {
    Error::degenerate("singular value decomposition produced non-finite values")
}

fn faer_svd(a: &Mat<f64>) -> Result<Svd> {
    let svd = a.thin_svd().map_err(|_| no_convergence())?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok(Svd {
        u: DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        singular_values: DVector::from_fn(s.nrows(), |i, _| s[i]),
        v: DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}

fn all_finite(svd: &Svd) -> bool {
    svd.u.iter().chain(svd.v.iter()).chain(svd.singular_values.iter()).all(|x| x.is_finite())
}

/// nalgebra's SVD reordered to non-increasing singular values. Less
/// accurate than faer on rank-deficient inputs, so only a last resort.
fn nalgebra_svd(a: &DMatrix<f64>) -> Result<Svd> {
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(no_convergence)?;
    let (u, v_t) = (svd.u.ok_or_else(no_convergence)?, svd.v_t.ok_or_else(no_convergence)?);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    Ok(Svd {
        u: u.select_columns(&order),
        singular_values: DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i])),
        v: v_t.select_rows(&order).transpose(),
    })
}

// faer occasionally returns NaN factors for finite inputs: seen on 600x600
// rank-15 column samples (the transpose works) and on a 1000x999 full-rank
// noisy sample (both orientations fail). Fall back in that order.
pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<Svd> {
    let f = to_faer(a);
    let svd = faer_svd(&f)?;
    if all_finite(&svd) {
        return Ok(svd);
    }
    log::debug!("retrying a non-finite {}x{} SVD on the transpose", a.nrows(), a.ncols());
    let t = faer_svd(&f.transpose().to_owned())?;
    let svd = Svd {
        u: t.v,
        singular_values: t.singular_values,
        v: t.u,
    };
    if all_finite(&svd) {
        return Ok(svd);
    }
    log::debug!("falling back to nalgebra for a {}x{} SVD", a.nrows(), a.ncols());
    let svd = nalgebra_svd(a)?;
    if all_finite(&svd) {
        Ok(svd)
    } else {
        Err(non_finite())
    }
}

/// Singular values in non-increasing order.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let f = to_faer(a);
    let mut sv = f.singular_values().map_err(|_| no_convergence())?;
    if !sv.iter().all(|x| x.is_finite()) {
        sv = f.transpose().to_owned().singular_values().map_err(|_| no_convergence())?;
    }
    if !sv.iter().all(|x| x.is_finite()) {
        sv = nalgebra_svd(a)?.singular_values.iter().copied().collect();
    }
    if sv.iter().all(|x| x.is_finite()) {
        Ok(DVector::from_vec(sv))
    } else {
        Err(non_finite())
    }
}

/// Number of singular values above `rel_tol * sigma_1`; 0 for a zero matrix.
pub(crate) fn numerical_rank(sv: &DVector<f64>, rel_tol: f64) -> usize {
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}
