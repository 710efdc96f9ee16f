#![allow(dead_code)]

use matcol::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut g = rng::stream(seed, 99);
    DMatrix::from_fn(rows, cols, |_, _| g.sample(StandardNormal))
}

pub fn gaussian_vector(len: usize, seed: u64) -> DVector<f64> {
    let mut g = rng::stream(seed, 98);
    DVector::from_fn(len, |_, _| g.sample(StandardNormal))
}

/// Modified Gram-Schmidt on the columns of a Gaussian matrix.
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut q = gaussian(rows, cols, seed);
    for j in 0..cols {
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).into_owned();
            q.column_mut(j).axpy(-proj, &qk, 1.0);
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    q
}

/// Uniform row indices in `0..m`, with replacement.
pub fn uniform_rows(m: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut g = rng::stream(seed, 97);
    (0..count).map(|_| g.random_range(0..m)).collect()
}

/// Solves `g x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut g: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| g[i][col].abs().total_cmp(&g[j][col].abs()))
            .unwrap();
        g.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..k {
            let f = g[row][col] / g[col][col];
            for c in col..k {
                g[row][c] -= f * g[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let tail: f64 = (row + 1..k).map(|c| g[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / g[row][row];
    }
    x
}

/// Orthogonal projector onto the top-`k` eigenvectors of a symmetric matrix.
pub fn top_eigen_projector(sym: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = sym.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..sym.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut p = DMatrix::zeros(sym.nrows(), sym.nrows());
    for &i in order.iter().take(k) {
        let v = eig.eigenvectors.column(i);
        p += &v * v.transpose();
    }
    p
}

/// Eigenvalues of a symmetric matrix, largest first.
pub fn sorted_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = sym.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}
