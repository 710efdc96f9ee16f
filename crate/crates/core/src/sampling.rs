//! Column sampling: the distribution over columns and the draw of the
//! fully observed, rescaled column sample `A`.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, MatrixOracle};
use crate::rng;

/// Absolute tolerance on `sum(p) == 1`.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Probabilities `p_1..p_n` with which fully observed columns are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSamplingDistribution {
    probs: Vec<f64>,
}

impl ColumnSamplingDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::config("column distribution is empty"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::config(format!(
                "column probability p[{i}] = {p} must be strictly positive"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::config(format!(
                "column probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero columns");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when every probability equals `1/n` exactly.
    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.probs.len() as f64;
        self.probs.iter().all(|&p| p == u)
    }

    /// `d` independent draws with `Pr[i] = p_i`, reproducible from `seed`.
    pub fn draw(&self, d: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng::stream(seed, rng::STREAM_COLUMNS);
        let weights =
            WeightedIndex::new(&self.probs).expect("probabilities validated at construction");
        (0..d).map(|_| weights.sample(&mut rng)).collect()
    }
}

/// Scale factor `1 / sqrt(d * p_i)` applied to a drawn column inside `A`.
pub(crate) fn column_scale(d: usize, p: f64) -> f64 {
    1.0 / (d as f64 * p).sqrt()
}

/// Draws `d` column indices from `dist` and returns them together with the
/// scaled sample `A`, whose `j`-th column is `M[:, i_j] / sqrt(d * p_{i_j})`.
pub fn sample_full_columns<O: MatrixOracle + ?Sized>(
    source: &O,
    dist: &ColumnSamplingDistribution,
    d: usize,
    seed: u64,
) -> Result<(Vec<usize>, DenseMatrix)> {
    let (m, n) = source.shape();
    if dist.len() != n {
        return Err(Error::config(format!(
            "column distribution has {} entries but the matrix has {n} columns",
            dist.len()
        )));
    }
    if d == 0 {
        return Err(Error::config("number of full columns d must be at least 1"));
    }
    let indices = dist.draw(d, seed);
    let mut a = DMatrix::zeros(m, d);
    for (j, &i) in indices.iter().enumerate() {
        let col = source.column(i) * column_scale(d, dist.prob(i));
        a.set_column(j, &col);
    }
    Ok((indices, DenseMatrix::new(a)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_distributions() {
        assert!(ColumnSamplingDistribution::new(vec![1.0, 0.0]).is_err());
        assert!(ColumnSamplingDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(ColumnSamplingDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ColumnSamplingDistribution::new(vec![]).is_err());
        let d = ColumnSamplingDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(d.p_min(), 0.25);
        assert!(!d.is_uniform());
        assert!(ColumnSamplingDistribution::uniform(7).is_uniform());
    }

    #[test]
    fn uniform_scaling_is_sqrt_n_over_d() {
        let m = DenseMatrix::identity(4);
        let dist = ColumnSamplingDistribution::uniform(4);
        let (idx, a) = sample_full_columns(&m, &dist, 2, 11).unwrap();
        assert_eq!(idx.len(), 2);
        for j in 0..2 {
            let norm = a.as_matrix().column(j).norm();
            assert!((norm - 2f64.sqrt()).abs() < 1e-15);
            assert!((a.get(idx[j], j) - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn draw_frequencies_follow_the_distribution() {
        let probs = [0.5, 0.25, 0.25];
        let dist = ColumnSamplingDistribution::new(probs.to_vec()).unwrap();
        let draws = dist.draw(1000, 42);
        for (i, p) in probs.iter().enumerate() {
            let freq = draws.iter().filter(|&&k| k == i).count() as f64 / 1000.0;
            assert!((freq - p).abs() <= 0.05, "column {i}: freq {freq} vs p {p}");
        }
        assert_eq!(draws, dist.draw(1000, 42));
    }

    #[test]
    fn distribution_length_must_match() {
        let m = DenseMatrix::identity(4);
        let dist = ColumnSamplingDistribution::uniform(3);
        assert!(matches!(
            sample_full_columns(&m, &dist, 2, 0),
            Err(Error::Config(_))
        ));
    }
}
