mod common;

use common::*;
use matcol::baseline::{nystrom_approx, NystromConfig};
use matcol::completion::{rank_r_residual_sq, DEFAULT_RANK_TOLERANCE};
use matcol::synthetic::{gen_lowrank, SyntheticSpec};
use matcol::{
    best_rank_r, column_space, complete, recover_column, ColumnSpaceBasis, CompletionConfig,
    DenseMatrix, Error, MatrixOracle, ObservationMode, ObservationSet, PartialColumn,
};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// `U (U_O^T U_O)^{-1} U_O^T m_O`, assembled entry by entry.
fn normal_equation_oracle(u: &DMatrix<f64>, rows: &[usize], values: &[f64]) -> Vec<f64> {
    let k = u.ncols();
    let mut g = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for (&i, &v) in rows.iter().zip(values) {
        for a in 0..k {
            b[a] += u[(i, a)] * v;
            for c in 0..k {
                g[a][c] += u[(i, a)] * u[(i, c)];
            }
        }
    }
    let z = gauss_solve(g, b);
    (0..u.nrows())
        .map(|i| (0..k).map(|a| u[(i, a)] * z[a]).sum())
        .collect()
}

#[test]
fn recover_column_matches_normal_equation_oracle_in_space() {
    let mut checked = 0;
    for seed in 0..100u64 {
        let u = random_orthonormal(20, 3, seed);
        let x = &u * gaussian_vector(3, seed);
        let rows = uniform_rows(20, 9, seed);
        let values: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
        let basis = ColumnSpaceBasis::from_orthonormal(u.clone()).unwrap();
        let rec = recover_column(&basis, &rows, &values, 0.0).unwrap();
        let oracle = normal_equation_oracle(&u, &rows, &values);
        for (a, b) in rec.values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10, "seed {seed}: {a} vs {b}");
        }
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn recover_column_matches_oracle_off_space() {
    // Generic columns exercise the least-squares residual, not just interpolation.
    for seed in 0..100u64 {
        let u = random_orthonormal(30, 4, 1000 + seed);
        let rows = uniform_rows(30, 12, 1000 + seed);
        let values: Vec<f64> = gaussian_vector(12, 1000 + seed).iter().copied().collect();
        let basis = ColumnSpaceBasis::from_orthonormal(u.clone()).unwrap();
        let rec = recover_column(&basis, &rows, &values, 0.0).unwrap();
        let oracle = normal_equation_oracle(&u, &rows, &values);
        for (a, b) in rec.values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn column_space_of_rank_five_sample_matches_eigen_projector() {
    let left = gaussian(50, 5, 1);
    let a = DenseMatrix::new(&left * gaussian(5, 10, 2)).unwrap();
    let basis = column_space(&a, 8, DEFAULT_RANK_TOLERANCE).unwrap();
    assert_eq!(basis.effective_rank(), 5);
    let aat = a.as_matrix() * a.as_matrix().transpose();
    let truth = top_eigen_projector(&aat, 5);
    assert!((basis.projector() - truth).norm() <= 1e-8);
}

#[test]
fn rank_r_residual_matches_gram_eigenvalues() {
    let m = DenseMatrix::new(gaussian(30, 40, 3)).unwrap();
    let gram = m.as_matrix().transpose() * m.as_matrix();
    let tail: f64 = sorted_eigenvalues(&gram).iter().skip(5).sum();
    let m5 = best_rank_r(&m, 5).unwrap();
    let direct = (m.as_matrix() - m5.as_matrix()).norm_squared();
    assert!((direct - tail).abs() <= 1e-8, "{direct} vs {tail}");
    assert!((rank_r_residual_sq(&m, 5).unwrap() - tail).abs() <= 1e-8);
}

#[test]
fn best_rank_r_is_identity_above_true_rank() {
    let m = gen_lowrank(&SyntheticSpec::lowrank(25, 20, 4, 5)).unwrap();
    for r in 4..=8 {
        let approx = best_rank_r(&m, r).unwrap();
        assert!(m.relative_error(&approx).unwrap() <= 1e-10);
    }
}

#[test]
fn nystrom_is_exact_on_exact_rank_instances() {
    let mut exact = 0;
    let mut seed = 0u64;
    while exact < 100 {
        seed += 1;
        let r = 1 + (seed as usize % 10);
        let m = gen_lowrank(&SyntheticSpec::lowrank(100, 100, r, seed)).unwrap();
        let cfg = NystromConfig {
            num_columns: 2 * r,
            num_rows: 2 * r,
            target_rank: r,
            seed,
        };
        let out = nystrom_approx(&m, &cfg).unwrap();
        // Resample when the intersection is badly conditioned.
        let w = m.as_matrix().select_rows(&out.rows).select_columns(&out.columns);
        let mut sv: Vec<f64> = w.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        if sv[0] / sv[r - 1] > 1e8 {
            continue;
        }
        assert_eq!(out.effective_rank, r);
        let err = m.relative_error(&out.approx).unwrap();
        assert!(err <= 1e-8, "seed {seed}, r {r}: {err}");
        exact += 1;
    }
}

#[test]
fn nystrom_output_rank_never_exceeds_target() {
    let m = DenseMatrix::new(gaussian(40, 40, 11)).unwrap();
    let cfg = NystromConfig {
        num_columns: 10,
        num_rows: 10,
        target_rank: 3,
        seed: 4,
    };
    let out = nystrom_approx(&m, &cfg).unwrap();
    assert_eq!(out.approx.numerical_rank(1e-9).unwrap(), 3);
}

fn rank_one(seed: u64) -> DenseMatrix {
    let u = gaussian_vector(10, seed);
    let v = gaussian_vector(10, seed + 1);
    DenseMatrix::new(&u * v.transpose()).unwrap()
}

#[test]
fn rank_one_completion_is_exact() {
    for seed in 0..20 {
        let m = rank_one(seed);
        let config = CompletionConfig::uniform(10, 1, 1, 2, seed);
        let obs = matcol::synthetic::gen_observation(&m, &config, ObservationMode::Independent)
            .unwrap();
        let report = complete(&obs, &config).unwrap().with_ground_truth(&m).unwrap();
        assert!(report.relative_frobenius_error.unwrap() <= 1e-10);
    }
}

#[test]
fn in_space_columns_are_reproduced_and_full_columns_copied_bitwise() {
    let m = gen_lowrank(&SyntheticSpec::lowrank(60, 50, 4, 8)).unwrap();
    let config = CompletionConfig::uniform(50, 4, 20, 25, 8);
    let obs = matcol::synthetic::gen_observation(&m, &config, ObservationMode::Independent).unwrap();
    let report = complete(&obs, &config).unwrap();
    assert!(m.relative_error(&report.recovered).unwrap() <= 1e-10);
    for (&j, col) in obs.full_columns() {
        for i in 0..60 {
            assert_eq!(report.recovered.get(i, j).to_bits(), col[i].to_bits());
        }
    }
}

#[test]
fn full_observation_projects_and_contracts() {
    let u = random_orthonormal(15, 3, 21);
    let basis = ColumnSpaceBasis::from_orthonormal(u.clone()).unwrap();
    let x = gaussian_vector(15, 22);
    let rows: Vec<usize> = (0..15).collect();
    let rec = recover_column(&basis, &rows, x.as_slice(), 0.0).unwrap();
    let proj = &u * (u.transpose() * &x);
    assert!((&rec.values - proj).amax() <= 1e-12);
    assert!(rec.values.norm() <= x.norm() + 1e-12);
}

#[test]
fn single_repeated_row_is_singular_and_names_column() {
    let m = gen_lowrank(&SyntheticSpec::lowrank(8, 4, 2, 3)).unwrap();
    let full: BTreeMap<usize, DVector<f64>> =
        [0, 1].iter().map(|&j| (j, m.column(j))).collect();
    let partial = vec![
        PartialColumn {
            index: 2,
            rows: vec![0, 3, 5],
            values: vec![m.get(0, 2), m.get(3, 2), m.get(5, 2)],
        },
        PartialColumn {
            index: 3,
            rows: vec![4, 4, 4],
            values: vec![m.get(4, 3); 3],
        },
    ];
    let obs = ObservationSet::new(8, 4, 3, ObservationMode::Independent, vec![0, 1], full, partial)
        .unwrap();
    let config = CompletionConfig::uniform(4, 2, 2, 3, 0);
    match complete(&obs, &config) {
        Err(Error::SingularSystem { column, .. }) => assert_eq!(column, Some(3)),
        other => panic!("expected a singular system, got {other:?}"),
    }
    let report = complete(&obs, &config.clone().with_fallback(1e-6)).unwrap();
    assert_eq!(report.regularized_columns, vec![3]);
}

#[test]
fn column_space_stays_finite_on_a_large_rank_deficient_sample() {
    // A 600x600 rank-15 sample on which the direct SVD returns NaN factors.
    let seed = 3697412690786426053;
    let m = gen_lowrank(&SyntheticSpec::lowrank(600, 600, 15, seed)).unwrap();
    let dist = matcol::ColumnSamplingDistribution::uniform(600);
    let (_, a) = matcol::sample_full_columns(&m, &dist, 600, seed).unwrap();
    let basis = column_space(&a, 15, DEFAULT_RANK_TOLERANCE).unwrap();
    assert_eq!(basis.effective_rank(), 15);
    assert!(basis.basis().iter().all(|x| x.is_finite()));
    let p = basis.projector();
    let residual = (m.as_matrix() - &p * m.as_matrix()).norm() / m.frobenius_norm();
    assert!(residual < 1e-10, "{residual}");
}
