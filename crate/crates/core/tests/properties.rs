mod common;

use common::gaussian;
use matcol::completion::DEFAULT_RANK_TOLERANCE;
use matcol::incoherence::{mu_hat, mu_matrix, mu_r, mu_vector};
use matcol::synthetic::{gen_lowrank, gen_observation, SyntheticSpec};
use matcol::{column_space, complete, CompletionConfig, DenseMatrix, ObservationMode};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn mode() -> impl Strategy<Value = ObservationMode> {
    prop_oneof![Just(ObservationMode::Aligned), Just(ObservationMode::Independent)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_is_orthonormal(m in 2usize..30, d in 1usize..20, r in 1usize..8, seed: u64) {
        let a = DenseMatrix::new(gaussian(m, d, seed)).unwrap();
        let basis = column_space(&a, r, DEFAULT_RANK_TOLERANCE).unwrap();
        let u = basis.basis();
        let k = basis.effective_rank();
        prop_assert!(k >= 1 && k <= r.min(m).min(d));
        let dev = (u.transpose() * u - DMatrix::identity(k, k)).amax();
        prop_assert!(dev <= 1e-10);
    }

    #[test]
    fn coherence_in_range(m in 2usize..25, n in 2usize..25, r_raw in 1usize..25, seed: u64) {
        let r = 1 + r_raw % m.min(n);
        let x = DenseMatrix::new(gaussian(m, n, seed)).unwrap();
        let sub = mu_r(&x, r).unwrap();
        let eps = 1e-12;
        prop_assert!(sub.value >= 1.0 - eps && sub.value <= m.max(n) as f64 / r as f64 + eps);
        let mm = mu_matrix(&x).unwrap();
        prop_assert!(mm >= 1.0 - eps && mm <= n as f64 + eps);
        let mv = mu_vector(&x.as_matrix().column(0).into_owned()).unwrap();
        prop_assert!(mv >= 1.0 - eps && mv <= m as f64 + eps);
        let basis = column_space(&x, r, DEFAULT_RANK_TOLERANCE).unwrap();
        let mh = mu_hat(&basis);
        prop_assert!(mh >= 1.0 - eps && mh <= m as f64 / basis.effective_rank() as f64 + eps);
    }

    #[test]
    fn coherence_is_scale_invariant(m in 2usize..20, n in 2usize..20, c in -1e3f64..1e3, seed: u64) {
        prop_assume!(c.abs() > 1e-3);
        let r = 1 + (seed as usize) % m.min(n);
        let x = DenseMatrix::new(gaussian(m, n, seed)).unwrap();
        let y = DenseMatrix::new(x.as_matrix() * c).unwrap();
        prop_assert!(close(mu_r(&x, r).unwrap().value, mu_r(&y, r).unwrap().value, 1e-12));
        prop_assert!(close(mu_matrix(&x).unwrap(), mu_matrix(&y).unwrap(), 1e-12));
        let col = |z: &DenseMatrix| z.as_matrix().column(0).into_owned();
        prop_assert!(close(mu_vector(&col(&x)).unwrap(), mu_vector(&col(&y)).unwrap(), 1e-12));
        let bx = column_space(&x, r, DEFAULT_RANK_TOLERANCE).unwrap();
        let by = column_space(&y, r, DEFAULT_RANK_TOLERANCE).unwrap();
        prop_assert!(close(mu_hat(&bx), mu_hat(&by), 1e-12));
    }

    #[test]
    fn coherence_is_permutation_equivariant(
        m in 2usize..20,
        n in 2usize..20,
        seed: u64,
        rot_rows in 0usize..20,
        rot_cols in 0usize..20,
    ) {
        let r = 1 + (seed as usize) % m.min(n);
        let x = gaussian(m, n, seed);
        let rows: Vec<usize> = (0..m).map(|i| (i * 7 + rot_rows) % m).collect();
        let cols: Vec<usize> = (0..n).rev().map(|j| (j + rot_cols) % n).collect();
        // Only bijective index maps are permutations.
        prop_assume!({
            let mut s = rows.clone();
            s.sort_unstable();
            s.dedup();
            s.len() == m
        });
        let y = x.select_rows(&rows).select_columns(&cols);
        let (x, y) = (DenseMatrix::new(x).unwrap(), DenseMatrix::new(y).unwrap());
        prop_assert!(close(mu_r(&x, r).unwrap().value, mu_r(&y, r).unwrap().value, 1e-9));
        prop_assert!(close(mu_matrix(&x).unwrap(), mu_matrix(&y).unwrap(), 1e-12));
    }

    #[test]
    fn observation_sets_are_consistent(
        m in 3usize..25,
        n in 2usize..25,
        d_raw in 1usize..25,
        s in 1usize..30,
        mode in mode(),
        seed: u64,
    ) {
        let d = 1 + d_raw % n;
        let x = gen_lowrank(&SyntheticSpec::lowrank(m, n, 1, seed)).unwrap();
        let config = CompletionConfig::uniform(n, 1, d, s, seed);
        let obs = gen_observation(&x, &config, mode).unwrap();
        prop_assert_eq!(obs.d(), d);
        // Multiplicities of full-column draws are those of the sampler.
        let expected = config.distribution.draw(d, seed);
        prop_assert_eq!(obs.draws(), expected.as_slice());
        for p in obs.partial_columns() {
            prop_assert!(!obs.full_columns().contains_key(&p.index));
            prop_assert_eq!(p.rows.len(), s);
            prop_assert!(p.rows.iter().all(|&i| i < m));
        }
        prop_assert_eq!(obs.full_columns().len() + obs.partial_columns().len(), n);
        let again = gen_observation(&x, &config, mode).unwrap();
        prop_assert_eq!(&obs, &again);
    }

    #[test]
    fn completion_preserves_shape_and_full_columns(
        m in 3usize..20,
        n in 2usize..20,
        d_raw in 1usize..20,
        seed: u64,
    ) {
        let d = 1 + d_raw % n;
        let x = gen_lowrank(&SyntheticSpec::lowrank(m, n, 1, seed)).unwrap();
        let config = CompletionConfig::uniform(n, 1, d, 3, seed).with_fallback(1e-8);
        let obs = gen_observation(&x, &config, ObservationMode::Independent).unwrap();
        let rep = complete(&obs, &config).unwrap();
        prop_assert_eq!(rep.recovered.shape(), (m, n));
        for (&j, col) in obs.full_columns() {
            for i in 0..m {
                prop_assert_eq!(rep.recovered.get(i, j).to_bits(), col[i].to_bits());
            }
        }
    }
}

#[test]
fn generators_are_reproducible() {
    let spec = SyntheticSpec::lowrank(20, 15, 3, 77);
    assert_eq!(gen_lowrank(&spec).unwrap(), gen_lowrank(&spec).unwrap());
    assert_ne!(
        gen_lowrank(&spec).unwrap(),
        gen_lowrank(&SyntheticSpec { seed: 78, ..spec }).unwrap()
    );
}
