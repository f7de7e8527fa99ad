mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensorsynth::effects::sign_fix;
use tensorsynth::{cp_reconstruct, normalize_cp, tucker_reconstruct, CpModel, ErrorKind};

#[test]
fn cp_matches_nested_loops() {
    let mut rng = rng(1);
    for _ in 0..200 {
        let m = random_cp(&mut rng);
        let fast = cp_reconstruct(&m);
        assert!(max_abs_diff(fast.values(), &cp_oracle(m.factors(), m.lambda())) <= 1e-12);
    }
}

#[test]
fn tucker_matches_nested_loops() {
    let mut rng = rng(2);
    for _ in 0..200 {
        let m = random_tucker(&mut rng);
        let fast = tucker_reconstruct(&m);
        assert!(max_abs_diff(fast.values(), &tucker_oracle(m.factors(), m.core())) <= 1e-12);
    }
}

#[test]
fn superdiagonal_tucker_is_bit_identical_to_cp() {
    let mut rng = rng(3);
    for _ in 0..100 {
        let m = random_cp(&mut rng);
        assert_eq!(cp_reconstruct(&m), tucker_reconstruct(&superdiagonal(&m)));
    }
}

#[test]
fn zero_column_cannot_be_normalized() {
    let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
    let m = CpModel::new(vec![u.clone(), u], vec![1.0, 1.0]).unwrap();
    assert_eq!(normalize_cp(&m).unwrap_err().kind(), ErrorKind::Numerical);
}

fn model_strategy() -> impl Strategy<Value = CpModel> {
    any::<u64>().prop_map(|seed| random_cp(&mut ChaCha8Rng::seed_from_u64(seed)))
}

proptest! {
    #[test]
    fn reconstruction_is_multilinear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_cp(&mut rng);
        let mut f1 = m.factors().to_vec();
        let mut f2 = m.factors().to_vec();
        let mut mixed = m.factors().to_vec();
        let other = random_matrix(f1[0].nrows(), m.rank(), &mut rng);
        f2[0] = other.clone();
        mixed[0] = &f1[0] * a + &other * b;
        f1[0] = m.factors()[0].clone();
        let x1 = cp_reconstruct(&CpModel::new(f1, m.lambda().to_vec()).unwrap());
        let x2 = cp_reconstruct(&CpModel::new(f2, m.lambda().to_vec()).unwrap());
        let xm = cp_reconstruct(&CpModel::new(mixed, m.lambda().to_vec()).unwrap());
        let expected: Vec<f64> = x1.values().iter().zip(x2.values()).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(max_abs_diff(xm.values(), &expected) <= 1e-9);
    }

    #[test]
    fn normalize_cp_is_idempotent_and_preserving(m in model_strategy()) {
        let x = cp_reconstruct(&m);
        let once = normalize_cp(&m).unwrap();
        for u in once.factors() {
            for c in 0..u.ncols() {
                prop_assert!((u.column(c).norm() - 1.0).abs() <= 1e-12);
            }
        }
        prop_assert!(max_abs_diff(x.values(), cp_reconstruct(&once).values()) <= 1e-12);
        let twice = normalize_cp(&once).unwrap();
        prop_assert!(max_abs_diff(once.lambda(), twice.lambda()) <= 1e-12);
    }

    #[test]
    fn sign_fix_preserves_reconstruction(m in model_strategy()) {
        let fixed = sign_fix(&m);
        prop_assert!(max_abs_diff(cp_reconstruct(&m).values(), cp_reconstruct(&fixed).values()) <= 1e-12);
        for u in fixed.factors() {
            for c in 0..u.ncols() {
                let col = u.column(c);
                let peak = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
                prop_assert!(peak >= 0.0);
            }
        }
        prop_assert_eq!(sign_fix(&fixed), fixed);
    }
}
