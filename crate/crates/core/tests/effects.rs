mod common;

use common::*;
use tensorsynth::effects::gen_poisson_count;
use tensorsynth::effects::{
    add_factor_noise, add_sparse_noise, impose_congruence, impose_correlation, inject_anomaly,
    nonneg_tensor, normalize_tensor, sparsify_tensor, AnomalySpec,
};
use tensorsynth::factors::{gen_standard_normal, FactorSpec, GammaParams, WeightsSpec};
use tensorsynth::{frobenius_norm, DenseTensor, ErrorKind, RngStream, Shape};

fn random_tensor(dims: Vec<usize>, seed: u64) -> DenseTensor {
    let shape = Shape::new(dims).unwrap();
    let n = shape.numel();
    let v = gen_standard_normal(n, 1, &RngStream::new(seed));
    DenseTensor::new(shape, v.iter().copied().collect()).unwrap()
}

#[test]
fn factor_noise_has_requested_relative_size_and_is_independent_across_modes() {
    let s = RngStream::new(1);
    let factors = vec![
        gen_standard_normal(2000, 10, &s.index(0)),
        gen_standard_normal(2000, 10, &s.index(1)),
    ];
    let (noisy, sigmas) = add_factor_noise(&factors, 0.1, &RngStream::new(2)).unwrap();
    let mut noise = Vec::new();
    for n in 0..2 {
        let e = &noisy[n] - &factors[n];
        let rel = e.norm() / factors[n].norm();
        assert!((0.095..=0.105).contains(&rel), "mode {n}: {rel}");
        assert!(sigmas[n] > 0.0);
        noise.push(e.iter().copied().collect::<Vec<_>>());
    }
    assert!(pearson(&noise[0], &noise[1]).abs() < 0.03);
}

#[test]
fn congruence_gram_is_exact_and_correlation_is_statistical() {
    for rank in [2, 4] {
        let u = impose_congruence(30, rank, 0.3, &RngStream::new(3)).unwrap();
        let g = u.transpose() * &u;
        for i in 0..rank {
            assert!((g[(i, i)] - 1.0).abs() < 1e-12);
        }
    }
    let z = impose_correlation(10_000, 2, 0.7, &RngStream::new(4)).unwrap();
    assert!((pearson(&column(&z, 0), &column(&z, 1)) - 0.7).abs() < 0.05);
    // Smallest eigenvalue 1 + (R - 1)c reaches zero at c = -1/(R-1).
    let err = impose_congruence(10, 3, -0.5, &RngStream::new(5)).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
    assert!(err.to_string().contains("positive definite"));
    assert!(impose_congruence(10, 3, -0.49, &RngStream::new(5)).is_ok());
}

#[test]
fn anomaly_hits_the_requested_norm_ratio_inside_the_block_only() {
    let host = random_tensor(vec![10, 8, 6], 6);
    let spec = AnomalySpec {
        block: vec![[2, 5], [0, 4], [1, 3]],
        rank: 2,
        amplitude: 2.5,
        generator: FactorSpec::Uniform,
        weights: WeightsSpec::Ones,
    };
    let (out, record) = inject_anomaly(&host, &spec, &RngStream::new(7)).unwrap();
    let mut inside_old = 0.0;
    let mut inside_new = 0.0;
    for at in 0..host.numel() {
        let i = host.shape().unravel(at);
        let inside = i
            .iter()
            .zip(&spec.block)
            .all(|(x, r)| (r[0]..r[1]).contains(x));
        if inside {
            inside_old += host.values()[at].powi(2);
            inside_new += out.values()[at].powi(2);
        } else {
            assert_eq!(out.values()[at], host.values()[at]);
        }
    }
    let ratio = inside_new.sqrt() / inside_old.sqrt();
    assert!((ratio - 2.5).abs() < 1e-12, "{ratio}");
    assert!(!record.used_host_fallback);
}

#[test]
fn sparse_noise_touches_exactly_the_requested_count() {
    let t = random_tensor(vec![20, 10, 5], 8);
    let (out, _, positions) = add_sparse_noise(&t, 10.0, 0.1, &RngStream::new(9)).unwrap();
    assert_eq!(positions.len(), 100);
    let changed = out
        .values()
        .iter()
        .zip(t.values())
        .filter(|(a, b)| a != b)
        .count();
    assert_eq!(changed, 100);
}

#[test]
fn sparsify_drops_the_rounded_fraction_of_nonzeros() {
    let t = random_tensor(vec![10, 10, 10], 10);
    let (out, view, dropped) = sparsify_tensor(&t, 0.25, &RngStream::new(11)).unwrap();
    assert_eq!(dropped.len(), 250);
    assert_eq!(view.nnz(), 750);
    assert_eq!(out.nnz(), 750);
    assert!(sparsify_tensor(&t, 1.0, &RngStream::new(11)).is_err());
}

#[test]
fn nonneg_and_normalize() {
    let t = random_tensor(vec![6, 6], 12);
    let (clamped, count) = nonneg_tensor(&t);
    assert_eq!(count, t.values().iter().filter(|v| **v < 0.0).count());
    assert!(clamped.values().iter().all(|v| *v >= 0.0));
    let (unit, scale) = normalize_tensor(&t).unwrap();
    assert!((frobenius_norm(&unit) - 1.0).abs() < 1e-12);
    assert!((scale * frobenius_norm(&t) - 1.0).abs() < 1e-12);
    let zero = DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap());
    assert_eq!(
        normalize_tensor(&zero).unwrap_err().kind(),
        ErrorKind::Numerical
    );
}

#[test]
fn poisson_counts_are_integers_with_cp_rates() {
    let shape = Shape::new(vec![30, 20, 10]).unwrap();
    let params = GammaParams {
        mu: 1.0,
        sigma2: 0.1,
        theta: 1.0,
    };
    let (counts, model) =
        gen_poisson_count(&shape, 3, &params, &WeightsSpec::Ones, &RngStream::new(13)).unwrap();
    assert!(counts
        .entries()
        .iter()
        .all(|(_, v)| *v >= 1.0 && v.fract() == 0.0));
    // Total count is Poisson with the summed rate.
    let rate: f64 = tensorsynth::cp_reconstruct(&model).values().iter().sum();
    let total: f64 = counts.entries().iter().map(|(_, v)| v).sum();
    assert!(
        (total - rate).abs() < 5.0 * rate.sqrt(),
        "{total} vs {rate}"
    );
}
