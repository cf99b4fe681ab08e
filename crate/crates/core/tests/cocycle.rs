mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use randlocal::cocycle::{
    det_identity_residual, find_invariant_form, lyapunov_exponent, lyapunov_spectrum, min_product_norm,
    oseledec_matrix, sample_product, CirclePoint, CocycleError, CocycleSpec, MatrixEnsemble, MatrixEnsembleRecord,
    DEFAULT_GAP_THRESHOLD, FORM_MAX_ITERS,
};
use randlocal::gallery::{coboundary_driver, l1_ensemble};
use randlocal::germ_dynamics::simulate_orbit;
use randlocal::linalg::{c, frobenius, real_matrix, singular_values_desc, CMatrix};

fn single(m: CMatrix) -> CocycleSpec {
    CocycleSpec::Iid(MatrixEnsemble::uniform(vec![m]).unwrap())
}

#[test]
fn ensemble_validation() {
    let a = real_matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
    let b = real_matrix(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
    assert!(matches!(MatrixEnsemble::new(vec![]), Err(CocycleError::EmptyEnsemble)));
    assert!(matches!(MatrixEnsemble::new(vec![(a.clone(), 0.5), (b, 0.5)]), Err(CocycleError::BadShape { .. })));
    assert!(matches!(MatrixEnsemble::new(vec![(a.clone(), 0.6)]), Err(CocycleError::ProbabilitySum(_))));
    assert!(matches!(MatrixEnsemble::new(vec![(a, -1.0)]), Err(CocycleError::BadProbability { .. })));
}

#[test]
fn ensemble_record_round_trip() {
    let e = l1_ensemble();
    let text = serde_json::to_string(&e.to_record()).unwrap();
    let back: MatrixEnsembleRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(MatrixEnsemble::from_record(&back).unwrap().to_record(), e.to_record());
}

/// L1 products have the form `[[2^-n, alpha_n], [0, 1]]` with
/// `alpha_n = alpha_{n-1} / 2 + b_n`, `b_n` the index of the atom drawn.
#[test]
fn l1_products_follow_the_alpha_recursion() {
    let ens = l1_ensemble();
    let germs = common::linear_germs(&ens, 2);
    let spec = CocycleSpec::Iid(ens);
    for seed in 0..20u64 {
        let n = 40;
        let orbit = simulate_orbit(&germs, &[c(0.0, 0.0), c(0.0, 0.0)], n, seed).unwrap();
        let mut alpha = 0.0;
        for &b in &orbit.choices {
            alpha = alpha / 2.0 + b as f64;
            assert!((0.0..2.0).contains(&alpha));
        }
        let exact = real_matrix(&[&[0.5f64.powi(n as i32), alpha], &[0.0, 1.0]]);
        let s = sample_product(&spec, n, seed).unwrap();
        for (got, want) in s.log_singular_values.iter().zip(singular_values_desc(&exact)) {
            assert!((got - want.ln()).abs() < 1e-10, "seed {seed}");
        }
    }
}

#[test]
fn spectrum_of_l1() {
    let s = lyapunov_spectrum(&CocycleSpec::Iid(l1_ensemble()), 5_000, 50, 3, DEFAULT_GAP_THRESHOLD).unwrap();
    assert_eq!(s.entries.len(), 2);
    assert!(s.entries.iter().all(|e| e.alpha == 1));
    assert!(s.exponents[0].abs() < 0.02 && (s.exponents[1] + 2f64.ln()).abs() < 0.02);
    let r = s.to_record();
    assert_eq!(r.kappa.len(), 2);
}

#[test]
fn scalar_multiples_of_unitaries_are_one_block() {
    let mut rng = common::rng(4);
    let u = common::haar_unitary(&mut rng, 3).map(|z| z * 2.0);
    let s = lyapunov_spectrum(&single(u), 200, 4, 1, DEFAULT_GAP_THRESHOLD).unwrap();
    assert_eq!(s.entries.len(), 1);
    assert_eq!(s.entries[0].alpha, 3);
    assert!((s.entries[0].kappa - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn rotation_driver_coboundary_has_zero_exponent() {
    let spec = CocycleSpec::Rotation(coboundary_driver(0.618_033_988_749_894_9).unwrap());
    let e = lyapunov_exponent(&spec, 2_000, 20, 5).unwrap();
    assert!(e.kappa.abs() < 0.02, "kappa {}", e.kappa);
    assert!(spec.expected_log_det().abs() < 1e-3);
    assert!(matches!(det_identity_residual(&spec, 100, 2, 0), Ok(r) if r.residual.is_finite()));
}

#[test]
fn coboundary_products_telescope() {
    let theta = 0.618_033_988_749_894_9;
    let driver = coboundary_driver(theta).unwrap();
    let x = CirclePoint::from_f64(0.3);
    for n in [1usize, 5, 40] {
        let m = driver.product(x, n)[(0, 0)].re;
        let expected = x.rotate_n(driver.theta, n as u64).to_f64() / x.to_f64();
        assert!((m - expected).abs() <= 1e-12 * expected);
    }
}

#[test]
fn nilpotent_product_is_minus_infinity() {
    let s = sample_product(&single(real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]])), 3, 0).unwrap();
    assert_eq!(s.log_norm, f64::NEG_INFINITY);
    let r = det_identity_residual(&single(real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]])), 3, 2, 0).unwrap();
    assert!(r.divergent);
}

#[test]
fn invalid_parameters_are_rejected() {
    let spec = CocycleSpec::Iid(l1_ensemble());
    assert!(matches!(sample_product(&spec, 0, 0), Err(CocycleError::InvalidParameter(_))));
    assert!(matches!(lyapunov_exponent(&spec, 10, 0, 0), Err(CocycleError::InvalidParameter(_))));
    assert!(matches!(min_product_norm(&spec, 0, 1, 0), Err(CocycleError::InvalidParameter(_))));
}

#[test]
fn seeds_determine_results() {
    let spec = CocycleSpec::Iid(l1_ensemble());
    assert_eq!(lyapunov_exponent(&spec, 500, 8, 9).unwrap(), lyapunov_exponent(&spec, 500, 8, 9).unwrap());
    assert_ne!(lyapunov_exponent(&spec, 500, 8, 9).unwrap().kappa, lyapunov_exponent(&spec, 500, 8, 10).unwrap().kappa);
}

#[test]
fn oseledec_estimate_is_positive_definite() {
    let o = oseledec_matrix(&CocycleSpec::Iid(l1_ensemble()), 0, 2_000).unwrap();
    assert!(o.log_eigenvalues[0] >= o.log_eigenvalues[1]);
    assert!((frobenius(&(o.matrix.adjoint() - &o.matrix))) < 1e-14);
}

/// `H U H^{-1}` with `H` noncommuting: the form is `P = c (H^{-1})^* H^{-1}`.
#[test]
fn conjugated_unitaries_recover_the_conjugating_form() {
    let mut rng = common::rng(6);
    for dim in [2usize, 3] {
        let h = common::conditioned(&mut rng, dim, 50.0);
        let h_inv = h.clone().try_inverse().unwrap();
        let gens: Vec<CMatrix> = (0..2).map(|_| &h * common::haar_unitary(&mut rng, dim) * &h_inv).collect();
        let tol = 1e-9;
        let form = find_invariant_form(&gens, FORM_MAX_ITERS, tol).unwrap();
        let f = form.found().expect("form exists");
        let target = h_inv.adjoint() * &h_inv;
        let scale = f.p.trace().re / target.trace().re;
        let target = target.map(|z| z * scale);
        assert!(frobenius(&(&f.p - &target)) <= 1e-6 * frobenius(&target));
        // Products stay of unit P-norm: ||H M H^{-1}||_op = 1.
        let mut prod = DMatrix::identity(dim, dim);
        for k in 0..20 {
            prod = &gens[k % 2] * prod;
            let norm = singular_values_desc(&(&f.conjugator * &prod * f.conjugator.clone().try_inverse().unwrap()))[0];
            assert!((norm - 1.0).abs() <= 10.0 * tol, "P-norm {norm}");
        }
    }
}

#[test]
fn shears_and_contractions_have_no_form() {
    for m in [real_matrix(&[&[1.0, 1.0], &[0.0, 1.0]]), real_matrix(&[&[2.0, 0.0], &[0.0, 1.0]])] {
        assert!(find_invariant_form(&[m], 2_000, 1e-8).unwrap().found().is_none());
    }
    assert!(matches!(find_invariant_form(&[], 10, 1e-8), Err(CocycleError::EmptyEnsemble)));
    let singular = real_matrix(&[&[1.0, 0.0], &[0.0, 0.0]]);
    assert!(matches!(find_invariant_form(&[singular], 10, 1e-8), Err(CocycleError::SingularGenerator(0))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Periodic renormalization must not change the product.
    #[test]
    fn renormalized_product_matches_naive(seed in any::<u64>(), n in 1usize..=30, dim in 1usize..=3, cond in 1.0f64..4.0) {
        let mut rng = common::rng(seed);
        let m = common::conditioned(&mut rng, dim, cond);
        let s = sample_product(&single(m.clone()), n, seed).unwrap();
        let mut naive = DMatrix::identity(dim, dim);
        for _ in 0..n {
            naive = &m * naive;
        }
        // The naive product only resolves singular values well above
        // eps * sigma_1; the rest are pinned down by the determinant.
        let naive_s = singular_values_desc(&naive);
        for (got, want) in s.log_singular_values.iter().zip(&naive_s) {
            if *want >= 1e-4 * naive_s[0] {
                prop_assert!((got - want.ln()).abs() <= 1e-8 * (1.0 + want.ln().abs()), "{got} vs {}", want.ln());
            }
        }
        let log_det = n as f64 * randlocal::linalg::log_abs_det(&m);
        let total: f64 = s.log_singular_values.iter().sum();
        prop_assert!((total - log_det).abs() <= 1e-8 * (1.0 + log_det.abs()));
    }

    #[test]
    fn singular_values_carry_the_determinant(seed in any::<u64>(), dim in 1usize..=3) {
        let mut rng = common::rng(seed);
        let spec = CocycleSpec::Iid(common::random_ensemble(&mut rng, dim, 3));
        let s = sample_product(&spec, 200, seed).unwrap();
        let total: f64 = s.log_singular_values.iter().sum();
        prop_assert!((total - s.log_abs_det).abs() <= 1e-6 * 200.0, "{total} vs {}", s.log_abs_det);
    }

    #[test]
    fn top_of_spectrum_is_the_exponent(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let spec = CocycleSpec::Iid(common::random_ensemble(&mut rng, 2, 2));
        let e = lyapunov_exponent(&spec, 300, 6, seed).unwrap();
        let s = lyapunov_spectrum(&spec, 300, 6, seed, DEFAULT_GAP_THRESHOLD).unwrap();
        prop_assert!((e.kappa - s.exponents[0]).abs() <= 1e-12 * (1.0 + e.kappa.abs()));
    }

    #[test]
    fn norms_are_submultiplicative(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = common::rng(seed);
        let m = common::gaussian_matrix(&mut rng, 2);
        let s = sample_product(&single(m.clone()), n, 0).unwrap();
        prop_assert!(s.log_norm <= n as f64 * singular_values_desc(&m)[0].ln() + 1e-9);
    }

    #[test]
    fn scaling_shifts_every_exponent(seed in any::<u64>(), log_factor in -2.0f64..2.0) {
        let mut rng = common::rng(seed);
        let e = common::random_ensemble(&mut rng, 2, 2);
        let base = lyapunov_spectrum(&CocycleSpec::Iid(e.clone()), 200, 4, seed, DEFAULT_GAP_THRESHOLD).unwrap();
        let scaled = lyapunov_spectrum(&CocycleSpec::Iid(e.scaled(log_factor.exp())), 200, 4, seed, DEFAULT_GAP_THRESHOLD).unwrap();
        for (a, b) in base.exponents.iter().zip(&scaled.exponents) {
            prop_assert!((b - a - log_factor).abs() <= 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn log_norms_are_subadditive_in_mean(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let spec = CocycleSpec::Iid(common::random_ensemble(&mut rng, 2, 3));
        let short = lyapunov_exponent(&spec, 100, 64, seed).unwrap();
        let long = lyapunov_exponent(&spec, 200, 64, seed).unwrap();
        let slack = 4.0 * (short.stderr + long.stderr);
        prop_assert!(long.kappa <= short.kappa + slack, "{} > {}", long.kappa, short.kappa);
    }

    #[test]
    fn det_identity_on_random_ensembles(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let spec = CocycleSpec::Iid(common::random_ensemble(&mut rng, 2, 3));
        let r = det_identity_residual(&spec, 2_000, 16, seed).unwrap();
        prop_assert!(r.residual <= 0.05, "residual {}", r.residual);
    }
}

#[test]
fn unitary_ensembles_are_isometric() {
    let mut rng = common::rng(77);
    let ens = MatrixEnsemble::new(vec![(common::haar_unitary(&mut rng, 3), 0.4), (common::haar_unitary(&mut rng, 3), 0.6)]).unwrap();
    let spec = CocycleSpec::Iid(ens);
    let m = min_product_norm(&spec, 1_000, 8, 1).unwrap();
    assert!((m.min_norm - 1.0).abs() <= 1e-12, "{}", m.min_norm);
    let l = oseledec_matrix(&spec, 1, 1_000).unwrap();
    let id = CMatrix::identity(3, 3);
    assert!(frobenius(&(&l.matrix - &id)) <= 1e-10);
    let s = lyapunov_spectrum(&spec, 1_000, 8, 1, DEFAULT_GAP_THRESHOLD).unwrap();
    assert_eq!(s.entries.len(), 1);
    assert!(s.entries[0].kappa.abs() <= 1e-12);
}
