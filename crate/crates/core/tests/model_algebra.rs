mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::*;
use gmix_core::model::*;

fn marginal_oracle(model: &LinearGaussianModel, mu_pr: &DVector<f64>, cov_pr: &DMatrix<f64>) -> f64 {
    let a = model.forward();
    let cov = a * cov_pr * a.transpose() + model.noise_covariance();
    mvn_logpdf(model.data(), &(a * mu_pr), &cov)
}

#[test]
fn component_matches_dense_inversion() {
    let mut g = rng(11);
    let a = normal_matrix(&mut g, 3, 5);
    let y = normal_vector(&mut g, 3);
    let noise = random_spd(&mut g, 3, 0.5);
    let model = LinearGaussianModel::new(a.clone(), noise.clone(), y.clone()).unwrap();
    let mu_pr = normal_vector(&mut g, 5);
    let cov_pr = random_spd(&mut g, 5, 0.2);
    let spec = GaussianComponentSpec::fixed(mu_pr.clone(), cov_pr.clone()).unwrap();
    let comp = posterior_component(&model, &spec, &DVector::zeros(1)).unwrap();

    let noise_inv = noise.try_inverse().unwrap();
    let prior_inv = cov_pr.try_inverse().unwrap();
    let precision = a.transpose() * &noise_inv * &a + &prior_inv;
    let cov = precision.try_inverse().unwrap();
    let mean = &cov * (a.transpose() * &noise_inv * &y + &prior_inv * &mu_pr);

    let got_cov = comp.covariance().unwrap();
    let got_mean = comp.mean().unwrap();
    assert!((&got_cov - &cov).norm() / cov.norm() < 1e-10);
    assert!((&got_mean - &mean).norm() / mean.norm() < 1e-10);
}

#[test]
fn marginal_matches_mvn_oracle_two_by_two() {
    let mut g = rng(3);
    let model = random_model(&mut g, 2, 2);
    let spec = GaussianComponentSpec::scale_mixture(2);
    let w1 = uniform_vector(&mut g, 2, 0.1, 3.0);
    let w2 = uniform_vector(&mut g, 2, 0.1, 3.0);
    let got = log_marginal_y_given_w(&model, &spec, &w1).unwrap() - log_marginal_y_given_w(&model, &spec, &w2).unwrap();
    let want = marginal_oracle(&model, &DVector::zeros(2), &DMatrix::from_diagonal(&w1))
        - marginal_oracle(&model, &DVector::zeros(2), &DMatrix::from_diagonal(&w2));
    assert!((got - want).abs() < 1e-10);
}

#[test]
fn one_dimensional_laplace_mixing_posterior_matches_quadrature() {
    // y = a x + e, e ~ N(0, s²), x | w ~ N(0, w), w ~ Exp(λ)
    let (a, s, y, delta) = (1.3, 0.6, 0.9, 1.7);
    let lambda = delta * delta / 2.0;
    let model = LinearGaussianModel::isotropic(DMatrix::from_element(1, 1, a), s, DVector::from_element(1, y)).unwrap();
    let spec = GaussianComponentSpec::scale_mixture(1);
    let mixing = LaplacePrior::uniform(1, delta).unwrap().mixing_density();
    let upper = 60.0 / lambda;

    let lp = |w: f64| log_mixing_posterior(&model, &spec, &mixing, &DVector::from_element(1, w)).unwrap();
    let shift = lp(1.0);
    let z = integrate_panels(&|w: f64| if w <= 0.0 { (lp(1e-300) - shift).exp() } else { (lp(w) - shift).exp() }, 0.0, upper, 64, 1e-13);

    // π(w|y) ∝ e^{-λw} ∫ N(y; a x, s²) N(x; 0, w) dx, with the inner integral done by quadrature
    let gauss = |x: f64, m: f64, v: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let direct_unnorm = |w: f64| {
        let sd = w.sqrt();
        let inner = integrate_panels(&|x: f64| gauss(y, a * x, s * s) * gauss(x, 0.0, w), -12.0 * sd, 12.0 * sd, 16, 1e-15);
        inner * (-lambda * w).exp()
    };
    let z_direct = integrate_panels(&|w: f64| if w <= 1e-12 { gauss(y, 0.0, s * s) } else { direct_unnorm(w) }, 0.0, upper, 64, 1e-13);

    let total = integrate_panels(&|w: f64| if w <= 0.0 { (lp(1e-300) - shift).exp() / z } else { (lp(w) - shift).exp() / z }, 0.0, upper, 64, 1e-13);
    assert!((total - 1.0).abs() < 1e-6);
    for &w in &[0.05, 0.3, 1.0, 2.5] {
        let ours = (lp(w) - shift).exp() / z;
        let direct = direct_unnorm(w) / z_direct;
        assert!((ours - direct).abs() / direct < 1e-6, "w = {w}: {ours} vs {direct}");
    }
}

#[test]
fn gmm_weights_match_quadrature_of_component_mass() {
    let (a, s, y) = (0.8, 0.5, 1.1);
    let model = LinearGaussianModel::isotropic(DMatrix::from_element(1, 1, a), s, DVector::from_element(1, y)).unwrap();
    let means = [DVector::from_element(1, -1.0), DVector::from_element(1, 2.0)];
    let vars = [0.7, 1.9];
    let covs = [DMatrix::from_element(1, 1, vars[0]), DMatrix::from_element(1, 1, vars[1])];
    let p = DVector::from_vec(vec![0.35, 0.65]);
    let weights = gmm_posterior_weights(&model, &means, &covs, &p).unwrap();

    let gauss = |x: f64, m: f64, v: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let mass: Vec<f64> = (0..2)
        .map(|i| p[i] * integrate_panels(&|x: f64| gauss(y, a * x, s * s) * gauss(x, means[i][0], vars[i]), -20.0, 20.0, 64, 1e-15))
        .collect();
    let total: f64 = mass.iter().sum();
    for i in 0..2 {
        assert!((weights[i] - mass[i] / total).abs() < 1e-8);
    }
}

#[test]
fn gmm_weights_reject_bad_input() {
    let model = LinearGaussianModel::isotropic(DMatrix::from_element(1, 1, 1.0), 1.0, DVector::from_element(1, 0.0)).unwrap();
    let mu = DVector::from_element(1, 0.0);
    let cov = DMatrix::from_element(1, 1, 1.0);
    assert!(gmm_posterior_weights(&model, &[mu.clone()], &[cov.clone()], &DVector::from_element(1, 0.9)).is_err());
    assert!(gmm_posterior_weights(&model, &[], &[], &DVector::zeros(0)).is_err());
}

fn orthogonal(g: &mut rand_chacha::ChaCha8Rng, m: usize) -> DMatrix<f64> {
    normal_matrix(g, m, m).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_solves_normal_equations(seed in 0u64..10_000, d in 1usize..9, m in 1usize..9) {
        let mut g = rng(seed);
        let model = random_model(&mut g, m, d);
        let spec = GaussianComponentSpec::new(
            d,
            |w: &DVector<f64>| Ok(w.map(|v| v - 0.5)),
            |w: &DVector<f64>| Ok(Box::new(DiagonalCovariance::new(w.clone())?) as Box<dyn CovarianceFactor>),
        );
        let w = uniform_vector(&mut g, d, 0.05, 4.0);
        let comp = posterior_component(&model, &spec, &w).unwrap();
        let mu = comp.mean().unwrap();
        let resid = comp.precision() * &mu - comp.mean_rhs();
        let scale = comp.precision().norm() * mu.norm() + comp.mean_rhs().norm();
        prop_assert!(resid.norm() <= 1e-8 * scale);
    }

    #[test]
    fn marginal_differences_match_gaussian_marginal(seed in 0u64..10_000, d in 1usize..9, m in 1usize..9) {
        let mut g = rng(seed);
        let model = random_model(&mut g, m, d);
        let shift = normal_vector(&mut g, d);
        let shift2 = shift.clone();
        let spec = GaussianComponentSpec::new(
            d,
            move |w: &DVector<f64>| Ok(shift.component_mul(w)),
            |w: &DVector<f64>| Ok(Box::new(DiagonalCovariance::new(w.clone())?) as Box<dyn CovarianceFactor>),
        );
        let w1 = uniform_vector(&mut g, d, 0.05, 3.0);
        let w2 = uniform_vector(&mut g, d, 0.05, 3.0);
        let got = log_marginal_y_given_w(&model, &spec, &w1).unwrap() - log_marginal_y_given_w(&model, &spec, &w2).unwrap();
        let want = marginal_oracle(&model, &shift2.component_mul(&w1), &DMatrix::from_diagonal(&w1))
            - marginal_oracle(&model, &shift2.component_mul(&w2), &DMatrix::from_diagonal(&w2));
        prop_assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn gmm_weights_normalized_and_permutation_equivariant(seed in 0u64..10_000, n in 1usize..6) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 2, 2);
        let means: Vec<_> = (0..n).map(|_| normal_vector(&mut g, 2)).collect();
        let covs: Vec<_> = (0..n).map(|_| random_spd(&mut g, 2, 0.3)).collect();
        let raw = uniform_vector(&mut g, n, 0.1, 1.0);
        let p = &raw / raw.sum();
        let p = {
            let mut p = p;
            let s: f64 = p.iter().take(n - 1).sum();
            p[n - 1] = 1.0 - s;
            p
        };
        let w = gmm_posterior_weights(&model, &means, &covs, &p).unwrap();
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
        let perm: Vec<usize> = (0..n).rev().collect();
        let pm: Vec<_> = perm.iter().map(|&i| means[i].clone()).collect();
        let pc: Vec<_> = perm.iter().map(|&i| covs[i].clone()).collect();
        let mut pp = DVector::from_iterator(n, perm.iter().map(|&i| p[i]));
        let s: f64 = pp.iter().take(n - 1).sum();
        pp[n - 1] = 1.0 - s;
        if (pp.sum() - 1.0).abs() <= 1e-12 {
            let wp = gmm_posterior_weights(&model, &pm, &pc, &pp).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((wp[k] - w[i]).abs() < 1e-12 + 1e-12 * w[i]);
            }
        }
    }

    #[test]
    fn orthogonal_rotation_of_data_is_invisible(seed in 0u64..10_000, d in 1usize..7, m in 1usize..7) {
        let mut g = rng(seed);
        let a = normal_matrix(&mut g, m, d);
        let y = normal_vector(&mut g, m);
        let q = orthogonal(&mut g, m);
        let model = LinearGaussianModel::isotropic(a.clone(), 0.7, y.clone()).unwrap();
        let rotated = LinearGaussianModel::isotropic(&q * a, 0.7, &q * y).unwrap();
        let spec = GaussianComponentSpec::scale_mixture(d);
        let w1 = uniform_vector(&mut g, d, 0.1, 2.0);
        let w2 = uniform_vector(&mut g, d, 0.1, 2.0);
        let c1 = posterior_component(&model, &spec, &w1).unwrap();
        let c2 = posterior_component(&rotated, &spec, &w1).unwrap();
        prop_assert!((c1.mean().unwrap() - c2.mean().unwrap()).amax() < 1e-9);
        prop_assert!((c1.covariance().unwrap() - c2.covariance().unwrap()).amax() < 1e-9);
        let diff = |mdl: &LinearGaussianModel| {
            log_marginal_y_given_w(mdl, &spec, &w1).unwrap() - log_marginal_y_given_w(mdl, &spec, &w2).unwrap()
        };
        prop_assert!((diff(&model) - diff(&rotated)).abs() < 1e-9);
    }
}
