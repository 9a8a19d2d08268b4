mod common;

use common::{normal, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use shrinkfit::penalty::{
    eb_shrink, gamma, gamma_eif, general_penalized_eif, l1_crit, l1_lambda_search, l1_shrink, l2_lambda_star,
    l2_shrink, lambda_star_eif, penalize, st_normal_moments, EstimateSet, Method, SearchConfig,
    WeightedSquaredErrorL2,
};

fn set(psi: &[f64], var: &[f64], n: usize) -> EstimateSet {
    EstimateSet::new(psi.to_vec(), var.to_vec(), n).unwrap()
}

fn soft(x: f64, l: f64) -> f64 {
    x.signum() * (x.abs() - l).max(0.0)
}

/// Sample mean and variance of `S_λ(Z)` with their Monte Carlo standard errors.
fn mc_moments(mu: f64, var: f64, lambda: f64, draws: usize, seed: u64) -> (f64, f64, f64, f64) {
    let mut r = rng(seed);
    let sd = var.sqrt();
    let xs: Vec<f64> = (0..draws).map(|_| soft(mu + sd * normal(&mut r), lambda)).collect();
    let n = draws as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, (m2 / n).sqrt(), m2, ((m4 - m2 * m2) / n).sqrt())
}

#[test]
fn soft_threshold_moments_match_monte_carlo() {
    let (m, se_m, v, se_v) = mc_moments(0.5, 1.0, 1.0, 10_000_000, 11);
    let (am, av) = st_normal_moments(0.5, 1.0, 1.0).unwrap();
    assert!((am - m).abs() < 4.0 * se_m, "mean {am} vs {m} ± {se_m}");
    assert!((av - v).abs() < 4.0 * se_v, "var {av} vs {v} ± {se_v}");
}

#[test]
fn soft_threshold_moments_random_triples() {
    let mut r = rng(2024);
    for k in 0..50 {
        let mu = r.random_range(-3.0..3.0);
        let var = r.random_range(0.01..4.0);
        let lambda = r.random_range(0.0..2.5);
        let (m, se_m, v, se_v) = mc_moments(mu, var, lambda, 1_000_000, 100 + k);
        let (am, av) = st_normal_moments(mu, var, lambda).unwrap();
        assert!((am - m).abs() < 4.0 * se_m + 1e-12, "({mu},{var},{lambda}) mean {am} vs {m}");
        assert!((av - v).abs() < 4.0 * se_v + 1e-12, "({mu},{var},{lambda}) var {av} vs {v}");
    }
}

#[test]
fn l1_criterion_matches_monte_carlo() {
    let psi = [0.0, 2.0];
    let est = set(&psi, &[1.0, 1.0], 25);
    let lambda = 0.3;
    let sd = (1.0f64 / 25.0).sqrt();
    let mut r = rng(5);
    let draws = 1_000_000;
    let losses: Vec<f64> = (0..draws)
        .map(|_| {
            psi.iter()
                .map(|&p| (soft(p + sd * normal(&mut r), lambda) - p).powi(2))
                .sum()
        })
        .collect();
    let mean = losses.iter().sum::<f64>() / draws as f64;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / draws as f64;
    let se = (var / draws as f64).sqrt();
    let analytic = l1_crit(lambda, &est).unwrap();
    assert!((analytic - mean).abs() < 4.0 * se, "{analytic} vs {mean} ± {se}");
}

#[test]
fn l1_lambda_meets_dense_grid_oracle() {
    let est = set(&[0.0, 0.0, 0.0, 2.0], &[1.0; 4], 25);
    let search = l1_lambda_search(&est, &SearchConfig::default()).unwrap();
    let oracle = (0..=32_000)
        .map(|i| l1_crit(i as f64 * 1e-4, &est).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(search.lambda > 0.0);
    assert!(search.criterion <= oracle + search.tol, "{} vs {oracle}", search.criterion);

    let pe = penalize(&est, Method::L1, 0.05).unwrap();
    assert_eq!(pe.lambda, search.lambda);
    assert_eq!(&pe.psi_tilde[..3], &[0.0, 0.0, 0.0]);
    assert!(pe.psi_tilde[3] > 0.0 && pe.psi_tilde[3] < 2.0);
}

#[test]
fn l1_precise_signal_needs_almost_no_threshold() {
    let est = set(&[10.0], &[1.0], 10_000);
    let search = l1_lambda_search(&est, &SearchConfig::default()).unwrap();
    let oracle = (0..=10_000)
        .map(|i| l1_crit(i as f64 * 1e-6, &est).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(search.lambda < 1e-2);
    assert!(search.criterion <= oracle + search.tol);
}

#[test]
fn ridge_interval_example() {
    let est = set(&[1.0, 1.0], &[1.0, 1.0], 100);
    let pe = penalize(&est, Method::L2, 0.05).unwrap();
    assert!((pe.lambda - 0.01).abs() < 1e-15);
    let q = 1.959_963_984_540_054;
    assert!((pe.ci_basic[0].lower - (1.0 / 1.01 - q * 0.1)).abs() < 1e-12);
    assert!((pe.ci_basic[0].upper - (1.0 / 1.01 + q * 0.1)).abs() < 1e-12);
    assert!((pe.ci_shrunk[0].upper - (1.0 / 1.01 + q * 0.1 / 1.01)).abs() < 1e-12);
}

#[test]
fn eb_factor_is_normal_posterior_mean() {
    let est = set(&[1.0, 1.0, 1.0, 1.0], &[1.0, 4.0, 1.0, 4.0], 100);
    let pe = eb_shrink(&est, 0.05).unwrap();
    let prior_var = 4.0 / 3.0;
    for d in 0..4 {
        let obs_var = est.eif_var[d] / 100.0;
        // Posterior mean of θ given x ~ N(θ, obs_var), θ ~ N(0, prior_var).
        let precision = 1.0 / prior_var + 1.0 / obs_var;
        let posterior_mean = (est.psi[d] / obs_var) / precision;
        assert!((pe.psi_tilde[d] - posterior_mean).abs() < 1e-14);
    }
    assert!(pe.shrink_factor[1] < pe.shrink_factor[0]);
}

/// Three-point distribution of a 2-vector `O`; the parameter is `E[O]`.
struct Discrete {
    points: [[f64; 2]; 3],
    probs: [f64; 3],
}

impl Discrete {
    fn mean(&self, p: &[f64; 3]) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (pt, w) in self.points.iter().zip(p) {
            m[0] += w * pt[0];
            m[1] += w * pt[1];
        }
        m
    }

    fn var(&self, p: &[f64; 3]) -> [f64; 2] {
        let m = self.mean(p);
        let mut v = [0.0; 2];
        for (pt, w) in self.points.iter().zip(p) {
            v[0] += w * (pt[0] - m[0]).powi(2);
            v[1] += w * (pt[1] - m[1]).powi(2);
        }
        v
    }

    /// Ridge-shrunk mean with the tuning parameter estimated from `p`.
    fn shrunk(&self, p: &[f64; 3], n: f64) -> [f64; 2] {
        let m = self.mean(p);
        let v = self.var(p);
        let lambda = (v[0] + v[1]) / (m[0] * m[0] + m[1] * m[1]) / n;
        [m[0] / (1.0 + lambda), m[1] / (1.0 + lambda)]
    }

    fn toward(&self, j: usize, eps: f64) -> [f64; 3] {
        let mut p = self.probs.map(|w| (1.0 - eps) * w);
        p[j] += eps;
        p
    }

    fn eif_rows(&self) -> DMatrix<f64> {
        let m = self.mean(&self.probs);
        DMatrix::from_fn(3, 2, |j, d| self.points[j][d] - m[d])
    }
}

fn discrete() -> Discrete {
    Discrete {
        points: [[1.0, 0.5], [-0.5, 2.0], [2.0, -1.0]],
        probs: [0.5, 0.3, 0.2],
    }
}

#[test]
fn estimated_lambda_eif_matches_pathwise_derivative() {
    let dist = discrete();
    let n = 20usize;
    let m = dist.mean(&dist.probs);
    let v = dist.var(&dist.probs);
    let est = set(&m, &v, n);
    let eif = dist.eif_rows();
    let g = gamma_eif(&eif, None, &est).unwrap();
    let lambda = l2_lambda_star(&est).unwrap();
    let out = lambda_star_eif(&eif, &g, &est, lambda).unwrap();
    let h = 1e-6;
    for j in 0..3 {
        let up = dist.shrunk(&dist.toward(j, h), n as f64);
        let down = dist.shrunk(&dist.toward(j, -h), n as f64);
        for d in 0..2 {
            let fd = (up[d] - down[d]) / (2.0 * h);
            assert!((out[(j, d)] - fd).abs() < 1e-7, "point {j} coord {d}: {} vs {fd}", out[(j, d)]);
        }
    }
}

#[test]
fn gamma_eif_matches_pathwise_derivative() {
    let dist = discrete();
    let m = dist.mean(&dist.probs);
    let est = set(&m, &dist.var(&dist.probs), 10);
    let g = gamma_eif(&dist.eif_rows(), None, &est).unwrap();
    let gamma_at = |p: &[f64; 3]| {
        let m = dist.mean(p);
        let v = dist.var(p);
        (v[0] + v[1]) / (m[0] * m[0] + m[1] * m[1])
    };
    assert!((gamma_at(&dist.probs) - gamma(&est).unwrap()).abs() < 1e-14);
    let h = 1e-6;
    for j in 0..3 {
        let fd = (gamma_at(&dist.toward(j, h)) - gamma_at(&dist.toward(j, -h))) / (2.0 * h);
        assert!((g[j] - fd).abs() < 1e-7, "{} vs {fd}", g[j]);
    }
}

#[test]
fn weighted_objective_eif_matches_finite_differences() {
    let dist = discrete();
    let obj = WeightedSquaredErrorL2 {
        weights: vec![0.7, 2.5],
        lambda: 0.4,
    };
    let psi = dist.mean(&dist.probs);
    let tilde = obj.solution(&psi);
    let eif = dist.eif_rows();
    let out = general_penalized_eif(&eif, &psi, &tilde, &obj).unwrap();
    let h = 1e-6;
    for j in 0..3 {
        let up = obj.solution(&dist.mean(&dist.toward(j, h)));
        let down = obj.solution(&dist.mean(&dist.toward(j, -h)));
        for d in 0..2 {
            let fd = (up[d] - down[d]) / (2.0 * h);
            assert!((out[(j, d)] - fd).abs() < 1e-8);
            let w = obj.weights[d];
            assert!((out[(j, d)] - eif[(j, d)] * w / (w + obj.lambda)).abs() < 1e-12);
        }
    }
}

#[test]
fn ridge_transparency_as_n_grows() {
    let psi = [0.8, -0.3, 1.5];
    let var = [1.0, 2.0, 0.5];
    let mut prev = f64::INFINITY;
    for n in [100usize, 10_000, 1_000_000] {
        let est = set(&psi, &var, n);
        let l2 = l2_lambda_star(&est).unwrap();
        let l1 = l1_lambda_search(&est, &SearchConfig::default()).unwrap().lambda;
        assert!(l2 < prev);
        prev = l2;
        let pe = l2_shrink(&est, l2, 0.05).unwrap();
        let shift = pe.psi_tilde.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let bound = 1.5 * gamma(&est).unwrap() / n as f64 * 1.01;
        assert!(shift < bound, "n={n}: {shift} vs {bound}");
        assert!(l1 <= 6.0 * (2.0 / n as f64).sqrt() + 1e-12);
    }
}

/// Minimizer of the ridge criterion on a grid of step `1e-5` over `[0, 10]`.
fn l2_grid_minimizer(norm_sq: f64, trace: f64, n: f64) -> f64 {
    let tn = trace / n;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1_000_000u32 {
        let l = f64::from(i) * 1e-5;
        let s = 1.0 + l;
        let c = (l * l * norm_sq + tn) / (s * s);
        if c < best.0 {
            best = (c, l);
        }
    }
    best.1
}

fn estimate_set() -> impl Strategy<Value = EstimateSet> {
    (1usize..=20, 10usize..=100_000).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(-3.0..3.0f64, d),
            prop::collection::vec(0.0..5.0f64, d),
            Just(n),
        )
            .prop_map(|(psi, var, n)| EstimateSet::new(psi, var, n).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn l2_closed_form_is_grid_minimizer(est in estimate_set()) {
        prop_assume!(est.psi.iter().any(|p| p.abs() > 1e-3));
        let lambda = l2_lambda_star(&est).unwrap();
        prop_assume!(lambda < 9.9);
        let norm_sq: f64 = est.psi.iter().map(|p| p * p).sum();
        let trace: f64 = est.eif_var.iter().sum();
        let grid = l2_grid_minimizer(norm_sq, trace, est.n as f64);
        prop_assert!((grid - lambda).abs() <= 2e-5, "grid {} closed form {}", grid, lambda);
    }
}

proptest! {
    #[test]
    fn shrinkage_is_monotone(est in estimate_set(), a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for f in [l2_shrink, l1_shrink] {
            let small = f(&est, lo, 0.05).unwrap();
            let large = f(&est, hi, 0.05).unwrap();
            for d in 0..est.dim() {
                prop_assert!(large.psi_tilde[d].abs() <= small.psi_tilde[d].abs());
            }
        }
    }

    #[test]
    fn l1_zeros_persist(est in estimate_set(), a in 0.0..3.0f64, extra in 0.0..3.0f64) {
        let at = l1_shrink(&est, a, 0.05).unwrap();
        let beyond = l1_shrink(&est, a + extra, 0.05).unwrap();
        for d in 0..est.dim() {
            if at.psi_tilde[d] == 0.0 {
                prop_assert_eq!(beyond.psi_tilde[d], 0.0);
            }
        }
    }

    #[test]
    fn intervals_contain_estimate_and_nest(est in estimate_set(), alpha in 0.01..0.5f64) {
        prop_assume!(est.psi.iter().any(|p| *p != 0.0));
        for m in Method::ALL {
            if m == Method::EB && est.dim() < 2 {
                continue;
            }
            let pe = penalize(&est, m, alpha).unwrap();
            for d in 0..est.dim() {
                prop_assert!(pe.ci_basic[d].contains(pe.psi_tilde[d]));
                prop_assert!(pe.ci_shrunk[d].contains(pe.psi_tilde[d]));
                prop_assert!(pe.ci_shrunk[d].is_subset_of(&pe.ci_basic[d]));
            }
        }
    }

    #[test]
    fn eb_larger_variance_shrinks_more(
        psi in prop::collection::vec(-2.0..2.0f64, 3..10),
        v in 0.1..5.0f64,
        bump in 0.1..5.0f64,
    ) {
        prop_assume!(psi.iter().any(|p| p.abs() > 1e-3));
        let mut var = vec![v; psi.len()];
        var[1] = v + bump;
        let mut psi = psi;
        psi[1] = psi[0];
        let pe = eb_shrink(&EstimateSet::new(psi, var, 50).unwrap(), 0.05).unwrap();
        prop_assert!(pe.shrink_factor[1] < pe.shrink_factor[0]);
    }

    #[test]
    fn ridge_objective_reproduces_scaled_eif(
        rows in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 1..20),
        lambda in 0.0..5.0f64,
    ) {
        let eif = DMatrix::from_fn(rows.len(), 3, |i, d| rows[i][d]);
        let psi = [0.4, -1.2, 2.0];
        let obj = shrinkfit::penalty::SquaredErrorL2 { lambda };
        let tilde = obj.solution(&psi);
        let out = general_penalized_eif(&eif, &psi, &tilde, &obj).unwrap();
        prop_assert!((out - eif / (1.0 + lambda)).abs().max() < 1e-10);
    }

    #[test]
    fn eif_without_gamma_term_is_scaled(psi in prop::collection::vec(0.1..2.0f64, 2), lambda in 0.0..1.0f64) {
        let est = EstimateSet::new(psi, vec![1.0, 1.0], 100).unwrap();
        let eif = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        let out = lambda_star_eif(&eif, &DVector::zeros(2), &est, lambda).unwrap();
        prop_assert!((out - &eif / (1.0 + lambda)).abs().max() < 1e-14);
    }
}
