use cgkdm::estimator::{estimate_dim2_centered, estimator_terms};
use cgkdm::independence::{test_statistic, GammaFit};
use cgkdm::kernel::{gamma_sq, normalizer};
use cgkdm::{
    empirical_copula, estimate, hermite_coeffs, kendall, pearson, rank_transform, spearman, Bandwidth,
    DiscreteDistribution, PseudoSample, Sample,
};
use proptest::prelude::*;

fn sample_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = Sample> {
    (3..=max_n, 2..=max_d).prop_flat_map(|(n, d)| {
        // distinct values per column keep the continuous-marginal assumption
        prop::collection::vec(prop::collection::hash_set(-1_000_000i64..1_000_000, n), d).prop_map(move |cols| {
            let cols: Vec<Vec<f64>> = cols.into_iter().map(|c| c.into_iter().map(|v| v as f64 / 1000.0).collect()).collect();
            Sample::from_columns(&cols).unwrap()
        })
    })
}

fn pseudo_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = PseudoSample> {
    (2..=max_n, 2..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(Just((1..=n as u32).collect::<Vec<u32>>()).prop_shuffle(), d).prop_map(move |cols| {
            let ranks = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
            PseudoSample::from_ranks(ranks, n, d).unwrap()
        })
    })
}

fn bandwidth() -> impl Strategy<Value = Bandwidth> {
    prop::sample::select(vec![0.05, 0.2, 0.5, 1.0, 3.0]).prop_map(|s| Bandwidth::new(s).unwrap())
}

fn monotone(k: usize, x: f64) -> f64 {
    match k % 4 {
        0 => (x / 100.0).exp(),
        1 => x * x * x + 2.0 * x,
        2 => (x / 1000.0).atan(),
        _ => 5.0 * x - 7.0,
    }
}

fn distribution(dim: usize) -> impl Strategy<Value = DiscreteDistribution> {
    (1..6usize).prop_flat_map(move |k| {
        (prop::collection::vec(0.0..=1.0f64, k * dim), prop::collection::vec(0.01..1.0f64, k)).prop_map(move |(atoms, w)| {
            let total: f64 = w.iter().sum();
            DiscreteDistribution::new(atoms, w.iter().map(|x| x / total).collect(), dim).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_invariant_under_increasing_maps(s in sample_strategy(40, 4)) {
        let t = s.map_columns(monotone).unwrap();
        prop_assert_eq!(rank_transform(&s).unwrap(), rank_transform(&t).unwrap());
    }

    #[test]
    fn ranking_commutes_with_column_permutation(s in sample_strategy(30, 4), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..s.d()).collect();
        perm.rotate_left((seed as usize) % s.d());
        let a = rank_transform(&s.permute_columns(&perm).unwrap()).unwrap();
        let b = rank_transform(&s).unwrap().permute_columns(&perm).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn empirical_copula_is_on_the_grid(p in pseudo_strategy(25, 4)) {
        let c = empirical_copula(&p);
        let n = p.n();
        for j in 0..p.d() {
            let mut seen: Vec<usize> = c.iter().map(|(a, _)| (a[j] * n as f64).round() as usize).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (1..=n).collect::<Vec<_>>());
        }
        prop_assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_is_exactly_permutation_invariant(p in pseudo_strategy(40, 5), b in bandwidth(), k in 0usize..24) {
        let mut perm: Vec<usize> = (0..p.d()).collect();
        perm.swap(0, k % p.d());
        perm.reverse();
        prop_assert_eq!(estimate(&p, b).unwrap(), estimate(&p.permute_columns(&perm).unwrap(), b).unwrap());
    }

    #[test]
    fn estimate_is_exactly_monotone_invariant(s in sample_strategy(40, 3), b in bandwidth()) {
        let flipped = s.map_columns(|j, x| if j == 0 { -x } else { monotone(j, x) }).unwrap();
        prop_assert_eq!(estimate(&rank_transform(&s).unwrap(), b).unwrap(), estimate(&rank_transform(&flipped).unwrap(), b).unwrap());
    }

    #[test]
    fn estimate_range(p in pseudo_strategy(60, 2), b in bandwidth()) {
        let v = estimate(&p, b).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-12, "{}", v);
        let c = estimate_dim2_centered(&p, b).unwrap();
        prop_assert!((c - v * v).abs() < 1e-10);
    }

    #[test]
    fn estimate_positive_in_higher_dimensions(p in pseudo_strategy(40, 6), b in bandwidth()) {
        let t = estimator_terms(&p, b).unwrap();
        prop_assert!(t.denominator() > 0.0);
        prop_assert!(t.squared_estimate() > 0.0);
    }

    #[test]
    fn statistic_identity(p in pseudo_strategy(50, 4), b in bandwidth()) {
        let t = test_statistic(&p, b).unwrap().t;
        let terms = estimator_terms(&p, b).unwrap();
        let e = estimate(&p, b).unwrap();
        prop_assert!(t >= 0.0);
        prop_assert!((t - p.n() as f64 * terms.denominator() * e * e).abs() <= 1e-10 * t.max(1.0));
    }

    #[test]
    fn gamma_distance_triangle_inequality(
        (x, y, z) in (1usize..4).prop_flat_map(|d| (distribution(d), distribution(d), distribution(d))),
        b in bandwidth(),
    ) {
        let g = |p: &DiscreteDistribution, q: &DiscreteDistribution| gamma_sq(p, q, b).unwrap().sqrt();
        prop_assert!(g(&x, &z) <= g(&x, &y) + g(&y, &z) + 1e-9);
    }

    #[test]
    fn normalizer_is_positive(d in 2usize..=10, sigma in 0.05..5.0f64) {
        let t = normalizer(Bandwidth::new(sigma).unwrap(), d).unwrap();
        prop_assert!(t.c_sigma_d > 0.0 && t.c_sigma_d.is_finite());
    }

    #[test]
    fn gamma_fit_reconstruction(mean in 1e-4..10.0f64, cv in 0.05..3.0f64) {
        let var = (cv * mean).powi(2);
        let f = GammaFit::from_moments(mean, var).unwrap();
        prop_assert!((f.alpha * f.beta - mean).abs() <= 1e-12 * mean);
        prop_assert!((f.alpha * f.beta * f.beta - var).abs() <= 1e-12 * var);
    }

    #[test]
    fn rank_baselines(s in sample_strategy(40, 2)) {
        let p = rank_transform(&s).unwrap();
        let y = Sample::from_rows(&(0..p.n()).map(|i| p.row(i)).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(spearman(&s).unwrap(), pearson(&y).unwrap());
        let t = s.map_columns(monotone).unwrap();
        prop_assert_eq!(kendall(&s).unwrap(), kendall(&t).unwrap());
        let neg = s.map_columns(|j, x| if j == 1 { -x } else { x }).unwrap();
        prop_assert_eq!(kendall(&s).unwrap(), -kendall(&neg).unwrap());
        prop_assert!((spearman(&s).unwrap() + spearman(&neg).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn bvn_series_is_even_and_bounded() {
    for sigma in [0.2, 1.0] {
        let series = hermite_coeffs(Bandwidth::new(sigma).unwrap(), 100).unwrap();
        let mut prev = 0.0;
        for k in 0..=20 {
            let rho = k as f64 / 20.0;
            let v = series.evaluate(rho).unwrap();
            assert_eq!(v, series.evaluate(-rho).unwrap());
            assert!(v >= prev && v <= rho + 1e-6, "sigma={sigma} rho={rho} v={v}");
            prev = v;
        }
    }
}

#[test]
fn upper_bound_can_fail_above_dimension_two() {
    // brute-force grid value of gamma^2(C_n, Pi_n) / gamma^2(M_n, Pi_n)
    let p = PseudoSample::from_ranks(vec![1, 1, 2, 2, 2, 3, 3, 3, 1], 3, 3).unwrap();
    let t = estimator_terms(&p, Bandwidth::new(0.2).unwrap()).unwrap();
    assert!((t.squared_estimate() - 1.0028372840503477).abs() < 1e-10);
}

#[test]
fn monotone_data_give_exactly_one() {
    for d in 2..=5 {
        for sigma in [0.05, 0.2, 1.0, 3.0] {
            let ranks: Vec<u32> = (1..=50u32).flat_map(|i| (0..d).map(move |j| if j % 2 == 0 { i } else { 51 - i })).collect();
            let p = PseudoSample::from_ranks(ranks, 50, d).unwrap();
            assert_eq!(estimate(&p, Bandwidth::new(sigma).unwrap()).unwrap(), 1.0);
        }
    }
}
