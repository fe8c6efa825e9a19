//! Test of mutual independence based on `T = n * gamma^2(C_n, Pi_n)`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cache::{MomentCache, MomentKey};
use crate::copula::PseudoSample;
use crate::error::{Error, Result};
use crate::estimator::{estimator_terms, terms_with_tables, RankTables};
use crate::kernel::{kappa, lambda_power_integral, Bandwidth, DEFAULT_QUADRATURE_TOL};
use crate::rng::stream_rng;
use crate::special::{gamma_quantile, gamma_sf};

/// Default number of null replicates for simulated moments and cutoffs.
pub const DEFAULT_NULL_REPS: usize = 20_000;

/// Sample-size thresholds of the automatic method choice.
pub const AUTO_SIMULATED_BELOW: usize = 20;
pub const AUTO_ASYMPTOTIC_ABOVE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestStatistic {
    pub t: f64,
    pub n: usize,
    pub d: usize,
    pub sigma: Bandwidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentSource {
    MonteCarloExact { reps: usize, seed: u64 },
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullMoments {
    pub mean: f64,
    pub variance: f64,
    pub source: MomentSource,
    /// `None` for the `n -> infinity` limit.
    pub n: Option<usize>,
    pub d: usize,
    pub sigma: Bandwidth,
}

impl NullMoments {
    fn checked(self) -> Result<Self> {
        if self.mean > 0.0 && self.variance > 0.0 {
            Ok(self)
        } else {
            Err(Error::NonPositiveMoment { mean: self.mean, variance: self.variance })
        }
    }
}

/// Two-parameter gamma law with shape `alpha` and scale `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaFit {
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && variance > 0.0) {
            return Err(Error::NonPositiveMoment { mean, variance });
        }
        Ok(Self { alpha: mean * mean / variance, beta: variance / mean })
    }

    pub fn mean(&self) -> f64 {
        self.alpha * self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha * self.beta * self.beta
    }

    /// Upper `level` critical value.
    pub fn cutoff(&self, level: f64) -> Result<f64> {
        gamma_quantile(1.0 - level, self.alpha, self.beta)
    }

    pub fn p_value(&self, t: f64) -> f64 {
        gamma_sf(t, self.alpha, self.beta)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.p_value(t)
    }
}

/// How the null reference distribution is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    /// Empirical quantile of simulated null statistics.
    SimulatedNull,
    /// Gamma fit to simulated finite-sample moments.
    GammaExact,
    /// Gamma fit to the limiting moments.
    GammaAsymptotic,
}

/// A method, or the sample-size based choice among them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodChoice {
    Fixed(TestMethod),
    Auto,
}

impl MethodChoice {
    pub fn resolve(self, n: usize) -> TestMethod {
        match self {
            MethodChoice::Fixed(m) => m,
            MethodChoice::Auto if n < AUTO_SIMULATED_BELOW => TestMethod::SimulatedNull,
            MethodChoice::Auto if n > AUTO_ASYMPTOTIC_ABOVE => TestMethod::GammaAsymptotic,
            MethodChoice::Auto => TestMethod::GammaExact,
        }
    }
}

impl From<TestMethod> for MethodChoice {
    fn from(m: TestMethod) -> Self {
        MethodChoice::Fixed(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: TestStatistic,
    pub method: TestMethod,
    pub cutoff: f64,
    pub p_value: f64,
    pub reject: bool,
    pub level: f64,
    /// Null replicates used, if any.
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub moments: Option<NullMoments>,
    pub gamma: Option<GammaFit>,
}

pub fn test_statistic(p: &PseudoSample, b: Bandwidth) -> Result<TestStatistic> {
    let terms = estimator_terms(p, b)?;
    Ok(TestStatistic { t: p.n() as f64 * terms.numerator(), n: p.n(), d: p.d(), sigma: b })
}

/// Random pseudo-sample with independent columns, drawn by permuting ranks.
pub fn independent_pseudo_sample(n: usize, d: usize, rng: &mut crate::rng::StreamRng) -> PseudoSample {
    let mut ranks = vec![0u32; n * d];
    let mut col: Vec<u32> = (1..=n as u32).collect();
    for c in 0..d {
        if c > 0 {
            col.shuffle(rng);
        }
        for (i, &r) in col.iter().enumerate() {
            ranks[i * d + c] = r;
        }
    }
    PseudoSample::from_ranks_unchecked(ranks, n, d)
}

/// `reps` draws of `T` under independence. Replicate `r` uses stream `r`.
pub fn simulate_null(n: usize, d: usize, b: Bandwidth, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 || d < 2 {
        return Err(Error::InvalidInput(format!("null simulation needs n >= 2 and d >= 2, got n={n}, d={d}")));
    }
    if reps == 0 {
        return Err(Error::InvalidInput("need at least one null replicate".into()));
    }
    let tables = RankTables::new(n, d, b);
    let one = |r: usize| {
        let p = independent_pseudo_sample(n, d, &mut stream_rng(seed, r as u64));
        n as f64 * terms_with_tables(&p, &tables).numerator()
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        (0..reps).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = (0..reps).map(one).collect();
    Ok(out)
}

/// Simulated finite-sample moments, served from `cache` when present.
pub fn exact_null_moments_cached(
    n: usize,
    d: usize,
    b: Bandwidth,
    reps: usize,
    seed: u64,
    cache: Option<&MomentCache>,
) -> Result<NullMoments> {
    if reps < 2 {
        return Err(Error::InvalidInput("moment estimation needs at least two replicates".into()));
    }
    let key = MomentKey { n, d, sigma: b.sigma(), reps, seed };
    let source = MomentSource::MonteCarloExact { reps, seed };
    if let Some(rec) = cache.and_then(|c| c.get(&key)) {
        return NullMoments { mean: rec.mean, variance: rec.variance, source, n: Some(n), d, sigma: b }.checked();
    }
    let sims = simulate_null(n, d, b, reps, seed)?;
    let mean = sims.iter().sum::<f64>() / reps as f64;
    let variance = sims.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let m = NullMoments { mean, variance, source, n: Some(n), d, sigma: b }.checked()?;
    if let Some(c) = cache {
        c.put(key, mean, variance)?;
    }
    Ok(m)
}

/// [`exact_null_moments_cached`] with the environment-selected cache.
pub fn exact_null_moments(n: usize, d: usize, b: Bandwidth, reps: usize, seed: u64) -> Result<NullMoments> {
    exact_null_moments_cached(n, d, b, reps, seed, Some(&MomentCache::from_env()))
}

/// Limiting mean and variance of `T` under independence.
pub fn asymptotic_moments(d: usize, b: Bandwidth) -> Result<NullMoments> {
    if d < 2 {
        return Err(Error::InvalidDims(format!("moments need d >= 2, got {d}")));
    }
    let w1 = kappa(b.scaled(std::f64::consts::FRAC_1_SQRT_2)?);
    let w2 = lambda_power_integral(b, 2, DEFAULT_QUADRATURE_TOL)?;
    let w3 = kappa(b);
    let di = d as i32;
    let df = d as f64;
    let mean = 1.0 + (df - 1.0) * w3.powi(di) - df * w3.powi(di - 1);
    let variance = 2.0
        * (w1.powi(di) + 2.0 * (df - 1.0) * w2.powi(di) - 2.0 * df * w2.powi(di - 1) * w1
            + df * w3.powi(2 * di - 2) * w1
            - (df - 1.0) * w3.powi(2 * di)
            + df * (df - 1.0) * w3.powi(2 * di - 4) * (w3 * w3 - w2).powi(2));
    NullMoments { mean, variance, source: MomentSource::Asymptotic, n: None, d, sigma: b }.checked()
}

/// Index of the simulated cutoff: the `(k+1)`-th largest value with
/// `k = floor(level (reps+1)) - 1`.
fn simulated_cutoff(sims: &[f64], level: f64) -> Result<f64> {
    let reps = sims.len();
    let k = (level * (reps + 1) as f64).floor() as i64 - 1;
    if k < 0 {
        return Err(Error::InsufficientReplicates { reps, level });
    }
    let mut sorted = sims.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[k as usize])
}

/// `(r + 1) / (reps + 1)` with `r = #{T_sim >= t}`.
pub fn simulated_p_value(sims: &[f64], t: f64) -> f64 {
    let r = sims.iter().filter(|&&s| s >= t).count();
    (r + 1) as f64 / (sims.len() + 1) as f64
}

/// Cutoff and p-value machinery for one `(n, d, sigma)`, reusable across
/// many statistics.
#[derive(Debug, Clone)]
pub enum NullReference {
    Simulated { sims: Vec<f64>, cutoff: f64, seed: u64 },
    Gamma { fit: GammaFit, moments: NullMoments, cutoff: f64 },
}

impl NullReference {
    pub fn build(
        method: TestMethod,
        n: usize,
        d: usize,
        b: Bandwidth,
        level: f64,
        reps: usize,
        seed: u64,
        cache: Option<&MomentCache>,
    ) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidInput(format!("level must lie in (0,1), got {level}")));
        }
        match method {
            TestMethod::SimulatedNull => {
                let sims = simulate_null(n, d, b, reps, seed)?;
                let cutoff = simulated_cutoff(&sims, level)?;
                Ok(NullReference::Simulated { sims, cutoff, seed })
            }
            TestMethod::GammaExact | TestMethod::GammaAsymptotic => {
                let moments = if method == TestMethod::GammaExact {
                    exact_null_moments_cached(n, d, b, reps, seed, cache)?
                } else {
                    asymptotic_moments(d, b)?
                };
                let fit = GammaFit::from_moments(moments.mean, moments.variance)?;
                Ok(NullReference::Gamma { fit, moments, cutoff: fit.cutoff(level)? })
            }
        }
    }

    pub fn cutoff(&self) -> f64 {
        match self {
            NullReference::Simulated { cutoff, .. } | NullReference::Gamma { cutoff, .. } => *cutoff,
        }
    }

    pub fn p_value(&self, t: f64) -> f64 {
        match self {
            NullReference::Simulated { sims, .. } => simulated_p_value(sims, t),
            NullReference::Gamma { fit, .. } => fit.p_value(t),
        }
    }

    pub fn rejects(&self, t: f64) -> bool {
        t > self.cutoff()
    }
}

/// Runs the test with the environment-selected moment cache.
pub fn run_test(
    p: &PseudoSample,
    b: Bandwidth,
    method: impl Into<MethodChoice>,
    level: f64,
    reps: usize,
    seed: u64,
) -> Result<TestReport> {
    run_test_cached(p, b, method, level, reps, seed, Some(&MomentCache::from_env()))
}

pub fn run_test_cached(
    p: &PseudoSample,
    b: Bandwidth,
    method: impl Into<MethodChoice>,
    level: f64,
    reps: usize,
    seed: u64,
    cache: Option<&MomentCache>,
) -> Result<TestReport> {
    let statistic = test_statistic(p, b)?;
    let method = method.into().resolve(p.n());
    let reference = NullReference::build(method, p.n(), p.d(), b, level, reps, seed, cache)?;
    let (moments, gamma) = match &reference {
        NullReference::Gamma { fit, moments, .. } => (Some(*moments), Some(*fit)),
        NullReference::Simulated { .. } => (None, None),
    };
    let uses_reps = method != TestMethod::GammaAsymptotic;
    Ok(TestReport {
        statistic,
        method,
        cutoff: reference.cutoff(),
        p_value: reference.p_value(statistic.t),
        reject: reference.rejects(statistic.t),
        level,
        reps: uses_reps.then_some(reps),
        seed: uses_reps.then_some(seed),
        moments,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::estimate;

    fn bw(s: f64) -> Bandwidth {
        Bandwidth::new(s).unwrap()
    }

    #[test]
    fn statistic_identity() {
        let p = PseudoSample::from_ranks(vec![3, 1, 1, 4, 4, 2, 2, 5, 5, 3, 6, 6], 6, 2).unwrap();
        let b = bw(0.7);
        let t = test_statistic(&p, b).unwrap();
        let terms = estimator_terms(&p, b).unwrap();
        let e = estimate(&p, b).unwrap();
        assert!((t.t - 6.0 * terms.denominator() * e * e).abs() < 1e-10);
    }

    #[test]
    fn gamma_fit_reconstructs_moments() {
        let g = GammaFit::from_moments(0.3, 0.07).unwrap();
        assert!((g.mean() - 0.3).abs() < 1e-12);
        assert!((g.variance() - 0.07).abs() < 1e-12);
        assert!(GammaFit::from_moments(0.0, 1.0).is_err());
    }

    #[test]
    fn asymptotic_mean_at_d2() {
        let b = bw(1.0);
        let m = asymptotic_moments(2, b).unwrap();
        let w3 = kappa(b);
        assert!((m.mean - (1.0 - w3).powi(2)).abs() < 1e-14);
        let w1 = kappa(b.scaled(std::f64::consts::FRAC_1_SQRT_2).unwrap());
        let w2 = lambda_power_integral(b, 2, 1e-12).unwrap();
        assert!((m.variance - 2.0 * (w1 - 2.0 * w2 + w3 * w3).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn simulate_null_is_reproducible() {
        let a = simulate_null(30, 3, bw(0.5), 200, 8).unwrap();
        assert_eq!(a, simulate_null(30, 3, bw(0.5), 200, 8).unwrap());
        assert!(a.iter().all(|&t| t >= 0.0));
        assert_ne!(a, simulate_null(30, 3, bw(0.5), 200, 9).unwrap());
    }

    #[test]
    fn simulated_cutoff_convention() {
        let sims: Vec<f64> = (1..=99).map(|i| i as f64).collect();
        // k = floor(0.05 * 100) - 1 = 4 -> fifth largest = 95
        assert_eq!(simulated_cutoff(&sims, 0.05).unwrap(), 95.0);
        assert!((simulated_p_value(&sims, 95.5) - 5.0 / 100.0).abs() < 1e-15);
        assert!((simulated_p_value(&sims, 95.0) - 6.0 / 100.0).abs() < 1e-15);
        assert!(matches!(simulated_cutoff(&sims[..10], 0.05), Err(Error::InsufficientReplicates { .. })));
    }

    #[test]
    fn auto_thresholds() {
        assert_eq!(MethodChoice::Auto.resolve(10), TestMethod::SimulatedNull);
        assert_eq!(MethodChoice::Auto.resolve(20), TestMethod::GammaExact);
        assert_eq!(MethodChoice::Auto.resolve(1000), TestMethod::GammaExact);
        assert_eq!(MethodChoice::Auto.resolve(2000), TestMethod::GammaAsymptotic);
    }

    #[test]
    fn comonotone_rejected_by_all_methods() {
        let p = PseudoSample::comonotone(100, 2);
        for m in [TestMethod::SimulatedNull, TestMethod::GammaExact, TestMethod::GammaAsymptotic] {
            let r = run_test_cached(&p, bw(1.0), m, 0.2, 500, 1, None).unwrap();
            assert!(r.reject, "{m:?}");
            assert!(r.p_value < 0.2);
            assert_eq!(r.reject, r.statistic.t > r.cutoff);
        }
    }

    #[test]
    fn level_is_validated() {
        let p = PseudoSample::comonotone(10, 2);
        assert!(run_test_cached(&p, bw(1.0), TestMethod::GammaAsymptotic, 1.0, 10, 1, None).is_err());
    }
}
