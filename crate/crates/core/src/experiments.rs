//! Scripted reproductions of the numerical tables and figures.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{dcor, kendall, mv_spearman_rho2, pearson, spearman};
use crate::cache::MomentCache;
use crate::copula::{rank_transform, TiePolicy};
use crate::datagen::{sample_scenario, Orientation, Scenario};
use crate::error::{Error, Result};
use crate::estimator::{estimate, estimate_type_b, estimate_type_u, estimator_terms, DEFAULT_TYPE_B_M};
use crate::independence::{
    simulate_null, test_statistic, GammaFit, MethodChoice, NullReference, TestMethod, DEFAULT_NULL_REPS,
};
use crate::kernel::Bandwidth;
use crate::rng::derive_seed;
use crate::stats;
use crate::theory::{hermite_coeffs, DEFAULT_HERMITE_K};

/// Version of the row schema written by [`write_csv`] and [`write_json`].
pub const SCHEMA_VERSION: u32 = 1;

pub const DESK_TABLE_REPS: usize = 2000;
pub const DESK_SIZE_REPS: usize = 20_000;
pub const FULL_TABLE_REPS: usize = 10_000;
pub const FULL_SIZE_REPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Table1,
    Table2,
    Table4,
    Fig1,
    Fig2,
    SizeSweep,
    PowerSweep,
    Variability,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Table1,
        ExperimentId::Table2,
        ExperimentId::Table4,
        ExperimentId::Fig1,
        ExperimentId::Fig2,
        ExperimentId::SizeSweep,
        ExperimentId::PowerSweep,
        ExperimentId::Variability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Table1 => "table1",
            ExperimentId::Table2 => "table2",
            ExperimentId::Table4 => "table4",
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::SizeSweep => "size-sweep",
            ExperimentId::PowerSweep => "power-sweep",
            ExperimentId::Variability => "variability",
        }
    }

    fn is_size_study(self) -> bool {
        matches!(self, ExperimentId::Table4 | ExperimentId::SizeSweep)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    /// Replicates per cell; `None` picks the desk or full default.
    pub reps: Option<usize>,
    /// Null replicates for simulated cutoffs and moments.
    pub null_reps: Option<usize>,
    /// Restricts sample sizes where an experiment sweeps several.
    pub n: Option<usize>,
    /// Restricts dimensions where an experiment sweeps several.
    pub d: Option<usize>,
    /// Bandwidths; empty picks the experiment's defaults.
    pub sigmas: Vec<f64>,
    pub level: f64,
    pub seed: u64,
    /// Replicate counts of the original study.
    pub full: bool,
    pub method: MethodChoice,
    /// Scenarios for the power sweep; empty picks the defaults.
    pub scenarios: Vec<Scenario>,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        Self {
            id,
            reps: None,
            null_reps: None,
            n: None,
            d: None,
            sigmas: Vec::new(),
            level: 0.05,
            seed: 1,
            full: false,
            method: MethodChoice::Fixed(TestMethod::GammaExact),
            scenarios: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == Some(0) || self.null_reps == Some(0) {
            return Err(Error::InvalidInput("replicate count must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level must lie in (0,1), got {}", self.level)));
        }
        for &s in &self.sigmas {
            Bandwidth::new(s)?;
        }
        Ok(())
    }

    pub fn replicates(&self) -> usize {
        self.reps.unwrap_or(match (self.id.is_size_study(), self.full) {
            (true, false) => DESK_SIZE_REPS,
            (true, true) => FULL_SIZE_REPS,
            (false, false) => DESK_TABLE_REPS,
            (false, true) => FULL_TABLE_REPS,
        })
    }

    pub fn null_replicates(&self) -> usize {
        self.null_reps.unwrap_or(if self.full { FULL_SIZE_REPS } else { DEFAULT_NULL_REPS })
    }

    fn sigmas_or(&self, default: &[f64]) -> Vec<f64> {
        if self.sigmas.is_empty() {
            default.to_vec()
        } else {
            self.sigmas.clone()
        }
    }

    fn ns_or(&self, default: &[usize]) -> Vec<usize> {
        self.n.map_or_else(|| default.to_vec(), |n| vec![n])
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub scenario: String,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub metric: String,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub replicates: usize,
    /// Published value for direct comparison, where one exists.
    pub reference: Option<f64>,
    pub note: Option<String>,
}

impl ResultRow {
    fn new(cfg: &ExperimentConfig, scenario: impl Into<String>, params: impl Into<String>, metric: &str) -> Self {
        Self {
            experiment: cfg.id.to_string(),
            scenario: scenario.into(),
            params: params.into(),
            metric: metric.to_string(),
            value: None,
            std_error: None,
            replicates: 1,
            reference: None,
            note: None,
        }
    }

    fn summary(mut self, values: &[f64], failures: usize) -> Self {
        self.replicates = values.len();
        if !values.is_empty() {
            self.value = Some(stats::mean(values));
            if values.len() > 1 {
                self.std_error = Some(stats::std_error(values));
            }
        }
        if failures > 0 {
            self.note = Some(format!("{failures} replicate(s) failed"));
        }
        self
    }

    fn scalar(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    fn with_reference(mut self, r: Option<f64>) -> Self {
        self.reference = r;
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn failed(mut self, e: &Error) -> Self {
        self.note = Some(format!("error: {e}"));
        self
    }
}

fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(count: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Seed of replicate `r` in cell `cell`.
pub fn replicate_seed(seed: u64, cell: u64, r: usize) -> u64 {
    derive_seed(derive_seed(seed, cell), r as u64)
}

/// Bandwidth pair `(0.2 sqrt(d/2), sqrt(d/2))` used in the testing studies.
pub fn sigma_pair(d: usize) -> (f64, f64) {
    let s = (d as f64 / 2.0).sqrt();
    (0.2 * s, s)
}

pub fn run_experiment(cfg: &ExperimentConfig, cache: Option<&MomentCache>) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    match cfg.id {
        ExperimentId::Table1 => table1(cfg),
        ExperimentId::Table2 => table2(cfg),
        ExperimentId::Table4 => table4(cfg, cache),
        ExperimentId::Fig1 => fig1(cfg),
        ExperimentId::Fig2 => fig2(cfg),
        ExperimentId::SizeSweep => size_sweep(cfg),
        ExperimentId::PowerSweep => power_sweep(cfg, cache),
        ExperimentId::Variability => variability(cfg),
    }
}

// ---------------------------------------------------------------- table 1

pub const TABLE1_METRICS: [&str; 6] = ["I_1", "I_0.2", "pearson", "kendall", "spearman", "dcor"];

#[derive(Debug, Clone)]
pub struct Table1Case {
    pub label: char,
    pub scenario: Scenario,
    pub reference: [f64; 6],
}

pub fn table1_cases() -> Vec<Table1Case> {
    let bvn = |label, rho, reference| Table1Case { label, scenario: Scenario::Bvn { rho }, reference };
    vec![
        bvn('a', -1.0, [1.000, 1.000, -1.000, -1.000, -1.000, 1.000]),
        bvn('b', -0.8, [0.778, 0.649, -0.799, -0.590, -0.783, 0.758]),
        bvn('c', -0.4, [0.379, 0.294, -0.399, -0.262, -0.383, 0.374]),
        bvn('d', 0.0, [0.063, 0.112, 0.000, 0.001, 0.001, 0.122]),
        bvn('e', 0.4, [0.379, 0.294, 0.399, 0.262, 0.383, 0.374]),
        bvn('f', 0.8, [0.778, 0.649, 0.799, 0.590, 0.783, 0.758]),
        bvn('g', 1.0, [1.000, 1.000, 1.000, 1.000, 1.000, 1.000]),
        Table1Case { label: 'h', scenario: Scenario::Circle, reference: [0.078, 0.221, -0.001, -0.000, -0.001, 0.218] },
        Table1Case { label: 'i', scenario: Scenario::Parabola, reference: [0.086, 0.340, 0.001, 0.001, 0.001, 0.186] },
        Table1Case { label: 'j', scenario: Scenario::Sine, reference: [0.061, 0.400, -0.001, -0.000, -0.001, 0.187] },
        Table1Case { label: 'k', scenario: Scenario::CubicUp, reference: [1.000, 1.000, 0.991, 1.000, 1.000, 0.995] },
        Table1Case {
            label: 'l',
            scenario: Scenario::NoisyCurveUp,
            reference: [0.969, 0.944, 0.969, 0.834, 0.964, 0.972],
        },
        Table1Case {
            label: 'm',
            scenario: Scenario::NoisyCurveDown,
            reference: [0.952, 0.895, -0.941, -0.809, -0.949, 0.947],
        },
        Table1Case { label: 'n', scenario: Scenario::ExpDown, reference: [1.000, 1.000, -0.991, -1.000, -1.000, 0.986] },
    ]
}

/// The six table metrics on one sample; failures are kept per metric.
pub fn table1_metrics(sc: &Scenario, n: usize, seed: u64) -> Result<[Result<f64>; 6]> {
    let s = sample_scenario(sc, n, seed)?.with_tie_policy(TiePolicy::Jitter(seed));
    let p = rank_transform(&s)?;
    Ok([
        estimate(&p, Bandwidth::new(1.0)?),
        estimate(&p, Bandwidth::new(0.2)?),
        pearson(&s),
        kendall(&s),
        spearman(&s),
        dcor(&s),
    ])
}

/// Averages of the six metrics for one case: `(mean, std_error, failures)`.
pub fn table1_case(case: &Table1Case, n: usize, reps: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
    let cell = case.label as u64;
    let draws = par_map(reps, |r| table1_metrics(&case.scenario, n, replicate_seed(seed, cell, r)));
    (0..6)
        .map(|m| {
            let mut vals = Vec::with_capacity(reps);
            let mut failures = 0;
            for d in &draws {
                match d {
                    Ok(ms) => match &ms[m] {
                        Ok(v) => vals.push(*v),
                        Err(_) => failures += 1,
                    },
                    Err(_) => failures += 1,
                }
            }
            (vals, failures)
        })
        .collect()
}

fn table1(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n = cfg.n.unwrap_or(200);
    let reps = cfg.replicates();
    let mut rows = Vec::new();
    for case in table1_cases() {
        let per_metric = table1_case(&case, n, reps, cfg.seed);
        for (m, (vals, failures)) in per_metric.iter().enumerate() {
            let mut row = ResultRow::new(cfg, format!("({}) {}", case.label, case.scenario), format!("n={n}"), TABLE1_METRICS[m])
                .summary(vals, *failures)
                .with_reference(Some(case.reference[m]));
            if case.scenario.is_stand_in() {
                row = row.with_note("stand-in recipe; not reproducible");
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- table 2

pub fn table2_patterns() -> Vec<(Vec<Orientation>, f64)> {
    use Orientation::{Down as D, Up as U};
    vec![
        (vec![U, U, U], 1.0004),
        (vec![U, U, D], -0.3330),
        (vec![U, U, U, U], 1.0003),
        (vec![U, U, U, D], -0.0907),
        (vec![U, U, D, D], -0.2120),
        (vec![U, U, U, U, U], 1.0003),
        (vec![U, U, U, U, D], 0.0155),
        (vec![U, U, U, D, D], -0.1076),
    ]
}

fn table2(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n = cfg.n.unwrap_or(10_000);
    let sigmas = cfg.sigmas_or(&[1.0]);
    let mut rows = Vec::new();
    for (pattern, rho_ref) in table2_patterns() {
        let sc = Scenario::Orientation(pattern);
        let p = rank_transform(&sample_scenario(&sc, n, cfg.seed)?)?;
        for &s in &sigmas {
            let row = ResultRow::new(cfg, sc.to_string(), format!("n={n};d={};sigma={s}", sc.dim()), "I");
            rows.push(match estimate(&p, Bandwidth::new(s)?) {
                Ok(v) => row.scalar(v).with_reference(Some(1.0)),
                Err(e) => row.failed(&e),
            });
        }
        rows.push(
            ResultRow::new(cfg, sc.to_string(), format!("n={n};d={}", sc.dim()), "rho2")
                .scalar(mv_spearman_rho2(&p))
                .with_reference(Some(rho_ref)),
        );
    }
    Ok(rows)
}

// ---------------------------------------------------------------- sizes and power

pub const TABLE4_NS: [usize; 5] = [20, 30, 60, 100, 500];

/// `(d, sigma, printed sizes for TABLE4_NS)`.
pub fn table4_rows() -> Vec<(usize, f64, [f64; 5])> {
    let (a2, b2) = sigma_pair(2);
    let (a5, b5) = sigma_pair(5);
    let (a10, b10) = sigma_pair(10);
    vec![
        (2, a2, [0.0529, 0.0520, 0.0523, 0.0521, 0.0518]),
        (2, b2, [0.0531, 0.0520, 0.0502, 0.0497, 0.0500]),
        (5, a5, [0.0564, 0.0550, 0.0552, 0.0541, 0.0542]),
        (5, b5, [0.0499, 0.0499, 0.0506, 0.0500, 0.0503]),
        (10, a10, [0.0598, 0.0567, 0.0557, 0.0544, 0.0539]),
        (10, b10, [0.0513, 0.0513, 0.0504, 0.0507, 0.0506]),
    ]
}

/// Test statistics of `reps` samples drawn from `sc`.
pub fn scenario_statistics(sc: &Scenario, n: usize, b: Bandwidth, reps: usize, seed: u64) -> Vec<Result<f64>> {
    par_map(reps, |r| {
        let s = replicate_seed(seed, 0x5151, r);
        let sample = sample_scenario(sc, n, s)?.with_tie_policy(TiePolicy::Jitter(s));
        Ok(test_statistic(&rank_transform(&sample)?, b)?.t)
    })
}

/// Rejection rate of a test with a fixed null reference, with its binomial
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub rate: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub failures: usize,
}

pub fn rejection_rate(stats: &[Result<f64>], reference: &NullReference) -> RejectionRate {
    let ok: Vec<f64> = stats.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let hits = ok.iter().filter(|&&t| reference.rejects(t)).count();
    let m = ok.len().max(1) as f64;
    let rate = hits as f64 / m;
    RejectionRate { rate, std_error: (rate * (1.0 - rate) / m).sqrt(), replicates: ok.len(), failures: stats.len() - ok.len() }
}

/// Empirical rejection rate for data from `sc`. The null reference uses
/// stream family `seed`; the data use a disjoint family.
#[allow(clippy::too_many_arguments)]
pub fn empirical_rejection_rate(
    sc: &Scenario,
    n: usize,
    b: Bandwidth,
    method: TestMethod,
    level: f64,
    reps: usize,
    null_reps: usize,
    seed: u64,
    cache: Option<&MomentCache>,
) -> Result<RejectionRate> {
    let reference = NullReference::build(method, n, sc.dim(), b, level, null_reps, seed, cache)?;
    let stats = scenario_statistics(sc, n, b, reps, derive_seed(seed, 0xDA7A));
    Ok(rejection_rate(&stats, &reference))
}

fn rate_row(row: ResultRow, r: Result<RejectionRate>) -> ResultRow {
    match r {
        Ok(r) => {
            let mut row = row;
            row.value = Some(r.rate);
            row.std_error = Some(r.std_error);
            row.replicates = r.replicates;
            if r.failures > 0 {
                row.note = Some(format!("{} replicate(s) failed", r.failures));
            }
            row
        }
        Err(e) => row.failed(&e),
    }
}

fn table4(cfg: &ExperimentConfig, cache: Option<&MomentCache>) -> Result<Vec<ResultRow>> {
    let reps = cfg.replicates();
    let null_reps = cfg.null_replicates();
    let mut rows = Vec::new();
    for (d, sigma, refs) in table4_rows() {
        if cfg.d.is_some_and(|x| x != d) {
            continue;
        }
        let b = Bandwidth::new(sigma)?;
        for (k, &n) in TABLE4_NS.iter().enumerate() {
            if cfg.n.is_some_and(|x| x != n) {
                continue;
            }
            let sc = Scenario::Independent { d };
            let rate = empirical_rejection_rate(&sc, n, b, TestMethod::GammaExact, cfg.level, reps, null_reps, cfg.seed, cache);
            let row = ResultRow::new(cfg, sc.to_string(), format!("n={n};d={d};sigma={sigma:.4};null_reps={null_reps}"), "size");
            rows.push(rate_row(row, rate).with_reference(Some(refs[k])));
        }
    }
    Ok(rows)
}

fn size_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let d = cfg.d.unwrap_or(2);
    let (a, b) = sigma_pair(d);
    let reps = cfg.replicates();
    let null_reps = cfg.null_replicates();
    let mut rows = Vec::new();
    for sigma in cfg.sigmas_or(&[a, b]) {
        let bw = Bandwidth::new(sigma)?;
        for n in cfg.ns_or(&TABLE4_NS) {
            let sc = Scenario::Independent { d };
            let stats = scenario_statistics(&sc, n, bw, reps, derive_seed(cfg.seed, 0xDA7A));
            for method in [TestMethod::SimulatedNull, TestMethod::GammaExact, TestMethod::GammaAsymptotic] {
                let rate = NullReference::build(method, n, d, bw, cfg.level, null_reps, cfg.seed, None)
                    .map(|r| rejection_rate(&stats, &r));
                let row = ResultRow::new(cfg, sc.to_string(), format!("n={n};d={d};sigma={sigma:.4};method={method:?}"), "size");
                rows.push(rate_row(row, rate));
            }
        }
    }
    Ok(rows)
}

/// Power-study scenarios of a given dimension.
pub fn power_scenarios(d: usize) -> Vec<Scenario> {
    match d {
        2 => vec![
            Scenario::Bvn { rho: 0.2 },
            Scenario::Mvt { d: 2, rho: 0.2, dof: 3 },
            Scenario::LinearNoise,
            Scenario::Cosine,
        ],
        _ => vec![
            Scenario::MvnEquicorrelated { d, rho: 0.2 },
            Scenario::Mvt { d, rho: 0.2, dof: 3 },
            Scenario::AdditiveMonotone { d },
            Scenario::MultiplicativeMonotone { d },
            Scenario::Quadratic { d },
        ],
    }
}

pub const POWER_NS: [usize; 5] = [20, 60, 100, 200, 500];

fn power_sweep(cfg: &ExperimentConfig, cache: Option<&MomentCache>) -> Result<Vec<ResultRow>> {
    let scenarios = if cfg.scenarios.is_empty() { power_scenarios(cfg.d.unwrap_or(2)) } else { cfg.scenarios.clone() };
    let reps = cfg.replicates();
    let null_reps = cfg.null_replicates();
    let mut rows = Vec::new();
    for sc in scenarios {
        let d = sc.dim();
        let (a, b) = sigma_pair(d);
        for sigma in cfg.sigmas_or(&[a, b]) {
            let bw = Bandwidth::new(sigma)?;
            for n in cfg.ns_or(&POWER_NS) {
                let method = cfg.method.resolve(n);
                let rate = empirical_rejection_rate(&sc, n, bw, method, cfg.level, reps, null_reps, cfg.seed, cache);
                let row = ResultRow::new(cfg, sc.to_string(), format!("n={n};d={d};sigma={sigma:.4};method={method:?}"), "power");
                rows.push(rate_row(row, rate));
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- figures

fn fig1(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for sigma in cfg.sigmas_or(&[0.2, 1.0]) {
        let b = Bandwidth::new(sigma)?;
        let series = hermite_coeffs(b, DEFAULT_HERMITE_K);
        for k in 0..=20 {
            let rho = k as f64 / 20.0;
            let row = ResultRow::new(cfg, "bvn", format!("sigma={sigma};rho={rho}"), "I_sigma");
            rows.push(match series.as_ref().map_err(Clone::clone).and_then(|s| s.evaluate(rho)) {
                Ok(v) => row.scalar(v),
                Err(e) => row.failed(&e),
            });
        }
    }
    Ok(rows)
}

/// Null draws of the squared estimate: `T / (n * gamma^2(M_n, Pi_n))`.
pub fn null_squared_estimates(n: usize, b: Bandwidth, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let denom = estimator_terms(&crate::copula::PseudoSample::comonotone(n, 2), b)?.denominator();
    Ok(simulate_null(n, 2, b, reps, seed)?.into_iter().map(|t| t / (n as f64 * denom)).collect())
}

/// `sqrt(n) (I_hat - I)` on bivariate normal samples with correlation `rho`.
pub fn centered_estimates(rho: f64, n: usize, b: Bandwidth, reps: usize, seed: u64) -> Result<(f64, Vec<f64>)> {
    let pop = hermite_coeffs(b, DEFAULT_HERMITE_K)?.evaluate(rho)?;
    let sc = Scenario::Bvn { rho };
    let draws: Result<Vec<f64>> = par_map(reps, |r| {
        let s = sample_scenario(&sc, n, replicate_seed(seed, 0xF162, r))?;
        Ok((n as f64).sqrt() * (estimate(&rank_transform(&s)?, b)? - pop))
    })
    .into_iter()
    .collect();
    Ok((pop, draws?))
}

fn fig2(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n = cfg.n.unwrap_or(200);
    let reps = cfg.reps.unwrap_or(if cfg.full { FULL_TABLE_REPS } else { 5000 });
    let mut rows = Vec::new();
    for sigma in cfg.sigmas_or(&[0.2]) {
        let b = Bandwidth::new(sigma)?;
        let params = format!("n={n};sigma={sigma}");
        let null = null_squared_estimates(n, b, reps, cfg.seed)?;
        let fit = GammaFit::from_moments(stats::mean(&null), stats::variance(&null))?;
        let base = |metric: &str, v: f64| {
            let mut r = ResultRow::new(cfg, "independent:2", params.clone(), metric).scalar(v);
            r.replicates = reps;
            r
        };
        rows.push(base("null_sq_mean", stats::mean(&null)));
        rows.push(base("null_sq_variance", stats::variance(&null)));
        rows.push(base("null_sq_skewness", stats::skewness(&null)));
        rows.push(base("null_sq_gamma_ks", stats::ks_distance(&null, |x| fit.cdf(x))));
        for q in [0.1, 0.25, 0.5, 0.75, 0.9, 0.95] {
            rows.push(base(&format!("null_sq_q{q}"), stats::quantile(&null, q)));
        }
        match centered_estimates(0.5, n, b, reps, cfg.seed) {
            Ok((pop, alt)) => {
                let alt_row = |metric: &str, v: f64| {
                    let mut r = ResultRow::new(cfg, "bvn:0.5", params.clone(), metric).scalar(v);
                    r.replicates = reps;
                    r
                };
                rows.push(alt_row("population_I", pop));
                rows.push(alt_row("scaled_error_mean", stats::mean(&alt)));
                rows.push(alt_row("scaled_error_sd", stats::variance(&alt).sqrt()));
                rows.push(alt_row("scaled_error_skewness", stats::skewness(&alt)));
            }
            Err(e) => rows.push(ResultRow::new(cfg, "bvn:0.5", params.clone(), "scaled_error").failed(&e)),
        }
    }
    Ok(rows)
}

fn variability(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let n = cfg.n.unwrap_or(100);
    let reps = cfg.replicates();
    let mut rows = Vec::new();
    for sigma in cfg.sigmas_or(&[1.0]) {
        let b = Bandwidth::new(sigma)?;
        for k in 0..=5 {
            let rho = k as f64 / 5.0;
            let sc = Scenario::Bvn { rho };
            let draws: Vec<Result<[f64; 3]>> = par_map(reps, |r| {
                let s = replicate_seed(cfg.seed, 0x7A21 + k, r);
                let p = rank_transform(&sample_scenario(&sc, n, s)?)?;
                let i = estimate(&p, b)?;
                Ok([i * i, estimate_type_u(&p, b, s)?, estimate_type_b(&p, b, DEFAULT_TYPE_B_M, s)?])
            });
            let failures = draws.iter().filter(|d| d.is_err()).count();
            let ok: Vec<[f64; 3]> = draws.into_iter().filter_map(Result::ok).collect();
            for (m, name) in ["I_sq", "type_u", "type_b"].iter().enumerate() {
                let vals: Vec<f64> = ok.iter().map(|v| v[m]).collect();
                let params = format!("n={n};sigma={sigma};m={DEFAULT_TYPE_B_M}");
                if vals.is_empty() {
                    rows.push(ResultRow::new(cfg, sc.to_string(), params, name).with_note("all replicates failed"));
                    continue;
                }
                for (stat, v) in [("median", stats::median(&vals)), ("iqr", stats::iqr(&vals)), ("mean", stats::mean(&vals))] {
                    let mut row = ResultRow::new(cfg, sc.to_string(), params.clone(), &format!("{name}_{stat}")).scalar(v);
                    row.replicates = vals.len();
                    if failures > 0 {
                        row = row.with_note(format!("{failures} replicate(s) failed"));
                    }
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- output

pub const CSV_HEADER: [&str; 10] =
    ["schema_version", "experiment", "scenario", "params", "metric", "value", "std_error", "replicates", "reference", "note"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.experiment.clone(),
            r.scenario.clone(),
            r.params.clone(),
            r.metric.clone(),
            opt(r.value),
            opt(r.std_error),
            r.replicates.to_string(),
            opt(r.reference),
            r.note.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    schema_version: u32,
    config: &'a ExperimentConfig,
    rows: &'a [ResultRow],
}

pub fn write_json<W: Write>(cfg: &ExperimentConfig, rows: &[ResultRow], mut writer: W) -> Result<()> {
    let doc = JsonDoc { schema_version: SCHEMA_VERSION, config: cfg, rows };
    serde_json::to_writer_pretty(&mut writer, &doc).map_err(|e| Error::Io(e.to_string()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_parse() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("table3".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(ExperimentId::Table1);
        assert_eq!(c.replicates(), DESK_TABLE_REPS);
        c.full = true;
        assert_eq!(c.replicates(), FULL_TABLE_REPS);
        assert_eq!(ExperimentConfig::new(ExperimentId::Table4).replicates(), DESK_SIZE_REPS);
        c.level = 1.5;
        assert!(c.validate().is_err());
        c.level = 0.05;
        c.reps = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn table2_small_n_is_exact() {
        let mut c = ExperimentConfig::new(ExperimentId::Table2);
        c.n = Some(200);
        let rows = run_experiment(&c, None).unwrap();
        for r in rows.iter().filter(|r| r.metric == "I") {
            assert!((r.value.unwrap() - 1.0).abs() < 1e-9);
        }
        assert_eq!(rows.len(), 16);
    }

    #[test]
    fn fig1_is_monotone() {
        let mut c = ExperimentConfig::new(ExperimentId::Fig1);
        c.sigmas = vec![1.0];
        let rows = run_experiment(&c, None).unwrap();
        let vals: Vec<f64> = rows.iter().map(|r| r.value.unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(vals[0], 0.0);
        assert_eq!(*vals.last().unwrap(), 1.0);
    }

    #[test]
    fn outputs_are_deterministic() {
        let mut c = ExperimentConfig::new(ExperimentId::Table1);
        c.reps = Some(3);
        c.n = Some(30);
        let a = run_experiment(&c, None).unwrap();
        let b = run_experiment(&c, None).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&a, &mut x).unwrap();
        write_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
        let mut j = Vec::new();
        write_json(&c, &a, &mut j).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&j).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 14 * 6);
    }
}
