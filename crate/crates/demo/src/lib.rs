//! WebAssembly bindings for the static demo page in `www/`.

use cgkdm::experiments::sigma_pair;
use cgkdm::independence::{asymptotic_moments, simulate_null, test_statistic, GammaFit};
use cgkdm::stats::{mean, variance};
use cgkdm::{estimate, hermite_coeffs, mv_spearman_rho2, rank_transform, sample_scenario, Bandwidth, Scenario, TiePolicy};
use wasm_bindgen::prelude::*;

fn js_err(e: cgkdm::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Population measure of a bivariate normal on `points` equally spaced
/// correlations in `[0, 1]`. Returns `[rho_0, I_0, rho_1, I_1, ...]`.
#[wasm_bindgen]
pub fn bvn_curve(sigma: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let series = hermite_coeffs(Bandwidth::new(sigma).map_err(js_err)?, 60).map_err(js_err)?;
    let points = points.max(2);
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let rho = k as f64 / (points - 1) as f64;
        out.push(rho);
        out.push(series.evaluate(rho).map_err(js_err)?);
    }
    Ok(out)
}

/// Bandwidths suggested for dimension `d`: `[small, large]`.
#[wasm_bindgen]
pub fn suggested_sigmas(d: usize) -> Vec<f64> {
    let (a, b) = sigma_pair(d);
    vec![a, b]
}

/// One scenario sample and its statistics.
#[wasm_bindgen]
pub struct ScenarioResult {
    estimate: f64,
    rho2: f64,
    statistic: f64,
    p_value: f64,
    points: Vec<f64>,
}

#[wasm_bindgen]
impl ScenarioResult {
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> f64 {
        self.estimate
    }
    #[wasm_bindgen(getter)]
    pub fn rho2(&self) -> f64 {
        self.rho2
    }
    /// The test statistic `T`.
    #[wasm_bindgen(getter)]
    pub fn statistic(&self) -> f64 {
        self.statistic
    }
    /// Asymptotic gamma p-value.
    #[wasm_bindgen(getter)]
    pub fn p_value(&self) -> f64 {
        self.p_value
    }
    /// Pseudo-observations of the first two columns, `[u_0, v_0, u_1, v_1, ...]`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

/// Draws `n` points from a scenario such as `bvn:0.5` or `cosine` and
/// evaluates the measure at bandwidth `sigma`.
#[wasm_bindgen]
pub fn scenario_estimate(scenario: &str, n: usize, sigma: f64, seed: u64) -> Result<ScenarioResult, JsError> {
    let sc: Scenario = scenario.parse().map_err(js_err)?;
    let b = Bandwidth::new(sigma).map_err(js_err)?;
    let s = sample_scenario(&sc, n, seed).map_err(js_err)?.with_tie_policy(TiePolicy::Jitter(seed));
    let p = rank_transform(&s).map_err(js_err)?;
    let t = test_statistic(&p, b).map_err(js_err)?.t;
    let m = asymptotic_moments(p.d(), b).map_err(js_err)?;
    let fit = GammaFit::from_moments(m.mean, m.variance).map_err(js_err)?;
    let points = (0..p.n()).flat_map(|i| [p.y(i, 0), p.y(i, 1)]).collect();
    Ok(ScenarioResult {
        estimate: estimate(&p, b).map_err(js_err)?,
        rho2: mv_spearman_rho2(&p),
        statistic: t,
        p_value: fit.p_value(t),
        points,
    })
}

/// Simulated null distribution of `T` against its gamma fit.
#[wasm_bindgen]
pub struct NullHistogram {
    edges: Vec<f64>,
    density: Vec<f64>,
    gamma_density: Vec<f64>,
    cutoff: f64,
}

#[wasm_bindgen]
impl NullHistogram {
    /// `bins + 1` bin edges.
    pub fn edges(&self) -> Vec<f64> {
        self.edges.clone()
    }
    /// Empirical density per bin.
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
    /// Gamma density averaged over each bin.
    pub fn gamma_density(&self) -> Vec<f64> {
        self.gamma_density.clone()
    }
    /// Gamma 95% cutoff.
    #[wasm_bindgen(getter)]
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

#[wasm_bindgen]
pub fn null_histogram(n: usize, d: usize, sigma: f64, reps: usize, seed: u64, bins: usize) -> Result<NullHistogram, JsError> {
    let b = Bandwidth::new(sigma).map_err(js_err)?;
    let sims = simulate_null(n, d, b, reps, seed).map_err(js_err)?;
    let fit = GammaFit::from_moments(mean(&sims), variance(&sims)).map_err(js_err)?;
    let bins = bins.max(1);
    let hi = sims.iter().copied().fold(0.0, f64::max);
    let width = hi / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &t in &sims {
        counts[((t / width) as usize).min(bins - 1)] += 1;
    }
    let density = counts.iter().map(|&c| c as f64 / (sims.len() as f64 * width)).collect();
    let gamma_density = edges
        .windows(2)
        .map(|w| (fit.cdf(w[1]) - fit.cdf(w[0])) / width)
        .collect();
    Ok(NullHistogram { edges, density, gamma_density, cutoff: fit.cutoff(0.05).map_err(js_err)? })
}
