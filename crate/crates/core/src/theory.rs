//! Population values of the dependence measure: Monte Carlo for arbitrary
//! copula samplers and the Hermite series for the bivariate normal copula.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::kernel::{kappa, normalizer, Bandwidth};
use crate::quadrature::composite_gauss_legendre;
use crate::rng::{stream_rng, StreamRng};
use crate::special::{norm_cdf, norm_pdf};

/// Number of independent streams used for batch-means standard errors.
pub const MC_BATCHES: usize = 100;

/// Default Hermite truncation order.
pub const DEFAULT_HERMITE_K: usize = 100;

/// Absolute tolerance on the squared measure for the truncated series.
pub const HERMITE_TAIL_TOL: f64 = 1e-8;

const PLANE_HALF_WIDTH: f64 = 12.0;
const PLANE_PANELS: usize = 24;
const PLANE_NODES: usize = 64;

/// Draws points of a copula on `[0,1]^d`.
pub trait CopulaSampler: Send + Sync {
    fn dim(&self) -> usize;
    /// Fills `out` (length `dim`) with one draw.
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]);
}

/// Independence copula.
#[derive(Debug, Clone, Copy)]
pub struct IndependentSampler(pub usize);

impl CopulaSampler for IndependentSampler {
    fn dim(&self) -> usize {
        self.0
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        out.iter_mut().for_each(|u| *u = rng.random());
    }
}

/// Upper Frechet bound `(U, ..., U)`.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalSampler(pub usize);

impl CopulaSampler for DiagonalSampler {
    fn dim(&self) -> usize {
        self.0
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let u = rng.random();
        out.iter_mut().for_each(|x| *x = u);
    }
}

/// Density `2 * 1[prod(u_i - 1/2) >= 0]`: every proper sub-vector is
/// independent uniform, the full vector is not.
#[derive(Debug, Clone, Copy)]
pub struct SignPatternSampler(pub usize);

impl CopulaSampler for SignPatternSampler {
    fn dim(&self) -> usize {
        self.0
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        out.iter_mut().for_each(|u| *u = rng.random());
        let sign: f64 = out.iter().map(|u| u - 0.5).product();
        if sign < 0.0 {
            out[0] = 1.0 - out[0];
        }
    }
}

/// Gaussian copula: correlated normals pushed through `Phi`.
#[derive(Debug, Clone)]
pub struct GaussianCopulaSampler {
    chol: Vec<f64>,
    d: usize,
}

impl GaussianCopulaSampler {
    pub fn new(corr: &CorrelationMatrix) -> Result<Self> {
        Ok(Self { chol: corr.cholesky()?, d: corr.dim() })
    }

    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::new(&CorrelationMatrix::bivariate(rho)?)
    }
}

impl CopulaSampler for GaussianCopulaSampler {
    fn dim(&self) -> usize {
        self.d
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..self.d {
            let x: f64 = (0..=i).map(|k| self.chol[i * self.d + k] * z[k]).sum();
            out[i] = norm_cdf(x);
        }
    }
}

/// `alpha * C_a + (1 - alpha) * C_b`, drawn by a coin flip.
pub struct MixtureSampler {
    pub a: Box<dyn CopulaSampler>,
    pub b: Box<dyn CopulaSampler>,
    pub alpha: f64,
}

impl MixtureSampler {
    pub fn new(a: Box<dyn CopulaSampler>, b: Box<dyn CopulaSampler>, alpha: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimMismatch(a.dim(), b.dim()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("mixture weight {alpha} outside [0,1]")));
        }
        Ok(Self { a, b, alpha })
    }
}

impl CopulaSampler for MixtureSampler {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        if rng.random::<f64>() < self.alpha {
            self.a.draw(rng, out)
        } else {
            self.b.draw(rng, out)
        }
    }
}

/// Marginal copula of a subset of coordinates.
pub struct MarginalSampler {
    inner: Box<dyn CopulaSampler>,
    cols: Vec<usize>,
}

impl MarginalSampler {
    pub fn new(inner: Box<dyn CopulaSampler>, cols: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= inner.dim()) {
            return Err(Error::DimMismatch(bad, inner.dim()));
        }
        Ok(Self { inner, cols })
    }
}

impl CopulaSampler for MarginalSampler {
    fn dim(&self) -> usize {
        self.cols.len()
    }
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let mut full = vec![0.0; self.inner.dim()];
        self.inner.draw(rng, &mut full);
        for (o, &c) in out.iter_mut().zip(&self.cols) {
            *o = full[c];
        }
    }
}

/// Monte Carlo mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMean {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Monte Carlo of `gamma^2(C, Pi)` from `reps` independent quadruples
/// `(S, S', T, T')` with `S, S' ~ C` and `T, T' ~ Pi`.
pub fn kernel_distance_mc(sampler: &dyn CopulaSampler, b: Bandwidth, reps: usize, seed: u64) -> Result<McMean> {
    if reps == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let d = sampler.dim();
    let batches = MC_BATCHES.min(reps);
    let size = |k: usize| reps / batches + usize::from(k < reps % batches);
    let run = |k: usize| -> Result<(f64, usize)> {
        let mut rng = stream_rng(seed, k as u64);
        let (mut s, mut s2, mut t, mut t2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut acc = 0.0;
        let m = size(k);
        for _ in 0..m {
            sampler.draw(&mut rng, &mut s);
            sampler.draw(&mut rng, &mut s2);
            if let Some(&bad) = s.iter().chain(&s2).find(|u| !(0.0..=1.0).contains(*u)) {
                return Err(Error::SamplerRangeViolation(bad));
            }
            t.iter_mut().chain(t2.iter_mut()).for_each(|u| *u = rng.random());
            let k = |x: &[f64], y: &[f64]| b.kernel_sq(x.iter().zip(y).map(|(a, c)| (a - c) * (a - c)).sum());
            acc += k(&s, &s2) + k(&t, &t2) - k(&s, &t2) - k(&s2, &t);
        }
        Ok((acc, m))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<(f64, usize)>> = {
        use rayon::prelude::*;
        (0..batches).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<(f64, usize)>> = (0..batches).map(run).collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;

    let total: f64 = parts.iter().map(|p| p.0).sum();
    let mean = total / reps as f64;
    let std_error = if batches > 1 {
        let means: Vec<f64> = parts.iter().map(|&(s, m)| s / m as f64).collect();
        let bm = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    } else {
        0.0
    };
    Ok(McMean { mean, std_error, draws: reps })
}

/// Population value from simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    /// Estimate of the measure, `sqrt(max(squared, 0))`.
    pub value: f64,
    /// Standard error of `value`, mapped from the squared scale.
    pub std_error: f64,
    /// Unclamped estimate of the squared measure.
    pub squared: f64,
    pub squared_std_error: f64,
    pub replicates: usize,
    pub seed: u64,
}

pub fn cgkdm_population_mc(
    sampler: &dyn CopulaSampler,
    b: Bandwidth,
    d: usize,
    reps: usize,
    seed: u64,
) -> Result<PopulationEstimate> {
    if sampler.dim() != d {
        return Err(Error::DimMismatch(sampler.dim(), d));
    }
    if reps < 1000 {
        return Err(Error::InvalidInput(format!("population Monte Carlo needs reps >= 1000, got {reps}")));
    }
    let c = normalizer(b, d)?.c_sigma_d;
    let mc = kernel_distance_mc(sampler, b, reps, seed)?;
    let squared = c * mc.mean;
    let squared_std_error = c * mc.std_error;
    let root = |x: f64| x.max(0.0).sqrt();
    Ok(PopulationEstimate {
        value: root(squared),
        std_error: (root(squared + squared_std_error) - root(squared - squared_std_error)) / 2.0,
        squared,
        squared_std_error,
        replicates: reps,
        seed,
    })
}

/// Coefficients `a_ij` of the bivariate normal expansion in normalized
/// probabilists' Hermite polynomials, for `0 <= i, j <= k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteSeries {
    pub sigma: Bandwidth,
    pub k: usize,
    /// Row-major `(k+1) x (k+1)`.
    pub coeffs: Vec<f64>,
    pub c_sigma_2: f64,
    /// `C^{-1} - sum_{1 <= i,j <= k} a_ij`: mass not captured by the truncation.
    pub missing_mass: f64,
}

impl HermiteSeries {
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * (self.k + 1) + j]
    }

    /// Upper bound on the truncation error of the squared measure at `rho`.
    pub fn tail_bound(&self, rho: f64) -> f64 {
        self.c_sigma_2 * self.missing_mass.max(0.0) * rho.abs().powi(self.k as i32 + 2)
    }

    /// Squared measure from the truncated series.
    pub fn squared(&self, rho: f64) -> f64 {
        let r2 = rho * rho;
        // coefficient of rho^{2m} is sum over i + j = 2m, i,j >= 1
        let mut total = 0.0;
        let mut pow = r2;
        for m in 1..=self.k {
            let mut coef = 0.0;
            for i in 1..2 * m {
                let j = 2 * m - i;
                if i <= self.k && j <= self.k {
                    coef += self.a(i, j);
                }
            }
            total += coef * pow;
            pow *= r2;
        }
        self.c_sigma_2 * total
    }

    pub fn evaluate(&self, rho: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!("correlation {rho} outside [-1,1]")));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        if rho.abs() == 1.0 {
            return Ok(1.0);
        }
        let bound = self.tail_bound(rho);
        if bound > HERMITE_TAIL_TOL {
            return Err(Error::TruncationInsufficient { k: self.k, bound, tol: HERMITE_TAIL_TOL });
        }
        Ok(self.squared(rho).clamp(0.0, 1.0).sqrt())
    }
}

/// Normalized Hermite values `h_0(x), ..., h_k(x)`.
pub fn hermite_values(x: f64, k: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(k + 1);
    h.push(1.0);
    if k >= 1 {
        h.push(x);
    }
    for n in 1..k {
        let nf = n as f64;
        let next = (x * h[n] - nf.sqrt() * h[n - 1]) / (nf + 1.0).sqrt();
        h.push(next);
    }
    h
}

pub fn hermite_coeffs(b: Bandwidth, k: usize) -> Result<HermiteSeries> {
    if k < 1 {
        return Err(Error::InvalidInput("Hermite truncation must be at least 1".into()));
    }
    let (x, w) = composite_gauss_legendre(-PLANE_HALF_WIDTH, PLANE_HALF_WIDTH, PLANE_PANELS, PLANE_NODES);
    let np = x.len();
    let kp = k + 1;
    // hw[i * np + p] = h_i(x_p) phi(x_p) w_p
    let mut hw = vec![0.0; kp * np];
    for p in 0..np {
        let scale = norm_pdf(x[p]) * w[p];
        for (i, h) in hermite_values(x[p], k).into_iter().enumerate() {
            hw[i * np + p] = h * scale;
        }
    }
    let u: Vec<f64> = x.iter().map(|&v| norm_cdf(v)).collect();
    // m[q * kp + j] = sum_p K(x_q, x_p) hw[j, p]
    let mut m = vec![0.0; np * kp];
    let mut krow = vec![0.0; np];
    for q in 0..np {
        for p in 0..np {
            krow[p] = b.kernel_sq((u[q] - u[p]).powi(2));
        }
        for j in 0..kp {
            let row = &hw[j * np..(j + 1) * np];
            m[q * kp + j] = krow.iter().zip(row).map(|(a, c)| a * c).sum();
        }
    }
    let mut coeffs = vec![0.0; kp * kp];
    for i in 0..kp {
        for j in i..kp {
            let bij: f64 = (0..np).map(|q| hw[i * np + q] * m[q * kp + j]).sum();
            let a = if (i + j) % 2 == 1 { 0.0 } else { bij * bij };
            coeffs[i * kp + j] = a;
            coeffs[j * kp + i] = a;
        }
    }

    let b00 = coeffs[0].sqrt();
    if (b00 - kappa(b)).abs() > 1e-9 {
        return Err(Error::QuadratureFailure(format!("b_00 = {b00} but kappa = {}", kappa(b))));
    }
    let probe = k.min(10);
    let norm: f64 = (0..np).map(|p| hw[probe * np + p] * hermite_values(x[p], probe)[probe]).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::QuadratureFailure(format!("h_{probe} has squared norm {norm}")));
    }
    let table = normalizer(b, 2)?;
    let captured: f64 = (1..kp).flat_map(|i| (1..kp).map(move |j| (i, j))).map(|(i, j)| coeffs[i * kp + j]).sum();
    let missing_mass = table.inverse() - captured;
    if missing_mass < -1e-9 {
        return Err(Error::QuadratureFailure(format!("series mass exceeds normalizer by {}", -missing_mass)));
    }
    Ok(HermiteSeries { sigma: b, k, coeffs, c_sigma_2: table.c_sigma_d, missing_mass })
}

/// Population measure of the bivariate normal copula with correlation `rho`.
pub fn cgkdm_bvn(rho: f64, b: Bandwidth, k: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("correlation {rho} outside [-1,1]")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    if rho.abs() == 1.0 {
        return Ok(1.0);
    }
    hermite_coeffs(b, k)?.evaluate(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(s: f64) -> Bandwidth {
        Bandwidth::new(s).unwrap()
    }

    #[test]
    fn hermite_recurrence_matches_closed_forms() {
        let x: f64 = 0.7;
        let h = hermite_values(x, 4);
        assert!((h[2] - (x * x - 1.0) / 2f64.sqrt()).abs() < 1e-15);
        assert!((h[3] - (x.powi(3) - 3.0 * x) / 6f64.sqrt()).abs() < 1e-15);
        assert!((h[4] - (x.powi(4) - 6.0 * x * x + 3.0) / 24f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermite_orthonormal_on_grid() {
        let (x, w) = composite_gauss_legendre(-PLANE_HALF_WIDTH, PLANE_HALF_WIDTH, PLANE_PANELS, PLANE_NODES);
        let k = 12;
        let mut gram = vec![0.0; (k + 1) * (k + 1)];
        for (xp, wp) in x.iter().zip(&w) {
            let h = hermite_values(*xp, k);
            for i in 0..=k {
                for j in 0..=k {
                    gram[i * (k + 1) + j] += wp * norm_pdf(*xp) * h[i] * h[j];
                }
            }
        }
        for i in 0..=k {
            for j in 0..=k {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * (k + 1) + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_invariants() {
        let s = hermite_coeffs(bw(1.0), 20).unwrap();
        assert!(s.a(1, 2).abs() < 1e-10);
        for i in 0..=20 {
            for j in 0..=20 {
                assert_eq!(s.a(i, j), s.a(j, i));
                assert!(s.a(i, j) >= 0.0 && s.a(i, j) <= 1.0 + 1e-9);
                if (i + j) % 2 == 1 {
                    assert!(s.a(i, j) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reference_values() {
        for (sigma, rho, want) in
            [(1.0, 0.5, 0.477_254_121), (1.0, 0.9, 0.888_442_527), (0.2, 0.5, 0.356_154_864), (0.2, 0.9, 0.790_763_69)]
        {
            let got = cgkdm_bvn(rho, bw(sigma), DEFAULT_HERMITE_K).unwrap();
            assert!((got - want).abs() < 1e-7, "sigma={sigma} rho={rho}: {got}");
        }
    }

    #[test]
    fn endpoints_and_bounds() {
        let b = bw(0.5);
        assert_eq!(cgkdm_bvn(0.0, b, 10).unwrap(), 0.0);
        assert_eq!(cgkdm_bvn(1.0, b, 10).unwrap(), 1.0);
        assert_eq!(cgkdm_bvn(-1.0, b, 10).unwrap(), 1.0);
        assert!(cgkdm_bvn(1.5, b, 10).is_err());
        let s = hermite_coeffs(b, 8).unwrap();
        assert!(matches!(s.evaluate(0.95), Err(Error::TruncationInsufficient { k: 8, .. })));
    }

    #[test]
    fn sign_pattern_sampler_obeys_density() {
        let mut rng = stream_rng(1, 0);
        let s = SignPatternSampler(3);
        let mut u = [0.0; 3];
        for _ in 0..1000 {
            s.draw(&mut rng, &mut u);
            assert!(u.iter().map(|x| x - 0.5).product::<f64>() >= 0.0);
        }
    }

    #[test]
    fn population_mc_endpoints() {
        let b = bw(1.0);
        let ind = cgkdm_population_mc(&IndependentSampler(2), b, 2, 20_000, 4).unwrap();
        assert!(ind.squared.abs() < 3.0 * ind.squared_std_error + 1e-12);
        let diag = cgkdm_population_mc(&DiagonalSampler(2), b, 2, 20_000, 4).unwrap();
        assert!((diag.squared - 1.0).abs() < 3.0 * diag.squared_std_error);
        assert!(cgkdm_population_mc(&DiagonalSampler(2), b, 2, 10, 4).is_err());
        assert!(cgkdm_population_mc(&DiagonalSampler(3), b, 2, 2000, 4).is_err());
    }

    struct OutOfRange;
    impl CopulaSampler for OutOfRange {
        fn dim(&self) -> usize {
            2
        }
        fn draw(&self, _: &mut StreamRng, out: &mut [f64]) {
            out.fill(1.5);
        }
    }

    #[test]
    fn sampler_range_is_checked() {
        assert!(matches!(
            cgkdm_population_mc(&OutOfRange, bw(1.0), 2, 1000, 0),
            Err(Error::SamplerRangeViolation(v)) if v == 1.5
        ));
    }

    #[test]
    fn mc_is_deterministic() {
        let s = GaussianCopulaSampler::bivariate(0.4).unwrap();
        let a = kernel_distance_mc(&s, bw(0.5), 5000, 9).unwrap();
        let b = kernel_distance_mc(&s, bw(0.5), 5000, 9).unwrap();
        assert_eq!(a, b);
    }
}
