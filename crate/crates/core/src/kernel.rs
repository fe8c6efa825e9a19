//! Gaussian kernel on the copula cube and its analytic constants.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erf;

use crate::copula::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Default absolute tolerance for the one-dimensional quadrature of `lambda^d`.
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-10;

/// Kernel scale `sigma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self(sigma))
        } else {
            Err(Error::InvalidBandwidth(sigma))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }

    /// `sigma * factor`, used for the `sigma / sqrt(d)` style rescalings.
    pub fn scaled(self, factor: f64) -> Result<Self> {
        Self::new(self.0 * factor)
    }

    /// `exp(-t^2 / (2 sigma^2))` for a squared distance `t^2`.
    #[inline]
    pub fn kernel_sq(self, dist_sq: f64) -> f64 {
        (-dist_sq / (2.0 * self.0 * self.0)).exp()
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Bandwidth> for f64 {
    fn from(b: Bandwidth) -> f64 {
        b.0
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// `k_sigma(x, y) = exp(-|x - y|^2 / (2 sigma^2))`.
pub fn gauss_kernel(x: &[f64], y: &[f64], b: Bandwidth) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch(x.len(), y.len()));
    }
    Ok(b.kernel_sq(sq_dist(x, y)))
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `kappa(sigma)`: mean of the one-dimensional kernel over two independent
/// uniforms.
pub fn kappa(b: Bandwidth) -> f64 {
    let s = b.sigma();
    if s >= 4.0 {
        // Moment series: E(U-V)^{2k} = 2/((2k+1)(2k+2)).
        let z = 1.0 / (2.0 * s * s);
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..40u32 {
            let kf = k as f64;
            sum += term * 2.0 / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
            term *= -z / (kf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        return sum;
    }
    (2.0 * PI).sqrt() * s * erf(1.0 / (s * SQRT_2)) + 2.0 * s * s * (-1.0 / (2.0 * s * s)).exp_m1()
}

/// `lambda(x, sigma) = int_0^1 exp(-(x - v)^2 / (2 sigma^2)) dv`.
pub fn lambda_fn(x: f64, b: Bandwidth) -> f64 {
    let s = b.sigma();
    let c = s * SQRT_2;
    (PI / 2.0).sqrt() * s * (erf(x / c) + erf((1.0 - x) / c))
}

/// `int_0^1 lambda(u, sigma)^d du`, integrating over `[0, 1/2]` and doubling.
pub fn lambda_power_integral(b: Bandwidth, d: u32, tol: f64) -> Result<f64> {
    let d = d as i32;
    let r = integrate(|u| lambda_fn(u, b).powi(d), 0.0, 0.5, tol / 2.0)?;
    Ok(2.0 * r.value)
}

/// `C_{sigma,d}` together with the inputs it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizerTable {
    pub sigma: Bandwidth,
    pub d: usize,
    pub c_sigma_d: f64,
    pub quadrature_tol: f64,
}

impl NormalizerTable {
    /// `gamma^2(M, Pi)`.
    pub fn inverse(&self) -> f64 {
        1.0 / self.c_sigma_d
    }
}

pub fn normalizer(b: Bandwidth, d: usize) -> Result<NormalizerTable> {
    normalizer_with_tol(b, d, DEFAULT_QUADRATURE_TOL)
}

pub fn normalizer_with_tol(b: Bandwidth, d: usize, tol: f64) -> Result<NormalizerTable> {
    if d < 2 {
        return Err(Error::InvalidDims(format!("normalizer needs d >= 2, got {d}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("quadrature tolerance must be positive, got {tol}")));
    }
    let k_diag = kappa(b.scaled(1.0 / (d as f64).sqrt())?);
    let k_prod = kappa(b).powi(d as i32);
    let cross = lambda_power_integral(b, d as u32, tol)?;
    let inv = k_diag + k_prod - 2.0 * cross;
    if !(inv > 0.0) {
        return Err(Error::NonPositiveNormalizer(inv));
    }
    Ok(NormalizerTable { sigma: b, d, c_sigma_d: 1.0 / inv, quadrature_tol: tol })
}

/// Squared kernel distance between two discrete distributions.
pub fn gamma_sq(p: &DiscreteDistribution, q: &DiscreteDistribution, b: Bandwidth) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimMismatch(p.dim(), q.dim()));
    }
    let v = self_term(p, b) - 2.0 * cross_term(p, q, b) + self_term(q, b);
    Ok(v.max(0.0))
}

/// `sum_i sum_j w_i w_j k(x_i, x_j)`.
pub fn self_term(p: &DiscreteDistribution, b: Bandwidth) -> f64 {
    cross_term(p, p, b)
}

/// `sum_i sum_j w_i v_j k(x_i, y_j)`.
pub fn cross_term(p: &DiscreteDistribution, q: &DiscreteDistribution, b: Bandwidth) -> f64 {
    p.iter()
        .map(|(x, w)| w * q.iter().map(|(y, v)| v * b.kernel_sq(sq_dist(x, y))).sum::<f64>())
        .sum()
}
