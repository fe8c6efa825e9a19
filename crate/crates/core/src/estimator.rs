//! Rank-based estimator of the dependence measure and the comparison
//! estimators built on uniform reference draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::PseudoSample;
use crate::error::{Error, Result};
use crate::kernel::Bandwidth;
use crate::rng::stream_rng;

/// Default number of uniform reference points for the Type B estimator.
pub const DEFAULT_TYPE_B_M: usize = 1000;

/// Rows per block in the pairwise loop.
const ROW_BLOCK: usize = 48;

/// The five kernel sums of the closed-form estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTerms {
    pub s1: f64,
    pub s2: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl EstimatorTerms {
    /// `gamma^2(C_n, Pi_n)`, clamped at zero.
    pub fn numerator(&self) -> f64 {
        (self.s1 - 2.0 * self.s2 + self.v3).max(0.0)
    }

    /// `gamma^2(M_n, Pi_n)`.
    pub fn denominator(&self) -> f64 {
        self.v1 - 2.0 * self.v2 + self.v3
    }

    pub fn squared_estimate(&self) -> f64 {
        self.numerator() / self.denominator()
    }
}

/// Fixed-point units per 1.0 for order-independent accumulation of terms in
/// `[0, 1]`.
const FIXED_ONE: f64 = (1u64 << 51) as f64;

/// `round(v * 2^51)` for `v` in `[0, 1]`: adding 2 puts `v` in the binade
/// `[2, 4)` whose mantissa step is `2^-51`.
#[inline]
fn to_fixed(v: f64) -> u128 {
    ((v + 2.0).to_bits() - 2.0f64.to_bits()) as u128
}

fn from_fixed(acc: u128) -> f64 {
    acc as f64 / FIXED_ONE
}

/// `exp(-s / (2 n^2 sigma^2))` for an integer squared rank distance `s`,
/// as the product of two table entries split on the bits of `s`.
pub(crate) struct SquaredDistanceKernel {
    shift: u32,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl SquaredDistanceKernel {
    fn new(n: usize, d: usize, b: Bandwidth) -> Self {
        let max = (d as u64) * (n as u64 - 1).pow(2);
        let shift = (64 - max.leading_zeros()).div_ceil(2);
        let c = 1.0 / (2.0 * (n as f64).powi(2) * b.sigma().powi(2));
        let lo = (0..1u64 << shift).map(|r| (-(r as f64) * c).exp()).collect();
        let hi = (0..=(max >> shift)).map(|q| (-((q << shift) as f64) * c).exp()).collect();
        Self { shift, hi, lo }
    }

    #[inline]
    fn eval(&self, s: u64) -> f64 {
        self.hi[(s >> self.shift) as usize] * self.lo[(s & ((1 << self.shift) - 1)) as usize]
    }
}

/// Lookup tables and data-free terms shared by every sample of one
/// `(n, d, sigma)`.
pub(crate) struct RankTables {
    /// `e1[m] = exp(-(m/n)^2 / (2 sigma^2))`.
    pub e1: Vec<f64>,
    /// `rs[r-1] = (1/n) sum_l e1[|r - l|]`, the kernel mean against the grid,
    /// exactly symmetric under `r -> n + 1 - r`.
    pub rs: Vec<f64>,
    kernel: SquaredDistanceKernel,
    reference: (f64, f64, f64),
}

impl RankTables {
    pub fn new(n: usize, d: usize, b: Bandwidth) -> Self {
        let nf = n as f64;
        let e1: Vec<f64> = (0..n).map(|m| b.kernel_sq((m as f64 / nf).powi(2))).collect();
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &e in &e1 {
            acc += e;
            prefix.push(acc);
        }
        let mut rs: Vec<f64> = (1..=n).map(|r| (prefix[r - 1] + prefix[n - r] - e1[0]) / nf).collect();
        for r in 0..n / 2 {
            rs[n - 1 - r] = rs[r];
        }
        let kernel = SquaredDistanceKernel::new(n, d, b);
        let mut t = Self { e1, rs, kernel, reference: (0.0, 0.0, 0.0) };
        t.reference = t.reference_terms(n, d);
        t
    }

    /// `(v1, v2, v3)`, computed with the same routines as `s1` and `s2` so
    /// that monotone data reproduce them exactly.
    fn reference_terms(&self, n: usize, d: usize) -> (f64, f64, f64) {
        let nf = n as f64;
        let term = |m: usize| if d == 2 { self.e1[m] * self.e1[m] } else { self.kernel.eval(d as u64 * (m as u64).pow(2)) };
        let diag: u128 = (1..n).map(|m| (n - m) as u128 * to_fixed(term(m))).sum();
        let v1 = 2.0 * from_fixed(diag) / (nf * nf) + 1.0 / nf;
        let v2 = from_fixed(self.rs.iter().map(|&r| to_fixed(row_product(&mut vec![r; d]))).sum()) / nf;
        let v3 = (self.rs.iter().sum::<f64>() / nf).powi(d as i32);
        (v1, v2, v3)
    }
}

fn check_dims(p: &PseudoSample) -> Result<()> {
    if p.n() < 2 || p.d() < 2 {
        return Err(Error::InvalidInput(format!("estimator needs n >= 2 and d >= 2, got n={}, d={}", p.n(), p.d())));
    }
    Ok(())
}

/// Product of the factors in ascending order.
fn row_product(factors: &mut [f64]) -> f64 {
    factors.sort_unstable_by(f64::total_cmp);
    factors.iter().product()
}

/// Terms per `u64` partial sum; `8192 * 2^51 = 2^64`.
const FIXED_CHUNK: usize = 8192;

/// `sum_{i<j} k(Y_i, Y_j)`. Each term depends only on the rank distances
/// of the pair and terms are summed in fixed point, so the result is bitwise
/// invariant under row and column permutations and reflections.
fn pair_sum(p: &PseudoSample, t: &RankTables) -> f64 {
    let n = p.n();
    let rest = p.d() - 1;
    // rows in order of their column-0 rank, which makes that rank implicit
    let mut sorted = vec![0u32; n * rest];
    for i in 0..n {
        let row = p.rank_row(i);
        let at = (row[0] as usize - 1) * rest;
        sorted[at..at + rest].copy_from_slice(&row[1..]);
    }
    let row_total = |i: usize| -> u128 {
        let ri = &sorted[i * rest..(i + 1) * rest];
        let tail = &sorted[(i + 1) * rest..];
        let mut total = 0u128;
        for (c, chunk) in tail.chunks(FIXED_CHUNK * rest).enumerate() {
            let base = c * FIXED_CHUNK + 1;
            let part: u64 = if rest == 1 {
                // two factors commute exactly, so the separable form is safe
                let a = ri[0];
                chunk.iter().enumerate().map(|(k, &b)| to_fixed(t.e1[base + k] * t.e1[a.abs_diff(b) as usize]) as u64).sum()
            } else {
                chunk
                    .chunks_exact(rest)
                    .enumerate()
                    .map(|(k, rj)| {
                        let lead = (base + k) as u64;
                        let s = ri.iter().zip(rj).fold(lead * lead, |acc, (x, y)| acc + u64::from(x.abs_diff(*y)).pow(2));
                        to_fixed(t.kernel.eval(s)) as u64
                    })
                    .sum()
            };
            total += part as u128;
        }
        total
    };
    let block = |start: usize| -> u128 { (start..(start + ROW_BLOCK).min(n)).map(row_total).sum() };
    let starts: Vec<usize> = (0..n).step_by(ROW_BLOCK).collect();
    #[cfg(feature = "parallel")]
    let total: u128 = {
        use rayon::prelude::*;
        starts.par_iter().map(|&s| block(s)).sum()
    };
    #[cfg(not(feature = "parallel"))]
    let total: u128 = starts.iter().map(|&s| block(s)).sum();
    from_fixed(total)
}

pub fn estimator_terms(p: &PseudoSample, b: Bandwidth) -> Result<EstimatorTerms> {
    check_dims(p)?;
    let tables = RankTables::new(p.n(), p.d(), b);
    Ok(terms_with_tables(p, &tables))
}

pub(crate) fn terms_with_tables(p: &PseudoSample, t: &RankTables) -> EstimatorTerms {
    let nf = p.n() as f64;
    let s1 = 2.0 * pair_sum(p, t) / (nf * nf) + 1.0 / nf;
    let mut factors = vec![0.0; p.d()];
    let mut acc = 0u128;
    for i in 0..p.n() {
        for (f, &r) in factors.iter_mut().zip(p.rank_row(i)) {
            *f = t.rs[r as usize - 1];
        }
        acc += to_fixed(row_product(&mut factors));
    }
    let s2 = from_fixed(acc) / nf;
    let (v1, v2, v3) = t.reference;
    EstimatorTerms { s1, s2, v1, v2, v3 }
}

/// `I_hat = sqrt((s1 - 2 s2 + v3) / (v1 - 2 v2 + v3))`.
pub fn estimate(p: &PseudoSample, b: Bandwidth) -> Result<f64> {
    Ok(estimator_terms(p, b)?.squared_estimate().sqrt())
}

/// Double-centered one-dimensional Gram matrices of a bivariate pseudo-sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredGram {
    pub n: usize,
    /// Row-major `n x n`, first coordinate.
    pub v: Vec<f64>,
    /// Row-major `n x n`, second coordinate.
    pub w: Vec<f64>,
}

impl CenteredGram {
    pub fn new(p: &PseudoSample, b: Bandwidth) -> Result<Self> {
        if p.d() != 2 {
            return Err(Error::DimNot2(p.d()));
        }
        check_dims(p)?;
        let n = p.n();
        let t = RankTables::new(n, 2, b);
        let grand = t.rs.iter().sum::<f64>() / n as f64;
        let build = |c: usize| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                let ri = p.rank(i, c);
                for j in 0..n {
                    let rj = p.rank(j, c);
                    m[i * n + j] =
                        t.e1[ri.abs_diff(rj) as usize] - t.rs[ri as usize - 1] - t.rs[rj as usize - 1] + grand;
                }
            }
            m
        };
        Ok(Self { n, v: build(0), w: build(1) })
    }

    /// `sum V W / sqrt(sum V^2 sum W^2)`.
    pub fn squared_estimate(&self) -> f64 {
        let vw: f64 = self.v.iter().zip(&self.w).map(|(a, b)| a * b).sum();
        let vv: f64 = self.v.iter().map(|a| a * a).sum();
        let ww: f64 = self.w.iter().map(|a| a * a).sum();
        (vw / (vv * ww).sqrt()).max(0.0)
    }
}

/// Squared estimate for `d = 2` through the centered Gram matrices.
pub fn estimate_dim2_centered(p: &PseudoSample, b: Bandwidth) -> Result<f64> {
    Ok(CenteredGram::new(p, b)?.squared_estimate())
}

fn uniform_points(count: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..count * d).map(|_| rng.random::<f64>()).collect()
}

fn kern(x: &[f64], y: &[f64], b: Bandwidth) -> f64 {
    b.kernel_sq(x.iter().zip(y).map(|(a, c)| (a - c) * (a - c)).sum())
}

fn pseudo_points(p: &PseudoSample) -> Vec<f64> {
    (0..p.n()).flat_map(|i| p.row(i)).collect()
}

/// Type U comparison estimator with `n` uniform reference draws. Unnormalized
/// and possibly negative.
pub fn estimate_type_u(p: &PseudoSample, b: Bandwidth, seed: u64) -> Result<f64> {
    check_dims(p)?;
    let (n, d) = (p.n(), p.d());
    let y = pseudo_points(p);
    let u = uniform_points(n, d, seed);
    fn row(m: &[f64], d: usize, i: usize) -> &[f64] {
        &m[i * d..(i + 1) * d]
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (yi, yj, ui, uj) = (row(&y, d, i), row(&y, d, j), row(&u, d, i), row(&u, d, j));
            total += kern(yi, yj, b) - kern(yi, uj, b) - kern(yj, ui, b) + kern(ui, uj, b);
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Type B comparison estimator with `m` uniform reference draws, clamped at 0.
pub fn estimate_type_b(p: &PseudoSample, b: Bandwidth, m: usize, seed: u64) -> Result<f64> {
    check_dims(p)?;
    let u = uniform_points(m.max(1), p.d(), seed);
    Ok(type_b_with_reference(p, b, &u, m.max(1)))
}

/// Type B value against explicit reference points (row-major, `m x d`).
pub fn type_b_with_reference(p: &PseudoSample, b: Bandwidth, u: &[f64], m: usize) -> f64 {
    let (n, d) = (p.n(), p.d());
    let y = pseudo_points(p);
    let mean_k = |a: &[f64], na: usize, c: &[f64], nc: usize| {
        let mut s = 0.0;
        for x in a.chunks_exact(d) {
            for z in c.chunks_exact(d) {
                s += kern(x, z, b);
            }
        }
        s / (na * nc) as f64
    };
    let v = mean_k(&y, n, &y, n) - 2.0 * mean_k(&y, n, u, m) + mean_k(u, m, u, m);
    v.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{empirical_copula, max_copula_grid, product_copula_grid, rank_transform, Sample};
    use crate::kernel::gamma_sq;
    use crate::rng::stream_rng;
    use rand::seq::SliceRandom;

    fn bw(s: f64) -> Bandwidth {
        Bandwidth::new(s).unwrap()
    }

    fn random_pseudo(n: usize, d: usize, seed: u64) -> PseudoSample {
        let mut rng = stream_rng(seed, 99);
        let mut ranks = vec![0u32; n * d];
        for c in 0..d {
            let mut col: Vec<u32> = (1..=n as u32).collect();
            col.shuffle(&mut rng);
            for i in 0..n {
                ranks[i * d + c] = col[i];
            }
        }
        PseudoSample::from_ranks(ranks, n, d).unwrap()
    }

    fn oracle_sq(p: &PseudoSample, b: Bandwidth) -> f64 {
        let pi = product_copula_grid(p.n(), p.d(), 1 << 20).unwrap();
        let num = gamma_sq(&empirical_copula(p), &pi, b).unwrap();
        let den = gamma_sq(&max_copula_grid(p.n(), p.d()).unwrap(), &pi, b).unwrap();
        num / den
    }

    #[test]
    fn closed_form_matches_grid_oracle_n6() {
        for seed in 0..5 {
            let p = random_pseudo(6, 2, seed);
            let b = bw(0.5);
            let est = estimate(&p, b).unwrap();
            assert!((est * est - oracle_sq(&p, b)).abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_data_terms_coincide() {
        let p = PseudoSample::comonotone(30, 3);
        let t = estimator_terms(&p, bw(0.8)).unwrap();
        assert!((t.s1 - t.v1).abs() < 1e-13);
        assert!((t.s2 - t.v2).abs() < 1e-13);
        assert!((estimate(&p, bw(0.8)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn n2_comonotone_hand_expansion() {
        // Y = {(1/2,1/2),(1,1)}, sigma = 1
        let p = PseudoSample::comonotone(2, 2);
        let t = estimator_terms(&p, bw(1.0)).unwrap();
        let e = |dsq: f64| (-dsq / 2.0).exp();
        let s1 = 0.5 + 0.5 * e(0.5);
        let m1 = 0.5 * (1.0 + e(0.25));
        assert!((t.s1 - s1).abs() < 1e-15);
        assert!((t.s2 - m1 * m1).abs() < 1e-15);
        assert!((t.v1 - s1).abs() < 1e-15);
        assert!((t.v2 - m1 * m1).abs() < 1e-15);
        assert!((t.v3 - m1 * m1).abs() < 1e-15);
    }

    #[test]
    fn reference_terms_independent_of_data() {
        let a = estimator_terms(&random_pseudo(40, 3, 1), bw(0.6)).unwrap();
        let b = estimator_terms(&random_pseudo(40, 3, 2), bw(0.6)).unwrap();
        assert_eq!((a.v1, a.v2, a.v3), (b.v1, b.v2, b.v3));
        assert!(a.denominator() > 0.0);
    }

    #[test]
    fn rejects_small_inputs() {
        let p = PseudoSample::from_ranks(vec![1, 2, 3], 3, 1).unwrap();
        assert!(matches!(estimate(&p, bw(1.0)), Err(Error::InvalidInput(_))));
        assert!(matches!(estimate_dim2_centered(&PseudoSample::comonotone(5, 3), bw(1.0)), Err(Error::DimNot2(3))));
    }

    #[test]
    fn centered_form_agrees_and_is_centered() {
        let p = random_pseudo(50, 2, 7);
        let b = bw(1.0);
        let g = CenteredGram::new(&p, b).unwrap();
        for i in 0..50 {
            let row: f64 = g.v[i * 50..(i + 1) * 50].iter().sum();
            let col: f64 = (0..50).map(|j| g.w[j * 50 + i]).sum();
            assert!(row.abs() < 1e-9 * 50.0 && col.abs() < 1e-9 * 50.0);
            for j in 0..50 {
                assert_eq!(g.v[i * 50 + j], g.v[j * 50 + i]);
            }
        }
        let e = estimate(&p, b).unwrap();
        assert!((g.squared_estimate() - e * e).abs() < 1e-10);

        let co = PseudoSample::comonotone(5, 2);
        assert!((estimate_dim2_centered(&co, b).unwrap() - 1.0).abs() < 1e-12);
        let anti = rank_transform(&Sample::from_rows(&(0..5).map(|i| vec![i as f64, -(i as f64)]).collect::<Vec<_>>()).unwrap())
            .unwrap();
        assert!((estimate_dim2_centered(&anti, b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comparison_estimators() {
        let co = PseudoSample::comonotone(100, 2);
        let b = bw(1.0);
        for seed in 0..5 {
            let u = estimate_type_u(&co, b, seed).unwrap();
            assert!(u > 0.0 && u < 1.0, "seed {seed}: {u}");
        }
        assert_eq!(estimate_type_u(&co, b, 3).unwrap(), estimate_type_u(&co, b, 3).unwrap());
        let tb = estimate_type_b(&co, b, 200, 3).unwrap();
        assert_eq!(tb, estimate_type_b(&co, b, 200, 3).unwrap());
        assert!(tb > 0.0);

        let p = random_pseudo(10, 2, 4);
        let atoms: Vec<f64> = (0..10).flat_map(|i| p.row(i)).collect();
        assert_eq!(type_b_with_reference(&p, b, &atoms, 10), 0.0);
    }

    #[test]
    fn type_u_can_go_negative_under_independence() {
        let b = bw(1.0);
        let negatives = (0..40).filter(|&s| estimate_type_u(&random_pseudo(30, 2, s), b, s + 1000).unwrap() < 0.0).count();
        assert!(negatives > 0);
    }
}
