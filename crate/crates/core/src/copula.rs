//! Pseudo-observations and the discrete reference distributions built on the
//! rank grid `{1/n, ..., 1}^d`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Default ceiling on materialized atoms for the product grid.
pub const DEFAULT_ATOM_BUDGET: u64 = 1_000_000;

/// How ties in a column are handled before ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TiePolicy {
    /// Tied values are rejected.
    #[default]
    Error,
    /// Tied values are ordered by a seeded random key, which is equivalent to
    /// an infinitesimal random perturbation of the data.
    Jitter(u64),
}

/// An `n x d` matrix of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    d: usize,
    tie_policy: TiePolicy,
}

impl Sample {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 || d < 2 {
            return Err(Error::InvalidDims(format!("sample needs n >= 2 and d >= 2, got n={n}, d={d}")));
        }
        if data.len() != n * d {
            return Err(Error::InvalidDims(format!("expected {} values for {n}x{d}, got {}", n * d, data.len())));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / d, col: pos % d });
        }
        Ok(Self { data, n, d, tie_policy: TiePolicy::Error })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidDims(format!("row {bad} has {} columns, expected {d}", rows[bad].len())));
        }
        Self::new(rows.concat(), n, d)
    }

    /// Builds a sample from columns of equal length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let d = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidDims("columns have different lengths".into()));
        }
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(cols.iter().map(|c| c[i]));
        }
        Self::new(data, n, d)
    }

    pub fn with_tie_policy(mut self, policy: TiePolicy) -> Self {
        self.tie_policy = policy;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tie_policy(&self) -> TiePolicy {
        self.tie_policy
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Applies `f(column, value)` to every entry.
    pub fn map_columns<F: Fn(usize, f64) -> f64>(&self, f: F) -> Result<Self> {
        let data = self.data.iter().enumerate().map(|(k, &v)| f(k % self.d, v)).collect();
        Ok(Self::new(data, self.n, self.d)?.with_tie_policy(self.tie_policy))
    }

    /// Reorders columns so that output column `j` is input column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.d)?;
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            data.extend(perm.iter().map(|&j| self.get(i, j)));
        }
        Ok(Self { data, n: self.n, d: self.d, tie_policy: self.tie_policy })
    }

    /// Appends one observation.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.d {
            return Err(Error::DimMismatch(row.len(), self.d));
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: self.n, col });
        }
        self.data.extend_from_slice(row);
        self.n += 1;
        Ok(())
    }

    /// First `m` rows.
    pub fn head(&self, m: usize) -> Result<Self> {
        let m = m.min(self.n);
        Ok(Self::new(self.data[..m * self.d].to_vec(), m, self.d)?.with_tie_policy(self.tie_policy))
    }
}

fn check_permutation(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d {
        return Err(Error::DimMismatch(perm.len(), d));
    }
    for &j in perm {
        if j >= d || seen[j] {
            return Err(Error::InvalidInput(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Normalized ranks of a sample: entry `(i, j)` is `rank_ij / n`.
///
/// Ranks are stored as integers in `1..=n`, row-major; every column is a
/// permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoSample {
    ranks: Vec<u32>,
    n: usize,
    d: usize,
}

impl PseudoSample {
    /// Validates that every column of `ranks` is a permutation of `1..=n`.
    pub fn from_ranks(ranks: Vec<u32>, n: usize, d: usize) -> Result<Self> {
        if n < 1 || d < 1 || ranks.len() != n * d {
            return Err(Error::InvalidDims(format!("{} ranks for {n}x{d}", ranks.len())));
        }
        for j in 0..d {
            let mut seen = vec![false; n];
            for i in 0..n {
                let r = ranks[i * d + j] as usize;
                if r == 0 || r > n || seen[r - 1] {
                    return Err(Error::InvalidInput(format!("column {j} is not a permutation of 1..={n}")));
                }
                seen[r - 1] = true;
            }
        }
        Ok(Self { ranks, n, d })
    }

    pub(crate) fn from_ranks_unchecked(ranks: Vec<u32>, n: usize, d: usize) -> Self {
        debug_assert_eq!(ranks.len(), n * d);
        Self { ranks, n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.d + j]
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn rank_row(&self, i: usize) -> &[u32] {
        &self.ranks[i * self.d..(i + 1) * self.d]
    }

    /// Normalized value `rank / n` in `(0, 1]`.
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.rank(i, j) as f64 / self.n as f64
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.d).map(|j| self.y(i, j)).collect()
    }

    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.d)?;
        let mut ranks = Vec::with_capacity(self.ranks.len());
        for i in 0..self.n {
            ranks.extend(perm.iter().map(|&j| self.rank(i, j)));
        }
        Ok(Self { ranks, n: self.n, d: self.d })
    }

    /// The sub-sample made of the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.d) {
            return Err(Error::DimMismatch(bad, self.d));
        }
        let mut ranks = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            ranks.extend(cols.iter().map(|&j| self.rank(i, j)));
        }
        Ok(Self { ranks, n: self.n, d: cols.len() })
    }

    /// Comonotone pseudo-sample `(i/n, ..., i/n)`.
    pub fn comonotone(n: usize, d: usize) -> Self {
        let ranks = (1..=n as u32).flat_map(|r| std::iter::repeat_n(r, d)).collect();
        Self { ranks, n, d }
    }
}

/// Replaces each column by its ranks divided by `n`.
pub fn rank_transform(s: &Sample) -> Result<PseudoSample> {
    let (n, d) = (s.n(), s.d());
    let mut ranks = vec![0u32; n * d];
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..d {
        let col = s.column(j);
        match s.tie_policy() {
            TiePolicy::Error => {
                order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
                if order.windows(2).any(|w| col[w[0]] == col[w[1]]) {
                    return Err(Error::TiesPresent { column: j });
                }
            }
            TiePolicy::Jitter(seed) => {
                let mut key: Vec<u32> = (0..n as u32).collect();
                key.shuffle(&mut stream_rng(seed, j as u64));
                order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(key[a].cmp(&key[b])));
            }
        }
        for (r, &i) in order.iter().enumerate() {
            ranks[i * d + j] = r as u32 + 1;
        }
        order.sort_unstable();
    }
    Ok(PseudoSample::from_ranks_unchecked(ranks, n, d))
}

/// Weighted atoms on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || atoms.len() != weights.len() * dim {
            return Err(Error::InvalidDims(format!(
                "{} coordinates for {} weights of dimension {dim}",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput("atom coordinate outside [0,1]".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights, dim })
    }

    fn uniform(atoms: Vec<f64>, dim: usize) -> Self {
        let m = atoms.len() / dim;
        Self { atoms, weights: vec![1.0 / m as f64; m], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }
}

/// `C_n`: one atom of weight `1/n` at every pseudo-observation.
pub fn empirical_copula(p: &PseudoSample) -> DiscreteDistribution {
    let atoms = (0..p.n()).flat_map(|i| p.row(i)).collect();
    DiscreteDistribution::uniform(atoms, p.d())
}

/// `M_n`: the diagonal points `(i/n, ..., i/n)`.
pub fn max_copula_grid(n: usize, d: usize) -> Result<DiscreteDistribution> {
    if n < 1 || d < 2 {
        return Err(Error::InvalidDims(format!("grid needs n >= 1 and d >= 2, got n={n}, d={d}")));
    }
    let atoms = (1..=n).flat_map(|i| std::iter::repeat_n(i as f64 / n as f64, d)).collect();
    Ok(DiscreteDistribution::uniform(atoms, d))
}

/// `Pi_n`: the full lattice `{1/n, ..., 1}^d`, refused beyond `budget` atoms.
pub fn product_copula_grid(n: usize, d: usize, budget: u64) -> Result<DiscreteDistribution> {
    if n < 1 || d < 2 {
        return Err(Error::InvalidDims(format!("grid needs n >= 1 and d >= 2, got n={n}, d={d}")));
    }
    let atoms_needed = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if atoms_needed > budget as u128 {
        return Err(Error::BudgetExceeded { atoms: atoms_needed, budget });
    }
    let m = atoms_needed as usize;
    let mut atoms = Vec::with_capacity(m * d);
    let mut idx = vec![1usize; d];
    for _ in 0..m {
        atoms.extend(idx.iter().map(|&i| i as f64 / n as f64));
        // odometer increment, last coordinate fastest
        for slot in idx.iter_mut().rev() {
            if *slot < n {
                *slot += 1;
                break;
            }
            *slot = 1;
        }
    }
    Ok(DiscreteDistribution::uniform(atoms, d))
}
