//! Classical dependence measures used for comparison.

use serde::{Deserialize, Serialize};

use crate::copula::{rank_transform, PseudoSample, Sample};
use crate::error::{Error, Result};
use crate::estimator::{estimate, CenteredGram};
use crate::kernel::Bandwidth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureName {
    Cgkdm,
    Pearson,
    Spearman,
    Kendall,
    Dcor,
    MvSpearmanRho2,
}

impl MeasureName {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureName::Cgkdm => "cgkdm",
            MeasureName::Pearson => "pearson",
            MeasureName::Spearman => "spearman",
            MeasureName::Kendall => "kendall",
            MeasureName::Dcor => "dcor",
            MeasureName::MvSpearmanRho2 => "mv_spearman_rho2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub name: MeasureName,
    pub value: f64,
}

fn require_bivariate(s: &Sample) -> Result<()> {
    if s.d() != 2 {
        return Err(Error::DimNot2(s.d()));
    }
    Ok(())
}

fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance(0));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance(1));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(s: &Sample) -> Result<f64> {
    require_bivariate(s)?;
    correlation(&s.column(0), &s.column(1))
}

/// Pearson correlation of the pseudo-observations.
pub fn spearman(s: &Sample) -> Result<f64> {
    require_bivariate(s)?;
    let p = rank_transform(s)?;
    let x: Vec<f64> = (0..p.n()).map(|i| p.y(i, 0)).collect();
    let y: Vec<f64> = (0..p.n()).map(|i| p.y(i, 1)).collect();
    correlation(&x, &y)
}

/// Tau-a from an `O(n^2)` pair count on ranks.
pub fn kendall(s: &Sample) -> Result<f64> {
    require_bivariate(s)?;
    let p = rank_transform(s)?;
    let n = p.n();
    let mut score: i64 = 0;
    for i in 0..n {
        let (a0, a1) = (p.rank(i, 0) as i64, p.rank(i, 1) as i64);
        for j in i + 1..n {
            score += ((a0 - p.rank(j, 0) as i64) * (a1 - p.rank(j, 1) as i64)).signum();
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

fn double_centered_distances(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut a: Vec<f64> = (0..n * n).map(|k| (x[k / n] - x[k % n]).abs()).collect();
    double_center(&mut a, n);
    a
}

fn double_center(a: &mut [f64], n: usize) {
    let row: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] += grand - row[i] - row[j];
        }
    }
}

fn dcor_from_centered(a: &[f64], b: &[f64]) -> Result<f64> {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    if aa <= 0.0 || bb <= 0.0 {
        return Err(Error::DegenerateSample("a variable has zero distance variance".into()));
    }
    Ok((ab.max(0.0) / (aa * bb).sqrt()).sqrt().min(1.0))
}

/// Sample distance correlation (V-statistic form) of two scalar variables.
pub fn dcor(s: &Sample) -> Result<f64> {
    require_bivariate(s)?;
    dcor_from_centered(&double_centered_distances(&s.column(0)), &double_centered_distances(&s.column(1)))
}

/// `((d+1)/(2^d-(d+1))) * ((2^d/n) sum_i prod_j Y_ij - 1)`.
pub fn mv_spearman_rho2(p: &PseudoSample) -> f64 {
    let d = p.d() as i32;
    let n = p.n() as f64;
    let avg: f64 = (0..p.n()).map(|i| (0..p.d()).map(|j| p.y(i, j)).product::<f64>()).sum::<f64>() / n;
    let two_d = 2f64.powi(d);
    (d as f64 + 1.0) / (two_d - (d as f64 + 1.0)) * (two_d * avg - 1.0)
}

/// `(I_hat, R)` where `R` is a weighted distance correlation of the
/// pseudo-observations built from kernel-induced distances `1 - k`.
pub fn cgkdm_weighted_dcor_check(p: &PseudoSample, b: Bandwidth) -> Result<(f64, f64)> {
    if p.d() != 2 {
        return Err(Error::DimNot2(p.d()));
    }
    let i_hat = estimate(p, b)?;
    let n = p.n();
    let dist = |c: usize| {
        let mut a: Vec<f64> =
            (0..n * n).map(|k| 1.0 - b.kernel_sq((p.y(k / n, c) - p.y(k % n, c)).powi(2))).collect();
        double_center(&mut a, n);
        a
    };
    let r = dcor_from_centered(&dist(0), &dist(1))?;
    Ok((i_hat, r))
}

/// Centered-Gram form of the squared estimate; a third route used in tests.
pub fn centered_gram_squared(p: &PseudoSample, b: Bandwidth) -> Result<f64> {
    Ok(CenteredGram::new(p, b)?.squared_estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::TiePolicy;

    fn pair(x: &[f64], y: &[f64]) -> Sample {
        Sample::from_columns(&[x.to_vec(), y.to_vec()]).unwrap()
    }

    #[test]
    fn perfect_relations() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() + i as f64).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let s = pair(&x, &x);
        assert!((pearson(&s).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&pair(&x, &neg)).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&s).unwrap(), 1.0);
        assert_eq!(kendall(&s).unwrap(), 1.0);
        assert_eq!(kendall(&pair(&x, &neg)).unwrap(), -1.0);
        assert!((dcor(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let c = vec![1.0; 5];
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert!(matches!(pearson(&pair(&x, &c)), Err(Error::ZeroVariance(1))));
        assert!(matches!(kendall(&pair(&x, &c)), Err(Error::TiesPresent { column: 1 })));
        let jit = pair(&x, &c).with_tie_policy(TiePolicy::Jitter(1));
        assert!(kendall(&jit).is_ok());
        assert!(matches!(dcor(&pair(&x, &c)), Err(Error::DegenerateSample(_))));
        let three = Sample::from_columns(&[x.clone(), x.clone(), x]).unwrap();
        assert!(matches!(pearson(&three), Err(Error::DimNot2(3))));
    }

    #[test]
    fn kendall_hand_count() {
        // pairs: (1,2) c, (1,3) c, (2,3) d -> (2 - 1) / 3
        let s = pair(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        assert!((kendall(&s).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rho2_orientation_closed_form() {
        // Comonotone: avg of (i/n)^d
        let p = PseudoSample::comonotone(4, 3);
        let avg = (1.0f64 + 8.0 + 27.0 + 64.0) / 64.0 / 4.0;
        let want = 4.0 / 4.0 * (8.0 * avg - 1.0);
        assert!((mv_spearman_rho2(&p) - want).abs() < 1e-14);
    }

    #[test]
    fn weighted_dcor_route_agrees() {
        let p = PseudoSample::from_ranks(vec![3, 1, 1, 4, 4, 2, 2, 5, 5, 3], 5, 2).unwrap();
        let b = Bandwidth::new(0.8).unwrap();
        let (i, r) = cgkdm_weighted_dcor_check(&p, b).unwrap();
        assert!((i - r).abs() < 1e-10);
        let (i, r) = cgkdm_weighted_dcor_check(&PseudoSample::comonotone(6, 2), b).unwrap();
        assert!((i - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
    }
}
