//! Seeded synthetic data for every experimental scenario.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::copula::Sample;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};

const PSD_TOL: f64 = 1e-10;

/// Symmetric unit-diagonal positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    d: usize,
    /// Row-major `d x d`.
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || values.len() != d * d {
            return Err(Error::InvalidDims(format!("{} entries for a {d}x{d} matrix", values.len())));
        }
        for i in 0..d {
            if (values[i * d + i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("diagonal entry {i} is {}", values[i * d + i])));
            }
            for j in 0..i {
                if (values[i * d + j] - values[j * d + i]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let m = Self { d, values };
        m.cholesky()?;
        Ok(m)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::equicorrelated(d, 0.0)
    }

    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::equicorrelated(2, rho)
    }

    /// All off-diagonal entries equal to `rho`; PSD iff `rho >= -1/(d-1)`.
    pub fn equicorrelated(d: usize, rho: f64) -> Result<Self> {
        let values = (0..d * d).map(|k| if k / d == k % d { 1.0 } else { rho }).collect();
        Self::new(values, d)
    }

    /// `sigma_ij = rho^|i-j|`.
    pub fn autoregressive(d: usize, rho: f64) -> Result<Self> {
        let values = (0..d * d).map(|k| rho.powi((k / d).abs_diff(k % d) as i32)).collect();
        Self::new(values, d)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    /// Lower-triangular factor, row-major. Zero pivots of a singular PSD
    /// matrix give zero columns.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        let d = self.d;
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut pivot = self.values[j * d + j];
            for k in 0..j {
                pivot -= l[j * d + k] * l[j * d + k];
            }
            if pivot < -PSD_TOL {
                return Err(Error::NotPsd);
            }
            if pivot <= PSD_TOL {
                // Remaining entries of this column must vanish for a PSD matrix.
                for i in j + 1..d {
                    let mut s = self.values[i * d + j];
                    for k in 0..j {
                        s -= l[i * d + k] * l[j * d + k];
                    }
                    if s.abs() > 1e-7 {
                        return Err(Error::NotPsd);
                    }
                }
                continue;
            }
            let diag = pivot.sqrt();
            l[j * d + j] = diag;
            for i in j + 1..d {
                let mut s = self.values[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / diag;
            }
        }
        Ok(l)
    }
}

fn mvn_rows(corr: &CorrelationMatrix, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let d = corr.dim();
    let l = corr.cholesky()?;
    let mut out = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for i in 0..d {
            out.push((0..=i).map(|k| l[i * d + k] * z[k]).sum());
        }
    }
    Ok(out)
}

pub fn sample_mvn(corr: &CorrelationMatrix, n: usize, seed: u64) -> Result<Sample> {
    let data = mvn_rows(corr, n, &mut stream_rng(seed, 0))?;
    Sample::new(data, n, corr.dim())
}

/// Multivariate t: normal rows divided by a shared `sqrt(chi2_dof / dof)`.
pub fn sample_mvt(corr: &CorrelationMatrix, dof: u32, n: usize, seed: u64) -> Result<Sample> {
    if dof == 0 {
        return Err(Error::InvalidInput("t distribution needs dof >= 1".into()));
    }
    let d = corr.dim();
    let mut rng = stream_rng(seed, 0);
    let mut data = mvn_rows(corr, n, &mut rng)?;
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    for row in data.chunks_exact_mut(d) {
        let w = (chi.sample(&mut rng) / dof as f64).sqrt();
        row.iter_mut().for_each(|v| *v /= w);
    }
    Sample::new(data, n, d)
}

/// Monotone direction of one coordinate in an orientation pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Up,
    Down,
}

/// Generative recipes used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// Independent standard normals.
    Independent { d: usize },
    Bvn { rho: f64 },
    MvnEquicorrelated { d: usize, rho: f64 },
    MvnAutoregressive { d: usize, rho: f64 },
    /// Equicorrelated multivariate t.
    Mvt { d: usize, rho: f64, dof: u32 },
    /// `X ~ N(0,1)`, `Y = X + N(0, sd 2.3)`.
    LinearNoise,
    /// `X ~ U(-1,1)`, `Y = cos(2 pi X) + U(-0.5, 0.5)`.
    Cosine,
    /// `X_1..X_{d-1} ~ U(-10,10)`, `X_d = sum + U(-1,1)`.
    AdditiveMonotone { d: usize },
    /// `X_1..X_{d-1} ~ U(0,10)`, `X_d = product + U(-1,1)`.
    MultiplicativeMonotone { d: usize },
    /// `X_1..X_{d-1} ~ U(-10,10)`, `X_d = sum of squares + U(-1,1)`.
    Quadratic { d: usize },
    /// `X_j^(i) = +i` or `-i`.
    Orientation(Vec<Orientation>),
    /// Stand-ins for pictorial cases whose recipes are not published.
    Circle,
    Parabola,
    Sine,
    CubicUp,
    NoisyCurveUp,
    NoisyCurveDown,
    ExpDown,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        match self {
            Scenario::Independent { d }
            | Scenario::MvnEquicorrelated { d, .. }
            | Scenario::MvnAutoregressive { d, .. }
            | Scenario::Mvt { d, .. }
            | Scenario::AdditiveMonotone { d }
            | Scenario::MultiplicativeMonotone { d }
            | Scenario::Quadratic { d } => *d,
            Scenario::Orientation(o) => o.len(),
            _ => 2,
        }
    }

    /// True when the recipe is a guess at a pictorial case.
    pub fn is_stand_in(&self) -> bool {
        matches!(
            self,
            Scenario::Circle
                | Scenario::Parabola
                | Scenario::Sine
                | Scenario::CubicUp
                | Scenario::NoisyCurveUp
                | Scenario::NoisyCurveDown
                | Scenario::ExpDown
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Independent { d } => write!(f, "independent:{d}"),
            Scenario::Bvn { rho } => write!(f, "bvn:{rho}"),
            Scenario::MvnEquicorrelated { d, rho } => write!(f, "mvn-equi:{d}:{rho}"),
            Scenario::MvnAutoregressive { d, rho } => write!(f, "mvn-ar:{d}:{rho}"),
            Scenario::Mvt { d, rho, dof } => write!(f, "mvt:{d}:{rho}:{dof}"),
            Scenario::LinearNoise => write!(f, "linear-noise"),
            Scenario::Cosine => write!(f, "cosine"),
            Scenario::AdditiveMonotone { d } => write!(f, "additive:{d}"),
            Scenario::MultiplicativeMonotone { d } => write!(f, "multiplicative:{d}"),
            Scenario::Quadratic { d } => write!(f, "quadratic:{d}"),
            Scenario::Orientation(o) => {
                let s: String = o.iter().map(|x| if *x == Orientation::Up { 'u' } else { 'd' }).collect();
                write!(f, "orientation:{s}")
            }
            Scenario::Circle => write!(f, "circle"),
            Scenario::Parabola => write!(f, "parabola"),
            Scenario::Sine => write!(f, "sine"),
            Scenario::CubicUp => write!(f, "cubic-up"),
            Scenario::NoisyCurveUp => write!(f, "noisy-curve-up"),
            Scenario::NoisyCurveDown => write!(f, "noisy-curve-down"),
            Scenario::ExpDown => write!(f, "exp-down"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Parses the `Display` form, e.g. `bvn:0.5`, `mvn-equi:5:0.2`,
    /// `orientation:uud`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownScenario(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> { parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(unknown) };
        let int = |i: usize| -> Result<usize> { parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(unknown) };
        let arity = |k: usize| if parts.len() == k { Ok(()) } else { Err(unknown()) };
        let sc = match parts[0] {
            "independent" => {
                arity(2)?;
                Scenario::Independent { d: int(1)? }
            }
            "bvn" => {
                arity(2)?;
                Scenario::Bvn { rho: num(1)? }
            }
            "mvn-equi" => {
                arity(3)?;
                Scenario::MvnEquicorrelated { d: int(1)?, rho: num(2)? }
            }
            "mvn-ar" => {
                arity(3)?;
                Scenario::MvnAutoregressive { d: int(1)?, rho: num(2)? }
            }
            "mvt" => {
                arity(4)?;
                Scenario::Mvt { d: int(1)?, rho: num(2)?, dof: int(3)? as u32 }
            }
            "additive" => {
                arity(2)?;
                Scenario::AdditiveMonotone { d: int(1)? }
            }
            "multiplicative" => {
                arity(2)?;
                Scenario::MultiplicativeMonotone { d: int(1)? }
            }
            "quadratic" => {
                arity(2)?;
                Scenario::Quadratic { d: int(1)? }
            }
            "orientation" => {
                arity(2)?;
                let o = parts[1]
                    .chars()
                    .map(|c| match c {
                        'u' | '+' => Ok(Orientation::Up),
                        'd' | '-' => Ok(Orientation::Down),
                        _ => Err(unknown()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Scenario::Orientation(o)
            }
            name => {
                arity(1)?;
                match name {
                    "linear-noise" => Scenario::LinearNoise,
                    "cosine" => Scenario::Cosine,
                    "circle" => Scenario::Circle,
                    "parabola" => Scenario::Parabola,
                    "sine" => Scenario::Sine,
                    "cubic-up" => Scenario::CubicUp,
                    "noisy-curve-up" => Scenario::NoisyCurveUp,
                    "noisy-curve-down" => Scenario::NoisyCurveDown,
                    "exp-down" => Scenario::ExpDown,
                    _ => return Err(unknown()),
                }
            }
        };
        Ok(sc)
    }
}

fn unif(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.sample(Uniform::new(lo, hi).expect("finite bounds"))
}

fn build_rows<F: FnMut(&mut StreamRng, &mut Vec<f64>)>(n: usize, d: usize, seed: u64, mut row: F) -> Result<Sample> {
    let mut rng = stream_rng(seed, 0);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        row(&mut rng, &mut data);
    }
    Sample::new(data, n, d)
}

fn check_dim(d: usize, min: usize) -> Result<()> {
    if d < min {
        Err(Error::InvalidDims(format!("scenario needs d >= {min}, got {d}")))
    } else {
        Ok(())
    }
}

pub fn sample_scenario(sc: &Scenario, n: usize, seed: u64) -> Result<Sample> {
    match sc {
        Scenario::Independent { d } => sample_mvn(&CorrelationMatrix::identity(*d)?, n, seed),
        Scenario::Bvn { rho } => sample_mvn(&CorrelationMatrix::bivariate(*rho)?, n, seed),
        Scenario::MvnEquicorrelated { d, rho } => sample_mvn(&CorrelationMatrix::equicorrelated(*d, *rho)?, n, seed),
        Scenario::MvnAutoregressive { d, rho } => sample_mvn(&CorrelationMatrix::autoregressive(*d, *rho)?, n, seed),
        Scenario::Mvt { d, rho, dof } => sample_mvt(&CorrelationMatrix::equicorrelated(*d, *rho)?, *dof, n, seed),
        Scenario::LinearNoise => build_rows(n, 2, seed, |rng, out| {
            let x: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            out.extend([x, x + 2.3 * e]);
        }),
        Scenario::Cosine => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, -1.0, 1.0);
            out.extend([x, (2.0 * PI * x).cos() + unif(rng, -0.5, 0.5)]);
        }),
        Scenario::AdditiveMonotone { d } => {
            check_dim(*d, 2)?;
            build_rows(n, *d, seed, |rng, out| {
                let xs: Vec<f64> = (0..d - 1).map(|_| unif(rng, -10.0, 10.0)).collect();
                let last = xs.iter().sum::<f64>() + unif(rng, -1.0, 1.0);
                out.extend(xs);
                out.push(last);
            })
        }
        Scenario::MultiplicativeMonotone { d } => {
            check_dim(*d, 2)?;
            build_rows(n, *d, seed, |rng, out| {
                let xs: Vec<f64> = (0..d - 1).map(|_| unif(rng, 0.0, 10.0)).collect();
                let last = xs.iter().product::<f64>() + unif(rng, -1.0, 1.0);
                out.extend(xs);
                out.push(last);
            })
        }
        Scenario::Quadratic { d } => {
            check_dim(*d, 2)?;
            build_rows(n, *d, seed, |rng, out| {
                let xs: Vec<f64> = (0..d - 1).map(|_| unif(rng, -10.0, 10.0)).collect();
                let last = xs.iter().map(|x| x * x).sum::<f64>() + unif(rng, -1.0, 1.0);
                out.extend(xs);
                out.push(last);
            })
        }
        Scenario::Orientation(o) => {
            check_dim(o.len(), 2)?;
            let mut data = Vec::with_capacity(n * o.len());
            for i in 1..=n {
                data.extend(o.iter().map(|s| if *s == Orientation::Up { i as f64 } else { -(i as f64) }));
            }
            Sample::new(data, n, o.len())
        }
        Scenario::Circle => build_rows(n, 2, seed, |rng, out| {
            let t = unif(rng, 0.0, 2.0 * PI);
            out.extend([t.cos() + 0.05 * rng.sample::<f64, _>(StandardNormal), t.sin() + 0.05 * rng.sample::<f64, _>(StandardNormal)]);
        }),
        Scenario::Parabola => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, -1.0, 1.0);
            out.extend([x, x * x + unif(rng, -0.1, 0.1)]);
        }),
        Scenario::Sine => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, 0.0, 1.0);
            out.extend([x, (4.0 * PI * x).sin() + unif(rng, -0.2, 0.2)]);
        }),
        Scenario::CubicUp => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, -1.0, 1.0);
            out.extend([x, x.powi(3) + x]);
        }),
        Scenario::NoisyCurveUp => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, 0.0, 1.0);
            out.extend([x, x.sqrt() + unif(rng, -0.1, 0.1)]);
        }),
        Scenario::NoisyCurveDown => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, 0.0, 1.0);
            out.extend([x, -(x * x) + unif(rng, -0.1, 0.1)]);
        }),
        Scenario::ExpDown => build_rows(n, 2, seed, |rng, out| {
            let x = unif(rng, 0.0, 1.0);
            out.extend([x, (-3.0 * x).exp()]);
        }),
    }
}
