//! Random-variate kernels shared by every sampler.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn std_exp<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)`, stable in the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Mills-ratio asymptotics
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI * var).ln() + d * d / var)
}

/// Draws an index with probability proportional to `exp(log_weights[k])`.
/// Entries equal to `-inf` are never chosen.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "no admissible category: {log_weights:?}");
    let mut total = 0.0;
    let mut w = [0.0f64; 8];
    let mut wv;
    let weights: &mut [f64] = if log_weights.len() <= 8 {
        &mut w[..log_weights.len()]
    } else {
        wv = vec![0.0; log_weights.len()];
        &mut wv
    };
    for (wk, &lk) in weights.iter_mut().zip(log_weights) {
        *wk = (lk - max).exp();
        total += *wk;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, &wk) in weights.iter().enumerate() {
        if wk > 0.0 {
            last = k;
            if u < wk {
                return k;
            }
            u -= wk;
        }
    }
    last
}

/// Normalized probabilities from log weights.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gamma requires positive shape and rate, got ({shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidParameter(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(g.sample(rng))
}

/// Inverse-gamma draw with density ∝ x^{-shape-1} exp(-rate / x).
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inverse-gamma requires positive shape and rate, got ({shape}, {rate})"
        )));
    }
    loop {
        let g = sample_gamma(shape, rate, rng)?;
        // gamma can underflow to zero for tiny shapes
        if g > 0.0 {
            return Ok(1.0 / g);
        }
    }
}

pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut g = alpha
        .iter()
        .map(|&a| sample_gamma(a, 1.0, rng))
        .collect::<Result<Vec<_>>>()?;
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= s);
    Ok(g)
}

/// Multivariate normal draw. Positive semidefinite covariances are accepted;
/// the cached Cholesky factor is used whenever it exists.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &[f64],
    covariance: &SymmetricMatrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = covariance.dim();
    if mean.len() != d {
        return Err(Error::Dimension(format!(
            "mean has length {}, covariance is {d}x{d}",
            mean.len()
        )));
    }
    let z: Vec<f64> = (0..d).map(|_| std_normal(rng)).collect();
    if let Ok(chol) = covariance.cholesky() {
        let lz = chol.mul_lower(&z);
        return Ok(mean.iter().zip(&lz).map(|(m, e)| m + e).collect());
    }
    let (vals, vecs) = covariance.eigen();
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * scale {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let mut out = mean.to_vec();
    for k in 0..d {
        let s = vals[k].max(0.0).sqrt() * z[k];
        if s != 0.0 {
            for (i, o) in out.iter_mut().enumerate() {
                *o += vecs[(i, k)] * s;
            }
        }
    }
    Ok(out)
}

/// Inverse-Wishart draw with scale `Ψ` and `dof` degrees of freedom
/// (mean `Ψ / (dof - d - 1)`), via the Bartlett decomposition.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    scale: &SymmetricMatrix,
    dof: f64,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    let d = scale.dim();
    if !(dof > d as f64 - 1.0) {
        return Err(Error::InvalidParameter(format!(
            "inverse-Wishart needs dof > {}, got {dof}",
            d as f64 - 1.0
        )));
    }
    let chol = scale.cholesky()?;
    // Bartlett factor A of a Wishart(I, dof) draw
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi2 = 2.0 * sample_gamma(0.5 * (dof - i as f64), 1.0, rng)?;
        a[(i, i)] = chi2.sqrt();
        for j in 0..i {
            a[(i, j)] = std_normal(rng);
        }
    }
    // X = (L A^{-T}) (L A^{-T})^T, with L L^T = Ψ
    let l = DMatrix::from_fn(d, d, |i, j| if j <= i { chol.get(i, j) } else { 0.0 });
    // T Aᵀ = L  <=>  A Tᵀ = Lᵀ
    let t = a
        .solve_lower_triangular(&l.transpose())
        .ok_or_else(|| Error::IllConditioned("singular Bartlett factor".into()))?
        .transpose();
    let x = &t * t.transpose();
    SymmetricMatrix::symmetrized(&x)
}

const PG_TRUNC: f64 = 0.64;

/// Pólya-Gamma PG(count, tilt) for `count ∈ {0, 1}`.
///
/// PG(1, c) uses the exact alternating-series rejection sampler on the
/// tilted Jacobi density (truncated exponential / truncated inverse-Gaussian
/// proposal mixture).
pub fn sample_polya_gamma<R: Rng + ?Sized>(count: u32, tilt: f64, rng: &mut R) -> Result<f64> {
    match count {
        0 => Ok(0.0),
        1 => {
            if !tilt.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "Pólya-Gamma tilt must be finite, got {tilt}"
                )));
            }
            Ok(polya_gamma_one(tilt, rng))
        }
        b => Err(Error::InvalidParameter(format!(
            "Pólya-Gamma count {b} not supported (only 0 and 1)"
        ))),
    }
}

fn polya_gamma_one<R: Rng + ?Sized>(tilt: f64, rng: &mut R) -> f64 {
    let z = 0.5 * tilt.abs();
    let t = PG_TRUNC;
    let k = PI * PI / 8.0 + 0.5 * z * z;
    let log_p = (PI / (2.0 * k)).ln() - k * t;
    let log_q = std::f64::consts::LN_2 - z + log_inv_gauss_cdf(t, z);
    let p_exp = 1.0 / (1.0 + (log_q - log_p).exp());
    loop {
        let x = if rng.random::<f64>() < p_exp {
            t + std_exp(rng) / k
        } else {
            truncated_inv_gauss(z, t, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

fn series_coef(n: u32, x: f64) -> f64 {
    let h = n as f64 + 0.5;
    let kk = h * PI;
    if x > PG_TRUNC {
        kk * (-0.5 * kk * kk * x).exp()
    } else if x > 0.0 {
        (-1.5 * (0.5 * PI * x).ln() + kk.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// ln P(X < t) for X ~ inverse-Gaussian(mean 1/z, shape 1).
fn log_inv_gauss_cdf(t: f64, z: f64) -> f64 {
    let rt = (1.0 / t).sqrt();
    let b = rt * (t * z - 1.0);
    let a = -rt * (t * z + 1.0);
    let l1 = log_norm_cdf(b);
    let l2 = 2.0 * z + log_norm_cdf(a);
    let m = l1.max(l2);
    m + ((l1 - m).exp() + (l2 - m).exp()).ln()
}

/// Inverse-Gaussian(mean 1/z, shape 1) truncated to (0, t).
fn truncated_inv_gauss<R: Rng + ?Sized>(z: f64, t: f64, rng: &mut R) -> f64 {
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > t {
        loop {
            let (mut e1, mut e2) = (std_exp(rng), std_exp(rng));
            while e1 * e1 > 2.0 * e2 / t {
                e1 = std_exp(rng);
                e2 = std_exp(rng);
            }
            let x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        loop {
            let y = std_normal(rng);
            let y = y * y;
            let my = mu * y;
            let mut x = mu + 0.5 * mu * my - 0.5 * mu * (4.0 * my + my * my).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

/// E[PG(1, c)] = tanh(c/2) / (2c), with limit 1/4 at c = 0.
pub fn polya_gamma_mean(tilt: f64) -> f64 {
    if tilt.abs() < 1e-8 {
        0.25 - tilt * tilt / 48.0
    } else {
        (0.5 * tilt).tanh() / (2.0 * tilt)
    }
}

/// Var[PG(1, c)] = (sinh(c) - c) / (4 c³ cosh²(c/2)), limit 1/24 at c = 0.
pub fn polya_gamma_variance(tilt: f64) -> f64 {
    let c = tilt.abs();
    if c < 1e-3 {
        1.0 / 24.0 - c * c / 60.0
    } else {
        let ch = (0.5 * c).cosh();
        (c.sinh() - c) / (4.0 * c * c * c * ch * ch)
    }
}
