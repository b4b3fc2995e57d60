#![allow(dead_code)]

use medcorr::dist::std_normal;
use medcorr::model::MediationDataset;
use rand::Rng;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn se_mean(x: &[f64]) -> f64 {
    (var(x) / x.len() as f64).sqrt()
}

/// Standard error of the sample variance, from the empirical fourth moment.
pub fn se_var(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).sqrt()
}

/// Checks a sample's mean and variance against closed forms, each within
/// `k` standard errors. Returns a description on failure.
pub fn check_moments(name: &str, x: &[f64], mu: f64, sigma2: f64, k: f64) -> Result<(), String> {
    let (m, v) = (mean(x), var(x));
    let (sm, sv) = (se_mean(x), se_var(x));
    let mut msg = String::new();
    if (m - mu).abs() > k * sm {
        msg += &format!("{name}: mean {m:.6} vs {mu:.6} (se {sm:.2e}); ");
    }
    if (v - sigma2).abs() > k * sv {
        msg += &format!("{name}: var {v:.6} vs {sigma2:.6} (se {sv:.2e})");
    }
    if msg.is_empty() {
        Ok(())
    } else {
        Err(msg)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Two-sample KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Small synthetic dataset with given effects and noise, no covariates
/// unless `c_cols` is non-empty.
pub fn synthetic<R: Rng>(
    n: usize,
    beta_m: &[f64],
    alpha_a: &[f64],
    beta_a: f64,
    sigma_e: f64,
    sigma_g: f64,
    c_cols: &[(f64, f64)],
    rng: &mut R,
) -> MediationDataset {
    let p = beta_m.len();
    let q = c_cols.len();
    let a: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let c: Vec<Vec<f64>> = (0..q)
        .map(|_| (0..n).map(|_| std_normal(rng)).collect())
        .collect();
    let mut m = vec![0.0; n * p];
    for j in 0..p {
        for i in 0..n {
            let mut v = a[i] * alpha_a[j] + sigma_g * std_normal(rng);
            for (w, col) in c.iter().enumerate() {
                v += col[i] * c_cols[w].1;
            }
            m[j * n + i] = v;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = a[i] * beta_a + sigma_e * std_normal(rng);
        for j in 0..p {
            v += m[j * n + i] * beta_m[j];
        }
        for (w, col) in c.iter().enumerate() {
            v += col[i] * c_cols[w].0;
        }
        y[i] = v;
    }
    MediationDataset::new(a, m, y, c.concat(), q).unwrap()
}

/// Exact posterior over all `4^p` label configurations with every
/// non-label parameter fixed and effect pairs integrated out jointly.
/// Configuration index: labels (0-based) as base-4 digits, mediator 0 most
/// significant. `log_prior` receives 0-based labels.
#[allow(clippy::too_many_arguments)]
pub fn exact_label_posterior(
    d: &MediationDataset,
    beta_a: f64,
    se2: f64,
    sg2: f64,
    v1: [[f64; 2]; 2],
    v2: f64,
    v3: f64,
    log_prior: impl Fn(&[usize]) -> f64,
) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let (n, p) = (d.n(), d.p());
    let a = d.exposure();
    let y = d.outcome();
    let mut h = DMatrix::<f64>::zeros(2 * p, 2 * p);
    let mut b = DVector::<f64>::zeros(2 * p);
    for j in 0..p {
        let mj = d.mediator(j);
        for k in 0..p {
            let mk = d.mediator(k);
            h[(2 * j, 2 * k)] = (0..n).map(|i| mj[i] * mk[i]).sum::<f64>() / se2;
        }
        h[(2 * j + 1, 2 * j + 1)] = a.iter().map(|x| x * x).sum::<f64>() / sg2;
        b[2 * j] = (0..n).map(|i| (y[i] - a[i] * beta_a) * mj[i]).sum::<f64>() / se2;
        b[2 * j + 1] = (0..n).map(|i| mj[i] * a[i]).sum::<f64>() / sg2;
    }
    let total = 4usize.pow(p as u32);
    let mut logp = Vec::with_capacity(total);
    for code in 0..total {
        let labels: Vec<usize> = (0..p)
            .map(|j| (code / 4usize.pow((p - 1 - j) as u32)) % 4)
            .collect();
        let mut idx = Vec::new();
        let mut cov = DMatrix::<f64>::zeros(2 * p, 2 * p);
        for (j, &l) in labels.iter().enumerate() {
            match l {
                0 => {
                    idx.extend([2 * j, 2 * j + 1]);
                    for r in 0..2 {
                        for c in 0..2 {
                            cov[(2 * j + r, 2 * j + c)] = v1[r][c];
                        }
                    }
                }
                1 => {
                    idx.push(2 * j);
                    cov[(2 * j, 2 * j)] = v2;
                }
                2 => {
                    idx.push(2 * j + 1);
                    cov[(2 * j + 1, 2 * j + 1)] = v3;
                }
                _ => {}
            }
        }
        let mut lp = log_prior(&labels);
        let k = idx.len();
        if k > 0 {
            let sel = |m: &DMatrix<f64>| DMatrix::from_fn(k, k, |r, c| m[(idx[r], idx[c])]);
            let sig = sel(&cov);
            let post = sel(&h) + sig.clone().try_inverse().unwrap();
            let bs = DVector::from_fn(k, |r, _| b[idx[r]]);
            let quad = (bs.transpose() * post.clone().try_inverse().unwrap() * &bs)[(0, 0)];
            lp += -0.5 * sig.determinant().ln() - 0.5 * post.determinant().ln() + 0.5 * quad;
        }
        logp.push(lp);
    }
    normalize_log(&logp)
}

pub fn normalize_log(logp: &[f64]) -> Vec<f64> {
    let mx = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// Per-node label marginals from a distribution over `4^p` configurations.
pub fn node_marginals(joint: &[f64], p: usize) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; p];
    for (code, &pr) in joint.iter().enumerate() {
        for (j, m) in out.iter_mut().enumerate() {
            m[(code / 4usize.pow((p - 1 - j) as u32)) % 4] += pr;
        }
    }
    out
}

pub fn config_index(labels: &[usize]) -> usize {
    labels.iter().fold(0, |acc, &l| acc * 4 + l)
}

/// Exact joint of a Potts field with fixed per-node data terms, by
/// enumeration of all `4^p` configurations.
pub fn potts_exact_joint(
    edges: &[(usize, usize)],
    p: usize,
    theta0: [f64; 4],
    theta1: [f64; 4],
    data: &[[f64; 4]],
) -> Vec<f64> {
    let total = 4usize.pow(p as u32);
    let mut logp = Vec::with_capacity(total);
    for code in 0..total {
        let labels: Vec<usize> = (0..p)
            .map(|j| (code / 4usize.pow((p - 1 - j) as u32)) % 4)
            .collect();
        let mut lp = 0.0;
        for (j, &l) in labels.iter().enumerate() {
            lp += theta0[l] + data[j][l];
        }
        for &(i, j) in edges {
            if labels[i] == labels[j] {
                lp += theta1[labels[i]];
            }
        }
        logp.push(lp);
    }
    normalize_log(&logp)
}

/// Largest per-node total-variation distance between label marginals.
pub fn max_marginal_tv(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| total_variation(x, y))
        .fold(0.0, f64::max)
}

/// Marginal posterior mean and sd of each logit `b[k][j]` (p <= 2) under
/// the un-augmented stick-breaking logistic likelihood with prior
/// `N(a_k 1, sigma2[k] D)`, by grid integration over `[-lim, lim]^p`.
pub fn stick_posterior_grid(
    labels: &[medcorr::model::Component],
    d: &[[f64; 2]; 2],
    a: [f64; 3],
    sigma2: [f64; 3],
    lim: f64,
    steps: usize,
) -> [Vec<(f64, f64)>; 3] {
    use medcorr::corrs::stick_counts;
    let p = labels.len();
    assert!(p == 1 || p == 2);
    // log expit(t), stable on both tails
    let log_expit = |t: f64| {
        if t >= 0.0 {
            -(-t).exp().ln_1p()
        } else {
            t - t.exp().ln_1p()
        }
    };
    let log_lik = |x: f64, y: u32, n: u32| y as f64 * log_expit(x) + (n - y) as f64 * log_expit(-x);
    let h = 2.0 * lim / steps as f64;
    let grid: Vec<f64> = (0..=steps).map(|i| -lim + i as f64 * h).collect();
    let mut out: [Vec<(f64, f64)>; 3] = Default::default();
    for k in 0..3 {
        let (y, n): (Vec<u32>, Vec<u32>) = labels
            .iter()
            .map(|&g| ((g.index() == k) as u32, stick_counts(g)[k]))
            .unzip();
        let s = sigma2[k];
        let mut acc = vec![(0.0f64, 0.0f64, 0.0f64); p];
        let mut z = 0.0;
        if p == 1 {
            for &x in &grid {
                let w = (-0.5 * (x - a[k]).powi(2) / (s * d[0][0]) + log_lik(x, y[0], n[0])).exp();
                z += w;
                acc[0].0 += w * x;
                acc[0].1 += w * x * x;
            }
        } else {
            let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
            let inv = [
                [d[1][1] / det, -d[0][1] / det],
                [-d[1][0] / det, d[0][0] / det],
            ];
            for &x0 in &grid {
                for &x1 in &grid {
                    let (u0, u1) = (x0 - a[k], x1 - a[k]);
                    let q = inv[0][0] * u0 * u0 + 2.0 * inv[0][1] * u0 * u1 + inv[1][1] * u1 * u1;
                    let w =
                        (-0.5 * q / s + log_lik(x0, y[0], n[0]) + log_lik(x1, y[1], n[1])).exp();
                    z += w;
                    acc[0].0 += w * x0;
                    acc[0].1 += w * x0 * x0;
                    acc[1].0 += w * x1;
                    acc[1].1 += w * x1 * x1;
                }
            }
        }
        out[k] = acc
            .iter()
            .map(|&(m1, m2, _)| {
                let m = m1 / z;
                (m, (m2 / z - m * m).sqrt())
            })
            .collect();
    }
    out
}

/// Same marginals by the augmented Gibbs sampler with `sigma_d2` held fixed.
pub fn stick_posterior_gibbs(
    labels: &[medcorr::model::Component],
    d: &[[f64; 2]; 2],
    a: [f64; 3],
    sigma2: [f64; 3],
    sweeps: usize,
    seed: u64,
) -> [Vec<(f64, f64)>; 3] {
    use medcorr::corrs::{update_b_block, update_pg_auxiliaries, CorrSState, CorrStructure};
    let p = labels.len();
    let vals: Vec<f64> = (0..p).flat_map(|i| (0..p).map(move |j| d[i][j])).collect();
    let structure =
        CorrStructure::new(medcorr::SymmetricMatrix::from_row_major(p, &vals).unwrap()).unwrap();
    let mut st = CorrSState::at_prior_mean(p, a);
    st.sigma_d2 = sigma2;
    let mut rng = medcorr::RngStream::new(seed);
    let mut draws: [Vec<Vec<f64>>; 3] = Default::default();
    for k in 0..3 {
        draws[k] = vec![Vec::with_capacity(sweeps); p];
    }
    for it in 0..sweeps + 1000 {
        update_pg_auxiliaries(labels, &mut st, &mut rng).unwrap();
        for k in 0..3 {
            update_b_block(k, labels, &mut st, &structure, &mut rng).unwrap();
            if it >= 1000 {
                for j in 0..p {
                    draws[k][j].push(st.b[k][j]);
                }
            }
        }
    }
    let mut out: [Vec<(f64, f64)>; 3] = Default::default();
    for k in 0..3 {
        out[k] = draws[k].iter().map(|x| (mean(x), var(x).sqrt())).collect();
    }
    out
}

/// Largest selection `{locfdr < c}` over every candidate cutoff whose mean
/// local FDR is below `target`, by checking each cutoff independently.
pub fn locfdr_brute_force(lf: &[f64], target: f64) -> Vec<usize> {
    let mut cands: Vec<f64> = lf.to_vec();
    cands.push(f64::INFINITY);
    let mut best: Vec<usize> = Vec::new();
    for &c in &cands {
        let sel: Vec<usize> = (0..lf.len()).filter(|&j| lf[j] < c).collect();
        if sel.is_empty() {
            continue;
        }
        let m = sel.iter().map(|&j| lf[j]).sum::<f64>() / sel.len() as f64;
        if m < target && sel.len() > best.len() {
            best = sel;
        }
    }
    best
}

/// Local FDR values mixing exact ties, zeros and spread values, with a target.
pub fn random_locfdr_case<R: Rng>(rng: &mut R) -> (Vec<f64>, f64) {
    let p = rng.random_range(1..60);
    let lf = (0..p)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => (rng.random_range(0..10) as f64) / 10.0,
            _ => rng.random::<f64>().powi(3),
        })
        .collect();
    (lf, rng.random_range(0.01..0.5))
}
