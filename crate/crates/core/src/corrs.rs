//! Correlated stick-breaking prior on mixture labels with Pólya-Gamma
//! augmentation.

use log::debug;
use rand::Rng;

use crate::dist::{sample_inverse_gamma, sample_log_categorical, sample_polya_gamma, std_normal};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymmetricMatrix};
use crate::model::{Component, MediationModel};
use crate::trace::{McmcConfig, PosteriorTrace};

/// Logits are clamped to this magnitude before the logistic map.
pub const LOGIT_CLAMP: f64 = 35.0;

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mixing probabilities from three stick-breaking logits.
pub fn stick_probs(b: [f64; 3]) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut rest = 1.0;
    for k in 0..3 {
        let v = expit(b[k].clamp(-LOGIT_CLAMP, LOGIT_CLAMP));
        out[k] = rest * v;
        rest *= 1.0 - v;
    }
    out[3] = rest;
    out
}

/// Log mixing probabilities, computed without forming the probabilities.
pub fn stick_log_probs(b: [f64; 3]) -> [f64; 4] {
    // log expit(x) = -log(1 + e^-x)
    let log_expit = |x: f64| -> f64 {
        if x >= 0.0 {
            -(-x).exp().ln_1p()
        } else {
            x - x.exp().ln_1p()
        }
    };
    let mut out = [0.0; 4];
    let mut rest = 0.0;
    for k in 0..3 {
        let x = b[k].clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        out[k] = rest + log_expit(x);
        rest += log_expit(-x);
    }
    out[3] = rest;
    out
}

/// Inverse of [`stick_probs`].
pub fn stick_logits(pi: [f64; 4]) -> [f64; 3] {
    let mut b = [0.0; 3];
    let mut rest = 1.0;
    for k in 0..3 {
        let v = pi[k] / rest;
        b[k] = (v / (1.0 - v)).ln();
        rest -= pi[k];
    }
    b
}

/// Binomial counts of the three sticks: `n_k = 1 - sum_{k' < k} I(gamma = k')`.
pub fn stick_counts(g: Component) -> [u32; 3] {
    match g {
        Component::Active => [1, 0, 0],
        Component::OutcomeOnly => [1, 1, 0],
        Component::ExposureOnly | Component::Null => [1, 1, 1],
    }
}

/// `kappa_k = I(gamma = k) - n_k / 2`.
pub fn stick_kappa(g: Component) -> [f64; 3] {
    let n = stick_counts(g);
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = (g.index() == k) as u8 as f64 - 0.5 * n[k] as f64;
    }
    out
}

/// Fixed correlation structure with its factorization and inverse.
#[derive(Clone, Debug)]
pub struct CorrStructure {
    d: SymmetricMatrix,
    chol: Cholesky,
    /// Row-major `D^-1`.
    d_inv: Vec<f64>,
    /// `D^-1 1`.
    d_inv_one: Vec<f64>,
}

impl CorrStructure {
    pub fn new(d: SymmetricMatrix) -> Result<Self> {
        let chol = d.cholesky()?.clone();
        let d_inv = chol.inverse();
        let p = d.dim();
        let d_inv_one = (0..p)
            .map(|i| d_inv[i * p..(i + 1) * p].iter().sum())
            .collect();
        Ok(CorrStructure {
            d,
            chol,
            d_inv,
            d_inv_one,
        })
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.d
    }

    pub fn p(&self) -> usize {
        self.d.dim()
    }

    /// `x' D^-1 x`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        self.chol.inv_quad_form(x)
    }
}

/// Latent state of the correlated prior.
#[derive(Clone, Debug)]
pub struct CorrSState {
    /// `b[k][j]`: logit of stick `k` at mediator `j`.
    pub b: [Vec<f64>; 3],
    pub sigma_d2: [f64; 3],
    pub a: [f64; 3],
    pub w: [Vec<f64>; 3],
    /// Number of logits that hit the clamp when mapped to probabilities.
    pub clamp_events: u64,
}

impl CorrSState {
    /// Logits at the prior mean, unit scale, zero auxiliaries.
    pub fn at_prior_mean(p: usize, a: [f64; 3]) -> Self {
        CorrSState {
            b: [vec![a[0]; p], vec![a[1]; p], vec![a[2]; p]],
            sigma_d2: [1.0; 3],
            a,
            w: [vec![0.0; p], vec![0.0; p], vec![0.0; p]],
            clamp_events: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.b[0].len()
    }

    pub fn logits(&self, j: usize) -> [f64; 3] {
        [self.b[0][j], self.b[1][j], self.b[2][j]]
    }

    pub fn pi(&self, j: usize) -> [f64; 4] {
        stick_probs(self.logits(j))
    }

    fn count_clamps(&mut self) {
        let n = self
            .b
            .iter()
            .flatten()
            .filter(|x| x.abs() > LOGIT_CLAMP)
            .count();
        self.clamp_events += n as u64;
    }
}

pub fn update_pg_auxiliaries<R: Rng + ?Sized>(
    gamma: &[Component],
    st: &mut CorrSState,
    rng: &mut R,
) -> Result<()> {
    for (j, &g) in gamma.iter().enumerate() {
        let n = stick_counts(g);
        for k in 0..3 {
            st.w[k][j] = sample_polya_gamma(n[k], st.b[k][j], rng)?;
        }
    }
    Ok(())
}

/// Joint draw of the `p` logits of stick `k` from their Gaussian conditional
/// with precision `diag(w_k) + D^-1 / sigma_d2[k]`.
pub fn update_b_block<R: Rng + ?Sized>(
    k: usize,
    gamma: &[Component],
    st: &mut CorrSState,
    structure: &CorrStructure,
    rng: &mut R,
) -> Result<()> {
    let p = st.p();
    let scale = 1.0 / st.sigma_d2[k];
    let mut q: Vec<f64> = structure.d_inv.iter().map(|x| x * scale).collect();
    for j in 0..p {
        q[j * p + j] += st.w[k][j];
    }
    let chol = Cholesky::factor(&q, p).map_err(|pivot| {
        Error::IllConditioned(format!(
            "logit block {} precision lost positive definiteness at pivot {pivot} (sigma_d2 = {:.3e}, max w = {:.3e})",
            k + 1,
            st.sigma_d2[k],
            st.w[k].iter().cloned().fold(0.0, f64::max)
        ))
    })?;
    let prior_shift = st.a[k] * scale;
    let mut mean: Vec<f64> = gamma
        .iter()
        .enumerate()
        .map(|(j, &g)| stick_kappa(g)[k] + prior_shift * structure.d_inv_one[j])
        .collect();
    chol.solve_in_place(&mut mean);
    let mut z: Vec<f64> = (0..p).map(|_| std_normal(rng)).collect();
    chol.solve_upper_in_place(&mut z);
    for j in 0..p {
        st.b[k][j] = mean[j] + z[j];
    }
    Ok(())
}

pub fn update_sigma_d2<R: Rng + ?Sized>(
    k: usize,
    st: &mut CorrSState,
    structure: &CorrStructure,
    shape: f64,
    rate: f64,
    rng: &mut R,
) -> Result<f64> {
    let p = st.p();
    let diff: Vec<f64> = st.b[k].iter().map(|x| x - st.a[k]).collect();
    let quad = structure.inv_quad_form(&diff);
    let v = sample_inverse_gamma(shape + 0.5 * p as f64, rate + 0.5 * quad, rng)?;
    st.sigma_d2[k] = v;
    Ok(v)
}

/// Draws the label of mediator `j` from its mixing weights and data log
/// marginals.
pub fn corrs_label_update<R: Rng + ?Sized>(
    st: &CorrSState,
    j: usize,
    log_marginals: &[f64; 4],
    rng: &mut R,
) -> Component {
    let lp = stick_log_probs(st.logits(j));
    let w: Vec<f64> = (0..4).map(|k| lp[k] + log_marginals[k]).collect();
    Component::from_index(sample_log_categorical(&w, rng))
}

/// Full GMM-CorrS chain from all-null labels and logits at their prior mean.
pub fn corrs_fit<R: Rng + ?Sized>(
    model: &MediationModel,
    d: &SymmetricMatrix,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorTrace> {
    config.validate()?;
    let p = model.p();
    if d.dim() != p {
        return Err(Error::Dimension(format!(
            "structure matrix is {}x{} but the data have {p} mediators",
            d.dim(),
            d.dim()
        )));
    }
    let structure = CorrStructure::new(d.clone())?;
    let h = model.hyper();
    let mut s = model.initial_state();
    let mut st = CorrSState::at_prior_mean(p, h.corrs_prior_mean);
    let mut trace = PosteriorTrace::new(p);
    for it in 0..config.iterations {
        update_pg_auxiliaries(s.gamma(), &mut st, rng)?;
        for k in 0..3 {
            update_b_block(k, s.gamma(), &mut st, &structure, rng)?;
        }
        st.count_clamps();
        for k in 0..3 {
            update_sigma_d2(
                k,
                &mut st,
                &structure,
                h.corrs_ig_shape,
                h.corrs_ig_rate,
                rng,
            )?;
        }
        for j in 0..p {
            let lp = stick_log_probs(st.logits(j));
            model.update_site(&mut s, j, &lp, rng);
        }
        model.update_shared(&mut s, rng)?;
        if it % 50 == 49 || it + 1 == config.iterations {
            model.check_finite(&mut s, it)?;
            if st.b.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Divergence {
                    iteration: it,
                    detail: "non-finite logit".into(),
                });
            }
        }
        if config.keeps(it) {
            trace.push(&s);
            for k in 0..3 {
                trace.push_extra(&format!("sigma_d2_{}", k + 1), st.sigma_d2[k]);
            }
        }
    }
    trace
        .diagnostics
        .insert("logit_clamp_events".into(), st.clamp_events as f64);
    debug!("corrs chain done: {} clamp events", st.clamp_events);
    Ok(trace)
}

/// Mean of the logit block conditional, for tests and diagnostics.
pub fn b_block_mean(
    k: usize,
    gamma: &[Component],
    st: &CorrSState,
    structure: &CorrStructure,
) -> Vec<f64> {
    let p = st.p();
    let scale = 1.0 / st.sigma_d2[k];
    let mut q: Vec<f64> = structure.d_inv.iter().map(|x| x * scale).collect();
    for j in 0..p {
        q[j * p + j] += st.w[k][j];
    }
    let chol = Cholesky::factor(&q, p).expect("precision is positive definite");
    let rhs: Vec<f64> = gamma
        .iter()
        .enumerate()
        .map(|(j, &g)| stick_kappa(g)[k] + st.a[k] * scale * structure.d_inv_one[j])
        .collect();
    chol.solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;

    #[test]
    fn stick_examples() {
        assert_eq!(stick_probs([0.0; 3]), [0.5, 0.25, 0.125, 0.125]);
        let s = stick_probs([30.0, 0.0, 0.0]);
        assert!(s[0] > 1.0 - 1e-12 && s[3] < 1e-12);
        let lp = stick_log_probs([1.3, -2.0, 0.4]);
        let pp = stick_probs([1.3, -2.0, 0.4]);
        for k in 0..4 {
            assert!((lp[k].exp() - pp[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn counts_and_kappa() {
        assert_eq!(stick_counts(Component::Active), [1, 0, 0]);
        assert_eq!(stick_counts(Component::Null), [1, 1, 1]);
        assert_eq!(stick_kappa(Component::OutcomeOnly), [-0.5, 0.5, 0.0]);
        assert_eq!(stick_kappa(Component::Null), [-0.5, -0.5, -0.5]);
    }

    #[test]
    fn pg_zero_where_stick_consumed() {
        let mut rng = RngStream::new(1);
        let mut st = CorrSState::at_prior_mean(2, [0.0; 3]);
        update_pg_auxiliaries(&[Component::Active, Component::Null], &mut st, &mut rng).unwrap();
        assert_eq!((st.w[1][0], st.w[2][0]), (0.0, 0.0));
        assert!(st.w[0][0] > 0.0);
        assert!((0..3).all(|k| st.w[k][1] > 0.0));
    }

    #[test]
    fn scalar_block_matches_formula() {
        let d = SymmetricMatrix::identity(1);
        let s = CorrStructure::new(d).unwrap();
        let mut st = CorrSState::at_prior_mean(1, [-1.0, 0.0, 0.0]);
        st.w[0][0] = 0.7;
        st.sigma_d2[0] = 2.0;
        let m = b_block_mean(0, &[Component::Active], &st, &s);
        let expect = (0.5 + (-1.0) / 2.0) / (0.7 + 0.5);
        assert!((m[0] - expect).abs() < 1e-12);
    }
}
