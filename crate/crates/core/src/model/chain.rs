use rand::Rng;

use super::data::MediationDataset;
use super::state::{Component, Hyperparameters, MediatorState, MixtureState, OutcomeState};
use crate::dist::{
    sample_inverse_gamma, sample_inverse_wishart, sample_log_categorical, std_normal,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, SymmetricMatrix};

/// All parameters of one chain plus the cached outcome residual
/// `Y - M beta_m - A beta_a - C beta_c`.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub outcome: OutcomeState,
    pub mediator: MediatorState,
    pub mixture: MixtureState,
    resid_y: Vec<f64>,
}

impl ChainState {
    pub fn residual_y(&self) -> &[f64] {
        &self.resid_y
    }

    pub fn gamma(&self) -> &[Component] {
        &self.mixture.gamma
    }

    /// Whether the zero pattern of every effect pair matches its label.
    pub fn labels_consistent(&self) -> bool {
        self.mixture.gamma.iter().enumerate().all(|(j, g)| {
            (g.has_beta() || self.outcome.beta_m[j] == 0.0)
                && (g.has_alpha() || self.mediator.alpha_a[j] == 0.0)
        })
    }
}

/// Data-dependent pieces of the effect-pair conditional: the diagonal
/// precision `W_j` and linear term `w_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTerms {
    pub precision: [f64; 2],
    pub linear: [f64; 2],
}

/// Gaussian conditional of an effect pair under one component, plus the
/// log marginal likelihood ratio against the null component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentPosterior {
    pub log_marginal: f64,
    pub mean: [f64; 2],
    /// Lower Cholesky factor of the covariance: `[l00, l10, l11]`.
    pub chol: [f64; 3],
}

impl ComponentPosterior {
    const NULL: ComponentPosterior = ComponentPosterior {
        log_marginal: 0.0,
        mean: [0.0, 0.0],
        chol: [0.0, 0.0, 0.0],
    };

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let [l00, l10, l11] = self.chol;
        if l00 == 0.0 && l11 == 0.0 {
            return (self.mean[0], self.mean[1]);
        }
        let z0 = if l00 != 0.0 || l10 != 0.0 {
            std_normal(rng)
        } else {
            0.0
        };
        let z1 = if l11 != 0.0 { std_normal(rng) } else { 0.0 };
        (self.mean[0] + l00 * z0, self.mean[1] + l10 * z0 + l11 * z1)
    }

    /// Log density of a pair under this conditional (point masses included
    /// as a zero log-density on their support).
    pub fn log_density(&self, beta: f64, alpha: f64) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let [l00, l10, l11] = self.chol;
        let mut lp = 0.0;
        if l00 > 0.0 && l11 > 0.0 {
            let z0 = (beta - self.mean[0]) / l00;
            let z1 = (alpha - self.mean[1] - l10 * z0) / l11;
            lp -= ln2pi + l00.ln() + l11.ln() + 0.5 * (z0 * z0 + z1 * z1);
        } else if l00 > 0.0 {
            let z = (beta - self.mean[0]) / l00;
            lp -= 0.5 * ln2pi + l00.ln() + 0.5 * z * z;
        } else if l11 > 0.0 {
            let z = (alpha - self.mean[1]) / l11;
            lp -= 0.5 * ln2pi + l11.ln() + 0.5 * z * z;
        }
        lp
    }
}

/// A dataset, its sufficient statistics and the hyperparameters: everything
/// the conditionals need that does not change during sampling.
#[derive(Clone, Debug)]
pub struct MediationModel {
    data: MediationDataset,
    hyper: Hyperparameters,
    psi0: SymmetricMatrix,
    m_sq: Vec<f64>,
    ma: Vec<f64>,
    a_sq: f64,
    c_sq: Vec<f64>,
    ca: Vec<f64>,
    /// Row-major `q x q` Gram matrix of the covariates.
    cc: Vec<f64>,
    /// Row-major `p x q`.
    mc: Vec<f64>,
}

impl MediationModel {
    pub fn new(data: MediationDataset, hyper: Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let psi0 = hyper.psi0_matrix()?;
        let (p, q) = (data.p(), data.q());
        let a = data.exposure();
        let m_sq = (0..p)
            .map(|j| dot(data.mediator(j), data.mediator(j)))
            .collect();
        let ma = (0..p).map(|j| dot(data.mediator(j), a)).collect();
        let a_sq = dot(a, a);
        let c_sq = (0..q)
            .map(|w| dot(data.covariate(w), data.covariate(w)))
            .collect();
        let ca = (0..q).map(|w| dot(data.covariate(w), a)).collect();
        let mut cc = vec![0.0; q * q];
        for s in 0..q {
            for w in 0..q {
                cc[s * q + w] = dot(data.covariate(s), data.covariate(w));
            }
        }
        let mut mc = vec![0.0; p * q];
        for j in 0..p {
            for w in 0..q {
                mc[j * q + w] = dot(data.mediator(j), data.covariate(w));
            }
        }
        Ok(MediationModel {
            data,
            hyper,
            psi0,
            m_sq,
            ma,
            a_sq,
            c_sq,
            ca,
            cc,
            mc,
        })
    }

    pub fn data(&self) -> &MediationDataset {
        &self.data
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Builds a chain state from parameter blocks, checking shapes and
    /// label consistency and computing the residual cache.
    pub fn state(
        &self,
        outcome: OutcomeState,
        mediator: MediatorState,
        mixture: MixtureState,
    ) -> Result<ChainState> {
        let (p, q) = (self.p(), self.data.q());
        if outcome.beta_m.len() != p
            || outcome.beta_c.len() != q
            || mediator.alpha_a.len() != p
            || mediator.alpha_c.len() != p * q
            || mixture.gamma.len() != p
        {
            return Err(Error::Dimension(
                "chain state does not match the dataset".into(),
            ));
        }
        if mixture.v1.dim() != 2 || !mixture.v1.is_positive_definite() {
            return Err(Error::InvalidParameter(
                "V1 must be 2x2 positive definite".into(),
            ));
        }
        let positive = [
            outcome.sigma_e2,
            outcome.sigma_a2,
            mediator.sigma_g2,
            mixture.v2,
            mixture.v3,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "variance parameters must be positive".into(),
            ));
        }
        let mut s = ChainState {
            outcome,
            mediator,
            mixture,
            resid_y: Vec::new(),
        };
        if !s.labels_consistent() {
            return Err(Error::InvalidParameter(
                "effect pairs do not match their labels".into(),
            ));
        }
        self.refresh_residual(&mut s);
        Ok(s)
    }

    /// Starting state: every mediator null, variances at 1 (outcome variance
    /// at the sample variance of `Y`), `V1` at `psi0`.
    pub fn initial_state(&self) -> ChainState {
        let (n, p, q) = (self.n(), self.p(), self.data.q());
        let y = self.data.outcome();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sigma_e2 = if var > 0.0 && var.is_finite() {
            var
        } else {
            1.0
        };
        self.state(
            OutcomeState {
                beta_m: vec![0.0; p],
                beta_a: 0.0,
                beta_c: vec![0.0; q],
                sigma_e2,
                sigma_a2: 1.0,
            },
            MediatorState {
                alpha_a: vec![0.0; p],
                alpha_c: vec![0.0; p * q],
                sigma_g2: 1.0,
            },
            MixtureState {
                gamma: vec![Component::Null; p],
                v1: self.psi0.clone(),
                v2: 1.0,
                v3: 1.0,
            },
        )
        .expect("initial state is valid by construction")
    }

    /// Recomputes the outcome residual from scratch.
    pub fn refresh_residual(&self, s: &mut ChainState) {
        let d = &self.data;
        let mut r = d.outcome().to_vec();
        let ba = s.outcome.beta_a;
        for (ri, ai) in r.iter_mut().zip(d.exposure()) {
            *ri -= ai * ba;
        }
        for j in 0..d.p() {
            let b = s.outcome.beta_m[j];
            if b != 0.0 {
                for (ri, mi) in r.iter_mut().zip(d.mediator(j)) {
                    *ri -= mi * b;
                }
            }
        }
        for w in 0..d.q() {
            let b = s.outcome.beta_c[w];
            for (ri, ci) in r.iter_mut().zip(d.covariate(w)) {
                *ri -= ci * b;
            }
        }
        s.resid_y = r;
    }

    /// Outcome residual sum of squares.
    pub fn rss_y(&self, s: &ChainState) -> f64 {
        dot(&s.resid_y, &s.resid_y)
    }

    /// `sum_i (M_ij - C_i alpha_c[j]) A_i`.
    fn mediator_exposure_cross(&self, s: &ChainState, j: usize) -> f64 {
        let q = self.data.q();
        let ac = &s.mediator.alpha_c[j * q..(j + 1) * q];
        self.ma[j] - dot(ac, &self.ca)
    }

    /// Residual sum of squares of mediator `j` at a given `alpha_a[j]`.
    pub fn rss_m_at(&self, s: &ChainState, j: usize, alpha: f64) -> f64 {
        let q = self.data.q();
        let ac = &s.mediator.alpha_c[j * q..(j + 1) * q];
        let mut quad = 0.0;
        for a in 0..q {
            for b in 0..q {
                quad += ac[a] * self.cc[a * q + b] * ac[b];
            }
        }
        let mcj = &self.mc[j * q..(j + 1) * q];
        self.m_sq[j] + alpha * alpha * self.a_sq + quad
            - 2.0 * alpha * self.ma[j]
            - 2.0 * dot(ac, mcj)
            + 2.0 * alpha * dot(ac, &self.ca)
    }

    /// Mediator residual sum of squares over all mediators.
    pub fn rss_m(&self, s: &ChainState) -> f64 {
        (0..self.p())
            .map(|j| self.rss_m_at(s, j, s.mediator.alpha_a[j]))
            .sum()
    }

    /// Change in mediator-model log likelihood when `alpha_a[j]` moves from
    /// `old` to `new`.
    pub fn mediator_loglik_delta(&self, s: &ChainState, j: usize, old: f64, new: f64) -> f64 {
        let cross = self.mediator_exposure_cross(s, j);
        let d_rss = (new * new - old * old) * self.a_sq - 2.0 * (new - old) * cross;
        -0.5 * d_rss / s.mediator.sigma_g2
    }

    /// Full data log likelihood of `Y` and `M`.
    pub fn log_likelihood(&self, s: &ChainState) -> f64 {
        let (n, p) = (self.n() as f64, self.p() as f64);
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let se = s.outcome.sigma_e2;
        let sg = s.mediator.sigma_g2;
        -0.5 * n * (ln2pi + se.ln())
            - 0.5 * self.rss_y(s) / se
            - 0.5 * n * p * (ln2pi + sg.ln())
            - 0.5 * self.rss_m(s) / sg
    }

    pub fn pair_terms(&self, s: &ChainState, j: usize) -> PairTerms {
        let mj = self.data.mediator(j);
        let se = s.outcome.sigma_e2;
        let sg = s.mediator.sigma_g2;
        let lin_y = dot(&s.resid_y, mj) + s.outcome.beta_m[j] * self.m_sq[j];
        let lin_m = self.mediator_exposure_cross(s, j);
        PairTerms {
            precision: [self.m_sq[j] / se, self.a_sq / sg],
            linear: [lin_y / se, lin_m / sg],
        }
    }

    /// Conditional of the pair under component `k`, with log marginal
    /// `-1/2 log|W V_k + I| + 1/2 w' (W + V_k^-1)^-1 w`.
    pub fn component_posterior(
        &self,
        terms: &PairTerms,
        k: Component,
        mix: &MixtureState,
    ) -> ComponentPosterior {
        let [wb, wa] = terms.precision;
        let [lb, la] = terms.linear;
        match k {
            Component::Null => ComponentPosterior::NULL,
            Component::OutcomeOnly => univariate(wb, lb, mix.v2, false),
            Component::ExposureOnly => univariate(wa, la, mix.v3, true),
            Component::Active => {
                let v = &mix.v1;
                let (v00, v01, v11) = (v.get(0, 0), v.get(0, 1), v.get(1, 1));
                let det_v = v00 * v11 - v01 * v01;
                // P = W + V^-1
                let p00 = wb + v11 / det_v;
                let p01 = -v01 / det_v;
                let p11 = wa + v00 / det_v;
                let det_p = p00 * p11 - p01 * p01;
                // covariance = P^-1
                let c00 = p11 / det_p;
                let c01 = -p01 / det_p;
                let c11 = p00 / det_p;
                let mean = [c00 * lb + c01 * la, c01 * lb + c11 * la];
                let quad = lb * mean[0] + la * mean[1];
                // |W V + I| = |V| |P|
                let log_marginal = -0.5 * (det_v * det_p).ln() + 0.5 * quad;
                let l00 = c00.sqrt();
                let l10 = c01 / l00;
                let l11 = (c11 - l10 * l10).max(0.0).sqrt();
                ComponentPosterior {
                    log_marginal,
                    mean,
                    chol: [l00, l10, l11],
                }
            }
        }
    }

    pub fn component_log_marginal(&self, s: &ChainState, j: usize, k: Component) -> f64 {
        let t = self.pair_terms(s, j);
        self.component_posterior(&t, k, &s.mixture).log_marginal
    }

    pub fn component_log_marginals(&self, s: &ChainState, j: usize) -> [f64; 4] {
        let t = self.pair_terms(s, j);
        Component::ALL.map(|k| self.component_posterior(&t, k, &s.mixture).log_marginal)
    }

    /// Prior log density of a pair under component `k`; point-mass
    /// coordinates contribute nothing.
    pub fn pair_prior_log_density(
        &self,
        k: Component,
        beta: f64,
        alpha: f64,
        mix: &MixtureState,
    ) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        match k {
            Component::Null => 0.0,
            Component::OutcomeOnly => -0.5 * (ln2pi + mix.v2.ln() + beta * beta / mix.v2),
            Component::ExposureOnly => -0.5 * (ln2pi + mix.v3.ln() + alpha * alpha / mix.v3),
            Component::Active => {
                let v = &mix.v1;
                let (v00, v01, v11) = (v.get(0, 0), v.get(0, 1), v.get(1, 1));
                let det = v00 * v11 - v01 * v01;
                let quad =
                    (v11 * beta * beta - 2.0 * v01 * beta * alpha + v00 * alpha * alpha) / det;
                -ln2pi - 0.5 * det.ln() - 0.5 * quad
            }
        }
    }

    /// Sets the pair of mediator `j`, keeping the residual cache in sync.
    pub fn set_pair(&self, s: &mut ChainState, j: usize, beta: f64, alpha: f64) {
        let delta = beta - s.outcome.beta_m[j];
        if delta != 0.0 {
            for (ri, mi) in s.resid_y.iter_mut().zip(self.data.mediator(j)) {
                *ri -= mi * delta;
            }
        }
        s.outcome.beta_m[j] = beta;
        s.mediator.alpha_a[j] = alpha;
    }

    /// Sets `gamma[j] = k` and draws the pair from its conditional under `k`.
    pub fn update_effect_pair<R: Rng + ?Sized>(
        &self,
        s: &mut ChainState,
        j: usize,
        k: Component,
        rng: &mut R,
    ) -> (f64, f64) {
        let t = self.pair_terms(s, j);
        let post = self.component_posterior(&t, k, &s.mixture);
        let (b, a) = post.sample(rng);
        s.mixture.gamma[j] = k;
        self.set_pair(s, j, b, a);
        (b, a)
    }

    /// Collapsed label draw for mediator `j` (pair integrated out) given
    /// prior log weights, followed by a pair draw under the new label.
    pub fn update_site<R: Rng + ?Sized>(
        &self,
        s: &mut ChainState,
        j: usize,
        log_prior: &[f64; 4],
        rng: &mut R,
    ) -> Component {
        let t = self.pair_terms(s, j);
        let posts = Component::ALL.map(|k| self.component_posterior(&t, k, &s.mixture));
        let mut lw = [0.0; 4];
        for i in 0..4 {
            lw[i] = log_prior[i] + posts[i].log_marginal;
        }
        let k = Component::from_index(sample_log_categorical(&lw, rng));
        let (b, a) = posts[k.index()].sample(rng);
        s.mixture.gamma[j] = k;
        self.set_pair(s, j, b, a);
        k
    }

    pub fn update_v1<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        let mut scale = [
            self.psi0.get(0, 0),
            self.psi0.get(0, 1),
            self.psi0.get(1, 1),
        ];
        let mut count = 0usize;
        for j in 0..self.p() {
            if s.mixture.gamma[j] == Component::Active {
                let (b, a) = (s.outcome.beta_m[j], s.mediator.alpha_a[j]);
                scale[0] += b * b;
                scale[1] += b * a;
                scale[2] += a * a;
                count += 1;
            }
        }
        let scale = SymmetricMatrix::from_row_major(2, &[scale[0], scale[1], scale[1], scale[2]])?;
        s.mixture.v1 = sample_inverse_wishart(&scale, count as f64 + self.hyper.df, rng)?;
        Ok(())
    }

    pub fn update_v2<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        let (count, ss) =
            self.component_scatter(s, Component::OutcomeOnly, |s, j| s.outcome.beta_m[j]);
        s.mixture.v2 = sample_inverse_gamma(
            0.5 * (count + self.hyper.df),
            0.5 * (self.psi0.get(0, 0) + ss),
            rng,
        )?;
        Ok(())
    }

    pub fn update_v3<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        let (count, ss) =
            self.component_scatter(s, Component::ExposureOnly, |s, j| s.mediator.alpha_a[j]);
        s.mixture.v3 = sample_inverse_gamma(
            0.5 * (count + self.hyper.df),
            0.5 * (self.psi0.get(1, 1) + ss),
            rng,
        )?;
        Ok(())
    }

    fn component_scatter(
        &self,
        s: &ChainState,
        k: Component,
        value: impl Fn(&ChainState, usize) -> f64,
    ) -> (f64, f64) {
        let mut count = 0.0;
        let mut ss = 0.0;
        for j in 0..self.p() {
            if s.mixture.gamma[j] == k {
                let v = value(s, j);
                ss += v * v;
                count += 1.0;
            }
        }
        (count, ss)
    }

    pub fn update_beta_a<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) {
        let a = self.data.exposure();
        let old = s.outcome.beta_a;
        let cross = dot(a, &s.resid_y) + old * self.a_sq;
        let se = s.outcome.sigma_e2;
        let denom = se / s.outcome.sigma_a2 + self.a_sq;
        let mean = cross / denom;
        let sd = (se / denom).sqrt();
        let new = mean + sd * std_normal(rng);
        let delta = new - old;
        for (ri, ai) in s.resid_y.iter_mut().zip(a) {
            *ri -= ai * delta;
        }
        s.outcome.beta_a = new;
    }

    pub fn update_sigma_a2<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        let b = s.outcome.beta_a;
        s.outcome.sigma_a2 =
            sample_inverse_gamma(0.5 + self.hyper.h_a, 0.5 * b * b + self.hyper.l_a, rng)?;
        Ok(())
    }

    pub fn update_sigma_e2<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        let n = self.n() as f64;
        s.outcome.sigma_e2 = sample_inverse_gamma(
            0.5 * n + self.hyper.h1,
            0.5 * self.rss_y(s) + self.hyper.l1,
            rng,
        )?;
        Ok(())
    }

    pub fn update_sigma_g2<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        let np = (self.n() * self.p()) as f64;
        s.mediator.sigma_g2 = sample_inverse_gamma(
            0.5 * np + self.hyper.h2,
            0.5 * self.rss_m(s) + self.hyper.l2,
            rng,
        )?;
        Ok(())
    }

    /// Flat-prior normal conditional for each covariate coefficient in turn.
    pub fn update_beta_c<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) {
        for w in 0..self.data.q() {
            let c = self.data.covariate(w);
            let old = s.outcome.beta_c[w];
            let mean = (dot(c, &s.resid_y) + old * self.c_sq[w]) / self.c_sq[w];
            let sd = (s.outcome.sigma_e2 / self.c_sq[w]).sqrt();
            let new = mean + sd * std_normal(rng);
            let delta = new - old;
            for (ri, ci) in s.resid_y.iter_mut().zip(c) {
                *ri -= ci * delta;
            }
            s.outcome.beta_c[w] = new;
        }
    }

    pub fn update_alpha_c<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) {
        let q = self.data.q();
        let sg = s.mediator.sigma_g2;
        for j in 0..self.p() {
            let aa = s.mediator.alpha_a[j];
            for w in 0..q {
                let mut rhs = self.mc[j * q + w] - aa * self.ca[w];
                for t in 0..q {
                    if t != w {
                        rhs -= s.mediator.alpha_c[j * q + t] * self.cc[t * q + w];
                    }
                }
                let mean = rhs / self.c_sq[w];
                let sd = (sg / self.c_sq[w]).sqrt();
                s.mediator.alpha_c[j * q + w] = mean + sd * std_normal(rng);
            }
        }
    }

    /// Mixture variances followed by every shared conditional.
    pub fn update_shared<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<()> {
        self.update_v1(s, rng)?;
        self.update_v2(s, rng)?;
        self.update_v3(s, rng)?;
        self.update_beta_a(s, rng);
        self.update_sigma_a2(s, rng)?;
        self.update_beta_c(s, rng);
        self.update_alpha_c(s, rng);
        self.update_sigma_e2(s, rng)?;
        self.update_sigma_g2(s, rng)?;
        Ok(())
    }

    /// Recomputes the residual and fails if anything became non-finite.
    pub fn check_finite(&self, s: &mut ChainState, iteration: usize) -> Result<()> {
        self.refresh_residual(s);
        let rss = self.rss_y(s);
        let scalars = [
            rss,
            s.outcome.beta_a,
            s.outcome.sigma_e2,
            s.mediator.sigma_g2,
            s.mixture.v2,
            s.mixture.v3,
        ];
        if scalars.iter().all(|v| v.is_finite())
            && s.outcome.beta_m.iter().all(|v| v.is_finite())
            && s.mediator.alpha_a.iter().all(|v| v.is_finite())
        {
            return Ok(());
        }
        Err(Error::Divergence {
            iteration,
            detail: format!(
                "rss_y={rss}, beta_a={}, sigma_e2={}, sigma_g2={}, v1={:?}, v2={}, v3={}",
                s.outcome.beta_a,
                s.outcome.sigma_e2,
                s.mediator.sigma_g2,
                s.mixture.v1.to_row_major(),
                s.mixture.v2,
                s.mixture.v3
            ),
        })
    }
}

fn univariate(prec: f64, lin: f64, v: f64, second: bool) -> ComponentPosterior {
    let post_prec = prec + 1.0 / v;
    let var = 1.0 / post_prec;
    let m = var * lin;
    let log_marginal = -0.5 * (prec * v).ln_1p() + 0.5 * lin * m;
    let sd = var.sqrt();
    if second {
        ComponentPosterior {
            log_marginal,
            mean: [0.0, m],
            chol: [0.0, 0.0, sd],
        }
    } else {
        ComponentPosterior {
            log_marginal,
            mean: [m, 0.0],
            chol: [sd, 0.0, 0.0],
        }
    }
}
