use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Mixture component of an effect pair `(beta_m[j], alpha_a[j])`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    /// Both effects nonzero: the mediator is active.
    Active = 1,
    /// Only the mediator-outcome effect is nonzero.
    OutcomeOnly = 2,
    /// Only the exposure-mediator effect is nonzero.
    ExposureOnly = 3,
    /// Both effects zero.
    Null = 4,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::Active,
        Component::OutcomeOnly,
        Component::ExposureOnly,
        Component::Null,
    ];

    /// Zero-based position, for indexing 4-vectors.
    #[inline]
    pub fn index(self) -> usize {
        self as usize - 1
    }

    #[inline]
    pub fn from_index(i: usize) -> Component {
        Self::ALL[i]
    }

    /// Label in `1..=4`.
    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Result<Component> {
        match label {
            1..=4 => Ok(Self::ALL[label as usize - 1]),
            _ => Err(Error::InvalidParameter(format!(
                "component label {label} not in 1..=4"
            ))),
        }
    }

    #[inline]
    pub fn has_beta(self) -> bool {
        matches!(self, Component::Active | Component::OutcomeOnly)
    }

    #[inline]
    pub fn has_alpha(self) -> bool {
        matches!(self, Component::Active | Component::ExposureOnly)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeState {
    pub beta_m: Vec<f64>,
    pub beta_a: f64,
    pub beta_c: Vec<f64>,
    pub sigma_e2: f64,
    pub sigma_a2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MediatorState {
    pub alpha_a: Vec<f64>,
    /// Row-major `p x q`.
    pub alpha_c: Vec<f64>,
    pub sigma_g2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureState {
    pub gamma: Vec<Component>,
    pub v1: SymmetricMatrix,
    pub v2: f64,
    pub v3: f64,
}

impl MixtureState {
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for g in &self.gamma {
            c[g.index()] += 1;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Inverse-Wishart scale, row-major 2x2.
    pub psi0: [[f64; 2]; 2],
    pub df: f64,
    pub h_a: f64,
    pub l_a: f64,
    pub h1: f64,
    pub l1: f64,
    pub h2: f64,
    pub l2: f64,
    /// Dirichlet prior on shared proportions (baseline mixture only).
    pub dirichlet: [f64; 4],
    pub theta0_prior_mean: [f64; 4],
    pub theta0_prior_var: [f64; 4],
    pub theta1_prior_mean: [f64; 4],
    pub theta1_prior_var: [f64; 4],
    /// Proposal standard deviation of the random-walk step on Potts parameters.
    pub dmh_step: f64,
    pub corrs_prior_mean: [f64; 3],
    pub corrs_ig_shape: f64,
    pub corrs_ig_rate: f64,
}

/// Prior mixing weights used to center the structured priors.
pub const PRIOR_WEIGHTS: [f64; 4] = [0.05, 0.05, 0.10, 0.80];

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

impl Default for Hyperparameters {
    fn default() -> Self {
        let w = PRIOR_WEIGHTS;
        let base = w[3].ln();
        Hyperparameters {
            psi0: [[1.0, 0.0], [0.0, 1.0]],
            df: 4.0,
            h_a: 2.0,
            l_a: 1.0,
            h1: 2.0,
            l1: 1.0,
            h2: 2.0,
            l2: 1.0,
            dirichlet: [1.0; 4],
            theta0_prior_mean: [w[0].ln() - base, w[1].ln() - base, w[2].ln() - base, 0.0],
            theta0_prior_var: [1.0; 4],
            theta1_prior_mean: [0.5; 4],
            theta1_prior_var: [1.0; 4],
            dmh_step: 0.1,
            // stick-breaking logits reproducing PRIOR_WEIGHTS
            corrs_prior_mean: [
                logit(w[0]),
                logit(w[1] / (1.0 - w[0])),
                logit(w[2] / (1.0 - w[0] - w[1])),
            ],
            corrs_ig_shape: 2.0,
            corrs_ig_rate: 2.0,
        }
    }
}

impl Hyperparameters {
    pub fn psi0_matrix(&self) -> Result<SymmetricMatrix> {
        let p = self.psi0;
        SymmetricMatrix::from_row_major(2, &[p[0][0], p[0][1], p[1][0], p[1][1]])
    }

    pub fn validate(&self) -> Result<()> {
        let psi = self
            .psi0_matrix()
            .map_err(|e| Error::Config(format!("psi0: {e}")))?;
        if !psi.is_positive_definite() {
            return Err(Error::Config("psi0 must be positive definite".into()));
        }
        if !(self.df > 1.0) {
            return Err(Error::Config(format!("df must exceed 1, got {}", self.df)));
        }
        let positive = [
            ("h_a", self.h_a),
            ("l_a", self.l_a),
            ("h1", self.h1),
            ("l1", self.l1),
            ("h2", self.h2),
            ("l2", self.l2),
            ("dmh_step", self.dmh_step),
            ("corrs_ig_shape", self.corrs_ig_shape),
            ("corrs_ig_rate", self.corrs_ig_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, arr) in [
            ("dirichlet", &self.dirichlet),
            ("theta0_prior_var", &self.theta0_prior_var),
            ("theta1_prior_var", &self.theta1_prior_var),
        ] {
            if arr.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!(
                    "{name} entries must be positive and finite"
                )));
            }
        }
        let finite = self
            .theta0_prior_mean
            .iter()
            .chain(&self.theta1_prior_mean)
            .chain(&self.corrs_prior_mean)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("prior means must be finite".into()));
        }
        Ok(())
    }
}
