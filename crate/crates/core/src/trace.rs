//! Retained draws of one or more chains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainState, Component};

/// Iteration counts shared by all samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Cluster sweep every this many iterations (Potts only); 0 disables.
    pub sw_every: usize,
    /// Auxiliary single-site sweeps per double-MH proposal (Potts only).
    pub dmh_sweeps: usize,
    /// Whether the Potts parameters are sampled or held at their start.
    pub update_theta: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 15_000,
            burn_in: 5_000,
            thin: 10,
            sw_every: 10,
            dmh_sweeps: 1,
            update_theta: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.dmh_sweeps == 0 {
            return Err(Error::Config("dmh_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether iteration `it` (zero-based) is retained.
    pub fn keeps(&self, it: usize) -> bool {
        it >= self.burn_in && (it - self.burn_in).is_multiple_of(self.thin)
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Retained post-burn-in draws. Per-draw vectors are stored draw-major:
/// mediator `j` of draw `t` is at `t * p + j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTrace {
    pub p: usize,
    pub draws: usize,
    /// Labels in `1..=4`.
    pub gamma: Vec<u8>,
    pub beta_m: Vec<f64>,
    pub alpha_a: Vec<f64>,
    pub beta_a: Vec<f64>,
    pub sigma_e2: Vec<f64>,
    pub sigma_g2: Vec<f64>,
    pub sigma_a2: Vec<f64>,
    /// Per mediator, how many draws sat in each component.
    pub occupancy: Vec<[u32; 4]>,
    /// Method-specific per-draw scalars (Potts parameters and so on).
    pub extras: BTreeMap<String, Vec<f64>>,
    /// Run-level summaries such as acceptance rates.
    pub diagnostics: BTreeMap<String, f64>,
}

impl PosteriorTrace {
    pub fn new(p: usize) -> Self {
        PosteriorTrace {
            p,
            occupancy: vec![[0; 4]; p],
            ..Default::default()
        }
    }

    pub fn push(&mut self, s: &ChainState) {
        debug_assert_eq!(s.gamma().len(), self.p);
        for (j, g) in s.gamma().iter().enumerate() {
            self.gamma.push(g.label());
            self.occupancy[j][g.index()] += 1;
        }
        self.beta_m.extend_from_slice(&s.outcome.beta_m);
        self.alpha_a.extend_from_slice(&s.mediator.alpha_a);
        self.beta_a.push(s.outcome.beta_a);
        self.sigma_e2.push(s.outcome.sigma_e2);
        self.sigma_g2.push(s.mediator.sigma_g2);
        self.sigma_a2.push(s.outcome.sigma_a2);
        self.draws += 1;
    }

    pub fn push_extra(&mut self, name: &str, value: f64) {
        self.extras.entry(name.to_string()).or_default().push(value);
    }

    pub fn label(&self, t: usize, j: usize) -> Component {
        Component::from_index(self.gamma[t * self.p + j] as usize - 1)
    }

    /// Per-draw indirect-effect contributions `alpha_a[j] * beta_m[j]`.
    pub fn indirect_draws(&self, j: usize) -> Vec<f64> {
        (0..self.draws)
            .map(|t| self.alpha_a[t * self.p + j] * self.beta_m[t * self.p + j])
            .collect()
    }

    /// Concatenates chains; extras are kept only when every chain has them.
    /// Diagnostics are averaged.
    pub fn merge(chains: &[PosteriorTrace]) -> Result<PosteriorTrace> {
        let first = chains
            .first()
            .ok_or_else(|| Error::InvalidParameter("no chains to merge".into()))?;
        let p = first.p;
        if chains.iter().any(|c| c.p != p) {
            return Err(Error::Dimension("chains disagree on p".into()));
        }
        let mut out = PosteriorTrace::new(p);
        for c in chains {
            out.draws += c.draws;
            out.gamma.extend_from_slice(&c.gamma);
            out.beta_m.extend_from_slice(&c.beta_m);
            out.alpha_a.extend_from_slice(&c.alpha_a);
            out.beta_a.extend_from_slice(&c.beta_a);
            out.sigma_e2.extend_from_slice(&c.sigma_e2);
            out.sigma_g2.extend_from_slice(&c.sigma_g2);
            out.sigma_a2.extend_from_slice(&c.sigma_a2);
            for (o, x) in out.occupancy.iter_mut().zip(&c.occupancy) {
                for k in 0..4 {
                    o[k] += x[k];
                }
            }
        }
        for name in first.extras.keys() {
            if chains.iter().all(|c| c.extras.contains_key(name)) {
                let v = chains
                    .iter()
                    .flat_map(|c| c.extras[name].iter().copied())
                    .collect();
                out.extras.insert(name.clone(), v);
            }
        }
        for name in first.diagnostics.keys() {
            let vals: Vec<f64> = chains
                .iter()
                .filter_map(|c| c.diagnostics.get(name).copied())
                .collect();
            out.diagnostics
                .insert(name.clone(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
        Ok(out)
    }
}
