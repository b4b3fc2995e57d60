//! The mediation model shared by every sampler.

mod chain;
mod data;
mod effects;
mod gmm;
mod state;

pub use chain::{ChainState, ComponentPosterior, MediationModel, PairTerms};
pub use data::MediationDataset;
pub use effects::{causal_effects, CausalEffects};
pub use gmm::{baseline_gmm_sweep, gmm_fit, gmm_label_sweep, sample_shared_proportions};
pub use state::{
    Component, Hyperparameters, MediatorState, MixtureState, OutcomeState, PRIOR_WEIGHTS,
};
