use serde::Serialize;

use super::state::{MediatorState, OutcomeState};

/// Natural direct, indirect and total effects of moving the exposure from
/// `a_star` to `a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CausalEffects {
    pub nde: f64,
    pub nie: f64,
    pub te: f64,
    pub per_mediator_nie: Vec<f64>,
}

pub fn causal_effects(
    outcome: &OutcomeState,
    mediator: &MediatorState,
    a: f64,
    a_star: f64,
) -> CausalEffects {
    let contrast = a - a_star;
    let per_mediator_nie: Vec<f64> = mediator
        .alpha_a
        .iter()
        .zip(&outcome.beta_m)
        .map(|(al, be)| contrast * al * be)
        .collect();
    let nie: f64 = per_mediator_nie.iter().sum();
    let nde = outcome.beta_a * contrast;
    CausalEffects {
        nde,
        nie,
        te: nde + nie,
        per_mediator_nie,
    }
}
