use rand::Rng;

use super::chain::{ChainState, MediationModel};
use crate::dist::sample_dirichlet;
use crate::error::Result;
use crate::trace::{McmcConfig, PosteriorTrace};

/// Shared mixing proportions given the current labels.
pub fn sample_shared_proportions<R: Rng + ?Sized>(
    model: &MediationModel,
    s: &ChainState,
    rng: &mut R,
) -> Result<[f64; 4]> {
    let counts = s.mixture.counts();
    let prior = model.hyper().dirichlet;
    let alpha: Vec<f64> = (0..4).map(|k| prior[k] + counts[k] as f64).collect();
    let d = sample_dirichlet(&alpha, rng)?;
    Ok([d[0], d[1], d[2], d[3]])
}

/// Proportions then every label (with its pair), in mediator order.
pub fn gmm_label_sweep<R: Rng + ?Sized>(
    model: &MediationModel,
    s: &mut ChainState,
    rng: &mut R,
) -> Result<[f64; 4]> {
    let pi = sample_shared_proportions(model, s, rng)?;
    let log_pi = pi.map(f64::ln);
    for j in 0..model.p() {
        model.update_site(s, j, &log_pi, rng);
    }
    Ok(pi)
}

/// One full sweep of the baseline sampler with shared proportions.
pub fn baseline_gmm_sweep<R: Rng + ?Sized>(
    model: &MediationModel,
    s: &mut ChainState,
    rng: &mut R,
) -> Result<[f64; 4]> {
    let pi = gmm_label_sweep(model, s, rng)?;
    model.update_shared(s, rng)?;
    Ok(pi)
}

/// Baseline chain (shared proportions, no structure) from the initial state.
pub fn gmm_fit<R: Rng + ?Sized>(
    model: &MediationModel,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorTrace> {
    config.validate()?;
    let mut s = model.initial_state();
    let mut trace = PosteriorTrace::new(model.p());
    for it in 0..config.iterations {
        let pi = baseline_gmm_sweep(model, &mut s, rng)?;
        if it % 50 == 49 || it + 1 == config.iterations {
            model.check_finite(&mut s, it)?;
        }
        if config.keeps(it) {
            trace.push(&s);
            for (k, v) in pi.iter().enumerate() {
                trace.push_extra(&format!("pi_{}", k + 1), *v);
            }
        }
    }
    Ok(trace)
}
