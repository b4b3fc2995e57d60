mod common;

use common::*;
use medcorr::corrs::*;
use medcorr::model::{Component, Hyperparameters, MediationModel};
use medcorr::trace::McmcConfig;
use medcorr::{RngStream, SymmetricMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #[test]
    fn stick_round_trip(b in prop::array::uniform3(-12.0f64..12.0)) {
        let pi = stick_probs(b);
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.iter().all(|&x| x > 0.0));
        let back = stick_logits(pi);
        for k in 0..3 {
            prop_assert!((back[k] - b[k]).abs() < 1e-6 * (1.0 + b[k].abs()), "{:?} -> {:?}", b, back);
        }
        let lp = stick_log_probs(b);
        for k in 0..4 {
            prop_assert!((lp[k] - pi[k].ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn extreme_logits_stay_finite(b in prop::array::uniform3(-1e4f64..1e4)) {
        let pi = stick_probs(b);
        let lp = stick_log_probs(b);
        prop_assert!(pi.iter().all(|x| x.is_finite()) && lp.iter().all(|x| x.is_finite()));
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn default_prior_mean_gives_expected_proportions() {
    let a = Hyperparameters::default().corrs_prior_mean;
    let pi = stick_probs(a);
    let want = [0.05, 0.05, 0.10, 0.80];
    for k in 0..4 {
        assert!((pi[k] - want[k]).abs() < 1e-12, "{pi:?}");
    }
}

fn check_against_grid(labels: &[Component], d: [[f64; 2]; 2], a: [f64; 3], s2: [f64; 3]) {
    let lim = 8.0 * s2.iter().cloned().fold(0.0, f64::max).sqrt()
        + a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let grid = stick_posterior_grid(
        labels,
        &d,
        a,
        s2,
        lim,
        if labels.len() == 1 { 20_000 } else { 400 },
    );
    let gibbs = stick_posterior_gibbs(labels, &d, a, s2, 100_000, 17);
    for k in 0..3 {
        for j in 0..labels.len() {
            let (gm, gs) = grid[k][j];
            let (mm, ms) = gibbs[k][j];
            assert!(
                (gm - mm).abs() < 0.05,
                "stick {k} mediator {j}: mean {mm} vs grid {gm}"
            );
            assert!(
                (ms / gs - 1.0).abs() < 0.1,
                "stick {k} mediator {j}: sd {ms} vs grid {gs}"
            );
        }
    }
}

#[test]
fn augmented_gibbs_matches_grid_p1() {
    check_against_grid(
        &[Component::OutcomeOnly],
        [[1.0, 0.0], [0.0, 1.0]],
        [-1.0, 0.5, 0.0],
        [2.0, 3.0, 1.5],
    );
}

#[test]
fn augmented_gibbs_matches_grid_p2() {
    let a = Hyperparameters::default().corrs_prior_mean;
    check_against_grid(
        &[Component::Active, Component::Null],
        [[1.0, 0.6], [0.6, 1.0]],
        a,
        [4.0, 2.0, 3.0],
    );
}

#[test]
fn block_mean_matches_dense_solve() {
    let vals = [1.0, 0.4, 0.2, 0.4, 1.0, 0.3, 0.2, 0.3, 1.0];
    let d = SymmetricMatrix::from_row_major(3, &vals).unwrap();
    let s = CorrStructure::new(d).unwrap();
    let mut st = CorrSState::at_prior_mean(3, [-2.0, 0.3, 1.0]);
    st.w[1] = vec![0.2, 0.5, 0.9];
    st.sigma_d2[1] = 1.7;
    let labels = [Component::Active, Component::OutcomeOnly, Component::Null];
    let got = b_block_mean(1, &labels, &st, &s);

    let dm = DMatrix::from_row_slice(3, 3, &vals);
    let dinv = dm.try_inverse().unwrap();
    let q = DMatrix::from_diagonal(&DVector::from_row_slice(&st.w[1])) + &dinv / 1.7;
    let kappa = DVector::from_iterator(3, labels.iter().map(|&g| stick_kappa(g)[1]));
    let rhs = kappa + &dinv * DVector::from_element(3, 0.3) / 1.7;
    let want = q.try_inverse().unwrap() * rhs;
    for j in 0..3 {
        assert!((got[j] - want[j]).abs() < 1e-12);
    }
}

#[test]
fn sigma_d2_conditional_moments() {
    let vals = [1.0, 0.5, 0.5, 1.0];
    let s = CorrStructure::new(SymmetricMatrix::from_row_major(2, &vals).unwrap()).unwrap();
    let mut st = CorrSState::at_prior_mean(2, [0.0; 3]);
    st.b[0] = vec![1.0, -0.5];
    let quad = (1.0 + 0.25 + 2.0 * 0.5 * 0.5) / 0.75; // x' D^-1 x by hand
    let (shape, rate) = (2.0 + 1.0, 2.0 + 0.5 * quad);
    let mut rng = RngStream::new(5);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| update_sigma_d2(0, &mut st, &s, 2.0, 2.0, &mut rng).unwrap())
        .collect();
    let m = rate / (shape - 1.0);
    let v = m * m / (shape - 2.0);
    // the variance of an IG(3, .) draw has no finite fourth moment, so only
    // the mean is checked against its standard error
    assert!(
        (mean(&draws) - m).abs() < 4.0 * (v / draws.len() as f64).sqrt(),
        "{} vs {m}",
        mean(&draws)
    );
}

#[test]
fn corrs_fit_runs_and_keeps_draws() {
    let mut rng = RngStream::new(11);
    let data = synthetic(
        60,
        &[0.8, 0.0, 0.0, 0.0],
        &[0.8, 0.0, 0.0, 0.0],
        0.5,
        1.0,
        1.0,
        &[],
        &mut rng,
    )
    .centered()
    .unwrap();
    let model = MediationModel::new(data, Hyperparameters::default()).unwrap();
    let d = SymmetricMatrix::identity(4);
    let config = McmcConfig {
        iterations: 300,
        burn_in: 100,
        thin: 2,
        ..Default::default()
    };
    let trace = corrs_fit(&model, &d, &config, &mut rng).unwrap();
    assert_eq!(trace.draws, 100);
    assert_eq!(trace.extras["sigma_d2_2"].len(), 100);
    for t in 0..trace.draws {
        for j in 0..4 {
            let g = trace.label(t, j);
            assert_eq!(g.has_beta(), trace.beta_m[t * 4 + j] != 0.0);
            assert_eq!(g.has_alpha(), trace.alpha_a[t * 4 + j] != 0.0);
        }
    }
    assert!(corrs_fit(&model, &SymmetricMatrix::identity(3), &config, &mut rng).is_err());
}
