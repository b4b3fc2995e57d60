mod common;

use common::*;
use medcorr::dist::{sample_log_categorical, std_normal};
use medcorr::model::*;
use medcorr::potts::*;
use medcorr::trace::McmcConfig;
use medcorr::{RngStream, SymmetricMatrix};
use proptest::prelude::*;
use rand::Rng;

fn labels_of(g: &[Component]) -> Vec<usize> {
    g.iter().map(|c| c.index()).collect()
}

#[test]
fn prior_sampler_after_50_sweeps_matches_enumeration() {
    let mut rng = RngStream::new(20);
    let g = NeighborGraph::path(4);
    let potts = PottsState {
        theta0: [0.5, 0.0, 0.0, -0.5],
        theta1: [1.0; 4],
    };
    let exact = node_marginals(
        &potts_exact_joint(g.edges(), 4, potts.theta0, potts.theta1, &[[0.0; 4]; 4]),
        4,
    );
    let runs = 20_000;
    let mut freq = vec![[0.0; 4]; 4];
    for _ in 0..runs {
        let init: Vec<Component> = (0..4)
            .map(|_| Component::from_index(rng.random_range(0..4)))
            .collect();
        let out = sample_gamma_from_prior(&potts, &g, 50, &init, &mut rng);
        for (j, c) in out.iter().enumerate() {
            freq[j][c.index()] += 1.0 / runs as f64;
        }
    }
    let tv = max_marginal_tv(&freq, &exact);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn flat_prior_gives_uniform_labels() {
    let mut rng = RngStream::new(21);
    let g = NeighborGraph::path(10);
    let potts = PottsState {
        theta0: [0.0; 4],
        theta1: [0.0; 4],
    };
    let mut counts = [0.0f64; 4];
    let mut gam = vec![Component::Null; 10];
    for _ in 0..5000 {
        gam = sample_gamma_from_prior(&potts, &g, 1, &gam, &mut rng);
        for c in &gam {
            counts[c.index()] += 1.0 / 50_000.0;
        }
    }
    for c in counts {
        assert!((c - 0.25).abs() < 0.01);
    }
}

#[test]
fn coupling_increases_agreement() {
    let mut rng = RngStream::new(22);
    let p = 50;
    let pairs: Vec<_> = (0..p)
        .flat_map(|i| {
            (i + 1..p)
                .filter(move |j| (j - i) % 7 == 1)
                .map(move |j| (i, j))
        })
        .collect();
    let g = NeighborGraph::new(p, &pairs).unwrap();
    let agree = |theta1: f64, rng: &mut RngStream| {
        let potts = PottsState {
            theta0: [0.0; 4],
            theta1: [theta1; 4],
        };
        let mut gam = vec![Component::Null; p];
        let mut tot = 0.0;
        for it in 0..400 {
            gam = sample_gamma_from_prior(&potts, &g, 1, &gam, rng);
            if it >= 100 {
                let (_, e) = sufficient_stats(&gam, &g);
                tot += e.iter().sum::<f64>() / g.edge_count() as f64;
            }
        }
        tot / 300.0
    };
    let base = agree(0.0, &mut rng);
    let strong = agree(1.0, &mut rng);
    assert!((base - 0.25).abs() < 0.03, "{base}");
    assert!(strong > base + 0.1, "{strong} vs {base}");
}

#[test]
fn dmh_recovers_field_from_replicated_fields() {
    let mut rng = RngStream::new(23);
    let truth = PottsState {
        theta0: [1.0, 0.5, 0.5, 0.0],
        theta1: [1.0; 4],
    };
    let path = NeighborGraph::path(4);
    let exact = potts_exact_joint(path.edges(), 4, truth.theta0, truth.theta1, &[[0.0; 4]; 4]);
    let log_exact: Vec<f64> = exact.iter().map(|x| x.ln()).collect();
    let fields = 200;
    let mut gamma = Vec::new();
    let mut codes = Vec::new();
    for _ in 0..fields {
        let code = sample_log_categorical(&log_exact, &mut rng);
        codes.push(code);
        for j in 0..4 {
            gamma.push(Component::from_index((code / 4usize.pow(3 - j as u32)) % 4));
        }
    }
    // disjoint union of the replicated paths
    let pairs: Vec<_> = (0..fields)
        .flat_map(|f| (1..4).map(move |i| (4 * f + i - 1, 4 * f + i)))
        .collect();
    let big = NeighborGraph::new(4 * fields, &pairs).unwrap();

    // exact-likelihood estimate over a grid of theta0_1
    let loglik = |t: f64| {
        let th = [t, 0.5, 0.5, 0.0];
        let joint = potts_exact_joint(path.edges(), 4, th, truth.theta1, &[[0.0; 4]; 4]);
        codes.iter().map(|&c| joint[c].ln()).sum::<f64>()
    };
    let mle = (0..=400)
        .map(|i| -1.0 + i as f64 * 0.01)
        .max_by(|a, b| loglik(*a).total_cmp(&loglik(*b)))
        .unwrap();
    assert!((mle - 1.0).abs() < 0.5, "mle {mle}");

    let hyper = Hyperparameters {
        theta0_prior_var: [100.0; 4],
        ..Default::default()
    };
    let mut potts = PottsState {
        theta0: [0.0, 0.5, 0.5, 0.0],
        ..truth
    };
    let mut draws = Vec::new();
    for it in 0..6000 {
        dmh_update_theta(
            0,
            ThetaKind::Field,
            &gamma,
            &mut potts,
            &big,
            &hyper,
            1,
            &mut rng,
        );
        if it >= 1000 {
            draws.push(potts.theta0[0]);
        }
    }
    let est = mean(&draws);
    assert!((est - 1.0).abs() < 0.5, "posterior mean {est}");
    assert!(
        (est - mle).abs() < 0.25,
        "posterior mean {est} vs mle {mle}"
    );
}

fn correlated_data(rng: &mut RngStream, n: usize, alpha: &[f64], beta: &[f64]) -> MediationDataset {
    let p = alpha.len();
    let a: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let z: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let mut m = vec![0.0; n * p];
    for j in 0..p {
        for i in 0..n {
            m[j * n + i] = alpha[j] * a[i] + 0.8 * z[i] + 0.6 * std_normal(rng);
        }
    }
    let y: Vec<f64> = (0..n)
        .map(|i| 0.5 * a[i] + (0..p).map(|j| beta[j] * m[j * n + i]).sum::<f64>() + std_normal(rng))
        .collect();
    MediationDataset::new(a, m, y, vec![], 0).unwrap()
}

#[test]
fn model_cluster_move_targets_exact_posterior() {
    let mut rng = RngStream::new(24);
    let p = 3;
    let d = correlated_data(&mut rng, 20, &[0.4, 0.3, 0.0], &[0.3, 0.2, 0.0]);
    let g = NeighborGraph::path(p);
    let potts = PottsState {
        theta0: [-0.5, -0.5, -0.3, 0.0],
        theta1: [1.2; 4],
    };
    let m = MediationModel::new(d.clone(), Hyperparameters::default()).unwrap();
    let v1 = [[0.5, 0.2], [0.2, 0.5]];
    let mut s = m
        .state(
            OutcomeState {
                beta_m: vec![0.0; p],
                beta_a: 0.5,
                beta_c: vec![],
                sigma_e2: 1.0,
                sigma_a2: 1.0,
            },
            MediatorState {
                alpha_a: vec![0.0; p],
                alpha_c: vec![],
                sigma_g2: 1.0,
            },
            MixtureState {
                gamma: vec![Component::Null; p],
                v1: SymmetricMatrix::from_row_major(2, &[0.5, 0.2, 0.2, 0.5]).unwrap(),
                v2: 0.5,
                v3: 0.5,
            },
        )
        .unwrap();
    let exact = exact_label_posterior(&d, 0.5, 1.0, 1.0, v1, 0.5, 0.5, |l| {
        let mut lp: f64 = l.iter().map(|&k| potts.theta0[k]).sum();
        for &(i, j) in g.edges() {
            if l[i] == l[j] {
                lp += potts.theta1[l[i]];
            }
        }
        lp
    });
    let sweeps = 200_000;
    let mut freq = vec![0.0; 64];
    let (mut multi, mut acc) = (0, 0);
    for _ in 0..sweeps {
        let r = sw_model_sweep(&m, &mut s, &potts, &g, &mut rng);
        multi += r.multi;
        acc += r.accepted;
        freq[config_index(&labels_of(s.gamma()))] += 1.0 / sweeps as f64;
    }
    assert!(s.labels_consistent());
    assert!(multi > 10_000 && acc > 1000 && acc < multi, "{acc}/{multi}");
    let tv = total_variation(&freq, &exact);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn degenerate_theta_prior_leaves_label_chain_unchanged() {
    let mut rng = RngStream::new(25);
    let p = 12;
    let beta: Vec<f64> = (0..p).map(|j| if j < 3 { 0.5 } else { 0.0 }).collect();
    let alpha: Vec<f64> = (0..p).map(|j| if j < 3 { 0.5 } else { 0.0 }).collect();
    let d = synthetic(60, &beta, &alpha, 0.5, 1.0, 1.0, &[], &mut rng);
    let g = NeighborGraph::path(p);
    let hyper = Hyperparameters {
        theta0_prior_var: [1e-12; 4],
        theta1_prior_var: [1e-12; 4],
        ..Default::default()
    };
    let m = MediationModel::new(d, hyper).unwrap();
    let pip = |update: bool, seed: u64| {
        let cfg = McmcConfig {
            iterations: 6000,
            burn_in: 1000,
            thin: 1,
            update_theta: update,
            ..Default::default()
        };
        let t = potts_fit(&m, &g, &cfg, &mut RngStream::new(seed)).unwrap();
        let pips: Vec<f64> = t
            .occupancy
            .iter()
            .map(|o| o[0] as f64 / t.draws as f64)
            .collect();
        (pips, t)
    };
    let (on, t_on) = pip(true, 1);
    let (off, _) = pip(false, 2);
    assert_eq!(t_on.diagnostics["dmh_accept_theta1"], 0.0);
    for j in 0..p {
        assert!(
            (on[j] - off[j]).abs() < 0.08,
            "node {j}: {} vs {}",
            on[j],
            off[j]
        );
    }
}

#[test]
fn potts_fit_smoke() {
    let mut rng = RngStream::new(26);
    let p = 20;
    let beta: Vec<f64> = (0..p).map(|j| if j < 4 { 0.5 } else { 0.0 }).collect();
    let alpha = beta.clone();
    let d = synthetic(100, &beta, &alpha, 0.5, 1.0, 1.0, &[], &mut rng);
    let m = MediationModel::new(d, Hyperparameters::default()).unwrap();
    let g = NeighborGraph::path(p);
    let cfg = McmcConfig {
        iterations: 2000,
        burn_in: 500,
        thin: 5,
        ..Default::default()
    };
    let t = potts_fit(&m, &g, &cfg, &mut rng).unwrap();
    assert_eq!(t.draws, cfg.retained());
    for o in &t.occupancy {
        assert_eq!(o.iter().sum::<u32>() as usize, t.draws);
    }
    for tt in 0..t.draws {
        for j in 0..p {
            let k = t.label(tt, j);
            assert!(k.has_beta() || t.beta_m[tt * p + j] == 0.0);
            assert!(k.has_alpha() || t.alpha_a[tt * p + j] == 0.0);
        }
    }
    let pip: Vec<f64> = t
        .occupancy
        .iter()
        .map(|o| o[0] as f64 / t.draws as f64)
        .collect();
    assert!(pip[..4].iter().all(|&x| x > 0.5), "{pip:?}");
    assert!(t.extras["theta1_1"].len() == t.draws);
    assert!(NeighborGraph::path(p + 1).p() != m.p());
    assert!(potts_fit(&m, &NeighborGraph::path(p + 1), &cfg, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bonds_and_clusters_are_legal(seed in any::<u64>(), p in 2usize..15, density in 0.1f64..0.8, t1 in 0.0f64..3.0) {
        let mut rng = RngStream::new(seed);
        let mut pairs = vec![];
        for i in 0..p {
            for j in i + 1..p {
                if rng.random::<f64>() < density {
                    pairs.push((i, j));
                }
            }
        }
        let g = NeighborGraph::new(p, &pairs).unwrap();
        let potts = PottsState { theta0: [0.0; 4], theta1: [t1, 0.5 * t1, 0.0, 2.0 * t1] };
        let mut gamma: Vec<Component> = (0..p).map(|_| Component::from_index(rng.random_range(0..4))).collect();
        for _ in 0..3 {
            let bonds = draw_bonds(&gamma, &potts, &g, &mut rng);
            for (e, &(i, j)) in g.edges().iter().enumerate() {
                let bound = if gamma[i] == gamma[j] { potts.theta1[gamma[i].index()].exp() } else { 1.0 };
                prop_assert!(bonds.u[e] >= 0.0 && bonds.u[e] <= bound);
            }
            let clusters = find_clusters(&g, &bonds);
            let mut owner = vec![usize::MAX; p];
            for (c, cl) in clusters.iter().enumerate() {
                for &i in &cl.members {
                    prop_assert_eq!(owner[i], usize::MAX);
                    owner[i] = c;
                }
                // the generating labels are always admissible
                prop_assert!(cl.admits(&potts, gamma[cl.members[0]].index()));
            }
            for (e, &(i, j)) in g.edges().iter().enumerate() {
                if bonds.active(e) {
                    prop_assert_eq!(owner[i], owner[j]);
                }
            }
            let data: Vec<[f64; 4]> = (0..p).map(|_| [std_normal(&mut rng), 0.0, 0.0, 0.0]).collect();
            sw_sweep(&mut gamma, &potts, &g, &data, &mut rng);
        }
    }
}
