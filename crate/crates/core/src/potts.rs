//! Potts prior over mixture labels: single-site and cluster updates, and
//! double Metropolis-Hastings updates of its parameters.

use std::collections::HashSet;

use log::debug;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dist::{sample_log_categorical, softmax, std_normal};
use crate::error::{Error, Result};
use crate::model::{ChainState, Component, ComponentPosterior, Hyperparameters, MediationModel};
use crate::trace::{McmcConfig, PosteriorTrace};

/// Simple undirected graph on mediators.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    p: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    /// For graphs whose edges all join consecutive nodes: the edge index of
    /// `(i, i + 1)` if present.
    chain: Option<Vec<Option<usize>>>,
}

impl NeighborGraph {
    /// Pairs may come in either orientation; self-loops and repeated pairs
    /// are rejected.
    pub fn new(p: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        let mut edges = Vec::with_capacity(pairs.len());
        let mut neighbors = vec![Vec::new(); p];
        for &(a, b) in pairs {
            if a >= p || b >= p {
                return Err(Error::InvalidData(format!(
                    "edge ({a}, {b}) out of range for {p} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidData(format!("self-loop at node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidData(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            edges.push(e);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        let chain = if edges.iter().all(|&(i, j)| j == i + 1) {
            let mut c = vec![None; p];
            for (k, &(i, _)) in edges.iter().enumerate() {
                c[i] = Some(k);
            }
            Some(c)
        } else {
            None
        };
        Ok(NeighborGraph {
            p,
            edges,
            neighbors,
            chain,
        })
    }

    pub fn empty(p: usize) -> Self {
        Self::new(p, &[]).expect("empty graph is valid")
    }

    /// Path `0 - 1 - ... - (p-1)`.
    pub fn path(p: usize) -> Self {
        let pairs: Vec<_> = (1..p).map(|i| (i - 1, i)).collect();
        Self::new(p, &pairs).expect("path graph is valid")
    }

    /// Parses whitespace-separated zero-based index pairs, one per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_edge_list(text: &str, p: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected two indices",
                    ln + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: bad index {s:?}", ln + 1)))
            };
            pairs.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(p, &pairs)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].contains(&j)
    }
}

/// Potts field and coupling parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PottsState {
    pub theta0: [f64; 4],
    pub theta1: [f64; 4],
}

impl PottsState {
    pub fn from_prior_means(h: &Hyperparameters) -> Self {
        PottsState {
            theta0: h.theta0_prior_mean,
            theta1: h.theta1_prior_mean,
        }
    }

    fn min_coupling(&self) -> f64 {
        self.theta1.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Which Potts parameter a double-MH step targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaKind {
    Field,
    Coupling,
}

/// Prior log weight of each label at node `j` given its neighbors.
pub fn potts_log_weights(
    j: usize,
    gamma: &[Component],
    potts: &PottsState,
    graph: &NeighborGraph,
) -> [f64; 4] {
    let mut counts = [0u32; 4];
    for &i in graph.neighbors(j) {
        counts[gamma[i].index()] += 1;
    }
    let mut w = potts.theta0;
    for k in 0..4 {
        w[k] += potts.theta1[k] * counts[k] as f64;
    }
    w
}

/// Full conditional label probabilities at node `j`.
pub fn potts_conditional_label(
    j: usize,
    gamma: &[Component],
    potts: &PottsState,
    graph: &NeighborGraph,
    data_log_marginals: &[f64; 4],
) -> [f64; 4] {
    let mut w = potts_log_weights(j, gamma, potts, graph);
    for k in 0..4 {
        w[k] += data_log_marginals[k];
    }
    let s = softmax(&w);
    [s[0], s[1], s[2], s[3]]
}

/// Label counts and same-label edge counts per component.
pub fn sufficient_stats(gamma: &[Component], graph: &NeighborGraph) -> ([f64; 4], [f64; 4]) {
    let mut n = [0.0; 4];
    let mut e = [0.0; 4];
    for g in gamma {
        n[g.index()] += 1.0;
    }
    for &(i, j) in graph.edges() {
        if gamma[i] == gamma[j] {
            e[gamma[i].index()] += 1.0;
        }
    }
    (n, e)
}

/// Unnormalized Potts log density, each edge counted once.
pub fn potts_log_density(gamma: &[Component], potts: &PottsState, graph: &NeighborGraph) -> f64 {
    let (n, e) = sufficient_stats(gamma, graph);
    (0..4)
        .map(|k| potts.theta0[k] * n[k] + potts.theta1[k] * e[k])
        .sum()
}

/// One single-site Gibbs sweep over a random permutation of nodes. Data
/// terms, when given, are per node log marginals held fixed for the sweep.
pub fn single_site_sweep<R: Rng + ?Sized>(
    gamma: &mut [Component],
    potts: &PottsState,
    graph: &NeighborGraph,
    data: Option<&[[f64; 4]]>,
    rng: &mut R,
) {
    let mut order: Vec<usize> = (0..gamma.len()).collect();
    order.shuffle(rng);
    for j in order {
        let mut w = potts_log_weights(j, gamma, potts, graph);
        if let Some(d) = data {
            for k in 0..4 {
                w[k] += d[j][k];
            }
        }
        gamma[j] = Component::from_index(sample_log_categorical(&w, rng));
    }
}

/// Runs `sweeps` data-free single-site sweeps starting from `init`.
pub fn sample_gamma_from_prior<R: Rng + ?Sized>(
    potts: &PottsState,
    graph: &NeighborGraph,
    sweeps: usize,
    init: &[Component],
    rng: &mut R,
) -> Vec<Component> {
    let mut g = init.to_vec();
    for _ in 0..sweeps.max(1) {
        single_site_sweep(&mut g, potts, graph, None, rng);
    }
    g
}

/// Bond variable per edge, in edge order.
#[derive(Clone, Debug, PartialEq)]
pub struct BondSet {
    pub u: Vec<f64>,
}

impl BondSet {
    #[inline]
    pub fn active(&self, e: usize) -> bool {
        self.u[e] > 1.0
    }
}

pub fn draw_bonds<R: Rng + ?Sized>(
    gamma: &[Component],
    potts: &PottsState,
    graph: &NeighborGraph,
    rng: &mut R,
) -> BondSet {
    let u = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            let bound = if gamma[i] == gamma[j] {
                potts.theta1[gamma[i].index()].exp()
            } else {
                1.0
            };
            bound * rng.random::<f64>()
        })
        .collect();
    BondSet { u }
}

/// Connected component of the active-bond graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub members: Vec<usize>,
    /// Largest bond value inside the cluster (0 when it has no active bond).
    pub max_bond: f64,
}

impl Cluster {
    pub fn admits(&self, potts: &PottsState, k: usize) -> bool {
        self.max_bond <= 1.0 || potts.theta1[k].exp() >= self.max_bond
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the active bonds, in order of smallest member.
pub fn find_clusters(graph: &NeighborGraph, bonds: &BondSet) -> Vec<Cluster> {
    let p = graph.p();
    if let Some(chain) = &graph.chain {
        let mut out: Vec<Cluster> = Vec::new();
        for i in 0..p {
            let joined = i > 0 && chain[i - 1].is_some_and(|e| bonds.active(e));
            if joined {
                let c = out.last_mut().expect("node 0 opens a cluster");
                c.members.push(i);
                c.max_bond = c.max_bond.max(bonds.u[chain[i - 1].unwrap()]);
            } else {
                out.push(Cluster {
                    members: vec![i],
                    max_bond: 0.0,
                });
            }
        }
        return out;
    }
    let mut uf = UnionFind::new(p);
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        if bonds.active(e) {
            uf.union(i, j);
        }
    }
    let mut slot = vec![usize::MAX; p];
    let mut out: Vec<Cluster> = Vec::new();
    for i in 0..p {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Cluster {
                members: Vec::new(),
                max_bond: 0.0,
            });
        }
        out[slot[r]].members.push(i);
    }
    for (e, &(i, _)) in graph.edges().iter().enumerate() {
        if bonds.active(e) {
            let c = &mut out[slot[uf.find(i)]];
            c.max_bond = c.max_bond.max(bonds.u[e]);
        }
    }
    out
}

/// Outcome of a cluster sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SwReport {
    /// Skipped because some coupling is negative.
    pub skipped: bool,
    pub clusters: usize,
    /// Clusters with more than one node.
    pub multi: usize,
    /// Of those, how many moves were accepted (always all for fixed data terms).
    pub accepted: usize,
}

/// Swendsen-Wang sweep with fixed per-node data terms: draw bonds, find
/// clusters, relabel each cluster from its admissible conditional.
///
/// Requires non-negative couplings; otherwise the sweep is skipped and the
/// labels are left unchanged.
pub fn sw_sweep<R: Rng + ?Sized>(
    gamma: &mut [Component],
    potts: &PottsState,
    graph: &NeighborGraph,
    log_marginals: &[[f64; 4]],
    rng: &mut R,
) -> SwReport {
    if potts.min_coupling() < 0.0 {
        return SwReport {
            skipped: true,
            ..Default::default()
        };
    }
    let bonds = draw_bonds(gamma, potts, graph, rng);
    let clusters = find_clusters(graph, &bonds);
    let mut report = SwReport {
        clusters: clusters.len(),
        ..Default::default()
    };
    for c in &clusters {
        let mut w = [f64::NEG_INFINITY; 4];
        for (k, wk) in w.iter_mut().enumerate() {
            if c.admits(potts, k) {
                *wk = c
                    .members
                    .iter()
                    .map(|&i| log_marginals[i][k] + potts.theta0[k])
                    .sum();
            }
        }
        let k = Component::from_index(sample_log_categorical(&w, rng));
        for &i in &c.members {
            gamma[i] = k;
        }
        if c.members.len() > 1 {
            report.multi += 1;
            report.accepted += 1;
        }
    }
    report
}

fn log_softmax_at(w: &[f64; 4], k: usize) -> f64 {
    let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = w.iter().map(|x| (x - mx).exp()).sum();
    w[k] - mx - z.ln()
}

/// Cluster sweep on the full model, where effect pairs are not integrated
/// out jointly. Singletons get an exact collapsed Gibbs update. A larger
/// cluster proposes a common label from the product of per-node marginals
/// and fresh pairs from the per-node conditionals, and is accepted by a
/// Metropolis-Hastings test against the joint target given the bonds.
pub fn sw_model_sweep<R: Rng + ?Sized>(
    model: &MediationModel,
    s: &mut ChainState,
    potts: &PottsState,
    graph: &NeighborGraph,
    rng: &mut R,
) -> SwReport {
    if potts.min_coupling() < 0.0 {
        return SwReport {
            skipped: true,
            ..Default::default()
        };
    }
    let bonds = draw_bonds(s.gamma(), potts, graph, rng);
    let clusters = find_clusters(graph, &bonds);
    let mut report = SwReport {
        clusters: clusters.len(),
        ..Default::default()
    };
    let se2 = s.outcome.sigma_e2;
    for c in &clusters {
        if c.members.len() == 1 {
            model.update_site(s, c.members[0], &potts.theta0, rng);
            continue;
        }
        report.multi += 1;
        let size = c.members.len() as f64;
        let admissible: Vec<bool> = (0..4).map(|k| c.admits(potts, k)).collect();
        let proposal = |s: &ChainState| -> (Vec<[ComponentPosterior; 4]>, [f64; 4]) {
            let posts: Vec<[ComponentPosterior; 4]> = c
                .members
                .iter()
                .map(|&i| {
                    let t = model.pair_terms(s, i);
                    Component::ALL.map(|k| model.component_posterior(&t, k, &s.mixture))
                })
                .collect();
            let mut w = [f64::NEG_INFINITY; 4];
            for k in 0..4 {
                if admissible[k] {
                    w[k] = size * potts.theta0[k]
                        + posts.iter().map(|p| p[k].log_marginal).sum::<f64>();
                }
            }
            (posts, w)
        };

        let k_old = s.gamma()[c.members[0]];
        let old: Vec<(f64, f64)> = c
            .members
            .iter()
            .map(|&i| (s.outcome.beta_m[i], s.mediator.alpha_a[i]))
            .collect();
        let (fwd_posts, fwd_w) = proposal(s);
        let k_new = Component::from_index(sample_log_categorical(&fwd_w, rng));
        let new: Vec<(f64, f64)> = fwd_posts
            .iter()
            .map(|p| p[k_new.index()].sample(rng))
            .collect();

        let mut log_r = size * (potts.theta0[k_new.index()] - potts.theta0[k_old.index()]);
        log_r -= log_softmax_at(&fwd_w, k_new.index());
        let rss_old = model.rss_y(s);
        for (idx, &i) in c.members.iter().enumerate() {
            let (bo, ao) = old[idx];
            let (bn, an) = new[idx];
            log_r -= fwd_posts[idx][k_new.index()].log_density(bn, an);
            log_r += model.pair_prior_log_density(k_new, bn, an, &s.mixture)
                - model.pair_prior_log_density(k_old, bo, ao, &s.mixture);
            log_r += model.mediator_loglik_delta(s, i, ao, an);
        }
        for (idx, &i) in c.members.iter().enumerate() {
            s.mixture.gamma[i] = k_new;
            model.set_pair(s, i, new[idx].0, new[idx].1);
        }
        log_r -= 0.5 * (model.rss_y(s) - rss_old) / se2;

        let (rev_posts, rev_w) = proposal(s);
        log_r += log_softmax_at(&rev_w, k_old.index());
        for (idx, p) in rev_posts.iter().enumerate() {
            log_r += p[k_old.index()].log_density(old[idx].0, old[idx].1);
        }

        if log_r >= 0.0 || rng.random::<f64>().ln() < log_r {
            report.accepted += 1;
        } else {
            for (idx, &i) in c.members.iter().enumerate() {
                s.mixture.gamma[i] = k_old;
                model.set_pair(s, i, old[idx].0, old[idx].1);
            }
        }
    }
    report
}

/// Double Metropolis-Hastings update of one Potts parameter. The auxiliary
/// labels start at `gamma` and run `inner_sweeps` data-free sweeps under the
/// proposed parameters; normalizing constants cancel.
#[allow(clippy::too_many_arguments)]
pub fn dmh_update_theta<R: Rng + ?Sized>(
    k: usize,
    which: ThetaKind,
    gamma: &[Component],
    potts: &mut PottsState,
    graph: &NeighborGraph,
    hyper: &Hyperparameters,
    inner_sweeps: usize,
    rng: &mut R,
) -> bool {
    let (cur, mean, var) = match which {
        ThetaKind::Field => (
            potts.theta0[k],
            hyper.theta0_prior_mean[k],
            hyper.theta0_prior_var[k],
        ),
        ThetaKind::Coupling => (
            potts.theta1[k],
            hyper.theta1_prior_mean[k],
            hyper.theta1_prior_var[k],
        ),
    };
    let prop = cur + hyper.dmh_step * std_normal(rng);
    if prop == cur {
        return true;
    }
    let mut proposed = *potts;
    match which {
        ThetaKind::Field => proposed.theta0[k] = prop,
        ThetaKind::Coupling => proposed.theta1[k] = prop,
    }
    let aux = sample_gamma_from_prior(&proposed, graph, inner_sweeps, gamma, rng);
    let (n_obs, e_obs) = sufficient_stats(gamma, graph);
    let (n_aux, e_aux) = sufficient_stats(&aux, graph);
    let (s_obs, s_aux) = match which {
        ThetaKind::Field => (n_obs[k], n_aux[k]),
        ThetaKind::Coupling => (e_obs[k], e_aux[k]),
    };
    let log_prior = -((prop - mean).powi(2) - (cur - mean).powi(2)) / (2.0 * var);
    let log_r = log_prior + (prop - cur) * (s_obs - s_aux);
    if log_r >= 0.0 || rng.random::<f64>().ln() < log_r {
        *potts = proposed;
        true
    } else {
        false
    }
}

/// Full GMM-Potts chain starting from all-null labels and Potts parameters
/// at their prior means.
pub fn potts_fit<R: Rng + ?Sized>(
    model: &MediationModel,
    graph: &NeighborGraph,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorTrace> {
    let init = PottsState::from_prior_means(model.hyper());
    potts_fit_from(model, graph, config, init, rng)
}

pub fn potts_fit_from<R: Rng + ?Sized>(
    model: &MediationModel,
    graph: &NeighborGraph,
    config: &McmcConfig,
    init: PottsState,
    rng: &mut R,
) -> Result<PosteriorTrace> {
    config.validate()?;
    if graph.p() != model.p() {
        return Err(Error::Dimension(format!(
            "graph has {} nodes but the data have {} mediators",
            graph.p(),
            model.p()
        )));
    }
    let p = model.p();
    let hyper = model.hyper();
    let mut s = model.initial_state();
    let mut potts = init;
    let mut trace = PosteriorTrace::new(p);
    let mut order: Vec<usize> = (0..p).collect();
    let (mut sw_runs, mut sw_skipped, mut sw_multi, mut sw_acc) = (0usize, 0usize, 0usize, 0usize);
    let mut dmh = [[0usize; 2]; 2];

    for it in 0..config.iterations {
        order.shuffle(rng);
        for &j in &order {
            let w = potts_log_weights(j, s.gamma(), &potts, graph);
            model.update_site(&mut s, j, &w, rng);
        }
        if config.sw_every > 0 && (it + 1) % config.sw_every == 0 {
            let r = sw_model_sweep(model, &mut s, &potts, graph, rng);
            if r.skipped {
                sw_skipped += 1;
            } else {
                sw_runs += 1;
                sw_multi += r.multi;
                sw_acc += r.accepted;
            }
        }
        model.update_shared(&mut s, rng)?;
        if config.update_theta {
            // the null field stays at zero as the reference level
            for k in 0..3 {
                let ok = dmh_update_theta(
                    k,
                    ThetaKind::Field,
                    s.gamma(),
                    &mut potts,
                    graph,
                    hyper,
                    config.dmh_sweeps,
                    rng,
                );
                dmh[0][0] += ok as usize;
                dmh[0][1] += 1;
            }
            for k in 0..4 {
                let ok = dmh_update_theta(
                    k,
                    ThetaKind::Coupling,
                    s.gamma(),
                    &mut potts,
                    graph,
                    hyper,
                    config.dmh_sweeps,
                    rng,
                );
                dmh[1][0] += ok as usize;
                dmh[1][1] += 1;
            }
        }
        if it % 50 == 49 || it + 1 == config.iterations {
            model.check_finite(&mut s, it)?;
        }
        if config.keeps(it) {
            trace.push(&s);
            for k in 0..4 {
                trace.push_extra(&format!("theta0_{}", k + 1), potts.theta0[k]);
                trace.push_extra(&format!("theta1_{}", k + 1), potts.theta1[k]);
            }
        }
    }
    let rate = |a: usize, b: usize| {
        if b == 0 {
            f64::NAN
        } else {
            a as f64 / b as f64
        }
    };
    trace
        .diagnostics
        .insert("dmh_accept_theta0".into(), rate(dmh[0][0], dmh[0][1]));
    trace
        .diagnostics
        .insert("dmh_accept_theta1".into(), rate(dmh[1][0], dmh[1][1]));
    trace.diagnostics.insert("sw_sweeps".into(), sw_runs as f64);
    trace
        .diagnostics
        .insert("sw_skipped".into(), sw_skipped as f64);
    trace
        .diagnostics
        .insert("sw_cluster_accept".into(), rate(sw_acc, sw_multi));
    debug!(
        "potts chain done: dmh acceptance {:.3}/{:.3}, {} cluster moves ({} accepted), {} sweeps skipped",
        rate(dmh[0][0], dmh[0][1]),
        rate(dmh[1][0], dmh[1][1]),
        sw_multi,
        sw_acc,
        sw_skipped
    );
    Ok(trace)
}
