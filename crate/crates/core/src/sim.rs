//! Synthetic block-correlated mediation designs and method comparison grids.

use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compute_pips, empirical_fdr_report, mse_metrics, tpr_at_fixed_fdr};
use crate::dist::{sample_log_categorical, std_normal};
use crate::error::{Error, Result};
use crate::fit::{fit_chain, Method, Structure};
use crate::linalg::{Cholesky, SymmetricMatrix};
use crate::model::{Component, Hyperparameters, MediationDataset, MediationModel};
use crate::nearpd::{nearest_positive_definite, DEFAULT_EIGEN_FLOOR};
use crate::rng::RngStream;
use crate::structure::{
    build_corrs_d, build_neighbor_graph, dataset_correlation, perturb_correlation, perturb_graph,
    CorrelationSummary,
};
use crate::trace::McmcConfig;

/// Correlation between two mediators of the same block at index distance
/// `d >= 1` (distance measured within the block).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum WithinRule {
    Constant {
        rho: f64,
    },
    /// `intercept - slope * d`, floored at zero.
    Affine {
        intercept: f64,
        slope: f64,
    },
}

impl WithinRule {
    pub fn at(&self, d: usize) -> f64 {
        match *self {
            WithinRule::Constant { rho } => rho,
            WithinRule::Affine { intercept, slope } => (intercept - slope * d as f64).max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationDesign {
    /// Equal-sized blocks at the start of the mediator list; mediators in
    /// different blocks correlate at `between`, unblocked ones at zero.
    Blocks { within: WithinRule, between: f64 },
    /// Stand-in for weakly correlated real data: a random correlation matrix
    /// scaled so that a `fraction_above` share of pairs exceed `cutoff`.
    /// Generated once per design from `seed`.
    Surrogate {
        fraction_above: f64,
        cutoff: f64,
        rank: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub block_count: usize,
    pub block_size: usize,
    pub correlation: CorrelationDesign,
    /// Mixture weights of the four components.
    pub proportions: [f64; 4],
    pub v1: [[f64; 2]; 2],
    pub v2: f64,
    pub v3: f64,
    /// Number of active mediators pinned to each of the first blocks.
    pub active_per_block: Vec<usize>,
    pub beta_a: f64,
    #[serde(default = "one")]
    pub sigma_e: f64,
    pub replicates: usize,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Names accepted by [`SimDesign::preset`].
pub const PRESETS: [&str; 9] = [
    "one-block",
    "two-block",
    "strong-one-block",
    "strong-two-block",
    "independent",
    "weak-surrogate",
    "large-five-block",
    "large-sparse",
    "large-weak",
];

impl SimDesign {
    fn small(name: &str, correlation: CorrelationDesign, active_per_block: Vec<usize>) -> Self {
        SimDesign {
            name: name.to_string(),
            n: 100,
            p: 200,
            block_count: 10,
            block_size: 10,
            correlation,
            proportions: [0.05, 0.05, 0.10, 0.80],
            v1: [[0.5, 0.2], [0.2, 0.5]],
            v2: 0.5,
            v3: 0.5,
            active_per_block,
            beta_a: 0.5,
            sigma_e: 1.0,
            replicates: 20,
            seed: 1,
        }
    }

    fn large(name: &str, within: WithinRule, pi1: f64, active_per_block: Vec<usize>) -> Self {
        let rest = 1.0 - pi1;
        let mut d = Self::small(
            name,
            CorrelationDesign::Blocks {
                within,
                between: 0.0,
            },
            active_per_block,
        );
        d.n = 1000;
        d.p = 2000;
        d.block_count = 50;
        d.block_size = 20;
        d.proportions = [
            pi1,
            0.05 / 0.95 * rest,
            0.10 / 0.95 * rest,
            0.80 / 0.95 * rest,
        ];
        d.replicates = 5;
        d
    }

    pub fn preset(name: &str) -> Option<SimDesign> {
        let mild = WithinRule::Affine {
            intercept: 0.5,
            slope: 0.03,
        };
        let strong = WithinRule::Affine {
            intercept: 0.9,
            slope: 0.05,
        };
        let blocks = |within, between| CorrelationDesign::Blocks { within, between };
        Some(match name {
            "one-block" => Self::small(name, blocks(mild, 0.0), vec![10]),
            "two-block" => Self::small(name, blocks(mild, 0.0), vec![5, 5]),
            "strong-one-block" => Self::small(name, blocks(strong, 0.1), vec![10]),
            "strong-two-block" => Self::small(name, blocks(strong, 0.1), vec![5, 5]),
            "independent" => Self::small(
                name,
                blocks(WithinRule::Constant { rho: 0.0 }, 0.0),
                vec![5, 5],
            ),
            "weak-surrogate" => Self::small(
                name,
                CorrelationDesign::Surrogate {
                    fraction_above: 0.03,
                    cutoff: 0.2,
                    rank: 20,
                },
                vec![5, 5],
            ),
            "large-five-block" => Self::large(
                name,
                WithinRule::Affine {
                    intercept: 0.5,
                    slope: 0.02,
                },
                0.05,
                vec![20; 5],
            ),
            "large-sparse" => Self::large(
                name,
                WithinRule::Affine {
                    intercept: 0.5,
                    slope: 0.02,
                },
                0.005,
                vec![5, 5],
            ),
            "large-weak" => {
                Self::large(name, WithinRule::Constant { rho: 0.25 }, 0.005, vec![5, 5])
            }
            _ => return None,
        })
    }

    pub fn total_active(&self) -> usize {
        self.active_per_block.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::Config(format!(
                "design {:?}: {field}: {msg}",
                self.name
            )))
        };
        if self.n < 3 {
            return bad("n", format!("need at least 3 observations, got {}", self.n));
        }
        if self.p < 2 {
            return bad("p", format!("need at least 2 mediators, got {}", self.p));
        }
        if self.replicates == 0 {
            return bad("replicates", "must be at least 1".into());
        }
        if self.block_count * self.block_size > self.p {
            return bad(
                "block_count",
                format!(
                    "{} blocks of {} do not fit in {} mediators",
                    self.block_count, self.block_size, self.p
                ),
            );
        }
        if self.proportions.iter().any(|&x| !(x >= 0.0))
            || (self.proportions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(
                "proportions",
                format!("{:?} must be non-negative and sum to 1", self.proportions),
            );
        }
        if self.active_per_block.len() > self.block_count {
            return bad(
                "active_per_block",
                format!(
                    "{} entries but only {} blocks",
                    self.active_per_block.len(),
                    self.block_count
                ),
            );
        }
        if let Some(&c) = self.active_per_block.iter().find(|&&c| c > self.block_size) {
            return bad(
                "active_per_block",
                format!("{c} actives exceed the block size {}", self.block_size),
            );
        }
        let expected = self.p as f64 * self.proportions[0];
        if (self.total_active() as f64 - expected).abs() > 1e-6 {
            return bad(
                "active_per_block",
                format!(
                    "places {} actives but p * pi1 = {expected}",
                    self.total_active()
                ),
            );
        }
        let [[a, b], [c, d]] = self.v1;
        if (b - c).abs() > 1e-12 || !(a > 0.0 && d > 0.0 && a * d - b * b > 0.0) {
            return bad(
                "v1",
                format!("{:?} is not a positive-definite 2x2 matrix", self.v1),
            );
        }
        if !(self.v2 >= 0.0 && self.v3 >= 0.0) {
            return bad("v2/v3", "effect variances must be non-negative".into());
        }
        if !self.beta_a.is_finite() || !(self.sigma_e > 0.0) {
            return bad(
                "beta_a/sigma_e",
                "must be finite with positive noise sd".into(),
            );
        }
        match self.correlation {
            CorrelationDesign::Blocks { within, between } => {
                let r = match within {
                    WithinRule::Constant { rho } => rho,
                    WithinRule::Affine { intercept, .. } => intercept,
                };
                if !(r.abs() < 1.0 && between.abs() < 1.0) {
                    return bad("correlation", "correlations must lie in (-1, 1)".into());
                }
            }
            CorrelationDesign::Surrogate {
                fraction_above,
                cutoff,
                rank,
            } => {
                if !(fraction_above > 0.0
                    && fraction_above < 1.0
                    && cutoff > 0.0
                    && cutoff < 1.0
                    && rank >= 1)
                {
                    return bad(
                        "correlation",
                        "surrogate needs 0 < fraction_above, cutoff < 1 and rank >= 1".into(),
                    );
                }
            }
        }
        Ok(())
    }

    pub fn is_surrogate(&self) -> bool {
        matches!(self.correlation, CorrelationDesign::Surrogate { .. })
    }
}

/// True effects and labels of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEffects {
    pub beta_m: Vec<f64>,
    pub alpha_a: Vec<f64>,
    pub labels: Vec<Component>,
}

impl SimEffects {
    pub fn active(&self) -> Vec<bool> {
        self.labels
            .iter()
            .map(|&g| g == Component::Active)
            .collect()
    }

    pub fn indirect(&self) -> Vec<f64> {
        self.alpha_a
            .iter()
            .zip(&self.beta_m)
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// Pins actives to random positions inside the designated blocks; every
/// other mediator draws its label from the remaining three components.
pub fn gen_effects<R: Rng + ?Sized>(design: &SimDesign, rng: &mut R) -> Result<SimEffects> {
    design.validate()?;
    let p = design.p;
    let mut labels = vec![None; p];
    for (b, &count) in design.active_per_block.iter().enumerate() {
        for off in sample_indices(rng, design.block_size, count) {
            labels[b * design.block_size + off] = Some(Component::Active);
        }
    }
    let rest = [
        design.proportions[1],
        design.proportions[2],
        design.proportions[3],
    ];
    let rest_sum: f64 = rest.iter().sum();
    if rest_sum <= 0.0 && labels.iter().any(Option::is_none) {
        return Err(Error::Config(format!(
            "design {:?}: non-active mediators remain but components 2-4 have zero weight",
            design.name
        )));
    }
    let log_rest: Vec<f64> = rest.iter().map(|x| x.ln()).collect();
    let l00 = design.v1[0][0].sqrt();
    let l10 = design.v1[1][0] / l00;
    let l11 = (design.v1[1][1] - l10 * l10).sqrt();
    let mut out = SimEffects {
        beta_m: vec![0.0; p],
        alpha_a: vec![0.0; p],
        labels: Vec::with_capacity(p),
    };
    for (j, slot) in labels.into_iter().enumerate() {
        let g = slot
            .unwrap_or_else(|| Component::from_index(1 + sample_log_categorical(&log_rest, rng)));
        match g {
            Component::Active => {
                let (z1, z2) = (std_normal(rng), std_normal(rng));
                out.beta_m[j] = l00 * z1;
                out.alpha_a[j] = l10 * z1 + l11 * z2;
            }
            Component::OutcomeOnly => out.beta_m[j] = design.v2.sqrt() * std_normal(rng),
            Component::ExposureOnly => out.alpha_a[j] = design.v3.sqrt() * std_normal(rng),
            Component::Null => {}
        }
        out.labels.push(g);
    }
    Ok(out)
}

/// Mediator noise covariance (a correlation matrix) of the design.
pub fn gen_block_covariance(design: &SimDesign) -> Result<SymmetricMatrix> {
    design.validate()?;
    let p = design.p;
    let m = match design.correlation {
        CorrelationDesign::Blocks { within, between } => {
            let bs = design.block_size;
            let blocked = design.block_count * bs;
            let raw = SymmetricMatrix::from_fn(p, |i, j| {
                if i == j {
                    1.0
                } else if i >= blocked || j >= blocked {
                    0.0
                } else if i / bs == j / bs {
                    within.at(i.abs_diff(j))
                } else {
                    between.max(0.0)
                }
            });
            if raw.is_positive_definite() {
                raw
            } else {
                nearest_positive_definite(&raw, DEFAULT_EIGEN_FLOOR)
            }
        }
        CorrelationDesign::Surrogate {
            fraction_above,
            cutoff,
            rank,
        } => surrogate_correlation(
            p,
            fraction_above,
            cutoff,
            rank,
            &mut RngStream::new(design.seed),
        ),
    };
    Ok(m)
}

/// `(1 - s) I + s R0` with `R0` the normalized Gram matrix of a random
/// `p x rank` Gaussian matrix, and `s` chosen so the requested share of
/// off-diagonal magnitudes exceeds `cutoff`. Positive definite for `s < 1`.
fn surrogate_correlation<R: Rng + ?Sized>(
    p: usize,
    fraction_above: f64,
    cutoff: f64,
    rank: usize,
    rng: &mut R,
) -> SymmetricMatrix {
    let z: Vec<f64> = (0..p * rank).map(|_| std_normal(rng)).collect();
    let norms: Vec<f64> = (0..p)
        .map(|i| {
            crate::linalg::dot(&z[i * rank..(i + 1) * rank], &z[i * rank..(i + 1) * rank]).sqrt()
        })
        .collect();
    let r0 = |i: usize, j: usize| {
        crate::linalg::dot(&z[i * rank..(i + 1) * rank], &z[j * rank..(j + 1) * rank])
            / (norms[i] * norms[j])
    };
    let mut mags: Vec<f64> = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            mags.push(r0(i, j).abs());
        }
    }
    mags.sort_by(|a, b| a.total_cmp(b));
    let q = crate::analysis::quantile(&mags, 1.0 - fraction_above);
    let s = if q > 0.0 {
        (cutoff / q).min(0.95)
    } else {
        0.95
    };
    SymmetricMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { s * r0(i, j) })
}

/// One dataset: `A ~ N(0, 1)`, `M_i = A_i alpha_a + e_i` with
/// `e_i ~ MVN(0, cov)`, and `Y_i = M_i' beta_m + A_i beta_a + N(0, sigma_e^2)`.
/// Returned uncentered.
pub fn gen_dataset<R: Rng + ?Sized>(
    design: &SimDesign,
    effects: &SimEffects,
    cov: &SymmetricMatrix,
    rng: &mut R,
) -> Result<MediationDataset> {
    let (n, p) = (design.n, design.p);
    if cov.dim() != p || effects.beta_m.len() != p {
        return Err(Error::Dimension(format!(
            "design has p = {p} but inputs disagree"
        )));
    }
    let chol: &Cholesky = cov.cholesky()?;
    let a: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let mut m = vec![0.0; n * p];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = std_normal(rng));
        let e = chol.mul_lower(&z);
        let mut yi = a[i] * design.beta_a + design.sigma_e * std_normal(rng);
        for j in 0..p {
            let mij = a[i] * effects.alpha_a[j] + e[j];
            m[j * n + i] = mij;
            yi += mij * effects.beta_m[j];
        }
        y[i] = yi;
    }
    MediationDataset::new(a, m, y, Vec::new(), 0)
}

/// Settings shared by every cell of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub mcmc: McmcConfig,
    pub hyper: Hyperparameters,
    pub fdr: f64,
    /// Share of neighbor-graph edges swapped before a Potts fit.
    pub graph_perturbation: f64,
    /// Noise sd added to estimated correlations before a CorrS fit.
    pub corr_noise: f64,
    pub eigen_floor: f64,
    pub structure: StructureSource,
}

/// Where the structure inputs of a simulated fit come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureSource {
    /// Sample correlations of the generated mediators.
    #[default]
    Estimated,
    /// The generating correlation matrix, for diagnosing how much of a
    /// method's performance is lost to estimation noise.
    Oracle,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            mcmc: McmcConfig::default(),
            hyper: Hyperparameters::default(),
            fdr: 0.1,
            graph_perturbation: 0.0,
            corr_noise: 0.0,
            eigen_floor: DEFAULT_EIGEN_FLOOR,
            structure: StructureSource::Estimated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub design: String,
    pub method: Method,
    pub replicate: usize,
    /// TPR at the fixed FDR, using PIPs as scores and the known truth.
    pub tpr: f64,
    pub mse_nonnull: f64,
    pub mse_null: f64,
    pub tpr_locfdr: f64,
    pub fdr_locfdr: f64,
    pub tpr_pip05: f64,
    pub fdr_pip05: f64,
    pub tpr_pip09: f64,
    pub fdr_pip09: f64,
    pub seconds: f64,
    /// Set when the replicate failed; metrics are then NaN.
    pub error: Option<String>,
}

impl ReplicateResult {
    fn failed(design: &str, method: Method, replicate: usize, err: String, seconds: f64) -> Self {
        let nan = f64::NAN;
        ReplicateResult {
            design: design.to_string(),
            method,
            replicate,
            tpr: nan,
            mse_nonnull: nan,
            mse_null: nan,
            tpr_locfdr: nan,
            fdr_locfdr: nan,
            tpr_pip05: nan,
            fdr_pip05: nan,
            tpr_pip09: nan,
            fdr_pip09: nan,
            seconds,
            error: Some(err),
        }
    }

    pub fn metrics(&self) -> [(&'static str, f64); 9] {
        [
            ("tpr", self.tpr),
            ("mse_nonnull", self.mse_nonnull),
            ("mse_null", self.mse_null),
            ("tpr_locfdr", self.tpr_locfdr),
            ("fdr_locfdr", self.fdr_locfdr),
            ("tpr_pip05", self.tpr_pip05),
            ("fdr_pip05", self.fdr_pip05),
            ("tpr_pip09", self.tpr_pip09),
            ("fdr_pip09", self.fdr_pip09),
        ]
    }
}

/// Everything generated for one replicate, before any fitting.
#[derive(Clone, Debug)]
pub struct Replicate {
    pub effects: SimEffects,
    pub cov: SymmetricMatrix,
    /// Centered data.
    pub data: MediationDataset,
}

/// Replicate `rep` of a design, drawn from substream 0 of `stream`.
pub fn gen_replicate(
    design: &SimDesign,
    cov: &SymmetricMatrix,
    stream: &RngStream,
) -> Result<Replicate> {
    let mut rng = stream.substream(0);
    let effects = gen_effects(design, &mut rng)?;
    let data = gen_dataset(design, &effects, cov, &mut rng)?.centered()?;
    Ok(Replicate {
        effects,
        cov: cov.clone(),
        data,
    })
}

/// Structure inputs for `method` from the replicate's mediators (or the
/// generating matrix `cov`, if so configured), perturbed as configured.
pub fn prepare_structure(
    method: Method,
    data: &MediationDataset,
    cov: &SymmetricMatrix,
    config: &GridConfig,
    rng: &mut RngStream,
) -> Result<Structure> {
    let summary = || match config.structure {
        StructureSource::Estimated => dataset_correlation(data),
        StructureSource::Oracle => CorrelationSummary::from_matrix(cov.clone()),
    };
    Ok(match method {
        Method::Gmm => Structure::None,
        Method::Potts => {
            let summary = summary()?;
            let g = build_neighbor_graph(&summary)?.graph;
            Structure::Graph(if config.graph_perturbation > 0.0 {
                perturb_graph(&g, config.graph_perturbation, rng)?
            } else {
                g
            })
        }
        Method::Corrs => {
            let mut summary = summary()?;
            if config.corr_noise > 0.0 {
                summary = perturb_correlation(&summary, config.corr_noise, rng)?;
            }
            Structure::Matrix(build_corrs_d(&summary, config.eigen_floor))
        }
    })
}

fn method_slot(method: Method) -> u64 {
    match method {
        Method::Gmm => 0,
        Method::Potts => 1,
        Method::Corrs => 2,
    }
}

/// Fits and scores one method on one replicate.
pub fn run_method(
    design: &SimDesign,
    rep: &Replicate,
    index: usize,
    method: Method,
    config: &GridConfig,
    stream: &RngStream,
) -> ReplicateResult {
    let start = Instant::now();
    let slot = method_slot(method);
    let outcome = (|| -> Result<ReplicateResult> {
        let mut srng = stream.substream(10 + slot);
        let structure = prepare_structure(method, &rep.data, &rep.cov, config, &mut srng)?;
        let model = MediationModel::new(rep.data.clone(), config.hyper.clone())?;
        let mut frng = stream.substream(20 + slot);
        let trace = fit_chain(method, &model, &structure, &config.mcmc, &mut frng)?;
        let pips = compute_pips(&trace)?;
        let active = rep.effects.active();
        let tpr = tpr_at_fixed_fdr(&pips, &active, config.fdr)?;
        let (mse_nonnull, mse_null) = mse_metrics(&trace, &rep.effects.indirect(), &active)?;
        let rules = empirical_fdr_report(&pips, &active, config.fdr)?;
        Ok(ReplicateResult {
            design: design.name.clone(),
            method,
            replicate: index,
            tpr,
            mse_nonnull,
            mse_null,
            tpr_locfdr: rules[0].tpr,
            fdr_locfdr: rules[0].fdr,
            tpr_pip05: rules[1].tpr,
            fdr_pip05: rules[1].fdr,
            tpr_pip09: rules[2].tpr,
            fdr_pip09: rules[2].fdr,
            seconds: 0.0,
            error: None,
        })
    })();
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(mut r) => {
            r.seconds = secs;
            r
        }
        Err(e) => {
            log::warn!("{} / {method} / replicate {index} failed: {e}", design.name);
            ReplicateResult::failed(&design.name, method, index, e.to_string(), secs)
        }
    }
}

/// Stream of replicate `rep` of design number `d` under `master`.
pub fn replicate_stream(master: &RngStream, d: usize, rep: usize) -> RngStream {
    master.substream(d as u64).substream(rep as u64)
}

/// Runs every (design, replicate, method) cell. Replicates run in parallel
/// on the current rayon pool; each owns its substream, so results do not
/// depend on scheduling. Within a replicate all methods see the same data.
pub fn run_grid(
    designs: &[SimDesign],
    methods: &[Method],
    config: &GridConfig,
    master: &RngStream,
) -> Result<Vec<ReplicateResult>> {
    config.mcmc.validate()?;
    if !(config.fdr > 0.0 && config.fdr < 1.0) {
        return Err(Error::Config(format!(
            "fdr must lie in (0, 1), got {}",
            config.fdr
        )));
    }
    let mut covs = Vec::with_capacity(designs.len());
    for d in designs {
        d.validate()?;
        covs.push(gen_block_covariance(d)?);
    }
    let jobs: Vec<(usize, usize)> = designs
        .iter()
        .enumerate()
        .flat_map(|(d, des)| (0..des.replicates).map(move |r| (d, r)))
        .collect();
    let rows: Vec<Vec<ReplicateResult>> = jobs
        .par_iter()
        .map(|&(d, r)| {
            let design = &designs[d];
            let stream = replicate_stream(master, d, r);
            match gen_replicate(design, &covs[d], &stream) {
                Ok(rep) => methods
                    .iter()
                    .map(|&m| run_method(design, &rep, r, m, config, &stream))
                    .collect(),
                Err(e) => methods
                    .iter()
                    .map(|&m| ReplicateResult::failed(&design.name, m, r, e.to_string(), 0.0))
                    .collect(),
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Mean and standard error (`sd / sqrt(count)`) of one metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        if x.is_empty() {
            return MeanSe {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = x.iter().sum::<f64>() / n;
        let se = if x.len() < 2 {
            f64::NAN
        } else {
            (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        };
        MeanSe { mean, se }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub design: String,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    /// Metric name with mean and standard error over completed replicates.
    /// NaN values (for example an MSE over an empty set) are skipped.
    pub metrics: Vec<(String, MeanSe)>,
    pub seconds: MeanSe,
}

/// Aggregates per-replicate rows by (design, method), in first-seen order.
pub fn summarize(rows: &[ReplicateResult]) -> Vec<GridSummary> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in rows {
        let k = (r.design.clone(), r.method);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(design, method)| {
            let cell: Vec<&ReplicateResult> = rows
                .iter()
                .filter(|r| r.design == design && r.method == method)
                .collect();
            let ok: Vec<&&ReplicateResult> = cell.iter().filter(|r| r.error.is_none()).collect();
            let names = cell[0].metrics().map(|(n, _)| n);
            let metrics = names
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let v: Vec<f64> = ok
                        .iter()
                        .map(|r| r.metrics()[i].1)
                        .filter(|x| x.is_finite())
                        .collect();
                    (name.to_string(), MeanSe::of(&v))
                })
                .collect();
            let secs: Vec<f64> = ok.iter().map(|r| r.seconds).collect();
            GridSummary {
                design,
                method,
                completed: ok.len(),
                failed: cell.len() - ok.len(),
                metrics,
                seconds: MeanSe::of(&secs),
            }
        })
        .collect()
}
