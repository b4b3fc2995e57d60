//! Mediator structure inputs: the neighbor graph for the Potts prior and
//! the correlation matrix for the correlated logit prior.

use log::warn;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::dist::std_normal;
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::model::MediationDataset;
use crate::nearpd::nearest_positive_definite;
use crate::potts::NeighborGraph;

/// Pairwise mediator correlations.
#[derive(Clone, Debug)]
pub struct CorrelationSummary {
    pub corr: SymmetricMatrix,
    pub abs_corr: SymmetricMatrix,
    /// Upper-triangle entries, row by row (`(0,1), (0,2), ..., (p-2,p-1)`).
    pub offdiag: Vec<f64>,
}

impl CorrelationSummary {
    /// Wraps an externally supplied correlation matrix. Requires unit
    /// diagonal and entries in `[-1, 1]`.
    pub fn from_matrix(corr: SymmetricMatrix) -> Result<Self> {
        let p = corr.dim();
        for i in 0..p {
            if (corr.get(i, i) - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidData(format!(
                    "correlation matrix diagonal entry {i} is {}, expected 1",
                    corr.get(i, i)
                )));
            }
            for j in 0..p {
                let v = corr.get(i, j);
                if !v.is_finite() || v.abs() > 1.0 + 1e-8 {
                    return Err(Error::InvalidData(format!(
                        "correlation entry ({i}, {j}) = {v} is outside [-1, 1]"
                    )));
                }
            }
        }
        let abs_corr = SymmetricMatrix::from_fn(p, |i, j| corr.get(i, j).abs());
        let offdiag = upper_triangle(&corr);
        Ok(CorrelationSummary {
            corr,
            abs_corr,
            offdiag,
        })
    }

    pub fn p(&self) -> usize {
        self.corr.dim()
    }
}

fn upper_triangle(m: &SymmetricMatrix) -> Vec<f64> {
    let p = m.dim();
    let mut out = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            out.push(m.get(i, j));
        }
    }
    out
}

/// Pearson correlation of the columns of a column-major `n x p` matrix.
pub fn estimate_correlation(m: &[f64], n: usize, p: usize) -> Result<CorrelationSummary> {
    if n < 3 {
        return Err(Error::InvalidData(format!(
            "need at least 3 observations to estimate correlations, got {n}"
        )));
    }
    if m.len() != n * p {
        return Err(Error::Dimension(format!(
            "mediator matrix has {} entries, expected {n} x {p}",
            m.len()
        )));
    }
    let mut z = vec![0.0; n * p];
    for j in 0..p {
        let col = &m[j * n..(j + 1) * n];
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        if !ss.is_finite() {
            return Err(Error::InvalidData(format!(
                "mediator column {j} has non-finite values"
            )));
        }
        if ss <= 1e-24 * n as f64 * (1.0 + mean * mean) {
            return Err(Error::InvalidData(format!(
                "mediator column {j} is constant"
            )));
        }
        let s = ss.sqrt();
        for (zi, v) in z[j * n..(j + 1) * n].iter_mut().zip(col) {
            *zi = (v - mean) / s;
        }
    }
    let mut vals = vec![0.0; p * p];
    for i in 0..p {
        vals[i * p + i] = 1.0;
        let zi = &z[i * n..(i + 1) * n];
        for j in i + 1..p {
            let r = crate::linalg::dot(zi, &z[j * n..(j + 1) * n]).clamp(-1.0, 1.0);
            vals[i * p + j] = r;
            vals[j * p + i] = r;
        }
    }
    CorrelationSummary::from_matrix(SymmetricMatrix::from_row_major(p, &vals)?)
}

pub fn dataset_correlation(data: &MediationDataset) -> Result<CorrelationSummary> {
    estimate_correlation(data.mediators_col_major(), data.n(), data.p())
}

/// Result of splitting absolute correlations into background and signal.
#[derive(Clone, Debug)]
pub struct ThresholdGraph {
    pub graph: NeighborGraph,
    /// `None` when the values could not be split (all equal, or fewer than
    /// two pairs).
    pub threshold: Option<f64>,
    pub centers: Option<(f64, f64)>,
}

/// Globally optimal two-means split of 1-D values. Returns the two centers
/// (low, high), or `None` when all values coincide.
pub fn two_means(values: &[f64]) -> Option<(f64, f64)> {
    let mut x: Vec<f64> = values.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len();
    if n < 2 || x[0] == x[n - 1] {
        return None;
    }
    // shift by the mean so the prefix sums stay well scaled
    let shift = x.iter().sum::<f64>() / n as f64;
    let total: f64 = x.iter().map(|v| v - shift).sum();
    let mut left = 0.0;
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
    for k in 1..n {
        left += x[k - 1] - shift;
        if x[k - 1] == x[k] {
            continue;
        }
        let right = total - left;
        // minimizing within-cluster SS is maximizing this between-cluster term
        let score = left * left / k as f64 + right * right / (n - k) as f64;
        if score > best.0 {
            best = (score, k, left);
        }
    }
    let (_, k, left) = best;
    let lo = left / k as f64 + shift;
    let hi = (total - left) / (n - k) as f64 + shift;
    Some((lo, hi))
}

/// Neighbor graph from a two-means split of the absolute off-diagonal
/// correlations: `(i, j)` is an edge iff `|corr_ij|` is at least the
/// midpoint of the two cluster centers.
pub fn build_neighbor_graph(summary: &CorrelationSummary) -> Result<ThresholdGraph> {
    let p = summary.p();
    if p < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 mediators to build a graph, got {p}"
        )));
    }
    let abs: Vec<f64> = summary.offdiag.iter().map(|v| v.abs()).collect();
    let Some((lo, hi)) = two_means(&abs) else {
        warn!("all pairwise correlations are equal; using an empty neighbor graph");
        return Ok(ThresholdGraph {
            graph: NeighborGraph::empty(p),
            threshold: None,
            centers: None,
        });
    };
    let threshold = 0.5 * (lo + hi);
    Ok(ThresholdGraph {
        graph: graph_above(summary, threshold)?,
        threshold: Some(threshold),
        centers: Some((lo, hi)),
    })
}

/// Graph with an edge wherever `|corr_ij| >= threshold`.
pub fn graph_above(summary: &CorrelationSummary, threshold: f64) -> Result<NeighborGraph> {
    let p = summary.p();
    let mut pairs = Vec::new();
    let mut idx = 0;
    for i in 0..p {
        for j in i + 1..p {
            if summary.offdiag[idx].abs() >= threshold {
                pairs.push((i, j));
            }
            idx += 1;
        }
    }
    NeighborGraph::new(p, &pairs)
}

/// Structure matrix for the correlated logit prior: the nearest
/// positive-definite matrix to the absolute correlations.
pub fn build_corrs_d(summary: &CorrelationSummary, eigen_floor: f64) -> SymmetricMatrix {
    nearest_positive_definite(&summary.abs_corr, eigen_floor)
}

/// Swaps `floor(r |E|)` edges (at least one when `r > 0`) for the same
/// number of former non-edges, both chosen uniformly.
pub fn perturb_graph<R: Rng + ?Sized>(
    graph: &NeighborGraph,
    r: f64,
    rng: &mut R,
) -> Result<NeighborGraph> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "perturbation rate must lie in [0, 1], got {r}"
        )));
    }
    let p = graph.p();
    let e = graph.edge_count();
    let mut swap = (r * e as f64).floor() as usize;
    if r > 0.0 && e >= 1 {
        swap = swap.max(1);
    }
    if swap == 0 {
        return Ok(graph.clone());
    }
    let total_pairs = p * (p - 1) / 2;
    let non_edges = total_pairs - e;
    if non_edges < swap {
        return Err(Error::InvalidParameter(format!(
            "cannot add {swap} edges: only {non_edges} non-adjacent pairs exist"
        )));
    }
    let removed: std::collections::HashSet<usize> =
        sample_indices(rng, e, swap).into_iter().collect();
    let mut pairs: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, &pr)| pr)
        .collect();

    // rank of each chosen non-edge among all non-edges, in upper-triangle order
    let mut picks: Vec<usize> = sample_indices(rng, non_edges, swap).into_vec();
    picks.sort_unstable();
    let mut next = picks.iter().peekable();
    let mut rank = 0;
    'outer: for i in 0..p {
        for j in i + 1..p {
            if graph.has_edge(i, j) {
                continue;
            }
            match next.peek() {
                Some(&&want) if want == rank => {
                    pairs.push((i, j));
                    next.next();
                }
                None => break 'outer,
                _ => {}
            }
            rank += 1;
        }
    }
    NeighborGraph::new(p, &pairs)
}

/// Adds one `N(0, sd^2)` draw per off-diagonal pair (applied symmetrically)
/// and clips to `[-1, 1]`. The result need not be positive definite.
pub fn perturb_correlation<R: Rng + ?Sized>(
    summary: &CorrelationSummary,
    sd: f64,
    rng: &mut R,
) -> Result<CorrelationSummary> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sd must be non-negative, got {sd}"
        )));
    }
    let p = summary.p();
    if sd == 0.0 {
        return Ok(summary.clone());
    }
    let mut vals = summary.corr.to_row_major();
    for i in 0..p {
        for j in i + 1..p {
            let v = (vals[i * p + j] + sd * std_normal(rng)).clamp(-1.0, 1.0);
            vals[i * p + j] = v;
            vals[j * p + i] = v;
        }
    }
    CorrelationSummary::from_matrix(SymmetricMatrix::from_row_major(p, &vals)?)
}
