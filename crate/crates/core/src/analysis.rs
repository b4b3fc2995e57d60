//! Summaries of posterior traces: inclusion probabilities, local-FDR
//! selection, effect estimates and convergence diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::PosteriorTrace;

/// `P(gamma_j = active | data)` for every mediator.
pub fn compute_pips(trace: &PosteriorTrace) -> Result<Vec<f64>> {
    if trace.draws == 0 {
        return Err(Error::InvalidData("trace has no retained draws".into()));
    }
    let t = trace.draws as f64;
    Ok(trace.occupancy.iter().map(|o| o[0] as f64 / t).collect())
}

pub fn locfdr(pips: &[f64]) -> Vec<f64> {
    pips.iter().map(|p| 1.0 - p).collect()
}

/// Cutoff and selected set of the running-mean local-FDR rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Mediators with `locfdr < c1` are selected. Infinite when all are.
    pub c1: f64,
    pub selected: Vec<usize>,
}

/// Largest cutoff `c1` such that the mean local FDR of `{j : locfdr_j < c1}`
/// stays below `target`. Tied values enter or leave together.
pub fn locfdr_threshold(locfdr: &[f64], target: f64) -> Result<Selection> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "FDR target must lie in (0, 1), got {target}"
        )));
    }
    if locfdr.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("local FDR values must be finite".into()));
    }
    let mut order: Vec<usize> = (0..locfdr.len()).collect();
    order.sort_by(|&a, &b| locfdr[a].total_cmp(&locfdr[b]));
    let mut sum = 0.0;
    let mut keep = 0;
    let mut k = 0;
    while k < order.len() {
        // extend over the whole tie group
        let v = locfdr[order[k]];
        let mut end = k;
        while end < order.len() && locfdr[order[end]] == v {
            sum += v;
            end += 1;
        }
        if sum / end as f64 >= target {
            break;
        }
        keep = end;
        k = end;
    }
    let c1 = if keep < order.len() {
        locfdr[order[keep]]
    } else {
        f64::INFINITY
    };
    let mut selected: Vec<usize> = order[..keep].to_vec();
    selected.sort_unstable();
    Ok(Selection { c1, selected })
}

/// True positive rate of the largest score-threshold selection whose
/// realized FDR is at most `fdr`. Items with equal scores are selected
/// together. Zero when no nonempty selection qualifies.
pub fn tpr_at_fixed_fdr(scores: &[f64], truth: &[bool], fdr: f64) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} truth labels",
            scores.len(),
            truth.len()
        )));
    }
    let actives = truth.iter().filter(|&&t| t).count();
    if actives == 0 {
        return Err(Error::Undefined(
            "true positive rate is undefined without active mediators".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = 0usize;
    let mut k = 0;
    while k < order.len() {
        let v = scores[order[k]];
        while k < order.len() && scores[order[k]] == v {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        if fp as f64 <= fdr * (tp + fp) as f64 {
            best = best.max(tp);
        }
    }
    Ok(best as f64 / actives as f64)
}

/// Realized selection quality against known truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub selected: usize,
    pub tpr: f64,
    /// False discoveries over discoveries; zero for an empty selection.
    pub fdr: f64,
}

pub fn score_selection(rule: &str, selected: &[usize], truth: &[bool]) -> RuleOutcome {
    let actives = truth.iter().filter(|&&t| t).count();
    let tp = selected.iter().filter(|&&j| truth[j]).count();
    let fp = selected.len() - tp;
    RuleOutcome {
        rule: rule.to_string(),
        selected: selected.len(),
        tpr: if actives == 0 {
            f64::NAN
        } else {
            tp as f64 / actives as f64
        },
        fdr: if selected.is_empty() {
            0.0
        } else {
            fp as f64 / selected.len() as f64
        },
    }
}

/// TPR and realized FDR under the local-FDR rule at `target` and the PIP
/// cutoffs 0.5 and 0.9.
pub fn empirical_fdr_report(pips: &[f64], truth: &[bool], target: f64) -> Result<Vec<RuleOutcome>> {
    if pips.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} PIPs but {} truth labels",
            pips.len(),
            truth.len()
        )));
    }
    let sel = locfdr_threshold(&locfdr(pips), target)?;
    let above = |c: f64| -> Vec<usize> { (0..pips.len()).filter(|&j| pips[j] > c).collect() };
    Ok(vec![
        score_selection(&format!("locfdr@{target}"), &sel.selected, truth),
        score_selection("pip>0.5", &above(0.5), truth),
        score_selection("pip>0.9", &above(0.9), truth),
    ])
}

/// Posterior-mean indirect effect per mediator.
pub fn indirect_effect_means(trace: &PosteriorTrace) -> Vec<f64> {
    (0..trace.p)
        .map(|j| {
            let d = trace.indirect_draws(j);
            d.iter().sum::<f64>() / d.len().max(1) as f64
        })
        .collect()
}

/// Mean squared error of the posterior-mean indirect effects, separately
/// over truly active and all other mediators. A set with no members gives NaN.
pub fn mse_metrics(
    trace: &PosteriorTrace,
    true_indirect: &[f64],
    active: &[bool],
) -> Result<(f64, f64)> {
    if true_indirect.len() != trace.p || active.len() != trace.p {
        return Err(Error::Dimension(
            "truth length differs from the number of mediators".into(),
        ));
    }
    let est = indirect_effect_means(trace);
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for j in 0..trace.p {
        let e = (est[j] - true_indirect[j]).powi(2);
        if active[j] {
            s1 += e;
            n1 += 1;
        } else {
            s0 += e;
            n0 += 1;
        }
    }
    let avg = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
    Ok((avg(s1, n1), avg(s0, n0)))
}

/// Potential scale reduction factor of equal-length chains (classic
/// between/within formulation, no chain splitting). Chains that are all
/// constant at the same value give 1; constant but different give infinity.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidData(format!(
            "PSRF needs at least 2 chains, got {m}"
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("chains have different lengths".into()));
    }
    if n < 10 {
        return Err(Error::InvalidData(format!(
            "PSRF needs chains of length at least 10, got {n}"
        )));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = nf / (m as f64 - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m as f64;
    if w <= 0.0 {
        return Ok(if b <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// PSRF of each mediator's active-label indicator across chains.
pub fn pip_psrf(chains: &[PosteriorTrace]) -> Result<Vec<f64>> {
    let p = chains.first().map_or(0, |c| c.p);
    (0..p)
        .map(|j| {
            let series: Vec<Vec<f64>> = chains
                .iter()
                .map(|c| {
                    (0..c.draws)
                        .map(|t| (c.gamma[t * c.p + j] == 1) as u8 as f64)
                        .collect()
                })
                .collect();
            psrf(&series)
        })
        .collect()
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior mean, median and equal-tailed 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_draws(draws: &[f64]) -> Self {
        let mut s = draws.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        Interval {
            mean: s.iter().sum::<f64>() / s.len().max(1) as f64,
            median: quantile(&s, 0.5),
            lower: quantile(&s, 0.025),
            upper: quantile(&s, 0.975),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub pip: Vec<f64>,
    pub locfdr: Vec<f64>,
    pub fdr_target: f64,
    pub c1: f64,
    pub selected: Vec<usize>,
    /// Per-mediator indirect effect for a unit contrast `a - a* = 1`.
    pub nie: Vec<Interval>,
    pub contrast: (f64, f64),
    pub global_nde: Interval,
    pub global_nie: Interval,
    pub global_te: Interval,
}

/// Report for the exposure contrast `a` versus `a_star`.
pub fn selection_report(
    trace: &PosteriorTrace,
    fdr_target: f64,
    a: f64,
    a_star: f64,
) -> Result<SelectionReport> {
    let pip = compute_pips(trace)?;
    let lf = locfdr(&pip);
    let sel = locfdr_threshold(&lf, fdr_target)?;
    let nie: Vec<Interval> = (0..trace.p)
        .map(|j| Interval::from_draws(&trace.indirect_draws(j)))
        .collect();
    let delta = a - a_star;
    let (mut nde, mut nie_total, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..trace.draws {
        let row = t * trace.p..(t + 1) * trace.p;
        let ie: f64 = trace.alpha_a[row.clone()]
            .iter()
            .zip(&trace.beta_m[row])
            .map(|(x, y)| x * y)
            .sum();
        let de = delta * trace.beta_a[t];
        nde.push(de);
        nie_total.push(delta * ie);
        te.push(de + delta * ie);
    }
    Ok(SelectionReport {
        pip,
        locfdr: lf,
        fdr_target,
        c1: sel.c1,
        selected: sel.selected,
        nie,
        contrast: (a, a_star),
        global_nde: Interval::from_draws(&nde),
        global_nie: Interval::from_draws(&nie_total),
        global_te: Interval::from_draws(&te),
    })
}
