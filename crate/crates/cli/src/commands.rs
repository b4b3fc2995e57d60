use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use medcorr::analysis::{
    empirical_fdr_report, pip_psrf, psrf, quantile, score_selection, selection_report,
    tpr_at_fixed_fdr, Interval,
};
use medcorr::fit::{fit_chains, Method, Structure};
use medcorr::model::{MediationDataset, MediationModel};
use medcorr::potts::NeighborGraph;
use medcorr::sim::{gen_block_covariance, gen_dataset, gen_effects, replicate_stream, SimDesign};
use medcorr::structure::{
    build_corrs_d, build_neighbor_graph, dataset_correlation, CorrelationSummary,
};
use medcorr::trace::PosteriorTrace;
use medcorr::{Error, RngStream, SymmetricMatrix};

use crate::config::{RunConfig, StructureSource};
use crate::failure::Failure;
use crate::io::{
    ensure_dir, mediator_name, num, read_dataset, write_csv, write_text, Provenance, Table,
};

/// PSRF above this value marks a parameter as not converged.
pub const PSRF_FLAG: f64 = 1.2;

const DEFAULT_PRESET: &str = "one-block";

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

fn kv(rows: &[(&str, String)]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect()
}

pub fn resolve_design(cfg: &RunConfig) -> Result<SimDesign, Failure> {
    let mut design = match (&cfg.simulate.design, &cfg.simulate.preset) {
        (Some(d), _) => d.clone(),
        (None, name) => {
            let name = name.as_deref().unwrap_or(DEFAULT_PRESET);
            SimDesign::preset(name).ok_or_else(|| {
                Failure::validation(format!(
                    "simulate.preset: unknown design {name:?} (known: {})",
                    medcorr::sim::PRESETS.join(", ")
                ))
            })?
        }
    };
    if let Some(r) = cfg.simulate.replicates {
        design.replicates = r;
    }
    design.seed = cfg.seed;
    design.validate()?;
    Ok(design)
}

/// Writes one directory of data and truth per replicate.
pub fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let design = resolve_design(cfg)?;
    let prov = provenance(cfg);
    ensure_dir(&cfg.out)?;
    let design_text = toml::to_string(&design).map_err(|e| Failure::runtime(e.to_string()))?;
    write_text(&cfg.out.join("design.toml"), &prov, &design_text)?;
    let cov = gen_block_covariance(&design)?;
    let master = RngStream::new(cfg.seed);
    for rep in 0..design.replicates {
        let mut rng = replicate_stream(&master, 0, rep).substream(0);
        let effects = gen_effects(&design, &mut rng)?;
        let data = gen_dataset(&design, &effects, &cov, &mut rng)?;
        let dir = cfg.out.join(format!("rep_{:03}", rep + 1));
        ensure_dir(&dir)?;
        crate::io::write_dataset(&dir, &data, &prov)?;
        let active = effects.active();
        let indirect = effects.indirect();
        let rows: Vec<Vec<String>> = (0..design.p)
            .map(|j| {
                vec![
                    mediator_name(j),
                    effects.labels[j].label().to_string(),
                    num(effects.beta_m[j]),
                    num(effects.alpha_a[j]),
                    num(indirect[j]),
                    (active[j] as u8).to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("truth.csv"),
            &prov,
            &[
                "mediator", "label", "beta_m", "alpha_a", "indirect", "active",
            ],
            &rows,
        )?;
    }
    println!(
        "wrote {} replicate(s) of design {:?} (n = {}, p = {}) to {}",
        design.replicates,
        design.name,
        design.n,
        design.p,
        cfg.out.display()
    );
    Ok(())
}

fn read_matrix(path: &Path, p: usize) -> Result<SymmetricMatrix, Failure> {
    let t = Table::read(path)?;
    let rows = t.numeric_rows()?;
    if rows.len() != p || t.headers.len() != p {
        return Err(Failure::validation(format!(
            "{}: expected a {p} x {p} matrix, found {} x {}",
            path.display(),
            rows.len(),
            t.headers.len()
        )));
    }
    let vals: Vec<f64> = rows.into_iter().flatten().collect();
    SymmetricMatrix::from_row_major(p, &vals)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

fn required(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    path.clone().ok_or_else(|| {
        Failure::validation(format!(
            "structure.{what} is required for this structure source"
        ))
    })
}

fn estimated(data: &MediationDataset, method: Method) -> Result<CorrelationSummary, Failure> {
    dataset_correlation(data).map_err(|e| {
        Failure::validation(format!(
            "the {method} method needs structure and none can be estimated from the mediators ({e}); \
             pass --graph or --corr-matrix"
        ))
    })
}

/// Structure input for the configured method.
pub fn resolve_structure(cfg: &RunConfig, data: &MediationDataset) -> Result<Structure, Failure> {
    let p = data.p();
    let floor = cfg
        .structure
        .eigen_floor
        .unwrap_or(medcorr::nearpd::DEFAULT_EIGEN_FLOOR);
    match (cfg.method, cfg.structure.source) {
        (Method::Gmm, source) => {
            if source != StructureSource::Auto {
                warn!("the gmm method ignores structure inputs");
            }
            Ok(Structure::None)
        }
        (Method::Potts, StructureSource::Auto) => {
            let tg = build_neighbor_graph(&estimated(data, Method::Potts)?)?;
            info!(
                "estimated neighbor graph: {} edges, threshold {:?}",
                tg.graph.edge_count(),
                tg.threshold
            );
            Ok(Structure::Graph(tg.graph))
        }
        (Method::Potts, StructureSource::Graph) => {
            let path = required(&cfg.structure.graph, "graph")?;
            let text = fs::read_to_string(&path)
                .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
            let g = NeighborGraph::from_edge_list(&text, p)
                .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
            Ok(Structure::Graph(g))
        }
        (Method::Potts, StructureSource::Matrix) => {
            let path = required(&cfg.structure.matrix, "matrix")?;
            let summary = CorrelationSummary::from_matrix(read_matrix(&path, p)?)
                .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
            Ok(Structure::Graph(build_neighbor_graph(&summary)?.graph))
        }
        (Method::Corrs, StructureSource::Auto) => Ok(Structure::Matrix(build_corrs_d(
            &estimated(data, Method::Corrs)?,
            floor,
        ))),
        (Method::Corrs, StructureSource::Matrix) => {
            let path = required(&cfg.structure.matrix, "matrix")?;
            let d = read_matrix(&path, p)?;
            if !d.is_positive_definite() {
                return Err(Failure::validation(format!(
                    "{}: structure matrix is not positive definite (smallest eigenvalue {:.3e})",
                    path.display(),
                    d.min_eigenvalue()
                )));
            }
            Ok(Structure::Matrix(d))
        }
        (Method::Corrs, StructureSource::Graph) => Err(Failure::validation(
            "the corrs method takes a structure matrix, not a graph",
        )),
    }
}

fn write_chain(dir: &Path, t: &PosteriorTrace, prov: &Provenance) -> Result<(), Failure> {
    ensure_dir(dir)?;
    let header: Vec<String> = (0..t.p).map(mediator_name).collect();
    let per_draw = |f: &dyn Fn(usize) -> String| -> Vec<Vec<String>> {
        (0..t.draws)
            .map(|d| (0..t.p).map(|j| f(d * t.p + j)).collect())
            .collect()
    };
    write_csv(
        &dir.join("gamma.csv"),
        prov,
        &header,
        &per_draw(&|i| t.gamma[i].to_string()),
    )?;
    write_csv(
        &dir.join("beta_m.csv"),
        prov,
        &header,
        &per_draw(&|i| num(t.beta_m[i])),
    )?;
    write_csv(
        &dir.join("alpha_a.csv"),
        prov,
        &header,
        &per_draw(&|i| num(t.alpha_a[i])),
    )?;
    let mut cols: Vec<(&str, &Vec<f64>)> = vec![
        ("beta_a", &t.beta_a),
        ("sigma_e2", &t.sigma_e2),
        ("sigma_g2", &t.sigma_g2),
        ("sigma_a2", &t.sigma_a2),
    ];
    cols.extend(
        t.extras
            .iter()
            .filter(|(_, v)| v.len() == t.draws)
            .map(|(k, v)| (k.as_str(), v)),
    );
    let header: Vec<&str> = cols.iter().map(|c| c.0).collect();
    let rows: Vec<Vec<String>> = (0..t.draws)
        .map(|d| cols.iter().map(|c| num(c.1[d])).collect())
        .collect();
    write_csv(&dir.join("scalars.csv"), prov, &header, &rows)
}

fn interval_row(name: &str, iv: &Interval) -> Vec<String> {
    vec![
        name.to_string(),
        num(iv.mean),
        num(iv.median),
        num(iv.lower),
        num(iv.upper),
    ]
}

/// 2.5% and 97.5% quantiles of finite-or-not PSRF values.
fn psrf_band(values: &[f64]) -> (f64, f64, f64) {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    if s.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    (quantile(&s, 0.025), quantile(&s, 0.975), s[s.len() - 1])
}

pub fn fit(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = cfg.data.clone().ok_or_else(|| {
        Failure::validation("no input data: pass --data or set `data` in the config")
    })?;
    let data = read_dataset(&dir)?.centered()?;
    let structure = resolve_structure(cfg, &data)?;
    let model = MediationModel::new(data, cfg.hyper.clone())?;
    let prov = provenance(cfg);
    ensure_dir(&cfg.out)?;

    let start = Instant::now();
    let traces = fit_chains(
        cfg.method,
        &model,
        &structure,
        &cfg.mcmc,
        cfg.chains,
        &RngStream::new(cfg.seed),
    )?;
    let seconds = start.elapsed().as_secs_f64();

    let merged = PosteriorTrace::merge(&traces)?;
    let report = selection_report(&merged, cfg.fdr, cfg.contrast[0], cfg.contrast[1])?;
    let p = merged.p;
    let pip_psrfs = if traces.len() >= 2 && traces[0].draws >= 10 {
        pip_psrf(&traces)?
    } else {
        warn!("PSRF needs at least 2 chains of 10 draws; reporting NaN");
        vec![f64::NAN; p]
    };
    let mut selected = vec![false; p];
    for &j in &report.selected {
        selected[j] = true;
    }
    let rows: Vec<Vec<String>> = (0..p)
        .map(|j| {
            let iv = &report.nie[j];
            vec![
                mediator_name(j),
                num(report.pip[j]),
                num(report.locfdr[j]),
                (selected[j] as u8).to_string(),
                num(iv.mean),
                num(iv.median),
                num(iv.lower),
                num(iv.upper),
                num(pip_psrfs[j]),
            ]
        })
        .collect();
    write_csv(
        &cfg.out.join("pip.csv"),
        &prov,
        &[
            "mediator",
            "pip",
            "locfdr",
            "selected",
            "nie_mean",
            "nie_median",
            "nie_lower",
            "nie_upper",
            "psrf",
        ],
        &rows,
    )?;
    write_csv(
        &cfg.out.join("effects.csv"),
        &prov,
        &["effect", "mean", "median", "lower", "upper"],
        &[
            interval_row("nde", &report.global_nde),
            interval_row("nie", &report.global_nie),
            interval_row("te", &report.global_te),
        ],
    )?;
    let (lo, hi, max) = psrf_band(&pip_psrfs);
    let mut summary = vec![
        ("method", cfg.method.to_string()),
        ("n", model.data().n().to_string()),
        ("p", p.to_string()),
        ("chains", cfg.chains.to_string()),
        ("draws_per_chain", traces[0].draws.to_string()),
        ("fdr_target", num(cfg.fdr)),
        ("locfdr_cutoff", num(report.c1)),
        ("selected", report.selected.len().to_string()),
        ("contrast_a", num(cfg.contrast[0])),
        ("contrast_a_star", num(cfg.contrast[1])),
        ("pip_psrf_q025", num(lo)),
        ("pip_psrf_q975", num(hi)),
        ("pip_psrf_max", num(max)),
    ];
    if let Structure::Graph(g) = &structure {
        summary.push(("graph_edges", g.edge_count().to_string()));
        write_text(&cfg.out.join("graph.txt"), &prov, &g.to_edge_list())?;
    }
    for (k, v) in &merged.diagnostics {
        summary.push((k.as_str(), num(*v)));
    }
    write_csv(
        &cfg.out.join("summary.csv"),
        &prov,
        &["key", "value"],
        &kv(&summary),
    )?;
    write_csv(
        &cfg.out.join("timing.csv"),
        &prov,
        &["key", "value"],
        &kv(&[("wall_seconds", num(seconds))]),
    )?;
    for (c, t) in traces.iter().enumerate() {
        write_chain(
            &cfg.out.join("chains").join(format!("chain_{:02}", c + 1)),
            t,
            &prov,
        )?;
    }

    println!(
        "method {} | {} chains x {} draws | {:.1} s",
        cfg.method, cfg.chains, traces[0].draws, seconds
    );
    println!(
        "selected {} of {} mediators at local-FDR target {} (cutoff {:.4})",
        report.selected.len(),
        p,
        cfg.fdr,
        report.c1
    );
    let g = &report.global_nie;
    println!("global NIE {:.4} [{:.4}, {:.4}]", g.mean, g.lower, g.upper);
    if lo.is_finite() || hi.is_finite() {
        println!("PIP PSRF 95% range [{lo:.3}, {hi:.3}], max {max:.3}");
    }
    println!("results in {}", cfg.out.display());
    Ok(())
}

fn parse_flags(values: &[String], what: &str) -> Result<Vec<bool>, Failure> {
    values
        .iter()
        .map(|v| match v.as_str() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(Failure::validation(format!(
                "{what}: expected 0 or 1, got {other:?}"
            ))),
        })
        .collect()
}

pub struct Metric {
    pub name: String,
    pub value: f64,
}

/// Scores a fitted PIP table against simulated truth.
pub fn evaluate_tables(report: &Table, truth: &Table, fdr: f64) -> Result<Vec<Metric>, Failure> {
    let names = report.string_column("mediator")?;
    let true_names = truth.string_column("mediator")?;
    if names.len() != true_names.len() {
        return Err(Failure::validation(format!(
            "report has {} mediators but truth has {}",
            names.len(),
            true_names.len()
        )));
    }
    if let Some(j) = (0..names.len()).find(|&j| names[j] != true_names[j]) {
        return Err(Failure::validation(format!(
            "mediator {} is {:?} in the report but {:?} in the truth",
            j + 1,
            names[j],
            true_names[j]
        )));
    }
    let pip = report.numeric_column("pip")?;
    let nie = report.numeric_column("nie_mean")?;
    let selected = parse_flags(&report.string_column("selected")?, "selected")?;
    let active = parse_flags(&truth.string_column("active")?, "active")?;
    let indirect = truth.numeric_column("indirect")?;

    let mut out = Vec::new();
    let mut push = |name: String, value: f64| out.push(Metric { name, value });
    let tpr = match tpr_at_fixed_fdr(&pip, &active, fdr) {
        Ok(t) => t,
        Err(Error::Undefined(m)) => {
            warn!("{m}");
            f64::NAN
        }
        Err(e) => return Err(e.into()),
    };
    push(format!("tpr@fdr{fdr}"), tpr);
    let chosen: Vec<usize> = (0..pip.len()).filter(|&j| selected[j]).collect();
    let mut rules = vec![score_selection("report", &chosen, &active)];
    rules.extend(empirical_fdr_report(&pip, &active, fdr)?);
    for r in rules {
        push(format!("{}.selected", r.rule), r.selected as f64);
        push(format!("{}.tpr", r.rule), r.tpr);
        push(format!("{}.fdr", r.rule), r.fdr);
    }
    let mse = |keep: bool| {
        let e: Vec<f64> = (0..pip.len())
            .filter(|&j| active[j] == keep)
            .map(|j| (nie[j] - indirect[j]).powi(2))
            .collect();
        if e.is_empty() {
            f64::NAN
        } else {
            e.iter().sum::<f64>() / e.len() as f64
        }
    };
    push("mse_nonnull".into(), mse(true));
    push("mse_null".into(), mse(false));
    Ok(out)
}

pub fn evaluate(cfg: &RunConfig, report: &Path, truth: &Path) -> Result<(), Failure> {
    let metrics = evaluate_tables(&Table::read(report)?, &Table::read(truth)?, cfg.fdr)?;
    ensure_dir(&cfg.out)?;
    let rows: Vec<Vec<String>> = metrics
        .iter()
        .map(|m| vec![m.name.clone(), num(m.value)])
        .collect();
    write_csv(
        &cfg.out.join("metrics.csv"),
        &provenance(cfg),
        &["metric", "value"],
        &rows,
    )?;
    let width = metrics.iter().map(|m| m.name.len()).max().unwrap_or(0);
    for m in &metrics {
        println!("{:width$}  {:.4}", m.name, m.value);
    }
    Ok(())
}

struct ChainFiles {
    gamma: Table,
    scalars: Table,
}

fn chain_dirs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| {
        Failure::validation(format!(
            "cannot read trace directory {}: {e}",
            dir.display()
        ))
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with("chain_"))
        })
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub struct DiagnoseRow {
    pub parameter: String,
    pub psrf: f64,
    pub mean: f64,
    pub sd: f64,
}

fn pooled(chains: &[Vec<f64>]) -> (f64, f64) {
    let all: Vec<f64> = chains.iter().flatten().cloned().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// PSRF of every mediator's active indicator and every scalar column.
pub fn diagnose_dir(dir: &Path) -> Result<(usize, usize, Vec<DiagnoseRow>), Failure> {
    let dirs = chain_dirs(dir)?;
    if dirs.len() < 2 {
        return Err(Failure::validation(format!(
            "diagnosis needs at least 2 chains, found {} under {}",
            dirs.len(),
            dir.display()
        )));
    }
    let chains: Vec<ChainFiles> = dirs
        .iter()
        .map(|d| {
            Ok(ChainFiles {
                gamma: Table::read(&d.join("gamma.csv"))?,
                scalars: Table::read(&d.join("scalars.csv"))?,
            })
        })
        .collect::<Result<_, Failure>>()?;
    let first = &chains[0];
    if chains.iter().any(|c| {
        c.gamma.headers != first.gamma.headers || c.scalars.headers != first.scalars.headers
    }) {
        return Err(Failure::validation("chains have different columns"));
    }
    let draws = first.gamma.rows.len();
    let mut rows = Vec::new();
    let gammas: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| c.gamma.numeric_rows())
        .collect::<Result<_, _>>()?;
    for (j, name) in first.gamma.headers.iter().enumerate() {
        let series: Vec<Vec<f64>> = gammas
            .iter()
            .map(|g| g.iter().map(|r| (r[j] == 1.0) as u8 as f64).collect())
            .collect();
        let (mean, sd) = pooled(&series);
        rows.push(DiagnoseRow {
            parameter: format!("pip:{name}"),
            psrf: psrf(&series)?,
            mean,
            sd,
        });
    }
    for name in &first.scalars.headers {
        let series: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.scalars.numeric_column(name))
            .collect::<Result<_, _>>()?;
        let (mean, sd) = pooled(&series);
        rows.push(DiagnoseRow {
            parameter: name.clone(),
            psrf: psrf(&series)?,
            mean,
            sd,
        });
    }
    Ok((chains.len(), draws, rows))
}

fn flagged(psrf: f64) -> bool {
    !(psrf <= PSRF_FLAG)
}

pub fn diagnose(cfg: &RunConfig, traces: &Path) -> Result<(), Failure> {
    let (m, n, rows) = diagnose_dir(traces)?;
    ensure_dir(&cfg.out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.parameter.clone(),
                num(r.psrf),
                num(r.mean),
                num(r.sd),
                (flagged(r.psrf) as u8).to_string(),
            ]
        })
        .collect();
    let prov = provenance(cfg);
    write_csv(
        &cfg.out.join("psrf.csv"),
        &prov,
        &["parameter", "psrf", "mean", "sd", "flag"],
        &table,
    )?;
    let pip: Vec<f64> = rows
        .iter()
        .filter(|r| r.parameter.starts_with("pip:"))
        .map(|r| r.psrf)
        .collect();
    let (lo, hi, max) = psrf_band(&pip);
    let flags: Vec<&str> = rows
        .iter()
        .filter(|r| flagged(r.psrf))
        .map(|r| r.parameter.as_str())
        .collect();
    let summary = [
        ("chains", m.to_string()),
        ("draws_per_chain", n.to_string()),
        ("pip_psrf_q025", num(lo)),
        ("pip_psrf_q975", num(hi)),
        ("pip_psrf_max", num(max)),
        ("flagged", flags.len().to_string()),
    ];
    write_csv(
        &cfg.out.join("diagnose.csv"),
        &prov,
        &["key", "value"],
        &kv(&summary),
    )?;
    println!("{m} chains x {n} draws");
    println!("PIP PSRF 95% range [{lo:.3}, {hi:.3}], max {max:.3}");
    for r in rows.iter().filter(|r| !r.parameter.starts_with("pip:")) {
        println!(
            "{:10} psrf {:.3}  mean {:.4}  sd {:.4}",
            r.parameter, r.psrf, r.mean, r.sd
        );
    }
    if flags.is_empty() {
        println!("no parameter above PSRF {PSRF_FLAG}");
    } else {
        println!(
            "{} parameter(s) above PSRF {PSRF_FLAG}: {}",
            flags.len(),
            flags.join(" ")
        );
    }
    Ok(())
}
