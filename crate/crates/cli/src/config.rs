//! Run configuration: a TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use medcorr::fit::Method;
use medcorr::model::Hyperparameters;
use medcorr::sim::SimDesign;
use medcorr::trace::McmcConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Where the structure input of a structured prior comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureSource {
    /// Estimated from the mediator data.
    #[default]
    Auto,
    /// Edge list file.
    Graph,
    /// Correlation matrix CSV.
    Matrix,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureConfig {
    pub source: StructureSource,
    pub graph: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    /// Smallest eigenvalue kept when projecting a matrix to positive definite.
    pub eigen_floor: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Name of a built-in design; `design` wins when both are given.
    pub preset: Option<String>,
    pub design: Option<SimDesign>,
    pub replicates: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    pub chains: usize,
    pub fdr: f64,
    pub out: PathBuf,
    /// Directory holding A.csv, M.csv, Y.csv and optionally C.csv.
    pub data: Option<PathBuf>,
    /// Exposure levels `(a, a*)` for the reported effects.
    pub contrast: [f64; 2],
    pub mcmc: McmcConfig,
    pub hyper: Hyperparameters,
    pub structure: StructureConfig,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Potts,
            seed: 1,
            chains: 4,
            fdr: 0.1,
            out: PathBuf::from("medcorr-out"),
            data: None,
            contrast: [1.0, 0.0],
            mcmc: McmcConfig::default(),
            hyper: Hyperparameters::default(),
            structure: StructureConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub fdr: Option<f64>,
    pub graph: Option<PathBuf>,
    pub corr_matrix: Option<PathBuf>,
    pub data: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| {
            Failure::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::validation(format!("invalid config {}: {e}", path.display())))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data,
            &mut cfg.structure.graph,
            &mut cfg.structure.matrix,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(c) = o.chains {
            self.chains = c;
        }
        if let Some(i) = o.iterations {
            self.mcmc.iterations = i;
        }
        if let Some(b) = o.burnin {
            self.mcmc.burn_in = b;
        }
        if let Some(t) = o.thin {
            self.mcmc.thin = t;
        }
        if let Some(f) = o.fdr {
            self.fdr = f;
        }
        if let Some(g) = &o.graph {
            self.structure.source = StructureSource::Graph;
            self.structure.graph = Some(g.clone());
        }
        if let Some(m) = &o.corr_matrix {
            self.structure.source = StructureSource::Matrix;
            self.structure.matrix = Some(m.clone());
        }
        if let Some(d) = &o.data {
            self.data = Some(d.clone());
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.mcmc.validate()?;
        self.hyper.validate()?;
        if self.chains == 0 {
            return Err(Failure::validation("chains must be at least 1"));
        }
        if !(self.fdr > 0.0 && self.fdr < 1.0) {
            return Err(Failure::validation(format!(
                "fdr must lie in (0, 1), got {}",
                self.fdr
            )));
        }
        if let Some(f) = self.structure.eigen_floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Failure::validation(format!(
                    "structure.eigen_floor must be positive, got {f}"
                )));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the resolved configuration.
    /// The output directory is left out: it does not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let text = toml::to_string(&c).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
