//! Method dispatch shared by the simulation harness and the command line.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrs::corrs_fit;
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::model::{gmm_fit, MediationModel};
use crate::potts::{potts_fit, NeighborGraph};
use crate::rng::RngStream;
use crate::trace::{McmcConfig, PosteriorTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Shared mixing proportions, no structure.
    Gmm,
    /// Potts prior over labels on a neighbor graph.
    Potts,
    /// Correlated logit prior on per-mediator proportions.
    Corrs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gmm, Method::Potts, Method::Corrs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gmm => "gmm",
            Method::Potts => "potts",
            Method::Corrs => "corrs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gmm" => Ok(Method::Gmm),
            "potts" | "gmm-potts" => Ok(Method::Potts),
            "corrs" | "gmm-corrs" => Ok(Method::Corrs),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (expected gmm, potts or corrs)"
            ))),
        }
    }
}

/// Structural input a method needs.
#[derive(Clone, Debug)]
pub enum Structure {
    None,
    Graph(NeighborGraph),
    Matrix(SymmetricMatrix),
}

pub fn fit_chain(
    method: Method,
    model: &MediationModel,
    structure: &Structure,
    config: &McmcConfig,
    rng: &mut RngStream,
) -> Result<PosteriorTrace> {
    match (method, structure) {
        (Method::Gmm, _) => gmm_fit(model, config, rng),
        (Method::Potts, Structure::Graph(g)) => potts_fit(model, g, config, rng),
        (Method::Corrs, Structure::Matrix(d)) => corrs_fit(model, d, config, rng),
        (Method::Potts, _) => Err(Error::Config(
            "the potts method needs a neighbor graph".into(),
        )),
        (Method::Corrs, _) => Err(Error::Config(
            "the corrs method needs a structure matrix".into(),
        )),
    }
}

/// Independent chains on substreams `0..chains` of `master`, run on the
/// current rayon pool. Output order follows chain index.
pub fn fit_chains(
    method: Method,
    model: &MediationModel,
    structure: &Structure,
    config: &McmcConfig,
    chains: usize,
    master: &RngStream,
) -> Result<Vec<PosteriorTrace>> {
    if chains == 0 {
        return Err(Error::Config("chains must be at least 1".into()));
    }
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = master.substream(c as u64);
            fit_chain(method, model, structure, config, &mut rng)
        })
        .collect()
}
