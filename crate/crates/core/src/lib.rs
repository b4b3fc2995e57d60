pub mod analysis;
pub mod corrs;
pub mod dist;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod nearpd;
pub mod potts;
pub mod rng;
pub mod sim;
pub mod structure;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::SymmetricMatrix;
pub use rng::RngStream;
