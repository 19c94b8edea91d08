//! Country-level analytics for learning environments and ICT career
//! aspirations: table ingestion, standardization, clustering, a latent
//! readiness embedding, predictive models and a discrete Bayesian network.

pub mod bnet;
pub mod cluster;
pub mod config;
pub mod consistency;
pub mod error;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod report;
mod rng;
pub mod stats;
pub mod synthetic;
pub mod vae;

pub use error::{Error, Result};
