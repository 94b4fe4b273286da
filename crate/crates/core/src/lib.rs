//! Exact goodness-of-fit tests for stochastic block models.
//!
//! The test for a known block assignment conditions on the model's sufficient
//! statistic: graphs are drawn uniformly from the fiber of the observed graph
//! with a Markov-basis random walk, and the observed goodness-of-fit statistic
//! is compared with its distribution over the fiber. For a latent assignment
//! the per-fiber p-values are averaged under an estimated distribution of
//! block assignments.
//!
//! Three models are supported: the ER block model (one log-odds per block
//! pair), the additive block model (block log-odds add), and the β block
//! model (block-pair log-odds plus per-node degree effects).

pub mod blocks;
pub mod error;
pub mod gof;
pub mod graph;
pub mod io;
pub mod models;
pub mod moves;
pub mod polytope;
pub mod sampler;
pub mod synth;
pub mod testing;

pub use error::{Error, Result};
pub use graph::{BlockAssignment, Dyad, Graph, Model, SufficientStatistics};
