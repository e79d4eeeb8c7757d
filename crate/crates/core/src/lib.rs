//! Exact discrete multi-marginal optimal transport and the tooling around it:
//! generalized-metric audits, combinatorial hash audits, explicit
//! constructions, graph spectra, and hypergraph clustering experiments.

mod error;
pub mod clustering;
pub mod constructions;
pub mod experiment;
pub mod graphs;
pub mod hash;
pub mod linalg;
pub mod lp;
pub mod metric;
pub mod prob;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use prob::{
    braket, glue, Atom, AtomKind, ConditionalMass, DenseTensor, DiscreteDistribution, JointMass,
};
