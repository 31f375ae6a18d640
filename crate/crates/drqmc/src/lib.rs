//! Deep Ritz solver with interchangeable Monte Carlo and quasi-Monte Carlo
//! sampling for Neumann problems on the unit hypercube.
//!
//! The solver trains a small residual network to minimize the variational
//! energy of the Poisson or static Schrödinger equation, estimating the
//! energy integral per step from a mini-batch of points. The sampler is a
//! swappable component — pseudo-random, Sobol', or randomized Sobol' — and
//! the crate ships the instrumentation to compare them: training curves
//! against closed-form exact solutions, replicate gradient-covariance
//! traces, and a convergence-order probe on an analytic surrogate.
//!
//! ```
//! use drqmc::pde::ProblemId;
//! use drqmc::sampler::{SamplerKind, SamplerTag};
//! use drqmc::trainer::{train, TrainConfig};
//!
//! let mut config = TrainConfig::new(
//!     ProblemId::Schroedinger,
//!     2,
//!     SamplerKind::new(SamplerTag::QmcSobol, 0),
//! );
//! config.tau = 4;
//! config.iterations = 100;
//! config.eval_every = 99;
//!
//! let out = train(&config).unwrap();
//! let first = out.records.first().unwrap().rel_l2.unwrap();
//! let last = out.records.last().unwrap().rel_l2.unwrap();
//! assert!(last < first);
//! ```
//!
//! The `book/` directory holds the long-form guide; its code blocks are
//! compiled as doctests below, so the guide cannot drift from the API.

pub mod check;
pub mod cli;
pub mod error;
pub mod net;
pub mod optim;
pub mod pde;
pub mod sampler;
pub mod trainer;
pub mod util;

pub use error::{Error, Result};

// Guide chapters as doctests (`cargo test --doc` keeps the book honest).
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub struct Sampling;
    #[doc = include_str!("../../../book/src/network.md")]
    pub struct Network;
    #[doc = include_str!("../../../book/src/losses.md")]
    pub struct Losses;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct CommandLine;
}
