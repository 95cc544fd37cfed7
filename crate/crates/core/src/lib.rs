//! Linear attention viewed as a Pavlovian associative memory.
//!
//! Keys play the role of conditioned stimuli, values the unconditioned
//! stimuli and queries the test stimuli. The synaptic matrix `S` collects
//! key/value outer products (Hebbian association) and retrieval is a single
//! row-vector/matrix product. On top of that the crate carries:
//!
//! - batch, recurrent and softmax attention kernels ([`kernels`]),
//! - single-step plasticity rules: Hebbian, decay, delta, Oja, BCM ([`rules`]),
//! - the Monte Carlo capacity lab for signal/noise and failure bounds ([`capacity`]),
//! - stacked attention-only circuits and the error-propagation lab ([`stacked`]).
//!
//! The crate is `no_std` (it needs `alloc`). Trial-parallel execution is
//! abstracted behind [`exec::TrialExecutor`]; the std companion crate provides
//! a thread-pool implementation.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod activation;
pub mod capacity;
pub mod error;
pub mod exec;
pub mod kernels;
pub mod linalg;
pub mod rules;
pub mod sampling;
pub mod stacked;
pub mod stats;

pub use activation::{apply_activation, normalize, ActivationKind, NormKind, NORM_EPSILON};
pub use error::{Error, Result};
pub use exec::{Sequential, TrialExecutor};
pub use kernels::{AssociativeState, HeadConfig, ProjectionSet};
pub use linalg::{outer_product, DenseMatrix, RowVector};
pub use rules::{BcmThresholdState, PlasticityRule};
pub use sampling::sample_unit_sphere;
