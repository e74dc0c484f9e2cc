//! Over-complete dictionary learning with winner-take-all Oja networks.
//!
//! A shallow Oja network keeps a dictionary of atoms and reconstructs each input with the
//! single atom that best matches its direction, which makes training a hard mixture of
//! one-component PCA models (spherical k-means with a PCA centroid update). The deep residual
//! variant stacks such layers: every layer encodes what the previous layers left over, so the
//! residual energy shrinks multiplicatively with depth and the effective dictionary grows
//! combinatorially while reconstruction stays a plain sum of per-layer projections.
//!
//! Module map:
//! - [`model`]: atoms, dictionaries, deep models, configuration and per-sample traces.
//! - [`selection`]: winner-take-all selection, the shallow error identity and one residual step.
//! - [`shallow`]: batch (alternating PCA) and online (λ₁, λ₂, Oja) single-layer training.
//! - [`deep`]: residual decomposition, template flattening, greedy layerwise training and the
//!   multiple-atoms coordinate scheme.
//! - [`grad`]: recursive Jacobians of the deep residual loss and a finite-difference checker.
//! - [`data`]: CSV/IDX ingestion, synthetic generators and the model file format.
//! - [`metrics`]: reconstruction error summaries, energy per level and cluster purity.
//! - [`cli`]: the `dron` command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod deep;
pub mod error;
pub mod grad;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod selection;
pub mod shallow;

pub use error::{Error, Result};
pub use model::{Assignment, Atom, DecompositionTrace, DeepModel, Dictionary, Rule, TrainConfig};
pub use shallow::{LayerReport, TrainReport};
