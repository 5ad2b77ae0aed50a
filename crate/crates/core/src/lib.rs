//! Steerage: extract concept steering vectors from a source transformer's
//! activations, transfer them to a (smaller) target model at inference time,
//! tune the steering intensity lambda, and aggregate multi-lambda
//! generations by mode.
//!
//! The pipeline, end to end:
//!
//! 1. [`extraction`] turns contrastive prompt pairs into per-layer unit
//!    directions (normalized hidden-state differences, first principal
//!    component).
//! 2. [`transfer`] maps source layers onto target layers (greedy n->n),
//!    adapts widths explicitly, and scales directions by lambda into a
//!    [`transfer::SteeringPlan`].
//! 3. [`runtime`] runs a minimal decoder-only transformer with per-layer
//!    activation capture and additive injection on the residual stream.
//! 4. [`tuner`] sweeps the lambda grid on a validation split; [`its`]
//!    evaluates across the grid and aggregates answers by mode.
//! 5. [`harness`] owns datasets, prompts, answer extraction, and scoring;
//!    [`analysis`] compares steering sets across source models.

pub mod analysis;
pub mod error;
pub mod extraction;
pub mod harness;
pub mod its;
pub mod runtime;
pub mod transfer;
pub mod tuner;

mod parallel;

pub use error::{Error, Result};
pub use extraction::{ContrastivePair, SteeringVectorSet};
pub use harness::{DatasetRecord, EvalRecord, EvalReport};
pub use runtime::{ActivationTrace, GenerationParams, Model, ModelSpec, TokenSequence};
pub use transfer::{DimensionAdapter, LayerMapping, SteeringPlan};
pub use tuner::LambdaGrid;
