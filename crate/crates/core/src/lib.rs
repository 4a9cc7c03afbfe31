//! Rate-distortion explanations: find the sparsest set of input components
//! that keeps a model's output near its original value when every other
//! component is replaced by a random infill.

pub mod audio;
pub mod domain;
pub mod error;
pub mod masking;
pub mod models;
pub mod optim;
pub mod radiomap;
pub mod rng;

pub use domain::{
    binarize, expand_mask, sparsity, BernoulliParams, ComponentGrouping, Datum, Explanation, Mask,
};
pub use error::{RdxError, Result};
pub use masking::{
    estimate_distortion, loss, loss_gradient, DatasetDistortion, DistortionEstimate, InfillOracle,
    InfillSampler, MaskObjective, MaskedDistortion,
};
pub use models::{ModelOracle, OutputSelector, ReferenceModel};
pub use optim::{
    matching_pursuit, optimize_concrete, optimize_relaxed, Method, OptimConfig, UpdateRule,
};
