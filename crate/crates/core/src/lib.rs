//! Verb frame induction from contextual embeddings: corpus handling,
//! spherical Gaussian mixtures, cluster-to-frame mapping, frame-count
//! estimation, evaluation metrics and 2-D projections.

pub mod corpus;
pub mod gmm;
pub mod mapping;
pub mod metrics;
pub mod model_selection;
pub mod pipeline;
pub mod seed;
pub mod synthetic;
pub mod viz;

pub use corpus::{load_dataset, FilterPolicy, Format, Instance, VerbDataset};
pub use gmm::{fit, FitConfig, FitResult, SphericalGmm};
pub use model_selection::{a_bic, bic, Criterion, CriterionConfig};
