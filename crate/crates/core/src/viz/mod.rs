//! 2D projections of one verb's vectors and scatter-plot emission.

mod scatter;
mod tsne;

use std::path::PathBuf;

use thiserror::Error;

pub use scatter::{emit_scatter, render_svg, write_csv, PlotFormat};
pub use tsne::{joint_probabilities, project_2d, Projection, ProjectionConfig};

#[derive(Debug, Error)]
pub enum VizError {
    #[error("invalid projection configuration: {0}")]
    InvalidConfig(String),
    #[error("{n_samples} points cannot support perplexity {perplexity} (need at least 4 points)")]
    InfeasiblePerplexity { n_samples: usize, perplexity: f64 },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("optimisation produced non-finite coordinates")]
    Diverged,
    #[error("{what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
