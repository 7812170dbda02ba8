//! Coframes with Maurer-Cartan structure equations, warped-like ansatz
//! frames, the exterior derivative, metrics, gauge rotations and the
//! tri-graded decomposition.

mod ansatz;
mod coframe;
mod grading;
mod metric;

pub use ansatz::{pullup, AnsatzFrame, Embedding};
pub use coframe::{exterior_derivative, BlockKind, CoframeSpec, FiberBlock, Generator};
pub use grading::{Grade, TriGradeSplit};
pub use metric::{gauge_transform, metric_from_frame, MetricMatrix};

use thiserror::Error;

use crate::exterior::ExteriorError;
use crate::expr::ExprError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("{0}")]
    Invalid(String),
    #[error("structure constants violate the Jacobi identity at generator `{0}`")]
    Jacobi(String),
    #[error("row {row}: coefficient depends on fiber symbol `{symbol}`")]
    FiberSymbol { row: usize, symbol: String },
    #[error("ansatz coefficient matrix is singular at every sample point")]
    Singular,
    #[error("gauge matrix is not orthogonal (deviation {0:e})")]
    NonOrthogonal(f64),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}
