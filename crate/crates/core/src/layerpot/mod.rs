//! The double layer operator on a concrete domain: graded Nyström
//! discretization, weighted norms, Fredholm verdicts from limit-operator
//! symbols, and the discrete cross-checks (Dirichlet solves, singular value
//! studies, weight-line calibration).

mod assemble;
mod harness;
mod mesh;
mod norm;
mod verdict;

pub use assemble::{assemble_np, np_kernel, np_kernel_from_difference, BoundaryPoint};
pub use harness::{
    calibrate_line, classify_trend, default_study_meshes, min_singular_value_study, min_singular_value_study_with, solve_dirichlet, study_meshes,
    study_budget, weighted_operator, CalibrationOptions, CalibrationPoint, CalibrationReport, DirichletSolution,
    StudyBudget, StudyReport, StudyRow, Trend,
};
pub use mesh::{graded_mesh, mesh_domain, BoundaryMesh, MeshNode, MeshParams};
pub use norm::{weighted_norm, WeightedNormSpec};
pub use verdict::{
    domain_groupoid, fredholm_verdict, fredholm_verdict_with, limit_symbols, reference_window, weight_windows,
    FredholmVerdict, StratumStatus, StratumSymbol, StratumVerdict, Verdict, VerdictOptions,
};

use crate::geometry::GeometryError;
use crate::groupoid::GroupoidError;
use crate::mellin::MellinError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Mellin(#[from] MellinError),
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("kernel: {0}")]
    Kernel(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("linear algebra: {0}")]
    Linalg(String),
    #[error("operator is not Fredholm at this weight ({0:?})")]
    NotFredholm(Verdict),
    #[error("linear solve residual {0:e} exceeds 1e-10")]
    Residual(f64),
    #[error("calibration: {0}")]
    Calibration(String),
}
