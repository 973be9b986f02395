//! Forecast bias correction for a scalar dynamical model.
//!
//! Given observations of a system and a model whose initial condition and
//! growth parameter are slightly wrong, estimate the correction
//! `β = (δx(0), δα)` that explains the observed forecast errors. Two
//! estimators are provided: a first-order (linear least-squares) method
//! built from first-order sensitivities, and a second-order method that
//! adds the sensitivity Hessian. The logistic equation is the built-in
//! model, and has closed forms for the solution and all sensitivities.
//!
//! Module map:
//!
//! * [`linalg`] - small dense solves, Jacobi SVD, pseudo-inverse, conditioning.
//! * [`model`] - the logistic model and its analytic sensitivities.
//! * [`estimation`] - forecast errors, Jacobians, single-shot estimators.
//! * [`iterate`] - repeated re-linearization until the update is small.
//! * [`harness`] - experiment grids, tables, figure series, CSV.

pub mod estimation;
pub mod harness;
pub mod iterate;
pub mod linalg;
pub mod model;

pub use estimation::{
    EstimateReport, EstimateStatus, EstimationError, Method, ObservationOperator,
    ObservationSchedule, ObservationSet, Perturbation,
};
pub use iterate::{
    Estimator, IterationConfig, IterationError, IterationStatus, IterationStep, IterationTrace,
};
pub use linalg::{DenseMatrix, DenseVector, LinalgError};
pub use model::{ModelConfiguration, ModelError, SensitivityRecord};
