//! Iterative refinement: estimate, apply the full correction, re-linearize.
//!
//! There is no damping or line search. A run ends when the last update has
//! `‖β‖∞ < threshold` (that estimate counts as an iteration), when the cap
//! is reached, or when anything becomes non-finite or leaves the valid
//! region `x₀ > 0, α > 0`.

use std::fmt;

use thiserror::Error;

use crate::estimation::{
    self, EstimateReport, EstimationError, ObservationOperator, ObservationSet, Perturbation,
};
use crate::model::ModelConfiguration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    FirstOrder,
    SecondOrder,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::FirstOrder => "first-order",
            Estimator::SecondOrder => "second-order",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterationConfigError {
    #[error("threshold must be positive and finite, got {0}")]
    Threshold(f64),
    #[error("max_iterations must be at least 1")]
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterationError {
    #[error(transparent)]
    Config(#[from] IterationConfigError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    pub estimator: Estimator,
}

impl IterationConfig {
    pub fn new(
        threshold: f64,
        max_iterations: usize,
        estimator: Estimator,
    ) -> Result<Self, IterationConfigError> {
        let c = Self {
            threshold,
            max_iterations,
            estimator,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), IterationConfigError> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(IterationConfigError::Threshold(self.threshold));
        }
        if self.max_iterations == 0 {
            return Err(IterationConfigError::MaxIterations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IterationStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl fmt::Display for IterationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IterationStatus::Converged => "converged",
            IterationStatus::MaxIterations => "max-iterations",
            IterationStatus::Diverged => "diverged",
        })
    }
}

/// One estimate taken at `model`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStep {
    pub model: ModelConfiguration,
    pub beta: Perturbation,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub steps: Vec<IterationStep>,
    /// `final model − initial model`; NaN when the run diverged.
    pub cumulative: Perturbation,
    pub iterations: usize,
    pub status: IterationStatus,
    /// Last valid model configuration reached.
    pub final_model: ModelConfiguration,
    /// `κ(H̄ᵀH̄)` at `final_model`; NaN when the run diverged.
    pub final_kappa: f64,
}

impl IterationTrace {
    pub fn converged(&self) -> bool {
        self.status == IterationStatus::Converged
    }
}

fn estimate(
    estimator: Estimator,
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
) -> Result<EstimateReport, EstimationError> {
    match estimator {
        Estimator::FirstOrder => estimation::first_order_estimate(model, obs, h),
        Estimator::SecondOrder => estimation::second_order_estimate(model, obs, h),
    }
}

/// Runs the refinement loop from `initial`.
///
/// Divergence is a status, not an error; errors are reserved for invalid
/// inputs (fewer than two observations, a non-identity operator with the
/// second-order estimator, a bad configuration).
pub fn run_iteration(
    initial: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
    cfg: &IterationConfig,
) -> Result<IterationTrace, IterationError> {
    cfg.validate()?;
    if obs.len() < 2 {
        return Err(EstimationError::TooFewObservations {
            needed: 2,
            got: obs.len(),
        }
        .into());
    }

    let mut model = *initial;
    let mut steps = Vec::new();
    let mut status = IterationStatus::MaxIterations;

    for _ in 0..cfg.max_iterations {
        let report = estimate(cfg.estimator, &model, obs, h)?;
        steps.push(IterationStep {
            model,
            beta: report.beta,
            kappa: report.kappa,
        });
        if !report.beta.is_finite() {
            status = IterationStatus::Diverged;
            break;
        }
        match report.beta.apply(&model) {
            Ok(next) => model = next,
            Err(_) => {
                status = IterationStatus::Diverged;
                break;
            }
        }
        if report.beta.norm_inf() < cfg.threshold {
            status = IterationStatus::Converged;
            break;
        }
    }

    let (cumulative, final_kappa) = if status == IterationStatus::Diverged {
        (Perturbation::NAN, f64::NAN)
    } else {
        (
            Perturbation::between(initial, &model),
            estimation::sensitivity_condition_number(&model, obs.times())?,
        )
    };
    Ok(IterationTrace {
        iterations: steps.len(),
        steps,
        cumulative,
        status,
        final_model: model,
        final_kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{generate_observations, ObservationSchedule};

    fn cfg(x0: f64, alpha: f64) -> ModelConfiguration {
        ModelConfiguration::new(x0, alpha).unwrap()
    }

    fn obs(t0: f64, k: u32, n: usize) -> ObservationSet {
        let times = ObservationSchedule::new(t0, k, 0.5, n).unwrap().times();
        generate_observations(&cfg(0.5, 1.0), &times).unwrap()
    }

    fn first(max: usize) -> IterationConfig {
        IterationConfig::new(1e-6, max, Estimator::FirstOrder).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(IterationConfig::new(0.0, 10, Estimator::FirstOrder).is_err());
        assert!(IterationConfig::new(1e-6, 0, Estimator::FirstOrder).is_err());
    }

    #[test]
    fn starting_at_truth_exits_immediately() {
        let h = ObservationOperator::identity();
        for est in [Estimator::FirstOrder, Estimator::SecondOrder] {
            let c = IterationConfig::new(1e-6, 10, est).unwrap();
            let tr = run_iteration(&cfg(0.5, 1.0), &obs(0.0, 1, 2), &h, &c).unwrap();
            assert_eq!(tr.status, IterationStatus::Converged);
            assert_eq!(tr.iterations, 1);
            assert!(tr.steps[0].beta.norm_inf() < 1e-12);
            assert_eq!(tr.cumulative.as_array(), [0.0, 0.0]);
        }
    }

    #[test]
    fn small_perturbation_first_order() {
        let h = ObservationOperator::identity();
        let tr = run_iteration(&cfg(0.6, 0.9), &obs(0.0, 1, 2), &h, &first(10)).unwrap();
        assert_eq!(tr.status, IterationStatus::Converged);
        assert_eq!(tr.iterations, 4);
        assert!((tr.cumulative.d_x0 + 0.1).abs() < 1e-4);
        assert!((tr.cumulative.d_alpha - 0.1).abs() < 1e-4);
    }

    #[test]
    fn trace_bookkeeping() {
        let h = ObservationOperator::identity();
        let tr = run_iteration(&cfg(0.4, 1.2), &obs(4.0, 1, 4), &h, &first(100)).unwrap();
        assert_eq!(tr.steps.len(), tr.iterations);
        let sum = tr
            .steps
            .iter()
            .fold(Perturbation::ZERO, |s, st| s + st.beta);
        assert!((sum.d_x0 - tr.cumulative.d_x0).abs() < 1e-12);
        assert!((sum.d_alpha - tr.cumulative.d_alpha).abs() < 1e-12);
        assert!(tr.steps.last().unwrap().beta.norm_inf() < 1e-6);
    }

    #[test]
    fn leaving_valid_region_diverges() {
        let h = ObservationOperator::identity();
        let tr = run_iteration(&cfg(0.6, 1.2), &obs(8.0, 1, 4), &h, &first(100)).unwrap();
        assert_eq!(tr.status, IterationStatus::Diverged);
        assert!(!tr.cumulative.is_finite());
        assert!(tr.final_kappa.is_nan());
        assert!(tr.iterations < 100);
    }

    #[test]
    fn cap_is_respected() {
        let h = ObservationOperator::identity();
        let tr = run_iteration(&cfg(0.6, 0.9), &obs(0.0, 1, 2), &h, &first(2)).unwrap();
        assert_eq!(tr.status, IterationStatus::MaxIterations);
        assert_eq!(tr.iterations, 2);
        assert!(tr.cumulative.is_finite());
    }

    #[test]
    fn needs_two_observations() {
        let h = ObservationOperator::identity();
        let o = generate_observations(&cfg(0.5, 1.0), &[1.0]).unwrap();
        assert!(run_iteration(&cfg(0.6, 0.9), &o, &h, &first(10)).is_err());
    }
}
