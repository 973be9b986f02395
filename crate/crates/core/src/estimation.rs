//! Forecast errors, sensitivity Jacobians, and the single-shot estimators.
//!
//! Sign convention: `β = (δx₀, δα)` is the additive correction to the model
//! configuration, so a perfect estimate equals `truth − model`. All
//! sensitivities are evaluated at the model configuration, which is the
//! only one an estimator has in practice.
//!
//! With `N` observations the first-order method solves `H_N β ≈ E_N` in the
//! least-squares sense. Row `i` of `H_N` is `h'(x(tᵢ))·[∂x/∂x₀, ∂x/∂α](tᵢ)`
//! and `E_N` holds the forecast errors `eᵢ = zᵢ − h(x(tᵢ))`.
//!
//! The second-order method adds the Hessian `D²ᵢ` of `x(tᵢ)`. It minimizes
//! the quadratic truncation
//!
//! ```text
//! Q(β) = Σᵢ eᵢ² − 2eᵢ H̄ᵢβ + βᵀ(H̄ᵢᵀH̄ᵢ − eᵢD²ᵢ)β
//! ```
//!
//! whose stationary point solves `A β = b` with `A = Σ H̄ᵢᵀH̄ᵢ − eᵢD²ᵢ` and
//! `b = Σ H̄ᵢᵀeᵢ`.

use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, DenseMatrix, DenseVector, LinalgError};
use crate::model::{self, ModelConfiguration, ModelError};

/// Estimates whose `κ(H̄ᵀH̄)` exceeds this are flagged, not refused.
pub const ILL_CONDITIONED_KAPPA: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("invalid observation schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid observation set: {0}")]
    InvalidObservations(String),
    #[error("the second-order estimator requires the identity observation operator")]
    NonIdentityOperator,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Observation operator `h` with its first and second derivatives.
#[derive(Clone)]
pub struct ObservationOperator {
    eval: ScalarFn,
    d1: ScalarFn,
    d2: ScalarFn,
    identity: bool,
}

impl ObservationOperator {
    /// `h(x) = x`, so `h' ≡ 1` and `h'' ≡ 0`.
    pub fn identity() -> Self {
        Self {
            eval: Arc::new(|x| x),
            d1: Arc::new(|_| 1.0),
            d2: Arc::new(|_| 0.0),
            identity: true,
        }
    }

    pub fn new<F, D1, D2>(eval: F, d1: D1, d2: D2) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            identity: false,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }
}

impl Default for ObservationOperator {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for ObservationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObservationOperator")
            .field("identity", &self.identity)
            .finish_non_exhaustive()
    }
}

/// Equally spaced observation times `tᵢ = t₀ + i·k·Δ`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationSchedule {
    pub t0: f64,
    pub k: u32,
    pub delta: f64,
    pub n: usize,
}

impl ObservationSchedule {
    pub fn new(t0: f64, k: u32, delta: f64, n: usize) -> Result<Self, EstimationError> {
        let s = Self { t0, k, delta, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: String| Err(EstimationError::InvalidSchedule(m));
        if !(self.t0 >= 0.0 && self.t0.is_finite()) {
            return bad(format!("t0 must be nonnegative, got {}", self.t0));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.k as f64 * self.delta
    }

    pub fn times(&self) -> Vec<f64> {
        build_schedule(self)
    }
}

/// Observation times of a schedule.
pub fn build_schedule(sched: &ObservationSchedule) -> Vec<f64> {
    let step = sched.spacing();
    (0..sched.n).map(|i| sched.t0 + i as f64 * step).collect()
}

/// Observation times with their observed values.
///
/// Times must be nonnegative and non-decreasing. Repeated times are allowed
/// and model repeated measurements, which make `H_N` rank deficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, EstimationError> {
        if times.len() != values.len() {
            return Err(EstimationError::InvalidObservations(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(EstimationError::InvalidObservations(format!(
                "time {t} is not a nonnegative finite number"
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] < w[0]) {
            return Err(EstimationError::InvalidObservations(format!(
                "times must be non-decreasing, found {} after {}",
                w[1], w[0]
            )));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Noise-free observations of the truth run at the given times.
pub fn generate_observations(
    truth: &ModelConfiguration,
    times: &[f64],
) -> Result<ObservationSet, EstimationError> {
    let values = times.iter().map(|&t| model::solve(truth, t)).collect();
    ObservationSet::new(times.to_vec(), values)
}

/// Correction `(δx₀, δα)` to a model configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    pub d_x0: f64,
    pub d_alpha: f64,
}

impl Perturbation {
    pub const ZERO: Self = Self {
        d_x0: 0.0,
        d_alpha: 0.0,
    };

    pub const NAN: Self = Self {
        d_x0: f64::NAN,
        d_alpha: f64::NAN,
    };

    pub fn new(d_x0: f64, d_alpha: f64) -> Self {
        Self { d_x0, d_alpha }
    }

    /// The correction that moves `from` onto `to`.
    pub fn between(from: &ModelConfiguration, to: &ModelConfiguration) -> Self {
        Self::new(to.x0() - from.x0(), to.alpha() - from.alpha())
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.d_x0, self.d_alpha]
    }

    pub fn is_finite(&self) -> bool {
        self.d_x0.is_finite() && self.d_alpha.is_finite()
    }

    pub fn norm_inf(&self) -> f64 {
        self.d_x0.abs().max(self.d_alpha.abs())
    }

    /// `model + β`; fails when the result leaves the valid region.
    pub fn apply(&self, cfg: &ModelConfiguration) -> Result<ModelConfiguration, ModelError> {
        ModelConfiguration::new(cfg.x0() + self.d_x0, cfg.alpha() + self.d_alpha)
    }
}

impl From<[f64; 2]> for Perturbation {
    fn from([d_x0, d_alpha]: [f64; 2]) -> Self {
        Self { d_x0, d_alpha }
    }
}

impl Add for Perturbation {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.d_x0 + o.d_x0, self.d_alpha + o.d_alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FirstOrder,
    SecondOrder,
    Tikhonov,
    PseudoInverse,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::FirstOrder => "first-order",
            Method::SecondOrder => "second-order",
            Method::Tikhonov => "tikhonov",
            Method::PseudoInverse => "pseudo-inverse",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateStatus {
    Ok,
    IllConditioned,
    Diverged,
}

impl fmt::Display for EstimateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimateStatus::Ok => "ok",
            EstimateStatus::IllConditioned => "ill-conditioned",
            EstimateStatus::Diverged => "diverged",
        })
    }
}

/// Result of one estimator call.
///
/// `status` is `Diverged` exactly when `beta` has a non-finite component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub beta: Perturbation,
    /// Condition number of `H̄_NᵀH̄_N` at the model configuration.
    pub kappa: f64,
    pub method: Method,
    pub status: EstimateStatus,
}

impl EstimateReport {
    fn new(beta: Perturbation, kappa: f64, method: Method) -> Self {
        let status = if !beta.is_finite() {
            EstimateStatus::Diverged
        } else if kappa.is_nan() || kappa > ILL_CONDITIONED_KAPPA {
            EstimateStatus::IllConditioned
        } else {
            EstimateStatus::Ok
        };
        Self {
            beta,
            kappa,
            method,
            status,
        }
    }

    fn from_solve(
        solved: Result<DenseVector, LinalgError>,
        kappa: f64,
        method: Method,
    ) -> Result<Self, EstimationError> {
        let beta = match solved {
            Ok(v) => Perturbation::new(v[0], v[1]),
            Err(LinalgError::SingularSystem { .. }) => Perturbation::NAN,
            Err(e) => return Err(e.into()),
        };
        Ok(Self::new(beta, kappa, method))
    }
}

/// `eᵢ = zᵢ − h(x(tᵢ))` with `x` the model solution.
pub fn forecast_errors(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
) -> DenseVector {
    obs.times()
        .iter()
        .zip(obs.values())
        .map(|(&t, &z)| z - h.eval(model::solve(model, t)))
        .collect()
}

/// `H_N = D(h)·H̄_N`, one row per time, evaluated at `model`.
pub fn assemble_jacobian(
    model: &ModelConfiguration,
    times: &[f64],
    h: &ObservationOperator,
) -> Result<DenseMatrix, EstimationError> {
    let mut data = Vec::with_capacity(2 * times.len());
    for &t in times {
        let (d_x0, d_alpha) = model::first_order_sensitivities(model, t);
        let dh = if h.is_identity() {
            1.0
        } else {
            h.d1(model::solve(model, t))
        };
        data.push(dh * d_x0);
        data.push(dh * d_alpha);
    }
    Ok(DenseMatrix::new(times.len(), 2, data)?)
}

/// `κ(H̄_NᵀH̄_N)` for the bare sensitivity matrix at `model`.
pub fn sensitivity_condition_number(
    model: &ModelConfiguration,
    times: &[f64],
) -> Result<f64, EstimationError> {
    let bare = assemble_jacobian(model, times, &ObservationOperator::identity())?;
    Ok(linalg::condition_number(&bare.gram()))
}

fn require(obs: &ObservationSet, needed: usize) -> Result<(), EstimationError> {
    if obs.len() < needed {
        return Err(EstimationError::TooFewObservations {
            needed,
            got: obs.len(),
        });
    }
    Ok(())
}

/// Least-squares first-order correction (exact solve when `N = 2`).
///
/// A numerically singular system yields a `Diverged` report with NaN `β`.
pub fn first_order_estimate(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
) -> Result<EstimateReport, EstimationError> {
    require(obs, 2)?;
    let jac = assemble_jacobian(model, obs.times(), h)?;
    let err = forecast_errors(model, obs, h);
    let kappa = sensitivity_condition_number(model, obs.times())?;
    EstimateReport::from_solve(
        linalg::normal_equations_solve(&jac, &err),
        kappa,
        Method::FirstOrder,
    )
}

/// `(H_NᵀH_N + λI)⁻¹H_NᵀE_N`.
pub fn tikhonov_estimate(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
    lambda: f64,
) -> Result<EstimateReport, EstimationError> {
    require(obs, 1)?;
    let jac = assemble_jacobian(model, obs.times(), h)?;
    let err = forecast_errors(model, obs, h);
    let kappa = sensitivity_condition_number(model, obs.times())?;
    EstimateReport::from_solve(
        linalg::tikhonov_solve(&jac, &err, lambda),
        kappa,
        Method::Tikhonov,
    )
}

/// Minimum-norm least-squares correction `H_N⁺E_N`.
pub fn pseudo_inverse_estimate(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
) -> Result<EstimateReport, EstimationError> {
    require(obs, 1)?;
    let jac = assemble_jacobian(model, obs.times(), h)?;
    let err = forecast_errors(model, obs, h);
    let kappa = sensitivity_condition_number(model, obs.times())?;
    EstimateReport::from_solve(
        linalg::pseudo_inverse_solve(&jac, &err),
        kappa,
        Method::PseudoInverse,
    )
}

/// Full second-order objective `G₂(β)` for a general observation operator.
///
/// Each residual is `eᵢ − h'·Δxᵢ − ½h''·Δxᵢ²` with the second-order state
/// change `Δxᵢ = H̄ᵢβ + ½βᵀD²ᵢβ`, so `G₂` is a quartic in `β`.
pub fn second_order_objective(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
    beta: &Perturbation,
) -> f64 {
    let b = beta.as_array();
    let err = forecast_errors(model, obs, h);
    obs.times()
        .iter()
        .zip(err.iter())
        .map(|(&t, &e)| {
            let rec = model::sensitivity_record(model, t);
            let g = rec.gradient();
            let linear = g[0] * b[0] + g[1] * b[1];
            let dx = linear + 0.5 * quad_form(&rec.hessian, &b);
            let r = e - h.d1(rec.x) * dx - 0.5 * h.d2(rec.x) * dx * dx;
            r * r
        })
        .sum()
}

fn quad_form(m: &[[f64; 2]; 2], b: &[f64; 2]) -> f64 {
    b[0] * (m[0][0] * b[0] + m[0][1] * b[1]) + b[1] * (m[1][0] * b[0] + m[1][1] * b[1])
}

/// Matrix `A` and vector `b` of the second-order stationarity system
/// `A β = b` (identity observation operator).
pub fn second_order_system(
    model: &ModelConfiguration,
    obs: &ObservationSet,
) -> (DenseMatrix, DenseVector) {
    let mut a = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for (&t, &z) in obs.times().iter().zip(obs.values()) {
        let rec = model::sensitivity_record(model, t);
        let e = z - rec.x;
        let g = rec.gradient();
        for i in 0..2 {
            rhs[i] += g[i] * e;
            for j in 0..2 {
                a[i][j] += g[i] * g[j] - e * rec.hessian[i][j];
            }
        }
    }
    let a = DenseMatrix::from_rows(&a).expect("2x2");
    (a, DenseVector(rhs.to_vec()))
}

/// Quadratic truncation `Q(β)` of the second-order objective (identity `h`).
pub fn quadratic_objective(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    beta: &Perturbation,
) -> f64 {
    let b = beta.as_array();
    obs.times()
        .iter()
        .zip(obs.values())
        .map(|(&t, &z)| {
            let rec = model::sensitivity_record(model, t);
            let e = z - rec.x;
            let g = rec.gradient();
            let linear = g[0] * b[0] + g[1] * b[1];
            e * e - 2.0 * e * linear + linear * linear - e * quad_form(&rec.hessian, &b)
        })
        .sum()
}

/// Stationary point of `Q(β)`.
///
/// A numerically singular `A` yields a `Diverged` report with NaN `β`.
pub fn second_order_estimate(
    model: &ModelConfiguration,
    obs: &ObservationSet,
    h: &ObservationOperator,
) -> Result<EstimateReport, EstimationError> {
    require(obs, 2)?;
    if !h.is_identity() {
        return Err(EstimationError::NonIdentityOperator);
    }
    let (a, b) = second_order_system(model, obs);
    let kappa = sensitivity_condition_number(model, obs.times())?;
    EstimateReport::from_solve(linalg::solve_square(&a, &b), kappa, Method::SecondOrder)
}
