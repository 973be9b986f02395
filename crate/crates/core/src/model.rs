//! Logistic growth model `ẋ = αx(1 − x)` with carrying capacity 1.
//!
//! The closed-form solution is
//! `x(t) = x₀e^{αt} / (1 − x₀ + x₀e^{αt})`, and every sensitivity below is
//! its exact derivative with respect to `x₀` and `α`. For `αt > 100` the
//! same expressions are evaluated in terms of `e^{−αt}`; the cubed
//! denominator of the Hessian would otherwise overflow near `αt ≈ 236`.

use thiserror::Error;

const EXP_SWITCH: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("initial condition must be positive and finite, got {0}")]
    InitialCondition(f64),
    #[error("growth rate must be positive and finite, got {0}")]
    GrowthRate(f64),
}

/// Initial condition and growth rate of the logistic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfiguration {
    x0: f64,
    alpha: f64,
}

impl ModelConfiguration {
    pub fn new(x0: f64, alpha: f64) -> Result<Self, ModelError> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(ModelError::InitialCondition(x0));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::GrowthRate(alpha));
        }
        Ok(Self { x0, alpha })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// First- and second-order sensitivities of `x(t)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRecord {
    pub t: f64,
    pub x: f64,
    /// `∂x/∂x₀`
    pub d_x0: f64,
    /// `∂x/∂α`
    pub d_alpha: f64,
    /// Hessian of `x(t)` in `(x₀, α)`, row-major and symmetric.
    pub hessian: [[f64; 2]; 2],
}

impl SensitivityRecord {
    /// The row `[∂x/∂x₀, ∂x/∂α]`.
    pub fn gradient(&self) -> [f64; 2] {
        [self.d_x0, self.d_alpha]
    }
}

/// Right-hand side `αx(1 − x)`.
pub fn rhs(x: f64, alpha: f64) -> f64 {
    alpha * x * (1.0 - x)
}

// The closed forms share `e^{αt}` and the denominator `1 − x₀ + x₀e^{αt}`.
// In the scaled form we carry `u = e^{−αt}` and `s = x₀ + (1 − x₀)u`, so the
// denominator is `e^{αt}·s`.
enum Growth {
    Direct { e: f64, den: f64 },
    Scaled { u: f64, s: f64 },
}

impl Growth {
    fn new(cfg: &ModelConfiguration, t: f64) -> Self {
        let at = cfg.alpha * t;
        if at > EXP_SWITCH {
            let u = (-at).exp();
            Growth::Scaled {
                u,
                s: cfg.x0 + (1.0 - cfg.x0) * u,
            }
        } else {
            let e = at.exp();
            Growth::Direct {
                e,
                den: 1.0 - cfg.x0 + cfg.x0 * e,
            }
        }
    }
}

/// Closed-form solution `x(t)`.
pub fn solve(cfg: &ModelConfiguration, t: f64) -> f64 {
    match Growth::new(cfg, t) {
        Growth::Direct { e, den } => cfg.x0 * e / den,
        Growth::Scaled { s, .. } => cfg.x0 / s,
    }
}

/// Classical fourth-order Runge-Kutta integration of the model to time `t`.
///
/// Uses `ceil(t / step)` equal steps, so the last step lands on `t`.
pub fn integrate_rk(cfg: &ModelConfiguration, t: f64, step: f64) -> f64 {
    assert!(step > 0.0, "step must be positive");
    if t <= 0.0 {
        return cfg.x0;
    }
    let n = (t / step).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let a = cfg.alpha;
    let mut x = cfg.x0;
    for _ in 0..n {
        let k1 = rhs(x, a);
        let k2 = rhs(x + 0.5 * h * k1, a);
        let k3 = rhs(x + 0.5 * h * k2, a);
        let k4 = rhs(x + h * k3, a);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// `(∂x/∂x₀, ∂x/∂α)` at time `t`.
///
/// `∂x/∂α = x₀(1 − x₀)t·∂x/∂x₀`; both decay like `e^{−αt}`.
pub fn first_order_sensitivities(cfg: &ModelConfiguration, t: f64) -> (f64, f64) {
    let d_x0 = match Growth::new(cfg, t) {
        Growth::Direct { e, den } => e / (den * den),
        Growth::Scaled { u, s } => u / (s * s),
    };
    (d_x0, alpha_multiplier(cfg, t) * d_x0)
}

fn alpha_multiplier(cfg: &ModelConfiguration, t: f64) -> f64 {
    cfg.x0 * (1.0 - cfg.x0) * t
}

/// Hessian of `x(t)` with respect to `(x₀, α)`.
pub fn hessian_sensitivities(cfg: &ModelConfiguration, t: f64) -> [[f64; 2]; 2] {
    let x0 = cfg.x0;
    // d2_x0 = 2(E − E²)/den³, cross = tE(1 − x₀ − x₀E)/den³
    let (d2_x0, cross) = match Growth::new(cfg, t) {
        Growth::Direct { e, den } => {
            let den3 = den * den * den;
            (2.0 * (e - e * e) / den3, t * e * (1.0 - x0 - x0 * e) / den3)
        }
        Growth::Scaled { u, s } => {
            let s3 = s * s * s;
            (2.0 * (u * u - u) / s3, t * u * ((1.0 - x0) * u - x0) / s3)
        }
    };
    let d2_alpha = alpha_multiplier(cfg, t) * cross;
    [[d2_x0, cross], [cross, d2_alpha]]
}

/// Solution, gradient and Hessian at one time.
pub fn sensitivity_record(cfg: &ModelConfiguration, t: f64) -> SensitivityRecord {
    let (d_x0, d_alpha) = first_order_sensitivities(cfg, t);
    SensitivityRecord {
        t,
        x: solve(cfg, t),
        d_x0,
        d_alpha,
        hessian: hessian_sensitivities(cfg, t),
    }
}
