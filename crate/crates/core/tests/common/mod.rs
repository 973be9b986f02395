//! Independent oracles shared by the integration tests. Nothing here calls
//! the analytic derivative code under test.

#![allow(dead_code)]

use biascorr::model::ModelConfiguration;

/// Central-difference step for first derivatives.
pub const FIRST_STEP: f64 = 1e-6;
/// Central-difference step when differentiating first derivatives again.
pub const SECOND_STEP: f64 = 1e-4;

pub fn cfg(x0: f64, alpha: f64) -> ModelConfiguration {
    ModelConfiguration::new(x0, alpha).unwrap()
}

/// `1 − x(t)`, written out separately so it keeps full relative precision
/// when `x(t)` is close to 1.
pub fn complement(x0: f64, alpha: f64, t: f64) -> f64 {
    (1.0 - x0) / (1.0 - x0 + x0 * (alpha * t).exp())
}

/// Central-difference gradient of `x(t)` in `(x₀, α)`.
pub fn fd_gradient(x0: f64, alpha: f64, t: f64) -> [f64; 2] {
    let hx = FIRST_STEP * x0.abs().max(1.0);
    let ha = FIRST_STEP * alpha.abs().max(1.0);
    // x = 1 − y, so ∂x = −∂y.
    let dx0 = -(complement(x0 + hx, alpha, t) - complement(x0 - hx, alpha, t)) / (2.0 * hx);
    let da = -(complement(x0, alpha + ha, t) - complement(x0, alpha - ha, t)) / (2.0 * ha);
    [dx0, da]
}

/// Central differences of a gradient function, giving a Hessian estimate.
pub fn fd_jacobian_of<F>(x0: f64, alpha: f64, grad: F) -> [[f64; 2]; 2]
where
    F: Fn(f64, f64) -> [f64; 2],
{
    let hx = SECOND_STEP * x0.abs().max(1.0);
    let ha = SECOND_STEP * alpha.abs().max(1.0);
    let (gp, gm) = (grad(x0 + hx, alpha), grad(x0 - hx, alpha));
    let (ap, am) = (grad(x0, alpha + ha), grad(x0, alpha - ha));
    [
        [(gp[0] - gm[0]) / (2.0 * hx), (ap[0] - am[0]) / (2.0 * ha)],
        [(gp[1] - gm[1]) / (2.0 * hx), (ap[1] - am[1]) / (2.0 * ha)],
    ]
}

/// Central-difference gradient of a scalar function of two variables.
pub fn central_gradient<F: Fn([f64; 2]) -> f64>(f: F, at: [f64; 2], h: f64) -> [f64; 2] {
    let d = |i: usize| {
        let mut p = at;
        let mut m = at;
        p[i] += h;
        m[i] -= h;
        (f(p) - f(m)) / (2.0 * h)
    };
    [d(0), d(1)]
}

/// Zooming grid search for the minimum of `f` on a square.
///
/// Each round evaluates a `(2·half + 1)²` lattice, recentres on the best
/// point and shrinks the box by `shrink`.
pub fn grid_minimize<F: Fn([f64; 2]) -> f64>(
    f: F,
    mut center: [f64; 2],
    mut radius: f64,
    rounds: usize,
) -> [f64; 2] {
    const HALF: i32 = 20;
    const SHRINK: f64 = 0.25;
    for _ in 0..rounds {
        let step = radius / HALF as f64;
        let mut best = (f(center), center);
        for i in -HALF..=HALF {
            for j in -HALF..=HALF {
                let p = [center[0] + i as f64 * step, center[1] + j as f64 * step];
                let v = f(p);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
        center = best.1;
        radius *= SHRINK;
    }
    center
}

pub fn max_abs_diff(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}
