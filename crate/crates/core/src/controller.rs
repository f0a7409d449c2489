//! Safety function, estimator-based barrier control laws and the adaptive
//! velocity-error bound.
//!
//! The class-K functions are linear: `α(x) = alpha_slope·x` (the stability
//! proof uses `alpha_slope = −g₁`) and `β(x) = beta_slope·x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorGains;

/// Tie tolerance for the equality branch of the adaptive bound law.
pub const BRANCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Standstill distance `d_r` (m).
    pub d_r: f64,
    /// Time headway `T` (s).
    pub headway: f64,
    /// Upper bound on the velocity estimation error (m/s).
    pub e_v: f64,
    /// Upper bound on the acceleration estimation error (m/s²).
    pub e_u: f64,
    /// Lower bound on the predecessor jerk (m/s³).
    pub u_min: f64,
    pub alpha_slope: f64,
    pub beta_slope: f64,
}

impl ControllerParams {
    /// Parameters with `α(x) = −g₁x` and `β(x) = x`.
    pub fn new(d_r: f64, headway: f64, e_v: f64, e_u: f64, u_min: f64, gains: &EstimatorGains) -> Self {
        ControllerParams {
            d_r,
            headway,
            e_v,
            e_u,
            u_min,
            alpha_slope: -gains.g1(),
            beta_slope: 1.0,
        }
    }

    /// `κ = 1/T`.
    pub fn kappa(&self) -> f64 {
        1.0 / self.headway
    }

    pub fn alpha(&self, x: f64) -> f64 {
        self.alpha_slope * x
    }

    pub fn beta(&self, x: f64) -> f64 {
        self.beta_slope * x
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.d_r > 0.0, "standstill distance d_r must be positive"),
            (self.headway > 0.0, "time headway T must be positive"),
            (self.e_v > 0.0, "velocity error bound E_v must be positive"),
            (self.e_u > 0.0, "acceleration error bound E_u must be positive"),
            (self.u_min <= 0.0, "jerk lower bound U_min must be ≤ 0"),
            (self.alpha_slope > 0.0, "alpha slope must be positive"),
            (self.beta_slope > 0.0, "beta slope must be positive"),
        ];
        let all = [self.d_r, self.headway, self.e_v, self.e_u, self.u_min, self.alpha_slope, self.beta_slope];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("controller parameters must be finite".into()));
        }
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }

    /// Violations of the error-bound feasibility relation
    /// `E_v ≥ −g₁U_min/g₃`, `E_u ≥ −g₂U_min/g₃`. These are warnings: a run
    /// with infeasible bounds is still meaningful (it shows the violation).
    pub fn feasibility_warnings(&self, gains: &EstimatorGains) -> Vec<String> {
        let (ev_min, eu_min) = min_error_bounds(self.u_min, gains);
        let mut out = Vec::new();
        if self.e_v < ev_min {
            out.push(format!(
                "E_v = {} is below the minimum {ev_min:.6} implied by U_min = {}",
                self.e_v, self.u_min
            ));
        }
        if self.e_u < eu_min {
            out.push(format!(
                "E_u = {} is below the minimum {eu_min:.6} implied by U_min = {}",
                self.e_u, self.u_min
            ));
        }
        out
    }
}

/// Adaptive velocity-error bound `ε`, lower bound `v_m` on `ṽ₁`, and the
/// adaptive conservative distance `d_c`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub epsilon: f64,
    pub v_m: f64,
    pub d_c: f64,
}

/// `h(d, v) = d − d_r − T v`.
pub fn safety_h(d: f64, v: f64, params: &ControllerParams) -> f64 {
    d - params.d_r - params.headway * v
}

/// `ĥ = h(d̂, v)`.
pub fn h_hat(d_hat: f64, v: f64, params: &ControllerParams) -> f64 {
    safety_h(d_hat, v, params)
}

/// `u = κ(v̂₁ − E_v − v + α(h))`.
pub fn baseline_control(v1_hat: f64, v: f64, h: f64, params: &ControllerParams) -> f64 {
    adaptive_control(v1_hat, v, h, params.e_v, params)
}

/// `u = κ(v̂₁ − ε − v + α(h))`.
pub fn adaptive_control(v1_hat: f64, v: f64, h: f64, epsilon: f64, params: &ControllerParams) -> f64 {
    params.kappa() * (v1_hat - epsilon - v + params.alpha(h))
}

/// `d_c = −E_v/g₁`, the steady-state spacing surplus.
pub fn conservative_distance_const(e_v: f64, g1: f64) -> Result<f64> {
    if !(g1 < 0.0) {
        return Err(Error::InvalidGain(format!("g1 must be negative, got {g1}")));
    }
    Ok(-e_v / g1)
}

/// Smallest admissible `(E_v, E_u)` for a jerk lower bound `U_min`.
pub fn min_error_bounds(u_min: f64, gains: &EstimatorGains) -> (f64, f64) {
    let (g1, g2, g3) = gains.tuple();
    (-g1 * u_min / g3, -g2 * u_min / g3)
}

/// `v̇_m = g₂d̃ − E_u`.
pub fn vm_derivative(d_tilde: f64, gains: &EstimatorGains, e_u: f64) -> f64 {
    gains.g2() * d_tilde - e_u
}

/// `ḋ_c = ε + g₁d_c`.
pub fn dc_derivative(epsilon: f64, d_c: f64, g1: f64) -> f64 {
    epsilon + g1 * d_c
}

/// `γ(b) = (a·s − β(ab)) / (a − b)` for linear `β`, where `s = E_u + g₂d̃`.
///
/// This is the boundary rate of `ε` that keeps `(E_v − ε)(ε − ṽ₁) ≥ 0`
/// when `ε − ṽ₁ = b`.
pub fn bound_rate(a: f64, b: f64, s: f64, beta_slope: f64) -> f64 {
    (a * s - beta_slope * a * b) / (a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonBranch {
    /// `E_u + g₂d̃ < aβ̄`: hold.
    Hold,
    /// `E_u + g₂d̃ = aβ̄`: grow at `aβ̄`.
    Balanced,
    /// `a ≥ ε − v_m`: boundary rate at the upper bound of `ε − ṽ₁`.
    Bounded,
    /// Otherwise: jump to `ε = E_v`.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonRate {
    pub rate: f64,
    pub branch: EpsilonBranch,
}

impl EpsilonRate {
    /// Whether the integrator should apply the `ε ← E_v` jump.
    pub fn clamp(&self) -> bool {
        self.branch == EpsilonBranch::Clamp
    }
}

/// Adaptive law for `ε`, with `a = E_v − ε`, `s = E_u + g₂d̃` and
/// `b_M = ε − v_m`. Branches are tested in order; the clamp branch is a
/// state jump that the caller applies between integration steps.
pub fn epsilon_derivative(
    adaptive: &AdaptiveState,
    d_tilde: f64,
    params: &ControllerParams,
    gains: &EstimatorGains,
) -> EpsilonRate {
    let a = params.e_v - adaptive.epsilon;
    let s = params.e_u + gains.g2() * d_tilde;
    let b_max = adaptive.epsilon - adaptive.v_m;
    let ab = a * params.beta_slope;

    if s < ab - BRANCH_TOL {
        EpsilonRate { rate: 0.0, branch: EpsilonBranch::Hold }
    } else if (s - ab).abs() <= BRANCH_TOL {
        EpsilonRate { rate: ab, branch: EpsilonBranch::Balanced }
    } else if a >= b_max + BRANCH_TOL {
        EpsilonRate {
            rate: bound_rate(a, b_max, s, params.beta_slope),
            branch: EpsilonBranch::Bounded,
        }
    } else {
        EpsilonRate { rate: 0.0, branch: EpsilonBranch::Clamp }
    }
}
