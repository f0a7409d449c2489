//! Closed-loop platoon simulation: plant, per-follower estimator and
//! controller, adaptive bound dynamics, communication and clamp events.
//!
//! State layout: `x[0]` is the lead velocity; follower `i` owns the block
//! `x[1 + 8i .. 9 + 8i] = [d, v, d̂, v̂₁, û₁, ε, v_m, d_c]`. Lead acceleration
//! and jerk come from the profile.
//!
//! Each step `t_k = k·dt` proceeds as: communication reset (if due), record
//! (if due), integrate, then apply `ε` clamp jumps. Events therefore sit on
//! step boundaries and never inside a derivative evaluation.

mod integrator;
mod trace;

pub use integrator::{euler_step, rk4_step, Integrator};
pub use trace::{FollowerSample, LeadSample, Trace, TraceRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::controller::{self, AdaptiveState, ControllerParams};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorGains, EstimatorState};
use crate::matops::{self, Matrix3};
use crate::plant::{LeadProfile, PairState};

const BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Constant error bound `E_v`.
    #[default]
    Baseline,
    /// Adaptive error bound `ε` with adaptive `d_c`.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorInit {
    /// Start from the true predecessor state (zero initial error).
    #[default]
    Truth,
    Explicit(EstimatorState),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerInit {
    pub gap: f64,
    pub velocity: f64,
    #[serde(default)]
    pub estimator: EstimatorInit,
}

/// Zero-mean Gaussian noise on the sensed gap, held over each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapNoise {
    pub std_dev: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub mode: ControllerMode,
    /// Period of vehicle-to-vehicle communication resets, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_period: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub followers: Vec<FollowerInit>,
    /// Optional `[min, max]` acceleration saturation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel_limits: Option<[f64; 2]>,
    /// Lead jerk used for the shifted-equilibrium Lyapunov value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jerk_reference: Option<f64>,
    #[serde(default = "Matrix3::identity")]
    pub lyapunov_q: Matrix3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_noise: Option<GapNoise>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    1
}

impl SimConfig {
    pub fn new(horizon: f64, followers: Vec<FollowerInit>) -> Self {
        SimConfig {
            dt: default_dt(),
            horizon,
            integrator: Integrator::Rk4,
            mode: ControllerMode::Baseline,
            comm_period: None,
            record_stride: 1,
            followers,
            accel_limits: None,
            jerk_reference: None,
            lyapunov_q: Matrix3::identity(),
            gap_noise: None,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return cfg(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return cfg(format!("horizon {} must be at least dt = {}", self.horizon, self.dt));
        }
        if let Some(p) = self.comm_period {
            if !(p >= self.dt && p.is_finite()) {
                return cfg(format!("comm_period {p} must be at least dt = {}", self.dt));
            }
        }
        if self.record_stride == 0 {
            return cfg("record_stride must be ≥ 1".into());
        }
        if self.followers.is_empty() {
            return cfg("at least one follower is required".into());
        }
        if self
            .followers
            .iter()
            .any(|f| !f.gap.is_finite() || !f.velocity.is_finite())
        {
            return cfg("follower initial conditions must be finite".into());
        }
        if let Some([lo, hi]) = self.accel_limits {
            if !(lo < hi) {
                return cfg(format!("accel_limits [{lo}, {hi}] must satisfy min < max"));
            }
        }
        if let Some(n) = self.gap_noise {
            if !(n.std_dev >= 0.0 && n.std_dev.is_finite()) {
                return cfg("gap noise std_dev must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Per-follower working values at one instant.
#[derive(Debug, Clone, Copy, Default)]
struct Local {
    pred_v: f64,
    pred_u: f64,
    u: f64,
    d_meas: f64,
    epsilon: f64,
}

struct ClosedLoop<'a> {
    cfg: &'a SimConfig,
    profile: &'a LeadProfile,
    gains: &'a EstimatorGains,
    params: &'a ControllerParams,
    p: Matrix3,
    baseline_dc: f64,
    horizon: f64,
}

impl ClosedLoop<'_> {
    fn n(&self) -> usize {
        self.cfg.followers.len()
    }

    fn lead_inputs(&self, t: f64) -> (f64, f64) {
        // stage times can overshoot the horizon by rounding
        self.profile
            .lead_inputs(t.clamp(0.0, self.horizon))
            .expect("time clamped to profile horizon")
    }

    fn effective_epsilon(&self, raw: f64) -> f64 {
        match self.cfg.mode {
            ControllerMode::Baseline => self.params.e_v,
            ControllerMode::Adaptive => raw.clamp(0.0, self.params.e_v),
        }
    }

    fn control(&self, x: &[f64], i: usize, d_meas: f64, epsilon: f64) -> f64 {
        let b = &x[1 + BLOCK * i..];
        let h = controller::safety_h(d_meas, b[1], self.params);
        let u = controller::adaptive_control(b[3], b[1], h, epsilon, self.params);
        match self.cfg.accel_limits {
            Some([lo, hi]) => u.clamp(lo, hi),
            None => u,
        }
    }

    /// Controls and predecessor signals for every follower, head to tail.
    fn locals(&self, x: &[f64], lead_u: f64, noise: &[f64]) -> Vec<Local> {
        let mut out: Vec<Local> = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let b = &x[1 + BLOCK * i..];
            let (pred_v, pred_u) = match i {
                0 => (x[0], lead_u),
                _ => (x[1 + BLOCK * (i - 1) + 1], out[i - 1].u),
            };
            let d_meas = b[0] + noise[i];
            let epsilon = self.effective_epsilon(b[5]);
            let u = self.control(x, i, d_meas, epsilon);
            out.push(Local { pred_v, pred_u, u, d_meas, epsilon });
        }
        out
    }

    fn derivative(&self, t: f64, x: &[f64], dx: &mut [f64], noise: &[f64]) {
        let (lead_u, _) = self.lead_inputs(t);
        let locals = self.locals(x, lead_u, noise);
        dx[0] = lead_u;
        for (i, l) in locals.iter().enumerate() {
            let b = &x[1 + BLOCK * i..1 + BLOCK * (i + 1)];
            let db = &mut dx[1 + BLOCK * i..1 + BLOCK * (i + 1)];
            let est = EstimatorState { d_hat: b[2], v1_hat: b[3], u1_hat: b[4] };
            let de = estimator::estimator_derivative(&est, l.d_meas, b[1], self.gains);
            db[0] = l.pred_v - b[1];
            db[1] = l.u;
            db[2] = de.d_hat;
            db[3] = de.v1_hat;
            db[4] = de.u1_hat;
            match self.cfg.mode {
                ControllerMode::Baseline => db[5..].fill(0.0),
                ControllerMode::Adaptive => {
                    let d_tilde = b[2] - l.d_meas;
                    let st = AdaptiveState { epsilon: l.epsilon, v_m: b[6], d_c: b[7] };
                    db[5] = controller::epsilon_derivative(&st, d_tilde, self.params, self.gains).rate;
                    db[6] = controller::vm_derivative(d_tilde, self.gains, self.params.e_u);
                    db[7] = controller::dc_derivative(l.epsilon, b[7], self.gains.g1());
                }
            }
        }
    }

    /// Resets every estimator to the true predecessor state, head to tail so
    /// that each follower sees its predecessor's post-reset acceleration.
    fn communicate(&self, t: f64, x: &mut [f64], noise: &[f64]) {
        let (lead_u, _) = self.lead_inputs(t);
        for i in 0..self.n() {
            let pred_v = if i == 0 { x[0] } else { x[1 + BLOCK * (i - 1) + 1] };
            let pred_u = match i {
                0 => lead_u,
                _ => {
                    let d_meas = x[1 + BLOCK * (i - 1)] + noise[i - 1];
                    let eps = self.effective_epsilon(x[1 + BLOCK * (i - 1) + 5]);
                    self.control(x, i - 1, d_meas, eps)
                }
            };
            let b = &mut x[1 + BLOCK * i..1 + BLOCK * (i + 1)];
            let truth = PairState { d: b[0], v1: pred_v, v: b[1], u1: pred_u };
            let est = EstimatorState { d_hat: b[2], v1_hat: b[3], u1_hat: b[4] };
            let reset = estimator::communication_reset(&est, &truth);
            b[2] = reset.d_hat;
            b[3] = reset.v1_hat;
            b[4] = reset.u1_hat;
            if self.cfg.mode == ControllerMode::Adaptive {
                b[5] = 0.0;
                b[6] = 0.0;
            }
        }
    }

    /// Applies `ε ← E_v` where the adaptive law calls for it. Returns the
    /// number of jumps.
    fn clamp_epsilon(&self, x: &mut [f64], noise: &[f64]) -> usize {
        if self.cfg.mode != ControllerMode::Adaptive {
            return 0;
        }
        let mut count = 0;
        for i in 0..self.n() {
            let b = &mut x[1 + BLOCK * i..1 + BLOCK * (i + 1)];
            let before = b[5];
            b[5] = b[5].clamp(0.0, self.params.e_v);
            let st = AdaptiveState { epsilon: b[5], v_m: b[6], d_c: b[7] };
            let d_tilde = b[2] - (b[0] + noise[i]);
            if controller::epsilon_derivative(&st, d_tilde, self.params, self.gains).clamp() {
                b[5] = self.params.e_v;
            }
            if b[5] != before && b[5] == self.params.e_v {
                count += 1;
            }
        }
        count
    }

    fn record(&self, t: f64, x: &[f64], noise: &[f64]) -> TraceRecord {
        let (lead_u, lead_j) = self.lead_inputs(t);
        let locals = self.locals(x, lead_u, noise);
        let followers = locals
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let b = &x[1 + BLOCK * i..1 + BLOCK * (i + 1)];
                let (d, v) = (b[0], b[1]);
                let est = EstimatorState { d_hat: b[2], v1_hat: b[3], u1_hat: b[4] };
                let truth = PairState { d, v1: l.pred_v, v, u1: l.pred_u };
                let err = estimator::error_state(&est, &truth);
                let h_hat = controller::h_hat(est.d_hat, v, self.params);
                let d_c = match self.cfg.mode {
                    ControllerMode::Baseline => self.baseline_dc,
                    ControllerMode::Adaptive => b[7],
                };
                let v1_lyap = analysis::lyapunov_v1_unchecked(h_hat, d_c, &err, &self.p);
                let v2_lyap = self.cfg.jerk_reference.map(|uj| {
                    let star = estimator::equilibrium_error(self.gains, uj).expect("validated gains have g3 < 0");
                    analysis::lyapunov_v1_unchecked(h_hat, d_c, &err.sub(&star), &self.p)
                });
                FollowerSample {
                    d,
                    v,
                    u: l.u,
                    d_hat: est.d_hat,
                    v1_hat: est.v1_hat,
                    u1_hat: est.u1_hat,
                    d_tilde: err.d_tilde,
                    v1_tilde: err.v1_tilde,
                    u1_tilde: err.u1_tilde,
                    h: controller::safety_h(d, v, self.params),
                    h_hat,
                    epsilon: match self.cfg.mode {
                        ControllerMode::Baseline => self.params.e_v,
                        ControllerMode::Adaptive => b[5],
                    },
                    v_m: b[6],
                    d_c,
                    v1_lyap,
                    v2_lyap,
                }
            })
            .collect();
        TraceRecord {
            t,
            lead: LeadSample { v1: x[0], u1: lead_u, u_j: lead_j },
            followers,
        }
    }
}

/// Runs the closed loop for every follower in `config`.
///
/// Infeasible error bounds are reported in [`Trace::warnings`] rather than
/// rejected, so bound-violation behaviour can be studied.
pub fn run_scenario(
    config: &SimConfig,
    profile: &LeadProfile,
    gains: &EstimatorGains,
    params: &ControllerParams,
) -> Result<Trace> {
    config.validate()?;
    gains.validate()?;
    params.validate()?;
    let horizon = profile.horizon();
    if config.horizon > horizon + 1e-9 {
        return Err(Error::Config(format!(
            "simulation horizon {} s exceeds lead profile horizon {horizon} s",
            config.horizon
        )));
    }
    let (a, _) = estimator::error_matrix(gains);
    let p = matops::solve_continuous_lyapunov(&a, &config.lyapunov_q)?;
    let baseline_dc = controller::conservative_distance_const(params.e_v, gains.g1())?;

    let sys = ClosedLoop {
        cfg: config,
        profile,
        gains,
        params,
        p,
        baseline_dc,
        horizon,
    };
    let n = sys.n();

    let mut x = vec![0.0; 1 + BLOCK * n];
    x[0] = profile.initial_velocity();
    let mut any_truth_init = false;
    for (i, f) in config.followers.iter().enumerate() {
        let b = &mut x[1 + BLOCK * i..1 + BLOCK * (i + 1)];
        b[0] = f.gap;
        b[1] = f.velocity;
        match f.estimator {
            EstimatorInit::Truth => any_truth_init = true,
            EstimatorInit::Explicit(e) => {
                b[2] = e.d_hat;
                b[3] = e.v1_hat;
                b[4] = e.u1_hat;
            }
        }
        match (config.mode, f.estimator) {
            (ControllerMode::Adaptive, EstimatorInit::Truth) => {}
            _ => {
                b[5] = params.e_v;
                b[7] = baseline_dc;
            }
        }
    }

    let mut noise = vec![0.0; n];
    let mut noise_source = config.gap_noise.filter(|g| g.std_dev > 0.0).map(|g| {
        (
            ChaCha8Rng::seed_from_u64(g.seed),
            Normal::new(0.0, g.std_dev).expect("validated std_dev"),
        )
    });
    let mut draw_noise = |noise: &mut [f64]| {
        if let Some((rng, dist)) = noise_source.as_mut() {
            noise.iter_mut().for_each(|z| *z = dist.sample(rng));
        }
    };

    // Truth-initialised estimators are a reset at t = 0, done per follower.
    if any_truth_init {
        let mut synced = x.clone();
        sys.communicate(0.0, &mut synced, &noise);
        for (i, f) in config.followers.iter().enumerate() {
            if f.estimator == EstimatorInit::Truth {
                let r = 1 + BLOCK * i;
                x[r + 2..r + 5].copy_from_slice(&synced[r + 2..r + 5]);
            }
        }
    }

    let steps = config.steps();
    let comm_steps = config
        .comm_period
        .map(|p| ((p / config.dt).round() as usize).max(1));

    let mut records = Vec::with_capacity(steps / config.record_stride + 2);
    let mut comm_events = Vec::new();
    let mut clamp_events = 0;

    for k in 0..=steps {
        let t = k as f64 * config.dt;
        draw_noise(&mut noise);
        if comm_steps.is_some_and(|m| k % m == 0) {
            sys.communicate(t, &mut x, &noise);
            comm_events.push(t);
        }
        if k % config.record_stride == 0 || k == steps {
            records.push(sys.record(t, &x, &noise));
        }
        if k == steps {
            break;
        }
        x = config
            .integrator
            .step(|tt, xx, dx| sys.derivative(tt, xx, dx, &noise), &x, t, config.dt)?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericFailure {
                t: t + config.dt,
                what: format!("state component {i} became non-finite"),
            });
        }
        clamp_events += sys.clamp_epsilon(&mut x, &noise);
    }

    Ok(Trace {
        dt: config.dt,
        records,
        comm_events,
        clamp_events,
        warnings: params.feasibility_warnings(gains),
    })
}

/// Platoon run: each follower estimates from its own sensed gap; in the
/// absence of `comm_period` nothing is shared between vehicles.
pub fn run_platoon(
    config: &SimConfig,
    profile: &LeadProfile,
    gains: &EstimatorGains,
    params: &ControllerParams,
) -> Result<Trace> {
    if config.followers.is_empty() {
        return Err(Error::Config("platoon needs at least one follower".into()));
    }
    run_scenario(config, profile, gains, params)
}
