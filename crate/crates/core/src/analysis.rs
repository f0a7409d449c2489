//! Post-hoc certification of simulated traces: Lyapunov values, safety
//! margins, error-bound violations, steady states and string-stability gains.

use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::estimator::{self, ErrorState, EstimatorGains};
use crate::matops::{self, Matrix3};
use crate::sim::Trace;

/// Default tolerance for "non-increasing" and "non-negative" numerical checks.
pub const CHECK_TOL: f64 = 1e-6;

pub(crate) fn lyapunov_v1_unchecked(h_hat: f64, d_c: f64, e: &ErrorState, p: &Matrix3) -> f64 {
    0.5 * (h_hat - d_c).powi(2) + matops::quad_form(p, &e.as_vector())
}

/// `V₁ = ½(ĥ − d_c)² + ẽᵀPẽ`.
pub fn lyapunov_v1(h_hat: f64, d_c: f64, e: &ErrorState, p: &Matrix3) -> Result<f64> {
    if !matops::is_positive_definite(p)? {
        return Err(Error::InvalidArgument("P must be positive definite".into()));
    }
    Ok(lyapunov_v1_unchecked(h_hat, d_c, e, p))
}

/// `V₂ = ½(ĥ − d_c)² + ξᵀPξ` with `ξ = ẽ − ẽ*(u_j_ref)`.
pub fn lyapunov_v2(
    h_hat: f64,
    d_c: f64,
    e: &ErrorState,
    u_j_ref: f64,
    gains: &EstimatorGains,
    p: &Matrix3,
) -> Result<f64> {
    let star = estimator::equilibrium_error(gains, u_j_ref)?;
    lyapunov_v1(h_hat, d_c, &e.sub(&star), p)
}

/// Steady-state spacing surplus `h* = −E_v/g₁ − u_j/g₃`.
pub fn equilibrium_headway(e_v: f64, g1: f64, u_j: f64, g3: f64) -> f64 {
    -e_v / g1 - u_j / g3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyMargin {
    pub min_h: f64,
    pub t_at_min: f64,
    pub follower: usize,
}

/// Minimum of `h` over all recorded samples and followers.
pub fn safety_margin(trace: &Trace) -> Result<SafetyMargin> {
    let mut best: Option<SafetyMargin> = None;
    for r in &trace.records {
        for (i, f) in r.followers.iter().enumerate() {
            if best.is_none_or(|b| f.h < b.min_h) {
                best = Some(SafetyMargin { min_h: f.h, t_at_min: r.t, follower: i });
            }
        }
    }
    best.ok_or_else(|| Error::Analysis("empty trace".into()))
}

/// Mean and spread of one channel over the analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStat {
    pub mean: f64,
    pub max_deviation: f64,
    pub converged: bool,
}

impl ChannelStat {
    fn from_values(values: &[f64]) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max_deviation = values.iter().fold(0.0_f64, |m, x| m.max((x - mean).abs()));
        let scale = mean.abs().max(values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))).max(1.0);
        ChannelStat {
            mean,
            max_deviation,
            converged: max_deviation < 1e-3 * scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub d_tilde: ChannelStat,
    pub v1_tilde: ChannelStat,
    pub u1_tilde: ChannelStat,
    pub h: ChannelStat,
    pub epsilon: ChannelStat,
    pub d_c: ChannelStat,
}

impl SteadyState {
    pub fn errors(&self) -> ErrorState {
        ErrorState {
            d_tilde: self.d_tilde.mean,
            v1_tilde: self.v1_tilde.mean,
            u1_tilde: self.u1_tilde.mean,
        }
    }
}

/// Per-follower channel statistics over the trailing `tail_fraction` of the trace.
pub fn steady_state(trace: &Trace, tail_fraction: f64) -> Result<Vec<SteadyState>> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must be in (0, 0.5], got {tail_fraction}"
        )));
    }
    if trace.records.is_empty() {
        return Err(Error::Analysis("empty trace".into()));
    }
    let n = trace.records.len();
    let start = n - ((n as f64 * tail_fraction).ceil() as usize).clamp(1, n);
    let tail = &trace.records[start..];
    let stat = |i: usize, f: &dyn Fn(&crate::sim::FollowerSample) -> f64| {
        ChannelStat::from_values(&tail.iter().map(|r| f(&r.followers[i])).collect::<Vec<_>>())
    };
    Ok((0..trace.follower_count())
        .map(|i| SteadyState {
            d_tilde: stat(i, &|f| f.d_tilde),
            v1_tilde: stat(i, &|f| f.v1_tilde),
            u1_tilde: stat(i, &|f| f.u1_tilde),
            h: stat(i, &|f| f.h),
            epsilon: stat(i, &|f| f.epsilon),
            d_c: stat(i, &|f| f.d_c),
        })
        .collect())
}

/// Half the peak-to-peak excursion of a mean-removed signal.
pub fn oscillation_amplitude(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x - mean), hi.max(x - mean)));
    0.5 * (hi - lo)
}

/// Index range of the last whole number of excitation periods after `settle_time`.
pub fn analysis_window(times: &[f64], omega: f64, settle_time: f64) -> Result<std::ops::Range<usize>> {
    const MIN_PERIODS: f64 = 5.0;
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("excitation frequency must be positive, got {omega}")));
    }
    let (Some(&t0), Some(&t_end)) = (times.first(), times.last()) else {
        return Err(Error::Analysis("empty trace".into()));
    };
    let period = 2.0 * std::f64::consts::PI / omega;
    let available = t_end - settle_time.max(t0);
    let periods = (available / period + 1e-9).floor();
    if periods < MIN_PERIODS {
        return Err(Error::Analysis(format!(
            "need at least {MIN_PERIODS} excitation periods ({:.2} s) after settling, trace has {:.2} s",
            MIN_PERIODS * period,
            available.max(0.0)
        )));
    }
    let start_t = t_end - periods * period;
    let start = times.partition_point(|&t| t < start_t - 1e-9);
    Ok(start..times.len())
}

/// Velocity amplitude ratio of each follower to its predecessor.
pub fn string_stability_gain(trace: &Trace, omega: f64, settle_time: f64) -> Result<Vec<f64>> {
    let times = trace.times();
    let w = analysis_window(&times, omega, settle_time)?;
    let lead: Vec<f64> = trace.records[w.clone()].iter().map(|r| r.lead.v1).collect();
    let mut prev = oscillation_amplitude(&lead);
    let mut gains = Vec::with_capacity(trace.follower_count());
    for i in 0..trace.follower_count() {
        let amp = oscillation_amplitude(&trace.series(i, |f| f.v)[w.clone()]);
        if prev <= 0.0 {
            return Err(Error::Analysis(format!("predecessor of follower {} does not oscillate", i + 1)));
        }
        gains.push(amp / prev);
        prev = amp;
    }
    Ok(gains)
}

/// Largest single-step increase of `series` over steps accepted by `include`.
pub fn max_increase(series: &[f64], include: impl Fn(usize) -> bool) -> f64 {
    series
        .windows(2)
        .enumerate()
        .filter(|(k, _)| include(*k))
        .map(|(_, w)| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest step increase of the first follower's Lyapunov value over steps
/// where the lead jerk equals the reference jerk at both ends.
///
/// Uses `V₂` when the trace carries it, `V₁` otherwise. Only the first
/// follower sees the lead jerk directly; later followers see the jerk of a
/// controlled vehicle, which is never exactly constant.
pub fn lyapunov_max_increase(trace: &Trace, jerk_reference: f64, after: f64) -> Option<f64> {
    if trace.follower_count() == 0 {
        return None;
    }
    let use_v2 = trace.records[0].followers[0].v2_lyap.is_some();
    let series = trace.series(0, |f| if use_v2 { f.v2_lyap.unwrap_or(f.v1_lyap) } else { f.v1_lyap });
    let r = &trace.records;
    let inc = max_increase(&series, |k| {
        r[k].t >= after && r[k].lead.u_j == jerk_reference && r[k + 1].lead.u_j == jerk_reference
    });
    inc.is_finite().then_some(inc)
}

/// Minimum of `ḣ + α(h)` (central differences) over samples where the
/// velocity error respects its bound `ṽ₁ ≤ ε`. Non-negative means the
/// barrier condition held.
pub fn certificate_margin(trace: &Trace, follower: usize, params: &ControllerParams) -> Option<f64> {
    let r = &trace.records;
    (1..r.len().saturating_sub(1))
        .filter_map(|k| {
            let f = &r[k].followers[follower];
            if f.v1_tilde > f.epsilon {
                return None;
            }
            let h_dot = (r[k + 1].followers[follower].h - r[k - 1].followers[follower].h) / (r[k + 1].t - r[k - 1].t);
            Some(h_dot + params.alpha(f.h))
        })
        .reduce(f64::min)
}

/// Minimum of `(E_v − ε)(ε − ṽ₁)` over the trace.
pub fn adaptive_set_margin(trace: &Trace, follower: usize, params: &ControllerParams) -> f64 {
    trace
        .records
        .iter()
        .map(|r| {
            let f = &r.followers[follower];
            (params.e_v - f.epsilon) * (f.epsilon - f.v1_tilde)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Samples with `ṽ₁ > E_v + tol` or `ũ₁ > E_u + tol`, over all followers.
pub fn bound_violations(trace: &Trace, params: &ControllerParams, tol: f64) -> usize {
    trace
        .records
        .iter()
        .flat_map(|r| r.followers.iter())
        .filter(|f| f.v1_tilde > params.e_v + tol || f.u1_tilde > params.e_u + tol)
        .count()
}

/// Largest `ṽ₁` and `ũ₁` over all followers and samples.
pub fn max_errors(trace: &Trace) -> (f64, f64) {
    trace
        .records
        .iter()
        .flat_map(|r| r.followers.iter())
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(v, u), f| {
            (v.max(f.v1_tilde), u.max(f.u1_tilde))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub tail_fraction: f64,
    /// Excitation frequency for string-stability measurement, if any.
    pub excitation_omega: Option<f64>,
    pub settle_time: f64,
    pub jerk_reference: f64,
}

impl Default for ReportContext {
    fn default() -> Self {
        ReportContext {
            tail_fraction: 0.1,
            excitation_omega: None,
            settle_time: 0.0,
            jerk_reference: 0.0,
        }
    }
}

/// Summary written alongside every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub min_h: f64,
    pub t_at_min_h: f64,
    pub follower_at_min_h: usize,
    pub steady_state: Vec<SteadyState>,
    pub steady_state_errors: ErrorState,
    pub steady_state_h: f64,
    /// `h*` predicted from the error bound and reference jerk.
    pub predicted_h_star: f64,
    pub predicted_error: ErrorState,
    pub lyapunov_monotone: bool,
    pub lyapunov_max_increase: Option<f64>,
    pub string_gains: Option<Vec<f64>>,
    pub bound_violations: usize,
    pub max_v1_tilde: f64,
    pub max_u1_tilde: f64,
    pub certificate_margin: Option<f64>,
    pub mean_h: Vec<f64>,
    pub comm_events: usize,
    pub clamp_events: usize,
    pub warnings: Vec<String>,
}

impl StabilityReport {
    pub fn from_trace(
        trace: &Trace,
        gains: &EstimatorGains,
        params: &ControllerParams,
        ctx: &ReportContext,
    ) -> Result<Self> {
        let margin = safety_margin(trace)?;
        let steady = steady_state(trace, ctx.tail_fraction)?;
        let lyap = lyapunov_max_increase(trace, ctx.jerk_reference, ctx.settle_time);
        let string_gains = ctx
            .excitation_omega
            .map(|w| string_stability_gain(trace, w, ctx.settle_time))
            .transpose()?;
        let (max_v, max_u) = max_errors(trace);
        let mean_h = (0..trace.follower_count())
            .map(|i| time_average(&trace.times(), &trace.series(i, |f| f.h)))
            .collect();
        Ok(StabilityReport {
            min_h: margin.min_h,
            t_at_min_h: margin.t_at_min,
            follower_at_min_h: margin.follower,
            steady_state_errors: steady[0].errors(),
            steady_state_h: steady[0].h.mean,
            steady_state: steady,
            predicted_h_star: equilibrium_headway(params.e_v, gains.g1(), ctx.jerk_reference, gains.g3()),
            predicted_error: estimator::equilibrium_error(gains, ctx.jerk_reference)?,
            lyapunov_monotone: lyap.is_none_or(|x| x < CHECK_TOL),
            lyapunov_max_increase: lyap,
            string_gains,
            bound_violations: bound_violations(trace, params, CHECK_TOL),
            max_v1_tilde: max_v,
            max_u1_tilde: max_u,
            certificate_margin: (0..trace.follower_count())
                .filter_map(|i| certificate_margin(trace, i, params))
                .reduce(f64::min),
            mean_h,
            comm_events: trace.comm_events.len(),
            clamp_events: trace.clamp_events,
            warnings: trace.warnings.clone(),
        })
    }
}

/// Trapezoidal time average.
pub fn time_average(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    let area: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    area / (times[times.len() - 1] - times[0])
}

/// Outcome of one certification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, passed: value >= threshold }
    }

    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, passed: value < threshold }
    }
}

/// Numerical certificate checks over a trace.
pub fn certify(
    trace: &Trace,
    gains: &EstimatorGains,
    params: &ControllerParams,
    q: &Matrix3,
    ctx: &ReportContext,
) -> Result<Vec<Check>> {
    let (a, _) = estimator::error_matrix(gains);
    let mut checks = vec![Check {
        name: "estimator_hurwitz".into(),
        value: gains.eigenvalues().max_real_part(),
        threshold: 0.0,
        passed: gains.is_hurwitz(),
    }];
    match matops::solve_continuous_lyapunov(&a, q) {
        Ok(p) => checks.push(Check::below(
            "lyapunov_residual",
            matops::lyapunov_residual(&a, &p, q).max_abs(),
            1e-10,
        )),
        Err(_) => checks.push(Check { name: "lyapunov_residual".into(), value: f64::INFINITY, threshold: 1e-10, passed: false }),
    }
    checks.push(Check::at_least("min_h", safety_margin(trace)?.min_h, -CHECK_TOL));
    if params.feasibility_warnings(gains).is_empty() {
        checks.push(Check::below("bound_violations", bound_violations(trace, params, CHECK_TOL) as f64, 0.5));
    }
    let cert = (0..trace.follower_count())
        .filter_map(|i| certificate_margin(trace, i, params))
        .reduce(f64::min);
    if let Some(c) = cert {
        checks.push(Check::at_least("barrier_certificate", c, -CHECK_TOL));
    }
    if let Some(inc) = lyapunov_max_increase(trace, ctx.jerk_reference, ctx.settle_time) {
        checks.push(Check::below("lyapunov_max_increase", inc, CHECK_TOL));
    }
    let adaptive = trace.records.iter().any(|r| r.followers.iter().any(|f| f.epsilon != params.e_v));
    if adaptive {
        let m = (0..trace.follower_count())
            .map(|i| adaptive_set_margin(trace, i, params))
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("adaptive_bound_set", m, -CHECK_TOL));
    }
    if let Some(w) = ctx.excitation_omega {
        let g = string_stability_gain(trace, w, ctx.settle_time)?;
        checks.push(Check::below("max_string_gain", g.iter().copied().fold(0.0, f64::max), 1.0));
    }
    Ok(checks)
}
