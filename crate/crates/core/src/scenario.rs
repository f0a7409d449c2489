//! JSON scenario files and the built-in preset library.
//!
//! A scenario file is a versioned JSON object:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "preset": "accel",
//!   "eigenvalues": [-2, -3, -4],
//!   "controller": { "d_r": 5, "headway": 1, "e_v": 0.346, "e_u": 1, "u_min": -0.923 },
//!   "sim": { "horizon": 20, "followers": [{ "gap": 5, "velocity": 0 }] },
//!   "lead": { "initial_velocity": 0, "segments": [{ "duration": 20, "kind": "constant_jerk", "jerk": 0.5 }] }
//! }
//! ```
//!
//! When `preset` is given, the remaining keys are deep-merged over the preset
//! (objects merge key by key, arrays and scalars replace). Exactly one of
//! `gains` and `eigenvalues` may appear after merging.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::ReportContext;
use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::estimator::EstimatorGains;
use crate::matops::EigenTriple;
use crate::plant::{LeadProfile, Segment, SegmentKind};
use crate::sim::{ControllerMode, FollowerInit, SimConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESET_NAMES: [&str; 6] = ["accel", "decel", "const-jerk", "string-4", "ccc-2s", "airsim-like"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EigenvalueSpec {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl EigenvalueSpec {
    fn to_complex(self) -> Complex64 {
        match self {
            EigenvalueSpec::Real(re) => Complex64::new(re, 0.0),
            EigenvalueSpec::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub d_r: f64,
    pub headway: f64,
    pub e_v: f64,
    pub e_u: f64,
    pub u_min: f64,
    /// Defaults to `−g₁`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_slope: Option<f64>,
}

/// Settings for the post-run report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation_omega: Option<f64>,
    #[serde(default)]
    pub settle_time: f64,
}

fn default_tail() -> f64 {
    0.1
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            tail_fraction: default_tail(),
            excitation_omega: None,
            settle_time: 0.0,
        }
    }
}

/// On-disk scenario representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<EigenvalueSpec>>,
    pub controller: ControllerSpec,
    pub sim: SimConfig,
    pub lead: LeadProfile,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

/// Fully validated scenario with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub gains: EstimatorGains,
    pub controller: ControllerParams,
    pub sim: SimConfig,
    pub lead: LeadProfile,
    pub analysis: AnalysisSpec,
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        let gains = match (f.gains, &f.eigenvalues) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("specify exactly one of `gains` and `eigenvalues`, not both".into()))
            }
            (None, None) => return Err(Error::Config("one of `gains` or `eigenvalues` is required".into())),
            (Some([g1, g2, g3]), None) => EstimatorGains::new(g1, g2, g3).map_err(hurwitz_context)?,
            (None, Some(ev)) => {
                let roots: [Complex64; 3] = ev
                    .iter()
                    .map(|e| e.to_complex())
                    .collect::<Vec<_>>()
                    .try_into()
                    .map_err(|v: Vec<_>| Error::Config(format!("expected 3 eigenvalues, got {}", v.len())))?;
                EstimatorGains::from_eigenvalues(&EigenTriple::new(roots)).map_err(hurwitz_context)?
            }
        };
        let c = f.controller;
        let controller = ControllerParams {
            d_r: c.d_r,
            headway: c.headway,
            e_v: c.e_v,
            e_u: c.e_u,
            u_min: c.u_min,
            alpha_slope: c.alpha_slope.unwrap_or(-gains.g1()),
            beta_slope: c.beta_slope.unwrap_or(1.0),
        };
        controller.validate()?;
        f.sim.validate()?;
        if f.sim.horizon > f.lead.horizon() + 1e-9 {
            return Err(Error::Config(format!(
                "sim.horizon {} s exceeds lead profile horizon {} s",
                f.sim.horizon,
                f.lead.horizon()
            )));
        }
        let a = f.analysis;
        if !(a.tail_fraction > 0.0 && a.tail_fraction <= 0.5) {
            return Err(Error::Config(format!("analysis.tail_fraction must be in (0, 0.5], got {}", a.tail_fraction)));
        }
        if a.excitation_omega.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::Config("analysis.excitation_omega must be positive".into()));
        }
        Ok(Scenario {
            name: f.name.or(f.preset).unwrap_or_else(|| "custom".into()),
            description: f.description.unwrap_or_default(),
            gains,
            controller,
            sim: f.sim,
            lead: f.lead,
            analysis: a,
        })
    }
}

fn hurwitz_context(e: Error) -> Error {
    match e {
        Error::InvalidGain(m) => Error::InvalidGain(format!(
            "{m} (negative g1, g2, g3 is a necessary condition for a Hurwitz estimator error matrix)"
        )),
        other => other,
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        let c = s.controller;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            preset: None,
            name: Some(s.name),
            description: (!s.description.is_empty()).then_some(s.description),
            gains: Some(s.gains.into()),
            eigenvalues: None,
            controller: ControllerSpec {
                d_r: c.d_r,
                headway: c.headway,
                e_v: c.e_v,
                e_u: c.e_u,
                u_min: c.u_min,
                alpha_slope: Some(c.alpha_slope),
                beta_slope: Some(c.beta_slope),
            },
            sim: s.sim,
            lead: s.lead,
            analysis: s.analysis,
        }
    }
}

impl Scenario {
    /// Non-fatal configuration problems (infeasible error bounds).
    pub fn warnings(&self) -> Vec<String> {
        self.controller.feasibility_warnings(&self.gains)
    }

    pub fn report_context(&self) -> ReportContext {
        ReportContext {
            tail_fraction: self.analysis.tail_fraction,
            excitation_omega: self.analysis.excitation_omega,
            settle_time: self.analysis.settle_time,
            jerk_reference: self.sim.jerk_reference.unwrap_or(0.0),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Deep-merges `over` into `base`: objects merge per key, everything else replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Parses and validates scenario JSON text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(parse_error)?;
    let Some(preset_name) = value.get("preset").and_then(Value::as_str).map(str::to_owned) else {
        return match serde_json::from_str::<ScenarioFile>(text) {
            Ok(f) => Scenario::try_from(f),
            Err(e) => Err(parse_error(e)),
        };
    };
    let mut base = serde_json::to_value(preset(&preset_name)?).expect("preset serializes");
    let mut over = value;
    let obj = over.as_object_mut().expect("object with a preset key");
    obj.remove("preset");
    let base_obj = base.as_object_mut().expect("scenario serializes to an object");
    if obj.contains_key("eigenvalues") {
        base_obj.remove("gains");
    }
    if obj.contains_key("gains") {
        base_obj.remove("eigenvalues");
    }
    if !obj.contains_key("name") {
        base_obj.insert("name".into(), Value::String(preset_name));
    }
    merge(&mut base, over);
    let file: ScenarioFile = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
    Scenario::try_from(file)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Resolves `preset:NAME` or a file path.
pub fn resolve(spec: &str) -> Result<Scenario> {
    match spec.strip_prefix("preset:") {
        Some(name) => preset(name),
        None => load_scenario(spec),
    }
}

fn reference_gains() -> EstimatorGains {
    EstimatorGains::from_eigenvalues(&EigenTriple::real([-2.0, -3.0, -4.0])).expect("reference spectrum is valid")
}

fn reference_controller(gains: &EstimatorGains) -> ControllerParams {
    ControllerParams::new(5.0, 1.0, 0.346, 1.0, -0.923, gains)
}

fn seg(duration: f64, kind: SegmentKind) -> Segment {
    Segment::new(duration, kind)
}

/// Follower at speed `v` whose spacing surplus `h` equals `h`.
fn follower_at(params: &ControllerParams, v: f64, h: f64) -> FollowerInit {
    FollowerInit {
        gap: params.d_r + params.headway * v + h,
        velocity: v,
        estimator: Default::default(),
    }
}

/// Built-in scenario by name. Absolute lead speeds are illustrative choices.
pub fn preset(name: &str) -> Result<Scenario> {
    let gains = reference_gains();
    let controller = reference_controller(&gains);
    let d_c = -controller.e_v / gains.g1();
    let mk = |description: &str, sim: SimConfig, lead: LeadProfile, analysis: AnalysisSpec, controller| Scenario {
        name: name.to_string(),
        description: description.to_string(),
        gains,
        controller,
        sim,
        lead,
        analysis,
    };
    let s = match name {
        "accel" => {
            let lead = LeadProfile::new(
                0.0,
                vec![
                    seg(2.0, SegmentKind::ConstantJerk { jerk: 0.5 }),
                    seg(18.0, SegmentKind::ConstantAcceleration { accel: 1.0 }),
                ],
            )?;
            let sim = SimConfig::new(20.0, vec![follower_at(&controller, 0.0, 0.0)]);
            mk(
                "Lead jerks at 0.5 m/s³ for 2 s then holds 1 m/s²; follower starts at rest with h = 0.",
                sim,
                lead,
                AnalysisSpec { settle_time: 2.0, ..Default::default() },
                controller,
            )
        }
        "decel" => {
            let v0 = 15.0;
            let lead = LeadProfile::new(
                v0,
                vec![
                    seg(3.0, SegmentKind::ConstantJerk { jerk: -0.8 }),
                    seg(3.0, SegmentKind::ConstantJerk { jerk: 0.8 }),
                    seg(14.0, SegmentKind::ConstantAcceleration { accel: 0.0 }),
                ],
            )?;
            let sim = SimConfig::new(20.0, vec![follower_at(&controller, v0, d_c)]);
            mk(
                "Lead brakes from 15 m/s (illustrative speed) to 7.8 m/s with jerk ±0.8 m/s³; follower starts at h = d_c.",
                sim,
                lead,
                AnalysisSpec { settle_time: 6.0, ..Default::default() },
                controller,
            )
        }
        "const-jerk" => {
            let lead = LeadProfile::new(0.0, vec![seg(30.0, SegmentKind::ConstantJerk { jerk: 0.5 })])?;
            let mut sim = SimConfig::new(30.0, vec![follower_at(&controller, 0.0, 0.0)]);
            sim.jerk_reference = Some(0.5);
            mk(
                "Lead jerk held at 0.5 m/s³ from rest; follower starts at rest with h = 0.",
                sim,
                lead,
                AnalysisSpec { settle_time: 10.0, ..Default::default() },
                controller,
            )
        }
        "string-4" => {
            let (mean, amplitude, omega) = (5.0, 1.0, 0.5);
            let horizon = 100.0;
            let lead = LeadProfile::new(
                mean,
                vec![seg(horizon, SegmentKind::SinusoidalVelocity { mean, amplitude, omega })],
            )?;
            let mut sim = SimConfig::new(horizon, vec![follower_at(&controller, mean, 0.0); 3]);
            sim.record_stride = 10;
            mk(
                "Lead velocity 5 + sin(0.5 t) m/s (illustrative levels); three followers start co-moving with h = 0.",
                sim,
                lead,
                AnalysisSpec { excitation_omega: Some(omega), settle_time: 20.0, ..Default::default() },
                controller,
            )
        }
        "ccc-2s" => {
            let lead = LeadProfile::new(0.0, vec![seg(20.0, SegmentKind::ConstantJerk { jerk: 0.5 })])?;
            let mut sim = SimConfig::new(20.0, vec![follower_at(&controller, 0.0, 0.0)]);
            sim.mode = ControllerMode::Adaptive;
            sim.comm_period = Some(2.0);
            mk(
                "Lead jerk 0.5 m/s³ from rest with a communication reset every 2 s and the adaptive error bound.",
                sim,
                lead,
                AnalysisSpec::default(),
                controller,
            )
        }
        "airsim-like" => {
            // Standstill distance chosen so the 6 m starting gaps sit at h = d_c.
            let (gap, e_v) = (6.0, 1.0);
            let controller = ControllerParams::new(gap + e_v / gains.g1(), 1.0, e_v, 1.0, -0.923, &gains);
            let times = vec![0.0, 2.0, 10.0, 12.0, 28.0, 30.0, 38.0, 40.0, 50.0];
            let values = vec![0.0, 0.5, 0.5, 0.0, 0.0, -0.5, -0.5, 0.0, 0.0];
            let lead = LeadProfile::new(0.0, vec![seg(50.0, SegmentKind::TabulatedAcceleration { times, values })])?;
            let follower = FollowerInit { gap, velocity: 0.0, estimator: Default::default() };
            let mut sim = SimConfig::new(50.0, vec![follower; 3]);
            sim.record_stride = 10;
            mk(
                "Approximate trapezoidal drive cycle: rest, accelerate to 5 m/s, cruise, decelerate, rest; three followers 6 m apart.",
                sim,
                lead,
                AnalysisSpec::default(),
                controller,
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}
