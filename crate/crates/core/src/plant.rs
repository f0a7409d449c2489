//! Longitudinal vehicle dynamics and lead-vehicle input profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// True state of one predecessor–follower pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairState {
    /// Gap to the predecessor (m). May go negative: that is a collision.
    pub d: f64,
    /// Predecessor velocity (m/s).
    pub v1: f64,
    /// Follower velocity (m/s).
    pub v: f64,
    /// Predecessor acceleration (m/s²).
    pub u1: f64,
}

/// `(ḋ, v̇₁, v̇, u̇₁) = (v₁ − v, u₁, u, u_j)`.
pub fn pair_derivative(s: &PairState, u: f64, u_j: f64) -> PairState {
    PairState {
        d: s.v1 - s.v,
        v1: s.u1,
        v: u,
        u1: u_j,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FollowerKinematics {
    pub d: f64,
    pub v: f64,
}

/// Lead vehicle plus an ordered chain of followers. Follower `i`'s
/// predecessor is follower `i − 1`, or the lead for the first one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlatoonState {
    pub lead_v: f64,
    pub lead_u: f64,
    pub followers: Vec<FollowerKinematics>,
}

impl PlatoonState {
    /// Velocity of follower `i`'s predecessor.
    pub fn predecessor_velocity(&self, i: usize) -> f64 {
        if i == 0 {
            self.lead_v
        } else {
            self.followers[i - 1].v
        }
    }
}

/// Chained pair dynamics: `ḋᵢ = vᵢ₋₁ − vᵢ`, `v̇ᵢ = uᵢ`, lead `(v̇, u̇) = (u₁, u_j)`.
pub fn platoon_derivative(ps: &PlatoonState, controls: &[f64], lead_u_j: f64) -> Result<PlatoonState> {
    if controls.len() != ps.followers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} controls for {} followers",
            controls.len(),
            ps.followers.len()
        )));
    }
    let followers = ps
        .followers
        .iter()
        .zip(controls)
        .enumerate()
        .map(|(i, (f, &u))| FollowerKinematics {
            d: ps.predecessor_velocity(i) - f.v,
            v: u,
        })
        .collect();
    Ok(PlatoonState {
        lead_v: ps.lead_u,
        lead_u: lead_u_j,
        followers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// Acceleration ramps from its value at the segment start.
    ConstantJerk { jerk: f64 },
    ConstantAcceleration { accel: f64 },
    /// Velocity `mean + amplitude·sin(ω τ)`, τ measured from the segment start.
    SinusoidalVelocity {
        mean: f64,
        amplitude: f64,
        omega: f64,
    },
    /// Acceleration samples, linearly interpolated. Times are relative to
    /// the segment start and must span `[0, duration]`.
    TabulatedAcceleration { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

impl Segment {
    pub fn new(duration: f64, kind: SegmentKind) -> Self {
        Segment { duration, kind }
    }

    /// `(u₁, u_j)` at local time `tau`, given the acceleration the previous
    /// segment ended with.
    fn inputs_at(&self, tau: f64, accel_at_start: f64) -> (f64, f64) {
        match &self.kind {
            SegmentKind::ConstantJerk { jerk } => (accel_at_start + jerk * tau, *jerk),
            SegmentKind::ConstantAcceleration { accel } => (*accel, 0.0),
            SegmentKind::SinusoidalVelocity { amplitude, omega, .. } => {
                let (s, c) = (omega * tau).sin_cos();
                (amplitude * omega * c, -amplitude * omega * omega * s)
            }
            SegmentKind::TabulatedAcceleration { times, values } => {
                let k = match times.partition_point(|&t| t <= tau) {
                    0 => 0,
                    n if n >= times.len() => times.len() - 2,
                    n => n - 1,
                };
                let slope = (values[k + 1] - values[k]) / (times[k + 1] - times[k]);
                (values[k] + slope * (tau - times[k]), slope)
            }
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("lead segment {index}: {msg}")));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        match &self.kind {
            SegmentKind::ConstantJerk { jerk } if !jerk.is_finite() => bad("non-finite jerk".into()),
            SegmentKind::ConstantAcceleration { accel } if !accel.is_finite() => {
                bad("non-finite acceleration".into())
            }
            SegmentKind::SinusoidalVelocity { mean, amplitude, omega }
                if ![mean, amplitude, omega].iter().all(|x| x.is_finite()) =>
            {
                bad("non-finite sinusoid parameter".into())
            }
            SegmentKind::TabulatedAcceleration { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return bad("tabulated profile needs ≥ 2 (time, value) pairs of equal length".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("tabulated sample times must be strictly increasing".into());
                }
                if times[0] != 0.0 || *times.last().unwrap() < self.duration {
                    return bad("tabulated samples must cover [0, duration]".into());
                }
                if values.iter().chain(times.iter()).any(|x| !x.is_finite()) {
                    return bad("non-finite tabulated sample".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Piecewise lead-vehicle input schedule covering `[0, horizon]`.
///
/// Segments are left-closed, right-open: at an exact boundary the next
/// segment applies. The final segment is closed at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LeadProfileSpec", into = "LeadProfileSpec")]
pub struct LeadProfile {
    initial_velocity: f64,
    segments: Vec<Segment>,
    starts: Vec<f64>,
    start_accels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LeadProfileSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_velocity: Option<f64>,
    segments: Vec<Segment>,
}

impl TryFrom<LeadProfileSpec> for LeadProfile {
    type Error = Error;

    fn try_from(spec: LeadProfileSpec) -> Result<Self> {
        let v0 = spec.initial_velocity.unwrap_or_else(|| match spec.segments.first() {
            Some(Segment {
                kind: SegmentKind::SinusoidalVelocity { mean, .. },
                ..
            }) => *mean,
            _ => 0.0,
        });
        LeadProfile::new(v0, spec.segments)
    }
}

impl From<LeadProfile> for LeadProfileSpec {
    fn from(p: LeadProfile) -> Self {
        LeadProfileSpec {
            initial_velocity: Some(p.initial_velocity),
            segments: p.segments,
        }
    }
}

impl LeadProfile {
    pub fn new(initial_velocity: f64, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("lead profile has no segments".into()));
        }
        if !initial_velocity.is_finite() {
            return Err(Error::Config("non-finite lead initial velocity".into()));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut start_accels = Vec::with_capacity(segments.len());
        let (mut t, mut accel) = (0.0, 0.0);
        for (i, seg) in segments.iter().enumerate() {
            seg.validate(i)?;
            starts.push(t);
            start_accels.push(accel);
            accel = seg.inputs_at(seg.duration, accel).0;
            t += seg.duration;
        }
        Ok(LeadProfile {
            initial_velocity,
            segments,
            starts,
            start_accels,
        })
    }

    pub fn initial_velocity(&self) -> f64 {
        self.initial_velocity
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.starts.last().unwrap() + self.segments.last().unwrap().duration
    }

    /// Index of the segment active at `t`.
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::OutOfRange { t, horizon });
        }
        Ok(self.starts.partition_point(|&s| s <= t).saturating_sub(1))
    }

    /// Lead acceleration and jerk `(u₁, u_j)` at time `t`.
    pub fn lead_inputs(&self, t: f64) -> Result<(f64, f64)> {
        let k = self.segment_index(t)?;
        Ok(self.segments[k].inputs_at(t - self.starts[k], self.start_accels[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pair_derivative_cases() {
        let s = PairState { d: 10.0, v1: 5.0, v: 5.0, u1: 0.0 };
        assert_eq!(pair_derivative(&s, 0.0, 0.0), PairState::default());
        let s = PairState { d: 10.0, v1: 6.0, v: 5.0, u1: 0.0 };
        assert_eq!(pair_derivative(&s, 0.0, 0.0).d, 1.0);
        let s = PairState { d: 3.0, v1: 5.0, v: 7.0, u1: 0.3 };
        assert_eq!(
            pair_derivative(&s, -0.2, 0.1),
            PairState { d: -2.0, v1: 0.3, v: -0.2, u1: 0.1 }
        );
    }

    #[test]
    fn platoon_derivative_cases() {
        let ps = PlatoonState {
            lead_v: 5.0,
            lead_u: 0.0,
            followers: vec![FollowerKinematics { d: 10.0, v: 5.0 }; 3],
        };
        let dp = platoon_derivative(&ps, &[0.0; 3], 0.0).unwrap();
        assert!(dp.followers.iter().all(|f| f.d == 0.0 && f.v == 0.0));

        let ps = PlatoonState {
            lead_v: 6.0,
            lead_u: 0.0,
            followers: vec![FollowerKinematics { d: 10.0, v: 5.0 }; 2],
        };
        let dp = platoon_derivative(&ps, &[1.0, 0.0], 0.0).unwrap();
        assert_eq!(dp.followers[0].d, 1.0);
        assert_eq!(dp.followers[1].d, 0.0);
        assert_eq!(dp.followers[0].v, 1.0);

        assert!(matches!(
            platoon_derivative(&ps, &[1.0], 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn single_follower_matches_pair() {
        let s = PairState { d: 3.0, v1: 5.0, v: 7.0, u1: 0.3 };
        let ps = PlatoonState {
            lead_v: s.v1,
            lead_u: s.u1,
            followers: vec![FollowerKinematics { d: s.d, v: s.v }],
        };
        let dp = platoon_derivative(&ps, &[-0.2], 0.1).unwrap();
        let dpair = pair_derivative(&s, -0.2, 0.1);
        assert_eq!(dp.followers[0].d, dpair.d);
        assert_eq!(dp.followers[0].v, dpair.v);
        assert_eq!(dp.lead_v, dpair.v1);
        assert_eq!(dp.lead_u, dpair.u1);
    }

    #[test]
    fn lead_inputs_by_segment_kind() {
        let p = LeadProfile::new(
            0.0,
            vec![
                Segment::new(2.0, SegmentKind::ConstantJerk { jerk: 0.5 }),
                Segment::new(3.0, SegmentKind::ConstantAcceleration { accel: 1.0 }),
            ],
        )
        .unwrap();
        let (u1, uj) = p.lead_inputs(1.0).unwrap();
        assert_abs_diff_eq!(u1, 0.5);
        assert_eq!(uj, 0.5);
        // boundary belongs to the next segment
        assert_eq!(p.lead_inputs(2.0).unwrap(), (1.0, 0.0));
        assert_eq!(p.lead_inputs(5.0).unwrap(), (1.0, 0.0));
        assert!(matches!(p.lead_inputs(5.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.lead_inputs(-0.1), Err(Error::OutOfRange { .. })));

        let p = LeadProfile::new(
            5.0,
            vec![Segment::new(
                10.0,
                SegmentKind::SinusoidalVelocity { mean: 5.0, amplitude: 1.0, omega: 0.5 },
            )],
        )
        .unwrap();
        let (u1, uj) = p.lead_inputs(0.0).unwrap();
        assert_abs_diff_eq!(u1, 0.5);
        assert_abs_diff_eq!(uj, 0.0);
    }

    #[test]
    fn tabulated_profile_interpolates() {
        let p = LeadProfile::new(
            0.0,
            vec![Segment::new(
                4.0,
                SegmentKind::TabulatedAcceleration {
                    times: vec![0.0, 2.0, 4.0],
                    values: vec![0.0, 1.0, 0.0],
                },
            )],
        )
        .unwrap();
        assert_eq!(p.lead_inputs(1.0).unwrap(), (0.5, 0.5));
        assert_eq!(p.lead_inputs(3.0).unwrap(), (0.5, -0.5));
        assert_eq!(p.lead_inputs(4.0).unwrap(), (0.0, -0.5));
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(LeadProfile::new(0.0, vec![]).is_err());
        assert!(LeadProfile::new(0.0, vec![Segment::new(0.0, SegmentKind::ConstantJerk { jerk: 1.0 })]).is_err());
        let tab = |times: Vec<f64>| {
            LeadProfile::new(
                0.0,
                vec![Segment::new(
                    2.0,
                    SegmentKind::TabulatedAcceleration { values: vec![0.0; times.len()], times },
                )],
            )
        };
        assert!(tab(vec![0.0, 1.0, 1.0, 2.0]).is_err());
        assert!(tab(vec![0.0, 1.0]).is_err());
        assert!(tab(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn profile_json_defaults_initial_velocity_to_sinusoid_mean() {
        let json = r#"{"segments":[{"duration":4.0,"kind":"sinusoidal_velocity","mean":7.0,"amplitude":1.0,"omega":0.5}]}"#;
        let p: LeadProfile = serde_json::from_str(json).unwrap();
        assert_eq!(p.initial_velocity(), 7.0);
        let back: LeadProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn chained_gap_rates_telescope(
            lead_v in -30.0..30.0f64,
            vs in prop::collection::vec(-30.0..30.0f64, 1..6),
        ) {
            let ps = PlatoonState {
                lead_v,
                lead_u: 0.0,
                followers: vs.iter().map(|&v| FollowerKinematics { d: 10.0, v }).collect(),
            };
            let dp = platoon_derivative(&ps, &vec![0.0; vs.len()], 0.0).unwrap();
            let sum: f64 = dp.followers.iter().map(|f| f.d).sum();
            prop_assert!((sum - (lead_v - vs.last().unwrap())).abs() < 1e-9);
        }

        #[test]
        fn jerk_integrates_to_acceleration_change(jerk in -2.0..2.0f64, a0 in -2.0..2.0f64, dur in 0.5..5.0f64) {
            let p = LeadProfile::new(0.0, vec![
                Segment::new(1.0, SegmentKind::ConstantAcceleration { accel: a0 }),
                Segment::new(dur, SegmentKind::ConstantJerk { jerk }),
            ]).unwrap();
            // trapezoid on u_j over the jerk segment
            let n = 1000;
            let h = dur / n as f64;
            let mut acc = 0.0;
            for k in 0..n {
                let t0 = 1.0 + k as f64 * h;
                acc += 0.5 * h * (p.lead_inputs(t0).unwrap().1 + p.lead_inputs((t0 + h).min(p.horizon())).unwrap().1);
            }
            let end = p.lead_inputs(1.0 + dur).unwrap().0;
            prop_assert!((a0 + acc - end).abs() < 1e-9);
        }
    }
}
