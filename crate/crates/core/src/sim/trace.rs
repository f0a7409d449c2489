use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::ErrorState;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LeadSample {
    pub v1: f64,
    pub u1: f64,
    pub u_j: f64,
}

/// One follower's channels at a recorded instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FollowerSample {
    pub d: f64,
    pub v: f64,
    pub u: f64,
    pub d_hat: f64,
    pub v1_hat: f64,
    pub u1_hat: f64,
    pub d_tilde: f64,
    pub v1_tilde: f64,
    pub u1_tilde: f64,
    pub h: f64,
    pub h_hat: f64,
    pub epsilon: f64,
    pub v_m: f64,
    pub d_c: f64,
    /// `½(ĥ − d_c)² + ẽᵀPẽ`.
    pub v1_lyap: f64,
    /// Shifted-equilibrium variant; only when a reference jerk is configured.
    pub v2_lyap: Option<f64>,
}

impl FollowerSample {
    pub fn error(&self) -> ErrorState {
        ErrorState {
            d_tilde: self.d_tilde,
            v1_tilde: self.v1_tilde,
            u1_tilde: self.u1_tilde,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub lead: LeadSample,
    pub followers: Vec<FollowerSample>,
}

/// Output of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dt: f64,
    pub records: Vec<TraceRecord>,
    /// Times at which communication resets were applied.
    pub comm_events: Vec<f64>,
    /// Number of `ε ← E_v` jumps applied between steps.
    pub clamp_events: usize,
    pub warnings: Vec<String>,
}

const FOLLOWER_COLUMNS: [&str; 16] = [
    "d", "v", "u", "d_hat", "v1_hat", "u1_hat", "d_tilde", "v1_tilde", "u1_tilde", "h", "h_hat", "epsilon",
    "v_m", "d_c", "V1", "V2",
];

impl Trace {
    pub fn follower_count(&self) -> usize {
        self.records.first().map_or(0, |r| r.followers.len())
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Time series of one follower channel.
    pub fn series<F>(&self, follower: usize, f: F) -> Vec<f64>
    where
        F: Fn(&FollowerSample) -> f64,
    {
        self.records.iter().map(|r| f(&r.followers[follower])).collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string(), "lead_v1".into(), "lead_u1".into(), "lead_uj".into()];
        for i in 1..=self.follower_count() {
            cols.extend(FOLLOWER_COLUMNS.iter().map(|c| format!("f{i}_{c}")));
        }
        cols
    }

    /// Writes the trace as CSV: `t`, lead channels, then one block per follower.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header().join(","))?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            push_num(&mut line, r.t);
            for x in [r.lead.v1, r.lead.u1, r.lead.u_j] {
                line.push(',');
                push_num(&mut line, x);
            }
            for f in &r.followers {
                let vals = [
                    f.d, f.v, f.u, f.d_hat, f.v1_hat, f.u1_hat, f.d_tilde, f.v1_tilde, f.u1_tilde, f.h, f.h_hat,
                    f.epsilon, f.v_m, f.d_c, f.v1_lyap,
                ];
                for x in vals {
                    line.push(',');
                    push_num(&mut line, x);
                }
                line.push(',');
                if let Some(v2) = f.v2_lyap {
                    push_num(&mut line, v2);
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn push_num(s: &mut String, x: f64) {
    use std::fmt::Write as _;
    let _ = write!(s, "{x}");
}
