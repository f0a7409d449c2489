//! Estimator-based safety-critical adaptive cruise control.
//!
//! A follower vehicle senses only its gap to the predecessor and its own
//! velocity. A three-state estimator reconstructs the predecessor's velocity
//! and acceleration; a control-barrier-function law keeps the spacing
//! `h = d - d_r - T v` non-negative despite the estimation error, with an
//! optional adaptive error bound that shrinks conservatism after
//! vehicle-to-vehicle communication events.
//!
//! Modules, bottom-up:
//!
//! - [`matops`]: 3×3 utilities (cubic spectra, Hurwitz test, Lyapunov solve).
//! - [`plant`]: longitudinal pair/platoon dynamics and lead input profiles.
//! - [`estimator`]: estimator dynamics, error matrix and shifted equilibria.
//! - [`controller`]: safety function, baseline and adaptive control laws.
//! - [`sim`]: fixed-step closed-loop integration with events and traces.
//! - [`analysis`]: Lyapunov values, safety margins, string-stability gains.
//! - [`scenario`] / [`cli`]: JSON scenario files, presets and the CLI driver.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod matops;
pub mod plant;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
