//! Follower-side estimator of the gap, predecessor velocity and predecessor
//! acceleration, driven only by the sensed gap and the follower's own speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{self, EigenTriple, Matrix3, Vector3};
use crate::plant::PairState;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorState {
    pub d_hat: f64,
    pub v1_hat: f64,
    pub u1_hat: f64,
}

/// Estimation error `ẽ = (d̂ − d, v̂₁ − v₁, û₁ − u₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    pub d_tilde: f64,
    pub v1_tilde: f64,
    pub u1_tilde: f64,
}

impl ErrorState {
    pub fn as_vector(&self) -> Vector3 {
        [self.d_tilde, self.v1_tilde, self.u1_tilde]
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &ErrorState) -> ErrorState {
        ErrorState {
            d_tilde: self.d_tilde - other.d_tilde,
            v1_tilde: self.v1_tilde - other.v1_tilde,
            u1_tilde: self.u1_tilde - other.u1_tilde,
        }
    }
}

/// Estimator gains `(g₁, g₂, g₃)`.
///
/// [`EstimatorGains::new`] enforces the estimator design constraints (all
/// gains negative and a Hurwitz error matrix). [`EstimatorGains::raw`] skips
/// them for analysis of arbitrary gain triples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct EstimatorGains {
    g1: f64,
    g2: f64,
    g3: f64,
}

impl EstimatorGains {
    pub fn new(g1: f64, g2: f64, g3: f64) -> Result<Self> {
        let gains = Self::raw(g1, g2, g3);
        gains.validate()?;
        Ok(gains)
    }

    pub const fn raw(g1: f64, g2: f64, g3: f64) -> Self {
        EstimatorGains { g1, g2, g3 }
    }

    pub fn from_eigenvalues(lams: &EigenTriple) -> Result<Self> {
        let (g1, g2, g3) = matops::gains_from_eigenvalues(lams)?;
        Self::new(g1, g2, g3)
    }

    pub fn validate(&self) -> Result<()> {
        let (g1, g2, g3) = self.tuple();
        if ![g1, g2, g3].iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidGain("gains must be finite".into()));
        }
        if !(g1 < 0.0 && g2 < 0.0 && g3 < 0.0) {
            return Err(Error::InvalidGain(format!(
                "g1, g2, g3 must all be negative for a Hurwitz error matrix, got ({g1}, {g2}, {g3})"
            )));
        }
        if !matops::is_hurwitz(g1, g2, g3) {
            return Err(Error::InvalidGain(format!(
                "error matrix is not Hurwitz: g1·g2 = {} must exceed −g3 = {}",
                g1 * g2,
                -g3
            )));
        }
        Ok(())
    }

    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    pub fn g3(&self) -> f64 {
        self.g3
    }

    pub fn tuple(&self) -> (f64, f64, f64) {
        (self.g1, self.g2, self.g3)
    }

    pub fn eigenvalues(&self) -> EigenTriple {
        matops::eigenvalues_of_error_matrix(self.g1, self.g2, self.g3)
    }

    pub fn is_hurwitz(&self) -> bool {
        matops::is_hurwitz(self.g1, self.g2, self.g3)
    }
}

impl TryFrom<[f64; 3]> for EstimatorGains {
    type Error = Error;

    fn try_from(g: [f64; 3]) -> Result<Self> {
        Self::new(g[0], g[1], g[2])
    }
}

impl From<EstimatorGains> for [f64; 3] {
    fn from(g: EstimatorGains) -> Self {
        [g.g1, g.g2, g.g3]
    }
}

/// Right-hand side of the estimator, with `d̃ = d̂ − d_measured`:
/// `(v̂₁ − v + g₁d̃, g₂d̃ + û₁, g₃d̃)`.
pub fn estimator_derivative(est: &EstimatorState, d_measured: f64, v: f64, gains: &EstimatorGains) -> EstimatorState {
    let d_tilde = est.d_hat - d_measured;
    EstimatorState {
        d_hat: est.v1_hat - v + gains.g1 * d_tilde,
        v1_hat: gains.g2 * d_tilde + est.u1_hat,
        u1_hat: gains.g3 * d_tilde,
    }
}

/// Error dynamics `ẽ' = Aẽ + B u_j`.
pub fn error_matrix(gains: &EstimatorGains) -> (Matrix3, Vector3) {
    let (g1, g2, g3) = gains.tuple();
    (
        Matrix3([[g1, 1.0, 0.0], [g2, 0.0, 1.0], [g3, 0.0, 0.0]]),
        [0.0, 0.0, -1.0],
    )
}

/// Fixed point of the error dynamics under constant lead jerk:
/// `ẽ* = (1, −g₁, −g₂)·u_j/g₃`.
pub fn equilibrium_error(gains: &EstimatorGains, u_j: f64) -> Result<ErrorState> {
    if gains.g3 == 0.0 {
        return Err(Error::SingularEquilibrium);
    }
    let k = u_j / gains.g3;
    Ok(ErrorState {
        d_tilde: k,
        v1_tilde: -gains.g1 * k,
        u1_tilde: -gains.g2 * k,
    })
}

pub fn error_state(est: &EstimatorState, truth: &PairState) -> ErrorState {
    ErrorState {
        d_tilde: est.d_hat - truth.d,
        v1_tilde: est.v1_hat - truth.v1,
        u1_tilde: est.u1_hat - truth.u1,
    }
}

/// Estimator state after the predecessor has communicated its true state.
pub fn communication_reset(_est: &EstimatorState, truth: &PairState) -> EstimatorState {
    EstimatorState {
        d_hat: truth.d,
        v1_hat: truth.v1,
        u1_hat: truth.u1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::pair_derivative;
    use approx::assert_abs_diff_eq;

    fn paper_gains() -> EstimatorGains {
        EstimatorGains::new(-9.0, -26.0, -24.0).unwrap()
    }

    #[test]
    fn derivative_cases() {
        let g = paper_gains();
        let est = EstimatorState { d_hat: 10.0, v1_hat: 5.0, u1_hat: 0.0 };
        assert_eq!(estimator_derivative(&est, 10.0, 5.0, &g), EstimatorState::default());
        assert_eq!(
            estimator_derivative(&est, 9.0, 5.0, &g),
            EstimatorState { d_hat: -9.0, v1_hat: -26.0, u1_hat: -24.0 }
        );
        let est = EstimatorState { d_hat: 10.0, v1_hat: 7.0, u1_hat: 0.5 };
        assert_eq!(
            estimator_derivative(&est, 10.0, 5.0, &g),
            EstimatorState { d_hat: 2.0, v1_hat: 0.5, u1_hat: 0.0 }
        );
    }

    #[test]
    fn error_matrix_entries_and_spectrum() {
        let (a, b) = error_matrix(&paper_gains());
        assert_eq!(a, Matrix3([[-9.0, 1.0, 0.0], [-26.0, 0.0, 1.0], [-24.0, 0.0, 0.0]]));
        assert_eq!(b, [0.0, 0.0, -1.0]);
        let (a, _) = error_matrix(&EstimatorGains::raw(0.0, 0.0, 0.0));
        assert!((0..3).all(|i| a.0[i][0] == 0.0));
        let e = paper_gains().eigenvalues();
        for (z, want) in e.0.iter().zip([-4.0, -3.0, -2.0]) {
            assert_abs_diff_eq!(z.re, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn equilibrium_error_cases() {
        let g = paper_gains();
        assert_eq!(equilibrium_error(&g, 0.0).unwrap(), ErrorState::default());
        let e = equilibrium_error(&g, 0.5).unwrap();
        assert_abs_diff_eq!(e.d_tilde, -0.020833333333, epsilon = 1e-9);
        assert_abs_diff_eq!(e.v1_tilde, -0.1875, epsilon = 1e-12);
        assert_abs_diff_eq!(e.u1_tilde, -0.541666666667, epsilon = 1e-9);
        // magnitudes reported for the constant-jerk run
        assert_abs_diff_eq!(e.d_tilde.abs(), 0.0208, epsilon = 1e-4);
        assert_abs_diff_eq!(e.v1_tilde.abs(), 0.187, epsilon = 1e-3);
        assert_abs_diff_eq!(e.u1_tilde.abs(), 0.5416, epsilon = 1e-4);
        let e = equilibrium_error(&g, -0.5).unwrap();
        assert_abs_diff_eq!(e.d_tilde, 0.020833333333, epsilon = 1e-9);
        assert_abs_diff_eq!(e.v1_tilde, 0.1875, epsilon = 1e-12);
        assert_abs_diff_eq!(e.u1_tilde, 0.541666666667, epsilon = 1e-9);
        assert_eq!(
            equilibrium_error(&EstimatorGains::raw(-1.0, -1.0, 0.0), 1.0),
            Err(Error::SingularEquilibrium)
        );
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_error_dynamics() {
        let g = paper_gains();
        let (a, b) = error_matrix(&g);
        let e = equilibrium_error(&g, 0.7).unwrap().as_vector();
        let ae = a.mul_vec(&e);
        for i in 0..3 {
            assert_abs_diff_eq!(ae[i] + b[i] * 0.7, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gains_validation() {
        assert!(matches!(EstimatorGains::new(1.0, -26.0, -24.0), Err(Error::InvalidGain(_))));
        assert!(matches!(EstimatorGains::new(-1.0, -1.0, -10.0), Err(Error::InvalidGain(_))));
        assert!(matches!(EstimatorGains::new(f64::NAN, -1.0, -1.0), Err(Error::InvalidGain(_))));
        let g = EstimatorGains::from_eigenvalues(&EigenTriple::real([-2.0, -3.0, -4.0])).unwrap();
        assert_eq!(g.tuple(), (-9.0, -26.0, -24.0));
        let parsed: std::result::Result<EstimatorGains, _> = serde_json::from_str("[1.0, -1.0, -1.0]");
        assert!(parsed.is_err());
    }

    #[test]
    fn reset_zeroes_errors_and_stays_at_fixed_point() {
        let g = paper_gains();
        let truth = PairState { d: 12.0, v1: 6.0, v: 5.5, u1: 0.4 };
        let est = EstimatorState { d_hat: 11.0, v1_hat: 4.0, u1_hat: -1.0 };
        let est = communication_reset(&est, &truth);
        assert_eq!(error_state(&est, &truth), ErrorState::default());

        // one explicit step of plant + estimator with u_j = 0
        let dt = 1e-3;
        let u = 0.2;
        let dp = pair_derivative(&truth, u, 0.0);
        let de = estimator_derivative(&est, truth.d, truth.v, &g);
        let truth2 = PairState {
            d: truth.d + dt * dp.d,
            v1: truth.v1 + dt * dp.v1,
            v: truth.v + dt * dp.v,
            u1: truth.u1 + dt * dp.u1,
        };
        let est2 = EstimatorState {
            d_hat: est.d_hat + dt * de.d_hat,
            v1_hat: est.v1_hat + dt * de.v1_hat,
            u1_hat: est.u1_hat + dt * de.u1_hat,
        };
        let e = error_state(&est2, &truth2);
        assert!(e.norm() < 1e-12, "{e:?}");
    }
}
