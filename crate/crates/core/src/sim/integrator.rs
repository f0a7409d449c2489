//! Fixed-step explicit integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

impl Integrator {
    pub fn step<F>(&self, f: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        match self {
            Integrator::Rk4 => rk4_step(f, x, t, dt),
            Integrator::Euler => euler_step(f, x, t, dt),
        }
    }
}

fn eval<F>(f: &mut F, t: f64, x: &[f64], out: &mut [f64]) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    f(t, x, out);
    match out.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NumericFailure {
            t,
            what: format!("non-finite derivative in state component {i}"),
        }),
        None => Ok(()),
    }
}

/// Classical four-stage Runge–Kutta step.
pub fn rk4_step<F>(mut f: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let n = x.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let half = 0.5 * dt;

    eval(&mut f, t, x, &mut k1)?;
    for i in 0..n {
        tmp[i] = x[i] + half * k1[i];
    }
    eval(&mut f, t + half, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = x[i] + half * k2[i];
    }
    eval(&mut f, t + half, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    eval(&mut f, t + dt, &tmp, &mut k4)?;

    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

pub fn euler_step<F>(mut f: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let mut k = vec![0.0; x.len()];
    eval(&mut f, t, x, &mut k)?;
    Ok(x.iter().zip(&k).map(|(xi, ki)| xi + dt * ki).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let x = vec![1.0, -2.0, 3.5];
        let y = rk4_step(|_, _, dx: &mut [f64]| dx.fill(0.0), &x, 0.0, 0.1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let mut x = vec![1.0];
        let dt = 1e-3;
        for k in 0..1000 {
            x = rk4_step(|_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0], &x, k as f64 * dt, dt).unwrap();
        }
        assert!((x[0] - (-1.0_f64).exp()).abs() < 1e-10, "{}", x[0]);
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let mut x = vec![1.0, 0.0];
        let dt = 1e-3;
        let energy = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let e0 = energy(&x);
        for k in 0..10_000 {
            x = rk4_step(
                |_, x: &[f64], dx: &mut [f64]| {
                    dx[0] = x[1];
                    dx[1] = -x[0];
                },
                &x,
                k as f64 * dt,
                dt,
            )
            .unwrap();
        }
        assert!((energy(&x) - e0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_derivative_reports_time() {
        let err = rk4_step(|_, _, dx: &mut [f64]| dx[0] = f64::NAN, &[1.0], 2.5, 0.1).unwrap_err();
        assert!(matches!(err, Error::NumericFailure { t, .. } if t == 2.5));
        assert!(rk4_step(|_, _, dx: &mut [f64]| dx[0] = 0.0, &[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn euler_is_first_order() {
        let run = |dt: f64| {
            let mut x = vec![1.0];
            let n = (1.0 / dt).round() as usize;
            for k in 0..n {
                x = euler_step(|_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0], &x, k as f64 * dt, dt).unwrap();
            }
            (x[0] - (-1.0_f64).exp()).abs()
        };
        let ratio = run(1e-2) / run(5e-3);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }
}
