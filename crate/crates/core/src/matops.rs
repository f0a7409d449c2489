//! Small dense 3×3 linear algebra used by the estimator certificates.
//!
//! Nothing here is general purpose: the cubic solver only handles the
//! characteristic polynomial `λ³ − g₁λ² − g₂λ − g₃` of the estimator error
//! matrix, and the Lyapunov solver works on the six unknowns of a symmetric
//! 3×3 matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

const CONJUGATE_TOL: f64 = 1e-9;

pub type Vector3 = [f64; 3];

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Matrix3 {
    pub const fn zeros() -> Self {
        Matrix3([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Matrix3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(d: Vector3) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Matrix3) -> Matrix3 {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix3) -> Matrix3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &Vector3) -> Vector3 {
        let mut y = [0.0; 3];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..3).map(|k| self.0[i][k] * x[k]).sum();
        }
        y
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest absolute entry of `self − selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl Default for Matrix3 {
    fn default() -> Self {
        Self::zeros()
    }
}

/// Three eigenvalues sorted by real part, then imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenTriple(pub [Complex64; 3]);

impl EigenTriple {
    pub fn new(mut roots: [Complex64; 3]) -> Self {
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        EigenTriple(roots)
    }

    pub fn real(values: [f64; 3]) -> Self {
        Self::new(values.map(|re| Complex64::new(re, 0.0)))
    }

    pub fn max_real_part(&self) -> f64 {
        self.0.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }
}

/// Estimator gains `(g₁, g₂, g₃)` whose error matrix has the given spectrum.
///
/// The characteristic polynomial is `λ³ − g₁λ² − g₂λ − g₃`, so
/// `g₁ = Σλ`, `g₂ = −Σλᵢλⱼ` and `g₃ = λ₁λ₂λ₃`.
pub fn gains_from_eigenvalues(lams: &EigenTriple) -> Result<(f64, f64, f64)> {
    validate_real_cubic_roots(lams)?;
    let [l1, l2, l3] = lams.0;
    let sum = l1 + l2 + l3;
    let pairs = l1 * l2 + l1 * l3 + l2 * l3;
    let prod = l1 * l2 * l3;
    Ok((sum.re, -pairs.re, prod.re))
}

fn validate_real_cubic_roots(lams: &EigenTriple) -> Result<()> {
    let roots = &lams.0;
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidSpectrum("non-finite eigenvalue".into()));
    }
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = CONJUGATE_TOL * scale;
    let complex: Vec<&Complex64> = roots.iter().filter(|z| z.im.abs() > tol).collect();
    match complex.len() {
        0 => Ok(()),
        2 => {
            let (a, b) = (complex[0], complex[1]);
            if (a.re - b.re).abs() <= tol && (a.im + b.im).abs() <= tol {
                Ok(())
            } else {
                Err(Error::InvalidSpectrum(format!(
                    "{a} and {b} are not a conjugate pair"
                )))
            }
        }
        n => Err(Error::InvalidSpectrum(format!(
            "{n} non-real eigenvalues cannot come from a real cubic"
        ))),
    }
}

/// Roots of `λ³ − g₁λ² − g₂λ − g₃ = 0`.
///
/// Closed-form (trigonometric / Cardano) solution followed by a Newton polish
/// on the original polynomial. A complex pair is always returned as an exact
/// conjugate pair.
pub fn eigenvalues_of_error_matrix(g1: f64, g2: f64, g3: f64) -> EigenTriple {
    // monic form x³ + a x² + b x + c
    let (a, b, c) = (-g1, -g2, -g3);
    let poly = |x: Complex64| ((x + a) * x + b) * x + c;
    let dpoly = |x: Complex64| (3.0 * x + 2.0 * a) * x + b;
    let polish = |mut x: Complex64| {
        for _ in 0..8 {
            let d = dpoly(x);
            if d.norm() == 0.0 {
                break;
            }
            let step = poly(x) / d;
            let next = x - step;
            if !next.re.is_finite() || !next.im.is_finite() || poly(next).norm() > poly(x).norm() {
                break;
            }
            x = next;
            if step.norm() <= f64::EPSILON * x.norm().max(1.0) {
                break;
            }
        }
        x
    };

    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let shift = a / 3.0;

    if r * r < q * q * q {
        let theta = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let two_pi = 2.0 * std::f64::consts::PI;
        let roots = [0.0, 1.0, -1.0].map(|k: f64| {
            let x = m * ((theta + k * two_pi) / 3.0).cos() - shift;
            polish(Complex64::new(x, 0.0))
        });
        return EigenTriple::new(roots.map(|z| Complex64::new(z.re, 0.0)));
    }

    let big_a = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
    let big_b = if big_a == 0.0 { 0.0 } else { q / big_a };
    let real_root = polish(Complex64::new(big_a + big_b - shift, 0.0)).re;

    // deflate: x³ + a x² + b x + c = (x − r)(x² + p x + s)
    let p = a + real_root;
    let s = if real_root.abs() > 1e-8 {
        -c / real_root
    } else {
        b + p * real_root
    };
    let disc = p * p - 4.0 * s;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q1 = -0.5 * (p + p.signum() * sq);
        let (x1, x2) = if q1 == 0.0 {
            (0.0, -p)
        } else {
            (q1, s / q1)
        };
        let roots = [real_root, x1, x2].map(|x| polish(Complex64::new(x, 0.0)).re);
        EigenTriple::real(roots)
    } else {
        let pair = polish(Complex64::new(-p / 2.0, (-disc).sqrt() / 2.0));
        let im = pair.im.abs();
        EigenTriple::new([
            Complex64::new(real_root, 0.0),
            Complex64::new(pair.re, im),
            Complex64::new(pair.re, -im),
        ])
    }
}

/// Routh–Hurwitz test for the estimator error matrix.
///
/// `g₁ < 0`, `g₃ < 0` and `g₁g₂ > −g₃` together are necessary and sufficient
/// for every root of the characteristic cubic to lie in the open left
/// half-plane.
pub fn is_hurwitz(g1: f64, g2: f64, g3: f64) -> bool {
    g1 < 0.0 && g3 < 0.0 && g1 * g2 > -g3
}

/// Solves `AᵀP + PA + Q = 0` for symmetric `P`.
///
/// The six independent entries of `P` are found from a 6×6 linear system by
/// Gaussian elimination with partial pivoting. The result is rejected unless
/// it is positive definite, which is what happens when `A` is not Hurwitz.
pub fn solve_continuous_lyapunov(a: &Matrix3, q: &Matrix3) -> Result<Matrix3> {
    if !a.is_finite() || !q.is_finite() {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    if !is_positive_definite(q)? {
        return Err(Error::InvalidArgument("Q must be positive definite".into()));
    }

    const IDX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let unknown = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        IDX.iter().position(|&p| p == (i, j)).expect("valid index")
    };

    let mut m = [[0.0_f64; 7]; 6];
    for (row, &(i, j)) in IDX.iter().enumerate() {
        // (AᵀP)_ij = Σ_k A_ki P_kj ; (PA)_ij = Σ_k P_ik A_kj
        for k in 0..3 {
            m[row][unknown(k, j)] += a.0[k][i];
            m[row][unknown(i, k)] += a.0[k][j];
        }
        m[row][6] = -q.0[i][j];
    }

    let scale = m.iter().flat_map(|r| r[..6].iter()).fold(0.0_f64, |s, x| s.max(x.abs()));
    let x = solve_dense::<6, 7>(&mut m, scale * 1e-13).ok_or_else(|| {
        Error::NoUniqueSolution("singular Lyapunov operator (A has eigenvalues λi + λj = 0)".into())
    })?;

    let mut p = Matrix3::zeros();
    for (n, &(i, j)) in IDX.iter().enumerate() {
        p.0[i][j] = x[n];
        p.0[j][i] = x[n];
    }
    if !p.is_finite() {
        return Err(Error::NoUniqueSolution("non-finite solution".into()));
    }
    if !is_positive_definite(&p)? {
        return Err(Error::NoUniqueSolution(
            "solution is not positive definite (A is not Hurwitz)".into(),
        ));
    }
    Ok(p)
}

/// `AᵀP + PA + Q`, which should vanish for a Lyapunov solution.
pub fn lyapunov_residual(a: &Matrix3, p: &Matrix3, q: &Matrix3) -> Matrix3 {
    a.transpose().mul(p).add(&p.mul(a)).add(q)
}

// Gaussian elimination with partial pivoting on an augmented N×(N+1) system.
fn solve_dense<const N: usize, const M: usize>(m: &mut [[f64; M]; N], pivot_tol: f64) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&r1, &r2| m[r1][col].abs().total_cmp(&m[r2][col].abs()))?;
        if m[pivot][col].abs() <= pivot_tol {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..N {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..M {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = ((row + 1)..N).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][N] - tail) / m[row][row];
    }
    Some(x)
}

/// Cholesky-style positive definiteness test for a symmetric matrix.
pub fn is_positive_definite(m: &Matrix3) -> Result<bool> {
    if m.asymmetry() > SYMMETRY_TOL {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (asymmetry {:e})",
            m.asymmetry()
        )));
    }
    let mut l = [[0.0_f64; 3]; 3];
    for j in 0..3 {
        let diag = m.0[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if diag <= 0.0 || !diag.is_finite() {
            return Ok(false);
        }
        l[j][j] = diag.sqrt();
        for i in (j + 1)..3 {
            l[i][j] = (m.0[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    Ok(true)
}

/// `xᵀ M x`.
pub fn quad_form(m: &Matrix3, x: &Vector3) -> f64 {
    let mx = m.mul_vec(x);
    x.iter().zip(mx).map(|(a, b)| a * b).sum()
}
