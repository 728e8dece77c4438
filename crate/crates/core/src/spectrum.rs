//! Quasienergy spectrum of the truncated Floquet operator.
//!
//! Eigenvalues `μ` of `U` are written `μ = e^{−iε}` with
//! `ε_r = −arg μ ∈ (−π, π]` and `ε_i = −ln|μ|`, so a growing mode has
//! `ε_i < 0`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::quantum::{Direction, FloquetPropagator};

/// Largest basis for dense diagonalization.
pub const MAX_DENSE_DIM: usize = 512;
/// Default threshold on `max |ε_i|` for calling the spectrum broken.
pub const DEFAULT_PT_TOL: f64 = 1e-6;

/// Dense Floquet matrix in the momentum basis: column `j` is one
/// unnormalized period applied to `|n_j⟩`.
pub fn build_floquet_matrix(params: &SystemParams, dim: usize) -> Result<Mat<Complex64>> {
    if !(8..=MAX_DENSE_DIM).contains(&dim) || !dim.is_power_of_two() {
        return Err(Error::invalid(
            "dim",
            format!("must be a power of two in [8, {MAX_DENSE_DIM}], got {dim}"),
        ));
    }
    let prop = FloquetPropagator::new(params, dim)?;
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            v[j] = Complex64::new(1.0, 0.0);
            prop.apply_raw(&mut v, Direction::Forward);
            v
        })
        .collect();
    Ok(Mat::from_fn(dim, dim, |i, j| columns[j][i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quasienergy {
    pub re: f64,
    pub im: f64,
    /// `|μ|`
    pub modulus: f64,
}

impl Quasienergy {
    pub fn from_eigenvalue(mu: Complex64) -> Self {
        let mut re = -mu.arg();
        if re <= -PI {
            re += 2.0 * PI;
        }
        let modulus = mu.norm();
        Self {
            re,
            im: -modulus.ln(),
            modulus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasienergySet {
    pub dim: usize,
    /// Sorted by `ε_r`, then `ε_i`.
    pub quasienergies: Vec<Quasienergy>,
    /// `max |(|μ| − 1)|`
    pub max_modulus_deviation: f64,
}

impl QuasienergySet {
    pub fn max_abs_imag(&self) -> f64 {
        self.quasienergies
            .iter()
            .map(|q| q.im.abs())
            .fold(0.0, f64::max)
    }
}

/// Full eigendecomposition of a square matrix into quasienergies.
pub fn quasienergies(matrix: &Mat<Complex64>) -> Result<QuasienergySet> {
    let dim = matrix.nrows();
    if matrix.ncols() != dim {
        return Err(Error::invalid(
            "matrix",
            format!("must be square, got {}x{}", dim, matrix.ncols()),
        ));
    }
    let mut finite = true;
    let mut frob = 0.0;
    for j in 0..dim {
        for i in 0..dim {
            let z = matrix[(i, j)];
            finite &= z.re.is_finite() && z.im.is_finite();
            frob += z.norm_sqr();
        }
    }
    if !finite {
        return Err(Error::EigenSolver {
            dim,
            reason: "matrix has non-finite entries".into(),
        });
    }
    let eig = matrix.eigenvalues().map_err(|e| Error::EigenSolver {
        dim,
        reason: format!("{e:?} (Frobenius norm {:.3e})", frob.sqrt()),
    })?;
    let mut qs: Vec<Quasienergy> = eig.into_iter().map(Quasienergy::from_eigenvalue).collect();
    if qs.iter().any(|q| !(q.re.is_finite() && q.im.is_finite())) {
        return Err(Error::EigenSolver {
            dim,
            reason: format!("non-finite eigenvalue (Frobenius norm {:.3e})", frob.sqrt()),
        });
    }
    qs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let max_modulus_deviation = qs
        .iter()
        .map(|q| (q.modulus - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(QuasienergySet {
        dim,
        quasienergies: qs,
        max_modulus_deviation,
    })
}

/// Spectrum of the Floquet operator at `params` in a basis of size `dim`.
pub fn floquet_spectrum(params: &SystemParams, dim: usize) -> Result<QuasienergySet> {
    quasienergies(&build_floquet_matrix(params, dim)?)
}

/// True iff some quasienergy has `|ε_i| > tol`.
pub fn is_pt_broken(qs: &QuasienergySet, tol: f64) -> bool {
    qs.max_abs_imag() > tol
}

/// Bisection result: `low` is unbroken, `high` is broken, and
/// `high − low ≤ tol_lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaCBracket {
    pub lambda_c: f64,
    pub low: f64,
    pub high: f64,
    pub iterations: usize,
}

/// Bisects on `λ` for the onset of complex quasienergies, with the default
/// breaking tolerance.
pub fn find_lambda_c(
    params: &SystemParams,
    dim: usize,
    bracket: (f64, f64),
    tol_lambda: f64,
) -> Result<LambdaCBracket> {
    find_lambda_c_with_tol(params, dim, bracket, tol_lambda, DEFAULT_PT_TOL)
}

/// As [`find_lambda_c`] with an explicit threshold on `max |ε_i|`. The `λ`
/// stored in `params` is ignored.
pub fn find_lambda_c_with_tol(
    params: &SystemParams,
    dim: usize,
    bracket: (f64, f64),
    tol_lambda: f64,
    pt_tol: f64,
) -> Result<LambdaCBracket> {
    let (mut low, mut high) = bracket;
    if !(low.is_finite() && high.is_finite() && 0.0 <= low && low < high) {
        return Err(Error::invalid(
            "bracket",
            format!("need 0 <= low < high, got [{low}, {high}]"),
        ));
    }
    if !(tol_lambda.is_finite() && tol_lambda > 0.0) {
        return Err(Error::invalid(
            "tol_lambda",
            format!("must be > 0, got {tol_lambda}"),
        ));
    }
    let broken = |lambda: f64| -> Result<bool> {
        let p = params.with_lambda(lambda)?;
        Ok(is_pt_broken(&floquet_spectrum(&p, dim)?, pt_tol))
    };
    let (status_low, status_high) = (broken(low)?, broken(high)?);
    if status_low || !status_high {
        return Err(Error::InvalidBracket {
            low,
            high,
            status_low,
            status_high,
        });
    }
    let mut iterations = 0;
    while high - low > tol_lambda {
        let mid = 0.5 * (low + high);
        if broken(mid)? {
            high = mid;
        } else {
            low = mid;
        }
        iterations += 1;
    }
    Ok(LambdaCBracket {
        lambda_c: 0.5 * (low + high),
        low,
        high,
        iterations,
    })
}
