//! Parameter and record types shared by every simulation module.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the magnitude of classical momentum components.
///
/// `1e152² = 1e304`, so a fully diverged ensemble saturates the second
/// moments at about `1e304` while staying finite.
pub const DEFAULT_P_CLAMP: f64 = 1.0e152;

/// Default bound on `|θ_i|`. `cosh`/`sinh` overflow doubles near 709.78.
pub const DEFAULT_THETA_I_GUARD: f64 = 700.0;

/// Kick strengths of `V(θ) = K [cos θ + iλ sin θ]`, the effective Planck
/// constant, and the numerical guards of the classical map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    k: f64,
    lambda: f64,
    hbar: f64,
    p_clamp: f64,
    theta_i_guard: f64,
}

/// Validates `(K, λ, ħ)` and attaches the default guards.
pub fn make_params(k: f64, lambda: f64, hbar: f64) -> Result<SystemParams> {
    SystemParams::new(k, lambda, hbar)
}

impl SystemParams {
    pub fn new(k: f64, lambda: f64, hbar: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(
                "K",
                format!("must be finite and > 0, got {k}"),
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and >= 0, got {lambda}"),
            ));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::invalid(
                "hbar",
                format!("must be finite and > 0, got {hbar}"),
            ));
        }
        Ok(Self {
            k,
            lambda,
            hbar,
            p_clamp: DEFAULT_P_CLAMP,
            theta_i_guard: DEFAULT_THETA_I_GUARD,
        })
    }

    /// The unkicked rotor (`K = λ = 0`). Only meaningful for the quantum
    /// modules, where it yields the bare kinetic propagator.
    pub fn free_rotor(hbar: f64) -> Result<Self> {
        let mut p = Self::new(1.0, 0.0, hbar)?;
        p.k = 0.0;
        Ok(p)
    }

    /// Replaces the classical guards.
    pub fn with_guards(mut self, p_clamp: f64, theta_i_guard: f64) -> Result<Self> {
        if !(p_clamp.is_finite() && p_clamp > 0.0) || !(p_clamp * p_clamp).is_finite() {
            return Err(Error::invalid(
                "p_clamp",
                format!("must be positive with a finite square, got {p_clamp}"),
            ));
        }
        if !(theta_i_guard.is_finite() && theta_i_guard > 0.0) {
            return Err(Error::invalid(
                "theta_i_guard",
                format!("must be finite and > 0, got {theta_i_guard}"),
            ));
        }
        self.p_clamp = p_clamp;
        self.theta_i_guard = theta_i_guard;
        Ok(self)
    }

    /// Same guards and `ħ`, different `λ`.
    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and >= 0, got {lambda}"),
            ));
        }
        Ok(Self { lambda, ..self })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn p_clamp(&self) -> f64 {
        self.p_clamp
    }

    pub fn theta_i_guard(&self) -> f64 {
        self.theta_i_guard
    }
}

/// One complex classical trajectory state `(θ_r + iθ_i, p_r + ip_i)`.
///
/// A non-diverged point has four finite components. Once `diverged` is set
/// the point is no longer advanced and its momenta stay at the clamp.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ComplexPhasePoint {
    pub theta_r: f64,
    pub theta_i: f64,
    pub p_r: f64,
    pub p_i: f64,
    pub diverged: bool,
}

impl ComplexPhasePoint {
    pub fn new(theta_r: f64, theta_i: f64, p_r: f64, p_i: f64) -> Self {
        Self {
            theta_r,
            theta_i,
            p_r,
            p_i,
            diverged: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_r.is_finite()
            && self.theta_i.is_finite()
            && self.p_r.is_finite()
            && self.p_i.is_finite()
    }
}

/// Size, seed and length of a classical ensemble run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct EnsembleConfig {
    n_traj: usize,
    seed: u64,
    t_max: usize,
}

impl EnsembleConfig {
    pub const DEFAULT_N_TRAJ: usize = 100_000;

    pub fn new(n_traj: usize, seed: u64, t_max: usize) -> Result<Self> {
        if n_traj == 0 {
            return Err(Error::invalid("n_traj", "must be at least 1"));
        }
        if t_max == 0 {
            return Err(Error::invalid("t_max", "must be at least 1"));
        }
        Ok(Self {
            n_traj,
            seed,
            t_max,
        })
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }
}
