//! Split-step Floquet propagation in a truncated angular-momentum basis.
//!
//! A state holds amplitudes `ψ_n` for `n ∈ [−dim/2, dim/2)`, stored at index
//! `n + dim/2`. The angle representation lives on the uniform grid
//! `θ_k = −π + 2πk/dim`. One period applies, right to left,
//!
//! ```text
//! U = exp(−iħn²/2) · exp(−iK cos θ/ħ + Kλ sin θ/ħ)
//! ```
//!
//! i.e. the kick in the angle representation, then the kinetic phase in the
//! momentum representation. The non-Hermitian kick changes the norm, so
//! stored amplitudes are kept at unit norm and `ln ‖ψ‖` is accumulated in
//! [`QuantumState::log_norm`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Default bound on the probability in the outer 1% of the basis.
pub const DEFAULT_TAIL_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    /// `U`
    Forward,
    /// `U†`: conjugate factors in reverse order.
    Adjoint,
    /// `U⁻¹`: inverse factors in reverse order.
    Inverse,
}

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min || !dim.is_power_of_two() {
        return Err(Error::invalid(
            "dim",
            format!("must be a power of two >= {min}, got {dim}"),
        ));
    }
    Ok(())
}

/// Momentum quantum number stored at `index`.
pub fn momentum_number(dim: usize, index: usize) -> i64 {
    index as i64 - (dim / 2) as i64
}

/// Angle of grid point `k`.
pub fn angle_of(dim: usize, k: usize) -> f64 {
    -PI + 2.0 * PI * k as f64 / dim as f64
}

fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: Vec<Complex64>,
    log_norm: f64,
}

impl QuantumState {
    /// Normalizes `amps` and records `ln ‖amps‖` as the log-norm.
    pub fn from_amplitudes(mut amps: Vec<Complex64>) -> Result<Self> {
        check_dim(amps.len(), 2)?;
        let n2 = norm_sqr(&amps);
        if !n2.is_finite() || n2 == 0.0 {
            return Err(Error::invalid(
                "amps",
                format!("norm² must be finite and non-zero, got {n2}"),
            ));
        }
        let norm = n2.sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self {
            amps,
            log_norm: norm.ln(),
        })
    }

    /// Unit-norm momentum eigenstate `|n⟩`.
    pub fn momentum_eigenstate(dim: usize, n: i64) -> Result<Self> {
        check_dim(dim, 2)?;
        let idx = n + (dim / 2) as i64;
        if idx < 0 || idx >= dim as i64 {
            return Err(Error::invalid(
                "n",
                format!("{n} is outside the basis of size {dim}"),
            ));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[idx as usize] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amps,
            log_norm: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// Unit-norm amplitudes (all zero for a null state).
    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// `𝒩 = Σ|ψ_n|²` of the unnormalized state.
    pub fn norm_sqr(&self) -> f64 {
        (2.0 * self.log_norm).exp()
    }

    /// True for the zero vector (log-norm `−∞`).
    pub fn is_null(&self) -> bool {
        self.log_norm == f64::NEG_INFINITY
    }

    /// The state multiplied by a constant `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let phase = c / c.norm();
        if c.norm() == 0.0 {
            return Self {
                amps: vec![Complex64::new(0.0, 0.0); self.dim()],
                log_norm: f64::NEG_INFINITY,
            };
        }
        Self {
            amps: self.amps.iter().map(|a| a * phase).collect(),
            log_norm: self.log_norm + c.norm().ln(),
        }
    }

    /// Probability in the outermost `⌈dim/100⌉` indices at each end.
    pub fn tail_mass(&self) -> f64 {
        let w = self.dim().div_ceil(100);
        let total = norm_sqr(&self.amps);
        if total == 0.0 {
            return 0.0;
        }
        let edge: f64 = self.amps[..w]
            .iter()
            .chain(&self.amps[self.dim() - w..])
            .map(|a| a.norm_sqr())
            .sum();
        edge / total
    }

    /// Rescales the stored amplitudes to unit norm, folding the factor into
    /// the log-norm.
    fn renormalize(&mut self, growth: f64) -> Result<()> {
        let mut n2 = norm_sqr(&self.amps);
        if n2.is_infinite() {
            let peak = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
            if peak.is_finite() {
                self.amps.iter_mut().for_each(|a| *a /= peak);
                self.log_norm += peak.ln();
                n2 = norm_sqr(&self.amps);
            }
        }
        if !n2.is_finite() {
            return Err(Error::Overflow { growth });
        }
        if n2 == 0.0 {
            self.log_norm = f64::NEG_INFINITY;
            return Ok(());
        }
        let norm = n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a /= norm);
        self.log_norm += norm.ln();
        Ok(())
    }
}

/// Unitary change of basis between momentum amplitudes and angle-grid
/// values `φ_k = dim^{-1/2} Σ_n ψ_n e^{inθ_k}`.
#[derive(Clone)]
pub struct BasisTransform {
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // (−1)^n per stored index and (−1)^k per grid point.
    n_sign: Vec<f64>,
    k_sign: Vec<f64>,
    scale: f64,
}

impl std::fmt::Debug for BasisTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BasisTransform")
            .field("dim", &self.dim)
            .finish()
    }
}

impl BasisTransform {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        let mut planner = FftPlanner::new();
        let sign = |i: i64| if i.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Ok(Self {
            dim,
            forward: planner.plan_fft_forward(dim),
            inverse: planner.plan_fft_inverse(dim),
            n_sign: (0..dim).map(|j| sign(momentum_number(dim, j))).collect(),
            k_sign: (0..dim as i64).map(sign).collect(),
            scale: 1.0 / (dim as f64).sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Momentum amplitudes → angle-grid values, in place.
    pub fn to_angle(&self, buf: &mut [Complex64]) {
        for (a, s) in buf.iter_mut().zip(&self.n_sign) {
            *a *= *s;
        }
        self.inverse.process(buf);
        for (a, s) in buf.iter_mut().zip(&self.k_sign) {
            *a *= *s * self.scale;
        }
    }

    /// Angle-grid values → momentum amplitudes, in place.
    pub fn to_momentum(&self, buf: &mut [Complex64]) {
        for (a, s) in buf.iter_mut().zip(&self.k_sign) {
            *a *= *s;
        }
        self.forward.process(buf);
        for (a, s) in buf.iter_mut().zip(&self.n_sign) {
            *a *= *s * self.scale;
        }
    }
}

/// `|0⟩`, the ground state `ψ(θ) = 1/√(2π)` of the free rotor.
pub fn init_uniform_state(dim: usize) -> Result<QuantumState> {
    QuantumState::momentum_eigenstate(dim, 0)
}

/// Momentum coefficients of `(σ/π)^{1/4} exp(−σθ²/2)` sampled on the angle
/// grid, normalized.
pub fn init_gaussian_state(dim: usize, sigma: f64) -> Result<QuantumState> {
    check_dim(dim, 2)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(
            "sigma",
            format!("must be finite and > 0, got {sigma}"),
        ));
    }
    let tr = BasisTransform::new(dim)?;
    let pref = (sigma / PI).powf(0.25);
    let mut buf: Vec<Complex64> = (0..dim)
        .map(|k| {
            let th = angle_of(dim, k);
            Complex64::new(pref * (-0.5 * sigma * th * th).exp(), 0.0)
        })
        .collect();
    tr.to_momentum(&mut buf);
    let mut state = QuantumState::from_amplitudes(buf)?;
    state.log_norm = 0.0;
    Ok(state)
}

/// Precomputed factors of the Floquet operator for one parameter set and
/// basis size. Shareable across threads.
#[derive(Debug, Clone)]
pub struct FloquetPropagator {
    params: SystemParams,
    transform: BasisTransform,
    kick: Vec<Complex64>,
    kick_inverse: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    tail_guard: f64,
}

impl FloquetPropagator {
    pub fn new(params: &SystemParams, dim: usize) -> Result<Self> {
        let transform = BasisTransform::new(dim)?;
        let (k, lambda, hbar) = (params.k(), params.lambda(), params.hbar());
        let growth = k * lambda / hbar;
        let mut kick = Vec::with_capacity(dim);
        let mut kick_inverse = Vec::with_capacity(dim);
        for j in 0..dim {
            let th = angle_of(dim, j);
            let phase = -k * th.cos() / hbar;
            let gain = growth * th.sin();
            kick.push(Complex64::from_polar(gain.exp(), phase));
            kick_inverse.push(Complex64::from_polar((-gain).exp(), -phase));
        }
        if kick
            .iter()
            .chain(&kick_inverse)
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::Overflow { growth });
        }
        let kinetic = (0..dim)
            .map(|j| {
                let n = momentum_number(dim, j) as f64;
                Complex64::from_polar(1.0, -0.5 * hbar * n * n)
            })
            .collect();
        Ok(Self {
            params: *params,
            transform,
            kick,
            kick_inverse,
            kinetic,
            tail_guard: DEFAULT_TAIL_GUARD,
        })
    }

    pub fn with_tail_guard(mut self, guard: f64) -> Self {
        self.tail_guard = guard;
        self
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.transform.dim()
    }

    pub fn transform(&self) -> &BasisTransform {
        &self.transform
    }

    pub fn tail_guard(&self) -> f64 {
        self.tail_guard
    }

    /// One period applied to raw amplitudes, without renormalization.
    pub fn apply_raw(&self, amps: &mut [Complex64], direction: Direction) {
        assert_eq!(amps.len(), self.dim(), "basis size mismatch");
        match direction {
            Direction::Forward => {
                self.transform.to_angle(amps);
                amps.iter_mut().zip(&self.kick).for_each(|(a, f)| *a *= f);
                self.transform.to_momentum(amps);
                amps.iter_mut()
                    .zip(&self.kinetic)
                    .for_each(|(a, f)| *a *= f);
            }
            Direction::Adjoint => {
                amps.iter_mut()
                    .zip(&self.kinetic)
                    .for_each(|(a, f)| *a *= f.conj());
                self.transform.to_angle(amps);
                amps.iter_mut()
                    .zip(&self.kick)
                    .for_each(|(a, f)| *a *= f.conj());
                self.transform.to_momentum(amps);
            }
            Direction::Inverse => {
                amps.iter_mut()
                    .zip(&self.kinetic)
                    .for_each(|(a, f)| *a *= f.conj());
                self.transform.to_angle(amps);
                amps.iter_mut()
                    .zip(&self.kick_inverse)
                    .for_each(|(a, f)| *a *= f);
                self.transform.to_momentum(amps);
            }
        }
    }

    /// One period with renormalization; `ln` of the norm change is added to
    /// the state's log-norm. Null states are left untouched.
    pub fn step(&self, state: &mut QuantumState, direction: Direction) -> Result<()> {
        if state.is_null() {
            return Ok(());
        }
        self.apply_raw(&mut state.amps, direction);
        state.renormalize(self.params.k() * self.params.lambda() / self.params.hbar())
    }

    /// Applies the momentum operator `p|ψ⟩ = Σ nħ ψ_n |n⟩`.
    pub fn apply_momentum(&self, state: &mut QuantumState) -> Result<()> {
        if state.is_null() {
            return Ok(());
        }
        let hbar = self.params.hbar();
        let dim = self.dim();
        for (j, a) in state.amps.iter_mut().enumerate() {
            *a *= momentum_number(dim, j) as f64 * hbar;
        }
        state.renormalize(0.0)
    }
}

/// One Floquet period of `state` under `params`.
pub fn floquet_step(
    state: &QuantumState,
    params: &SystemParams,
    direction: Direction,
) -> Result<QuantumState> {
    let prop = FloquetPropagator::new(params, state.dim())?;
    let mut next = state.clone();
    prop.step(&mut next, direction)?;
    Ok(next)
}

/// Momentum moments of a state, normalized by `𝒩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub mean_p: f64,
    pub mean_p2: f64,
    /// `⟨p²⟩ − ⟨p⟩²`
    pub m2: f64,
    pub log_norm: f64,
}

pub fn observables(state: &QuantumState, hbar: f64) -> Observables {
    let dim = state.dim();
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (j, a) in state.amps.iter().enumerate() {
        let prob = a.norm_sqr();
        let p = momentum_number(dim, j) as f64 * hbar;
        w += prob;
        s1 += prob * p;
        s2 += prob * p * p;
    }
    if w == 0.0 {
        return Observables {
            mean_p: 0.0,
            mean_p2: 0.0,
            m2: 0.0,
            log_norm: state.log_norm,
        };
    }
    let mean_p = s1 / w;
    let mean_p2 = s2 / w;
    Observables {
        mean_p,
        mean_p2,
        m2: mean_p2 - mean_p * mean_p,
        log_norm: state.log_norm,
    }
}

/// `(n, |ψ_n|²/𝒩)` for every basis index.
pub fn momentum_distribution(state: &QuantumState) -> Vec<(i64, f64)> {
    let total = norm_sqr(&state.amps);
    let dim = state.dim();
    state
        .amps
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let prob = if total > 0.0 {
                a.norm_sqr() / total
            } else {
                0.0
            };
            (momentum_number(dim, j), prob)
        })
        .collect()
}

/// `(θ_k, |ψ(θ_k)|²)` with the density normalized so that its Riemann sum
/// over the grid is one.
pub fn angular_distribution(state: &QuantumState) -> Result<Vec<(f64, f64)>> {
    let dim = state.dim();
    let tr = BasisTransform::new(dim)?;
    let mut buf = state.amps.clone();
    tr.to_angle(&mut buf);
    let total = norm_sqr(&buf);
    let dtheta = 2.0 * PI / dim as f64;
    Ok(buf
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let density = if total > 0.0 {
                v.norm_sqr() / (total * dtheta)
            } else {
                0.0
            };
            (angle_of(dim, k), density)
        })
        .collect())
}

/// Kicks at which the outer-basis probability exceeded the guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationWarning {
    pub first_kick: usize,
    pub kicks_over_guard: usize,
    pub max_tail_mass: f64,
    pub guard: f64,
}

/// Observables at `t = 0..=kicks`, plus a truncation warning if the tail
/// guard was exceeded at any kick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionSeries {
    pub direction: Direction,
    pub observables: Vec<Observables>,
    pub truncation: Option<TruncationWarning>,
}

/// Evolves `state` in place for `kicks` periods.
pub fn evolve(
    state: &mut QuantumState,
    prop: &FloquetPropagator,
    kicks: usize,
    direction: Direction,
) -> Result<EvolutionSeries> {
    evolve_inspect(state, prop, kicks, direction, |_, _| {})
}

/// As [`evolve`], calling `inspect(t, state)` after every kick.
pub fn evolve_inspect<F>(
    state: &mut QuantumState,
    prop: &FloquetPropagator,
    kicks: usize,
    direction: Direction,
    mut inspect: F,
) -> Result<EvolutionSeries>
where
    F: FnMut(usize, &QuantumState),
{
    if kicks == 0 {
        return Err(Error::invalid("t", "need at least one kick"));
    }
    if state.dim() != prop.dim() {
        return Err(Error::invalid(
            "dim",
            format!(
                "state has {} amplitudes, propagator expects {}",
                state.dim(),
                prop.dim()
            ),
        ));
    }
    let hbar = prop.params().hbar();
    let mut out = Vec::with_capacity(kicks + 1);
    out.push(observables(state, hbar));
    let mut truncation: Option<TruncationWarning> = None;
    for t in 1..=kicks {
        prop.step(state, direction)?;
        out.push(observables(state, hbar));
        let tail = state.tail_mass();
        if tail > prop.tail_guard() {
            let w = truncation.get_or_insert(TruncationWarning {
                first_kick: t,
                kicks_over_guard: 0,
                max_tail_mass: 0.0,
                guard: prop.tail_guard(),
            });
            w.kicks_over_guard += 1;
            w.max_tail_mass = w.max_tail_mass.max(tail);
        }
        inspect(t, state);
    }
    Ok(EvolutionSeries {
        direction,
        observables: out,
        truncation,
    })
}
