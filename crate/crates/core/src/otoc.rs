//! Out-of-time-order correlator of momentum, `C(t) = ⟨W†W⟩` with
//! `W = [p(t), p]`.
//!
//! `W|ψ⟩` is assembled from two branches
//!
//! ```text
//! A = p · U_b^t · p · U^t |ψ⟩
//! B = U_b^t · p · U^t · p |ψ⟩
//! ```
//!
//! where `U_b` is the backward propagator. Both branches carry their own
//! log-norm, so `ln C` is formed without ever materializing the huge norms
//! a non-Hermitian kick produces. Once `ln C` leaves the `f64` exponent
//! range the entry is marked non-finite, and every later entry is too.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::params::SystemParams;
use crate::quantum::{Direction, FloquetPropagator, QuantumState};

/// Window used for the growth-rate fit attached to a series.
pub const DEFAULT_GAMMA_WINDOW: RangeInclusive<usize> = 1..=4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum BackwardMode {
    #[default]
    Adjoint,
    Inverse,
}

impl BackwardMode {
    fn direction(self) -> Direction {
        match self {
            Self::Adjoint => Direction::Adjoint,
            Self::Inverse => Direction::Inverse,
        }
    }
}

/// One correlator value. `ln_c` is `−∞` for `C = 0` and `+∞` once the
/// marker has fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OtocEntry {
    pub t: usize,
    pub ln_c: f64,
    pub finite: bool,
}

impl OtocEntry {
    fn overflowed(t: usize) -> Self {
        Self {
            t,
            ln_c: f64::INFINITY,
            finite: false,
        }
    }

    /// `C(t)`, or `+∞` past the marker.
    pub fn value(&self) -> f64 {
        if self.finite {
            self.ln_c.exp()
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtocSeries {
    pub params: SystemParams,
    pub backward_mode: BackwardMode,
    pub entries: Vec<OtocEntry>,
    pub gamma: Option<f64>,
    pub t_star: Option<usize>,
    pub t_ehrenfest: Option<usize>,
}

impl OtocSeries {
    /// Wraps precomputed entries, enforcing the latch and attaching fits.
    pub fn from_entries(
        params: SystemParams,
        backward_mode: BackwardMode,
        mut entries: Vec<OtocEntry>,
    ) -> Self {
        if let Some(first) = entries.iter().position(|e| !e.finite) {
            for e in &mut entries[first..] {
                *e = OtocEntry::overflowed(e.t);
            }
        }
        let mut series = Self {
            params,
            backward_mode,
            entries,
            gamma: None,
            t_star: None,
            t_ehrenfest: None,
        };
        series.gamma = fit_growth_rate(&series, DEFAULT_GAMMA_WINDOW).ok();
        series.t_star = detect_divergence_time(&series);
        series.t_ehrenfest = estimate_ehrenfest_time(&series);
        series
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn evolve_n(
    prop: &FloquetPropagator,
    s: &mut QuantumState,
    t: usize,
    dir: Direction,
) -> Result<()> {
    for _ in 0..t {
        prop.step(s, dir)?;
    }
    Ok(())
}

/// `ln C(t)` for a prepared propagator; `+∞` signals the marker.
pub fn otoc_ln_with(
    prop: &FloquetPropagator,
    t: usize,
    initial: &QuantumState,
    mode: BackwardMode,
) -> Result<f64> {
    if initial.dim() != prop.dim() {
        return Err(Error::invalid(
            "dim",
            format!(
                "state has {} amplitudes, propagator expects {}",
                initial.dim(),
                prop.dim()
            ),
        ));
    }
    if initial.is_null() {
        return Err(Error::invalid("initial", "state is the zero vector"));
    }
    if t == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let back = mode.direction();

    let mut a = initial.clone();
    evolve_n(prop, &mut a, t, Direction::Forward)?;
    prop.apply_momentum(&mut a)?;
    evolve_n(prop, &mut a, t, back)?;
    prop.apply_momentum(&mut a)?;

    let mut b = initial.clone();
    prop.apply_momentum(&mut b)?;
    evolve_n(prop, &mut b, t, Direction::Forward)?;
    prop.apply_momentum(&mut b)?;
    evolve_n(prop, &mut b, t, back)?;

    let (la, lb) = (a.log_norm(), b.log_norm());
    let m = la.max(lb);
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let (wa, wb) = ((la - m).exp(), (lb - m).exp());
    let diff: f64 = a
        .amps()
        .iter()
        .zip(b.amps())
        .map(|(x, y)| (x * wa - y * wb).norm_sqr())
        .sum();
    let ln_c = 2.0 * m + diff.ln() - 2.0 * initial.log_norm();
    if ln_c.is_nan() || ln_c > f64::MAX.ln() {
        Ok(f64::INFINITY)
    } else {
        Ok(ln_c)
    }
}

/// `C(t)` for the given initial state; `+∞` is the non-finite marker.
pub fn otoc_at(
    t: usize,
    params: &SystemParams,
    initial: &QuantumState,
    mode: BackwardMode,
) -> Result<f64> {
    let prop = FloquetPropagator::new(params, initial.dim())?;
    let ln_c = otoc_ln_with(&prop, t, initial, mode)?;
    Ok(if ln_c == f64::INFINITY {
        f64::INFINITY
    } else {
        ln_c.exp()
    })
}

fn entry(
    prop: &FloquetPropagator,
    t: usize,
    initial: &QuantumState,
    mode: BackwardMode,
) -> Result<OtocEntry> {
    let ln_c = otoc_ln_with(prop, t, initial, mode)?;
    Ok(if ln_c == f64::INFINITY {
        OtocEntry::overflowed(t)
    } else {
        OtocEntry {
            t,
            ln_c,
            finite: true,
        }
    })
}

/// `C(t)` for `t = 0..=t_max`.
///
/// Times are evaluated in parallel blocks; evaluation stops after the first
/// block that hits the marker and the remaining entries are filled in as
/// non-finite.
pub fn otoc_series(
    params: &SystemParams,
    t_max: usize,
    initial: &QuantumState,
    mode: BackwardMode,
) -> Result<OtocSeries> {
    if t_max == 0 {
        return Err(Error::invalid("t_max", "must be >= 1"));
    }
    let prop = FloquetPropagator::new(params, initial.dim())?;
    let block = rayon::current_num_threads().max(1);
    let mut entries = Vec::with_capacity(t_max + 1);
    let mut t0 = 0;
    while t0 <= t_max {
        let t1 = (t0 + block).min(t_max + 1);
        let chunk = (t0..t1)
            .into_par_iter()
            .map(|t| entry(&prop, t, initial, mode))
            .collect::<Result<Vec<_>>>()?;
        let hit = chunk.iter().any(|e| !e.finite);
        entries.extend(chunk);
        t0 = t1;
        if hit {
            entries.extend((t0..=t_max).map(OtocEntry::overflowed));
            break;
        }
    }
    Ok(OtocSeries::from_entries(*params, mode, entries))
}

/// First time carrying the non-finite marker.
pub fn detect_divergence_time(series: &OtocSeries) -> Option<usize> {
    series.entries.iter().find(|e| !e.finite).map(|e| e.t)
}

fn window_points(
    series: &OtocSeries,
    window: &RangeInclusive<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = (*window.start(), *window.end());
    let bad = |reason: &str| Error::FitWindow {
        lo,
        hi,
        reason: reason.to_string(),
    };
    if lo >= hi {
        return Err(bad("window needs at least two points"));
    }
    let mut ts = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for t in lo..=hi {
        let e = series
            .entries
            .iter()
            .find(|e| e.t == t)
            .ok_or_else(|| bad("window extends past the series"))?;
        if !e.finite || !e.ln_c.is_finite() {
            return Err(bad("window touches a non-finite or zero entry"));
        }
        ts.push(t as f64);
        ys.push(e.ln_c);
    }
    Ok((ts, ys))
}

/// Least-squares slope of `ln C` against `t` over `window`.
pub fn fit_growth_rate(series: &OtocSeries, window: RangeInclusive<usize>) -> Result<f64> {
    let (ts, ys) = window_points(series, &window)?;
    Ok(fit_line(&ts, &ys, false)?.slope)
}

/// Least-squares fit of `ln C` against `ln t` over `window`; the slope is
/// the power-law exponent.
pub fn fit_power_law(series: &OtocSeries, window: RangeInclusive<usize>) -> Result<LineFit> {
    if *window.start() == 0 {
        return Err(Error::FitWindow {
            lo: 0,
            hi: *window.end(),
            reason: "ln t is undefined at t = 0".into(),
        });
    }
    let (ts, ys) = window_points(series, &window)?;
    let lts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    fit_line(&lts, &ys, false)
}

fn sse(fit: &LineFit, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y - fit.eval(*x)).powi(2))
        .sum()
}

/// Breakpoint `b` of the best two-segment model: `ln C` linear in `t` on
/// `[1, b]` and linear in `ln t` on `[b, end]`, over the finite entries.
///
/// Returns `None` when the two-segment model does not halve the squared
/// error of a single exponential, or when there are fewer than six finite
/// points.
pub fn estimate_ehrenfest_time(series: &OtocSeries) -> Option<usize> {
    let pts: Vec<(f64, f64)> = series
        .entries
        .iter()
        .take_while(|e| e.finite)
        .filter(|e| e.t >= 1 && e.ln_c.is_finite())
        .map(|e| (e.t as f64, e.ln_c))
        .collect();
    if pts.len() < 6 {
        return None;
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let single = fit_line(&ts, &ys, false).ok()?;
    let sse_single = sse(&single, &ts, &ys);
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(1.0);
    if sse_single <= 1e-20 * scale {
        return None;
    }

    let mut best: Option<(f64, usize)> = None;
    for b in 2..ts.len() - 2 {
        let (t1, y1) = (&ts[..=b], &ys[..=b]);
        let (t2, y2) = (&ts[b..], &ys[b..]);
        let l2: Vec<f64> = t2.iter().map(|t| t.ln()).collect();
        let (Ok(f1), Ok(f2)) = (fit_line(t1, y1, false), fit_line(&l2, y2, false)) else {
            continue;
        };
        let total = sse(&f1, t1, y1) + sse(&f2, &l2, y2);
        if best.is_none_or(|(s, _)| total < s) {
            best = Some((total, b));
        }
    }
    let (sse_two, b) = best?;
    (sse_two < 0.5 * sse_single).then(|| ts[b] as usize)
}
