//! Complex classical trajectories of the PT-symmetric kicked rotor.
//!
//! With `θ = θ_r + iθ_i` and `p = p_r + ip_i`, one kick of
//! `p' = p + K[sin θ − iλ cos θ]`, `θ' = θ + p'` splits into
//!
//! ```text
//! p_r' = p_r + K sin θ_r [cosh θ_i − λ sinh θ_i]
//! p_i' = p_i + K cos θ_r [sinh θ_i − λ cosh θ_i]
//! θ_r' = θ_r + p_r'
//! θ_i' = θ_i + p_i'
//! ```
//!
//! [`map_step`] evaluates the expanded real form; [`map_step_complex_oracle`]
//! evaluates the complex form directly and serves as its cross-check.
//!
//! Trajectories whose imaginary angle leaves `±theta_i_guard`, or whose
//! momenta become non-finite or exceed `p_clamp`, are latched as diverged.
//! Their momenta are pinned to `±p_clamp` and stay in the ensemble moments,
//! which is what produces the `~1e304` plateau of `M₂` after the threshold.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::sample_initial_ensemble;
use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::params::{ComplexPhasePoint, EnsembleConfig, SystemParams};
use crate::sum::pairwise_sum;

/// Default validity limit for `K^(n-1)·λ` in the special-trajectory formula.
pub const SPECIAL_TRAJECTORY_LIMIT: f64 = 0.01;

/// `(cosh x − λ sinh x, sinh x − λ cosh x)`.
///
/// For `|x| ≥ 1` the exponential form `((1∓λ)eˣ ± (1±λ)e⁻ˣ)/2` is used,
/// which keeps the `λ → 1` difference exact at large `|x|`. Below that the
/// library `sinh`/`cosh` are more accurate for the tiny `θ_i` of the early
/// exponential regime.
fn hyperbolic_factors(x: f64, lambda: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        let (sh, ch) = (x.sinh(), x.cosh());
        (ch - lambda * sh, sh - lambda * ch)
    } else {
        let up = (1.0 - lambda) * x.exp();
        let down = (1.0 + lambda) * (-x).exp();
        (0.5 * (up + down), 0.5 * (up - down))
    }
}

fn saturate(v: f64, clamp: f64) -> f64 {
    if v.is_nan() {
        clamp
    } else {
        clamp.copysign(v)
    }
}

/// Applies the guards to a freshly computed state.
fn finish(
    from: &ComplexPhasePoint,
    p_r: f64,
    p_i: f64,
    theta_r: f64,
    theta_i: f64,
    params: &SystemParams,
) -> ComplexPhasePoint {
    let clamp = params.p_clamp();
    let ok = p_r.is_finite()
        && p_i.is_finite()
        && theta_r.is_finite()
        && theta_i.is_finite()
        && p_r.abs() <= clamp
        && p_i.abs() <= clamp
        && theta_i.abs() <= params.theta_i_guard();
    if ok {
        ComplexPhasePoint::new(theta_r, theta_i, p_r, p_i)
    } else {
        ComplexPhasePoint {
            theta_r: from.theta_r,
            theta_i: from.theta_i,
            p_r: saturate(p_r, clamp),
            p_i: saturate(p_i, clamp),
            diverged: true,
        }
    }
}

/// One kick of the complex map in expanded real form.
pub fn map_step(s: &ComplexPhasePoint, params: &SystemParams) -> Result<ComplexPhasePoint> {
    if s.diverged {
        return Err(Error::AlreadyDiverged);
    }
    let k = params.k();
    let (c, sh) = hyperbolic_factors(s.theta_i, params.lambda());
    let (sin_r, cos_r) = s.theta_r.sin_cos();
    let p_r = s.p_r + k * sin_r * c;
    let p_i = s.p_i + k * cos_r * sh;
    Ok(finish(
        s,
        p_r,
        p_i,
        s.theta_r + p_r,
        s.theta_i + p_i,
        params,
    ))
}

/// One kick evaluated with complex arithmetic, `p' = p + K[sin θ − iλ cos θ]`.
pub fn map_step_complex_oracle(
    s: &ComplexPhasePoint,
    params: &SystemParams,
) -> Result<ComplexPhasePoint> {
    if s.diverged {
        return Err(Error::AlreadyDiverged);
    }
    if !s.is_finite() {
        return Err(Error::Domain("oracle requires a finite state".into()));
    }
    let theta = Complex64::new(s.theta_r, s.theta_i);
    let p = Complex64::new(s.p_r, s.p_i);
    let i_lambda = Complex64::new(0.0, params.lambda());
    let p_next = p + params.k() * (theta.sin() - i_lambda * theta.cos());
    let theta_next = theta + p_next;
    Ok(finish(
        s,
        p_next.re,
        p_next.im,
        theta_next.re,
        theta_next.im,
        params,
    ))
}

fn advance(point: &mut ComplexPhasePoint, params: &SystemParams) {
    if !point.diverged {
        // map_step only fails on diverged input, excluded above.
        *point = map_step(point, params).expect("non-diverged point");
    }
}

/// Ensemble means and variances of the momentum components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean_pr: f64,
    pub mean_pi: f64,
    pub m2_r: f64,
    pub m2_i: f64,
}

/// Two-pass means and variances, `M₂ = ⟨p²⟩ − ⟨p⟩²`.
///
/// Squared deviations are divided by the ensemble size before summation so
/// that a fully clamped ensemble (`p² ≈ 1e304`) still sums to a finite value.
pub fn second_moments(snapshot: &[ComplexPhasePoint]) -> Result<Moments> {
    if snapshot.is_empty() {
        return Err(Error::EmptySnapshot);
    }
    let n = snapshot.len();
    let inv = 1.0 / n as f64;
    let mean_pr = pairwise_sum(n, &|i| snapshot[i].p_r) * inv;
    let mean_pi = pairwise_sum(n, &|i| snapshot[i].p_i) * inv;
    let m2_r = pairwise_sum(n, &|i| (snapshot[i].p_r - mean_pr).powi(2) * inv);
    let m2_i = pairwise_sum(n, &|i| (snapshot[i].p_i - mean_pi).powi(2) * inv);
    Ok(Moments {
        mean_pr,
        mean_pi,
        m2_r,
        m2_i,
    })
}

pub fn count_diverged(snapshot: &[ComplexPhasePoint]) -> usize {
    snapshot.par_iter().filter(|p| p.diverged).count()
}

/// Ensemble statistics after `t` kicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub t: usize,
    pub mean_pr: f64,
    pub mean_pi: f64,
    pub m2_r: f64,
    pub m2_i: f64,
    pub n_diverged: usize,
}

/// Per-kick ensemble record for `t = 0..=t_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSeries {
    pub params: SystemParams,
    pub config: EnsembleConfig,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, t: usize) -> Option<&EnsembleRow> {
        self.rows.get(t)
    }
}

fn snapshot_row(t: usize, points: &[ComplexPhasePoint]) -> EnsembleRow {
    let m = second_moments(points).expect("ensemble is non-empty");
    EnsembleRow {
        t,
        mean_pr: m.mean_pr,
        mean_pi: m.mean_pi,
        m2_r: m.m2_r,
        m2_i: m.m2_i,
        n_diverged: count_diverged(points),
    }
}

/// Iterates the map over the given points for `t_max` kicks, in place,
/// returning one row per kick including `t = 0`.
pub fn evolve_points(
    points: &mut [ComplexPhasePoint],
    params: &SystemParams,
    t_max: usize,
) -> Result<Vec<EnsembleRow>> {
    if points.is_empty() {
        return Err(Error::EmptySnapshot);
    }
    let mut rows = Vec::with_capacity(t_max + 1);
    rows.push(snapshot_row(0, points));
    for t in 1..=t_max {
        points.par_iter_mut().for_each(|p| advance(p, params));
        rows.push(snapshot_row(t, points));
    }
    Ok(rows)
}

/// Samples the initial ensemble of `cfg` and evolves it for `cfg.t_max()`
/// kicks. Output is bit-identical for any thread count.
pub fn evolve_ensemble(cfg: &EnsembleConfig, params: &SystemParams) -> EnsembleSeries {
    let mut points = sample_initial_ensemble(cfg);
    let rows = evolve_points(&mut points, params, cfg.t_max()).expect("n_traj >= 1");
    EnsembleSeries {
        params: *params,
        config: *cfg,
        rows,
    }
}

/// Analytic state of the all-zero trajectory after `n` kicks,
/// `θ_i = p_i ≈ −Kⁿλ`, valid while `K^(n−1)·λ ≤ limit`.
pub fn special_trajectory_prediction_with_limit(
    n: u32,
    params: &SystemParams,
    limit: f64,
) -> Result<ComplexPhasePoint> {
    if n == 0 {
        return Err(Error::Domain("prediction is defined for n >= 1".into()));
    }
    let k = params.k();
    let lambda = params.lambda();
    let validity = k.powi(n as i32 - 1) * lambda;
    if validity > limit {
        return Err(Error::OutOfRegime {
            n,
            value: validity,
            limit,
        });
    }
    let v = -k.powi(n as i32) * lambda;
    Ok(ComplexPhasePoint::new(0.0, v, 0.0, v))
}

pub fn special_trajectory_prediction(n: u32, params: &SystemParams) -> Result<ComplexPhasePoint> {
    special_trajectory_prediction_with_limit(n, params, SPECIAL_TRAJECTORY_LIMIT)
}

/// Rough threshold time `t_c = −ln λ / ln K`.
pub fn threshold_time_tc(params: &SystemParams) -> Result<f64> {
    let (k, lambda) = (params.k(), params.lambda());
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "t_c needs 0 < λ < 1, got λ = {lambda}"
        )));
    }
    if k <= 1.0 {
        return Err(Error::Domain(format!("t_c needs K > 1, got K = {k}")));
    }
    Ok(-lambda.ln() / k.ln())
}

/// First kick at which any trajectory has diverged; `None` when no
/// trajectory ever diverges within the series.
pub fn detect_threshold_time(series: &EnsembleSeries) -> Result<Option<usize>> {
    if series.rows.len() < 4 {
        return Err(Error::SeriesTooShort {
            needed: 4,
            got: series.rows.len(),
        });
    }
    Ok(series.rows.iter().find(|r| r.n_diverged > 0).map(|r| r.t))
}

/// Fitted diffusion laws of one ensemble run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionFit {
    /// Slope of `M₂ʳ = D t`.
    pub d: f64,
    /// `ln M₂ⁱ = α t + β`.
    pub alpha: f64,
    pub beta: f64,
    pub tau: Option<usize>,
    pub window_r: (usize, usize),
    pub window_i: (usize, usize),
}

/// `[2, ⌊0.8 t_c⌋]`, inside the exponential regime.
pub fn default_fit_window(params: &SystemParams) -> Result<RangeInclusive<usize>> {
    let tc = threshold_time_tc(params)?;
    let hi = (0.8 * tc).floor() as usize;
    if hi < 3 {
        return Err(Error::FitWindow {
            lo: 2,
            hi,
            reason: format!("t_c = {tc:.3} leaves fewer than two points"),
        });
    }
    Ok(2..=hi)
}

fn check_window(
    w: &RangeInclusive<usize>,
    tau: Option<usize>,
    len: usize,
) -> Result<(usize, usize)> {
    let (lo, hi) = (*w.start(), *w.end());
    let err = |reason: String| Error::FitWindow { lo, hi, reason };
    if lo < 1 || hi <= lo {
        return Err(err("need 1 <= lo < hi".into()));
    }
    if hi >= len {
        return Err(err(format!("series ends at t = {}", len - 1)));
    }
    if let Some(tau) = tau {
        if hi >= tau {
            return Err(err(format!("window reaches the threshold τ = {tau}")));
        }
    }
    Ok((lo, hi))
}

/// `D` from a through-origin fit of `M₂ʳ` over `window_r`; `(α, β)` from a
/// straight-line fit of `ln M₂ⁱ` over `window_i`. Both windows must end
/// before the detected threshold `τ`.
pub fn fit_diffusion(
    series: &EnsembleSeries,
    window_r: RangeInclusive<usize>,
    window_i: RangeInclusive<usize>,
) -> Result<DiffusionFit> {
    let tau = detect_threshold_time(series)?;
    let (rlo, rhi) = check_window(&window_r, tau, series.rows.len())?;
    let (ilo, ihi) = check_window(&window_i, tau, series.rows.len())?;

    let ts: Vec<f64> = (rlo..=rhi).map(|t| t as f64).collect();
    let m2r: Vec<f64> = (rlo..=rhi).map(|t| series.rows[t].m2_r).collect();
    let d = fit_line(&ts, &m2r, true)?.slope;

    let ts: Vec<f64> = (ilo..=ihi).map(|t| t as f64).collect();
    let mut log_m2i = Vec::with_capacity(ts.len());
    for t in ilo..=ihi {
        let v = series.rows[t].m2_i;
        if v.is_nan() || v <= 0.0 {
            return Err(Error::FitWindow {
                lo: ilo,
                hi: ihi,
                reason: format!("M₂ⁱ({t}) = {v} has no logarithm"),
            });
        }
        log_m2i.push(v.ln());
    }
    let line = fit_line(&ts, &log_m2i, false)?;

    Ok(DiffusionFit {
        d,
        alpha: line.slope,
        beta: line.intercept,
        tau,
        window_r: (rlo, rhi),
        window_i: (ilo, ihi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(k: f64, lambda: f64) -> SystemParams {
        make_params(k, lambda, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn first_kick_of_the_zero_trajectory() {
        let p = params(5.0, 1e-10);
        let s = map_step(&ComplexPhasePoint::default(), &p).unwrap();
        assert_eq!(s.theta_r, 0.0);
        assert_eq!(s.p_r, 0.0);
        assert!(close(s.p_i, -5e-10, 1e-15));
        assert!(close(s.theta_i, -5e-10, 1e-15));
        assert!(!s.diverged);

        let o = map_step_complex_oracle(&ComplexPhasePoint::default(), &p).unwrap();
        assert!(close(o.p_i, s.p_i, 1e-15));
        assert!(close(o.theta_i, s.theta_i, 1e-15));
    }

    #[test]
    fn hermitian_limit_is_the_standard_map() {
        let p = params(5.0, 0.0);
        let s = map_step(&ComplexPhasePoint::new(FRAC_PI_2, 0.0, 0.0, 0.0), &p).unwrap();
        assert_eq!(s.p_r, 5.0);
        assert_eq!(s.theta_r, FRAC_PI_2 + 5.0);
        assert_eq!((s.theta_i, s.p_i), (0.0, 0.0));

        let o =
            map_step_complex_oracle(&ComplexPhasePoint::new(FRAC_PI_2, 0.0, 0.0, 0.0), &p).unwrap();
        assert_eq!(o.theta_i, 0.0);
        assert_eq!(o.p_i, 0.0);
    }

    #[test]
    fn second_kick_matches_the_unapproximated_expression() {
        // p₂ⁱ = −Kλ + K[sinh(−Kλ) − λ cosh(−Kλ)], before dropping the
        // O(Kλ) terms; linearized this is −(2K + K²)λ.
        let (k, lambda) = (5.0f64, 1e-10f64);
        let p = params(k, lambda);
        let s1 = map_step(&ComplexPhasePoint::default(), &p).unwrap();
        let s2 = map_step(&s1, &p).unwrap();
        let exact = -k * lambda + k * ((-k * lambda).sinh() - lambda * (-k * lambda).cosh());
        assert!(close(s2.p_i, exact, 1e-12), "{} vs {}", s2.p_i, exact);
        assert!(close(s2.p_i, -(2.0 * k + k * k) * lambda, 1e-6));
        assert_eq!(s2.p_r, 0.0);
    }

    #[test]
    fn diverged_input_is_a_contract_violation() {
        let p = params(5.0, 0.1);
        let s = ComplexPhasePoint {
            diverged: true,
            ..Default::default()
        };
        assert_eq!(map_step(&s, &p), Err(Error::AlreadyDiverged));
        assert_eq!(map_step_complex_oracle(&s, &p), Err(Error::AlreadyDiverged));
    }

    #[test]
    fn guard_crossing_latches_and_clamps() {
        let p = params(5.0, 0.1);
        let s = ComplexPhasePoint::new(0.3, 650.0, 1.0, 10.0);
        let next = map_step(&s, &p).unwrap();
        assert!(next.diverged);
        assert_eq!((next.theta_r, next.theta_i), (0.3, 650.0));
        assert_eq!(next.p_r.abs(), p.p_clamp());
        assert_eq!(next.p_i.abs(), p.p_clamp());
        // sin(0.3) > 0, cos(0.3) > 0 and the hyperbolic factors are positive.
        assert!(next.p_r > 0.0 && next.p_i > 0.0);
        assert!(map_step(&next, &p).is_err());
    }

    #[test]
    fn hyperbolic_factor_branches_agree_near_the_switch() {
        for &lambda in &[0.0, 1e-10, 0.3, 0.999] {
            for &x in &[-1.0 - 1e-12, -0.999_999, 0.999_999, 1.0, 1.0 + 1e-12] {
                let (c, s) = hyperbolic_factors(x, lambda);
                let (cr, sr) = (x.cosh() - lambda * x.sinh(), x.sinh() - lambda * x.cosh());
                assert!(close(c, cr, 1e-12) && close(s, sr, 1e-12));
            }
        }
        // λ → 1 at large x: cosh − sinh = e^{−x}, no cancellation.
        let (c, _) = hyperbolic_factors(600.0, 1.0);
        assert!(close(c, (-600.0f64).exp(), 1e-12));
    }

    #[test]
    fn hermitian_closure_over_many_kicks() {
        let p = params(6.3, 0.0);
        let mut s = ComplexPhasePoint::new(0.7, 0.0, 0.2, 0.0);
        for _ in 0..5000 {
            s = map_step(&s, &p).unwrap();
            assert_eq!((s.theta_i, s.p_i), (0.0, 0.0));
        }
    }

    proptest! {
        #[test]
        fn oracle_agrees_with_expanded_map(
            k in 0.5f64..12.0,
            lambda in 0.0f64..1.0,
            tr in -PI..PI,
            ti in -20.0f64..20.0,
            pr in -20.0f64..20.0,
            pi in -20.0f64..20.0,
        ) {
            let p = params(k, lambda);
            let mut s = ComplexPhasePoint::new(tr, ti, pr, pi);
            for _ in 0..20 {
                if s.diverged { break; }
                let a = map_step(&s, &p).unwrap();
                let b = map_step_complex_oracle(&s, &p).unwrap();
                prop_assert_eq!(a.diverged, b.diverged);
                if !a.diverged {
                    let (ch, sh) = (s.theta_i.cosh(), s.theta_i.sinh().abs());
                    for (x, y, terms) in [
                        (a.p_r, b.p_r, s.p_r.abs() + k * s.theta_r.sin().abs() * (ch + lambda * sh)),
                        (a.p_i, b.p_i, s.p_i.abs() + k * s.theta_r.cos().abs() * (sh + lambda * ch)),
                        (a.theta_r, b.theta_r, s.theta_r.abs() + a.p_r.abs()),
                        (a.theta_i, b.theta_i, s.theta_i.abs() + a.p_i.abs()),
                    ] {
                        let tol = 1e-9 * x.abs().max(y.abs()).max(terms);
                        prop_assert!((x - y).abs() <= tol, "{} vs {}", x, y);
                    }
                }
                s = a;
            }
        }

        #[test]
        fn parity_commutes_with_the_map(
            k in 0.5f64..12.0,
            lambda in 0.0f64..1.0,
            tr in -PI..PI,
            ti in -5.0f64..5.0,
            pr in -20.0f64..20.0,
            pi in -5.0f64..5.0,
        ) {
            let p = params(k, lambda);
            let a = map_step(&ComplexPhasePoint::new(tr, ti, pr, pi), &p).unwrap();
            let b = map_step(&ComplexPhasePoint::new(-tr, ti, -pr, pi), &p).unwrap();
            prop_assert_eq!(a.diverged, b.diverged);
            if !a.diverged {
                prop_assert_eq!(a.p_r, -b.p_r);
                prop_assert_eq!(a.theta_r, -b.theta_r);
                prop_assert_eq!(a.p_i, b.p_i);
                prop_assert_eq!(a.theta_i, b.theta_i);
            }
        }

        #[test]
        fn variance_is_shift_invariant(
            values in proptest::collection::vec(-50.0f64..50.0, 2..200),
            shift in -1e4f64..1e4,
        ) {
            let pts: Vec<_> = values.iter().map(|&v| ComplexPhasePoint::new(0.0, 0.0, v, 0.0)).collect();
            let shifted: Vec<_> = values.iter().map(|&v| ComplexPhasePoint::new(0.0, 0.0, v + shift, 0.0)).collect();
            let a = second_moments(&pts).unwrap().m2_r;
            let b = second_moments(&shifted).unwrap().m2_r;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(b) + 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn second_moment_hand_cases() {
        let same: Vec<_> = (0..10)
            .map(|_| ComplexPhasePoint::new(0.0, 0.0, 3.5, 0.0))
            .collect();
        assert_eq!(second_moments(&same).unwrap().m2_r, 0.0);

        let pair = [
            ComplexPhasePoint::new(0.0, 0.0, 0.0, 1.0),
            ComplexPhasePoint::new(0.0, 0.0, 0.0, -1.0),
        ];
        let m = second_moments(&pair).unwrap();
        assert_eq!(m.mean_pi, 0.0);
        assert_eq!(m.m2_i, 1.0);

        assert_eq!(second_moments(&[]), Err(Error::EmptySnapshot));
    }

    #[test]
    fn fully_clamped_ensemble_has_finite_moments() {
        let c = 1.0e152;
        let pts: Vec<_> = (0..100_000)
            .map(|i| {
                let s = if i % 2 == 0 { c } else { -c };
                ComplexPhasePoint {
                    p_r: s,
                    p_i: s,
                    diverged: true,
                    ..Default::default()
                }
            })
            .collect();
        let m = second_moments(&pts).unwrap();
        assert!(m.m2_r.is_finite());
        assert!(close(m.m2_r, 1.0e304, 1e-12));
    }

    #[test]
    fn latched_momenta_never_change() {
        let p = params(5.0, 1e-2);
        let cfg = EnsembleConfig::new(2_000, 5, 1).unwrap();
        let mut pts = sample_initial_ensemble(&cfg);
        evolve_points(&mut pts, &p, 12).unwrap();
        let frozen: Vec<(usize, ComplexPhasePoint)> = pts
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| p.diverged)
            .collect();
        assert!(!frozen.is_empty());
        evolve_points(&mut pts, &p, 10).unwrap();
        for (i, before) in frozen {
            assert_eq!(pts[i], before);
        }
    }

    #[test]
    fn diverged_count_is_monotone() {
        for lambda in [1e-10, 1e-4, 0.3] {
            let p = params(5.0, lambda);
            let cfg = EnsembleConfig::new(3_000, 1, 30).unwrap();
            let series = evolve_ensemble(&cfg, &p);
            assert_eq!(series.rows[0].n_diverged, 0);
            for w in series.rows.windows(2) {
                assert!(w[1].n_diverged >= w[0].n_diverged);
            }
        }
        assert_eq!(
            count_diverged(&sample_initial_ensemble(
                &EnsembleConfig::new(10, 1, 1).unwrap()
            )),
            0
        );
    }

    #[test]
    fn early_ensemble_statistics() {
        let p = params(5.0, 1e-10);
        let cfg = EnsembleConfig::new(10_000, 2024, 16).unwrap();
        let s = evolve_ensemble(&cfg, &p);
        assert_eq!(s.len(), 17);
        let r0 = s.rows[0];
        assert_eq!(
            (r0.mean_pr, r0.mean_pi, r0.m2_r, r0.m2_i, r0.n_diverged),
            (0.0, 0.0, 0.0, 0.0, 0)
        );

        // ⟨K² sin² θ⟩ = K²/2 and ⟨K²λ² cos² θ⟩ = K²λ²/2 over uniform θ.
        assert!(close(s.rows[1].m2_r, 12.5, 0.05), "{}", s.rows[1].m2_r);
        assert!(close(s.rows[1].m2_i, 1.25e-19, 0.10), "{}", s.rows[1].m2_i);
        for r in &s.rows[..13] {
            assert_eq!(r.n_diverged, 0, "t = {}", r.t);
        }
    }

    #[test]
    fn tc_examples() {
        assert!(close(
            threshold_time_tc(&params(5.0, 1e-10)).unwrap(),
            14.306_765_580_733_93,
            1e-12
        ));
        assert!(close(
            threshold_time_tc(&params(10.0, 1e-10)).unwrap(),
            10.0,
            1e-12
        ));
        assert!((threshold_time_tc(&params(300.0, 1e-10)).unwrap() - 4.04).abs() < 0.005);
        assert!(threshold_time_tc(&params(5.0, 1.0)).is_err());
        assert!(threshold_time_tc(&params(5.0, 0.0)).is_err());
        assert!(threshold_time_tc(&params(1.0, 0.1)).is_err());
    }

    #[test]
    fn special_trajectory_examples() {
        let p = params(5.0, 1e-10);
        let s1 = special_trajectory_prediction(1, &p).unwrap();
        assert!(close(s1.p_i, -5e-10, 1e-15));
        assert_eq!((s1.theta_r, s1.p_r), (0.0, 0.0));
        assert_eq!(s1.theta_i, s1.p_i);
        let s3 = special_trajectory_prediction(3, &p).unwrap();
        assert!(close(s3.p_i, -1.25e-8, 1e-14));

        // K^(n-1) λ = 5^13 · 1e-10 ≈ 0.12 > 0.01.
        assert!(matches!(
            special_trajectory_prediction(14, &p),
            Err(Error::OutOfRegime { n: 14, .. })
        ));
        assert!(special_trajectory_prediction(0, &p).is_err());
        assert!(special_trajectory_prediction_with_limit(14, &p, 1.0).is_ok());
    }

    #[test]
    fn iterated_zero_trajectory_follows_linear_recurrence() {
        // While K^(n-1)λ ≪ 1, sinh θ ≈ θ and cosh θ ≈ 1, so the imaginary
        // parts obey p' = p + Kθ − Kλ, θ' = θ + p'. Iterate that exactly.
        let (k, lambda) = (5.0, 1e-10);
        let p = params(k, lambda);
        let mut s = ComplexPhasePoint::default();
        let (mut lp, mut lt) = (0.0f64, 0.0f64);
        for n in 1..=10 {
            s = map_step(&s, &p).unwrap();
            lp += k * lt - k * lambda;
            lt += lp;
            assert_eq!((s.p_r, s.theta_r), (0.0, 0.0));
            assert!(close(s.p_i, lp, 0.01), "n = {n}: {} vs {}", s.p_i, lp);
            assert!(s.p_i < 0.0);
        }
    }

    #[test]
    fn threshold_detection() {
        let p = params(5.0, 1e-10);
        let cfg = EnsembleConfig::new(EnsembleConfig::DEFAULT_N_TRAJ, 7, 24).unwrap();
        let s = evolve_ensemble(&cfg, &p);
        let tau = detect_threshold_time(&s).unwrap().unwrap();
        assert!((13..=16).contains(&tau), "τ = {tau}");
        assert!(s.rows[tau].n_diverged > 0 && s.rows[tau - 1].n_diverged == 0);

        let hermitian = evolve_ensemble(
            &EnsembleConfig::new(2_000, 7, 40).unwrap(),
            &params(5.0, 0.0),
        );
        assert_eq!(detect_threshold_time(&hermitian).unwrap(), None);

        let short = evolve_ensemble(&EnsembleConfig::new(10, 7, 2).unwrap(), &p);
        assert!(matches!(
            detect_threshold_time(&short),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn diverged_count_at_t30_matches_independent_oracle_run() {
        // Re-run the same initial ensemble through the complex-arithmetic
        // map with its own loop and compare divergence counts.
        let p = params(5.0, 1e-10);
        let cfg = EnsembleConfig::new(10_000, 3, 30).unwrap();
        let series = evolve_ensemble(&cfg, &p);
        let mut pts = sample_initial_ensemble(&cfg);
        for _ in 0..30 {
            for s in pts.iter_mut().filter(|s| !s.diverged) {
                *s = map_step_complex_oracle(s, &p).unwrap();
            }
        }
        let oracle = pts.iter().filter(|s| s.diverged).count();
        let got = series.rows[30].n_diverged;
        assert!((got as f64 - oracle as f64).abs() <= 0.01 * cfg.n_traj() as f64);
        // Frozen from that oracle: about 83% of the ensemble has left the
        // representable range by t = 30, the rest is still bounded.
        assert!((8_100..=8_500).contains(&got), "{got}");
    }

    #[test]
    fn saturation_plateau_after_twice_tau() {
        let p = params(5.0, 1e-10);
        let cfg = EnsembleConfig::new(10_000, 11, 40).unwrap();
        let s = evolve_ensemble(&cfg, &p);
        let tau = detect_threshold_time(&s).unwrap().unwrap();
        let m2r = s.rows[2 * tau].m2_r;
        assert!((1e303..=1e305).contains(&m2r), "M₂ʳ(2τ) = {m2r:e}");
    }

    /// Growth rate of the second moment of the tangent dynamics under the
    /// random-phase approximation: the largest eigenvalue of the map
    /// acting on `(⟨δp²⟩, ⟨δp δθ⟩, ⟨δθ²⟩)` with `⟨cos²θ⟩ = 1/2`.
    fn random_phase_rate(k: f64) -> f64 {
        let h = k * k / 2.0;
        let m = [[1.0, 0.0, h], [1.0, 1.0, h], [1.0, 2.0, 1.0 + h]];
        let mut v = [1.0, 1.0, 1.0];
        let mut rho = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = (0..3)
                .map(|i| (0..3).map(|j| m[i][j] * v[j]).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            rho = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = [w[0] / norm, w[1] / norm, w[2] / norm];
        }
        rho.ln()
    }

    #[test]
    fn diffusion_fit_for_figure_parameters() {
        let p = params(5.0, 1e-10);
        let cfg = EnsembleConfig::new(10_000, 2024, 20).unwrap();
        let s = evolve_ensemble(&cfg, &p);
        let fit = fit_diffusion(&s, 2..=12, 2..=12).unwrap();
        assert!(close(fit.d, 12.5, 0.15), "D = {}", fit.d);
        assert!(
            close(fit.beta, 2.0 * 1e-10f64.ln(), 0.05),
            "β = {}",
            fit.beta
        );
        let rate = random_phase_rate(5.0);
        assert!(
            close(fit.alpha, rate, 0.05),
            "α = {} vs random-phase {}",
            fit.alpha,
            rate
        );
        assert_eq!(fit.window_r, (2, 12));
    }

    #[test]
    fn fit_windows_must_end_before_tau() {
        let p = params(5.0, 1e-10);
        let s = evolve_ensemble(&EnsembleConfig::new(5_000, 1, 25).unwrap(), &p);
        let tau = detect_threshold_time(&s).unwrap().unwrap();
        assert!(matches!(
            fit_diffusion(&s, 2..=tau, 2..=10),
            Err(Error::FitWindow { .. })
        ));
        assert!(matches!(
            fit_diffusion(&s, 2..=10, 0..=10),
            Err(Error::FitWindow { .. })
        ));
        assert!(matches!(
            fit_diffusion(&s, 2..=10, 5..=5),
            Err(Error::FitWindow { .. })
        ));
        assert_eq!(default_fit_window(&p).unwrap(), 2..=11);
    }
}
