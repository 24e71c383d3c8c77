//! Oscillatory-integral engine for `∫ a(λ) e^{i Φ(λ)} dλ`.
//!
//! Absolutely convergent problems are integrated directly on graded panels
//! whose width is capped by the local oscillation rate. Conditionally
//! convergent ones are damped by `exp(-(λ/Λ)^2)` for a doubling schedule of
//! `Λ` and extrapolated to `Λ → ∞`. Periodic problems use the trapezoid rule.

mod gauss_kronrod;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use gauss_kronrod::{adaptive_gk, kronrod_from_values, kronrod_nodes, GkResult};

/// Amplitude `a(λ)`.
pub type Amplitude<'a> = &'a (dyn Fn(f64) -> Result<C64> + Sync);
/// Real phase `Φ(λ)` (already multiplied by `t`).
pub type Phase<'a> = &'a (dyn Fn(f64) -> f64 + Sync);
/// Several amplitudes sharing one phase: fills the slice with `a_j(λ)`.
pub type VectorAmplitude<'a> = &'a (dyn Fn(f64, &mut [C64]) -> Result<()> + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    FullLine,
    Interval(f64, f64),
    /// A circle of the given period, parametrized by `[0, period)`.
    Circle(f64),
}

/// An oscillatory integral.
#[derive(Clone)]
pub struct OscProblem<'a> {
    pub amplitude: Amplitude<'a>,
    pub phase: Phase<'a>,
    /// `Φ'`; central differences are used when absent.
    pub phase_derivative: Option<Phase<'a>>,
    /// Sorted points where the panel grid must break (stationary points, kinks).
    pub stationary_hints: Vec<f64>,
    pub domain: Domain,
    /// Exponent `g` of a power-law bound `|a(λ)| ≲ |λ|^g` at infinity.
    pub growth_order: f64,
    /// Oscillation rate carried by the amplitude itself (e.g. `r` for `e^{±iλr}` factors).
    pub amplitude_frequency: f64,
    /// Length scale on which the amplitude varies near the breakpoints.
    pub feature_scale: f64,
    /// First cutoff `Λ₀` of the regularization schedule.
    pub regularization_scale: Option<f64>,
    /// When set, the problem has this many amplitudes and `amplitude` is unused.
    pub vector_amplitude: Option<(VectorAmplitude<'a>, usize)>,
}

fn no_amplitude(_: f64) -> Result<C64> {
    Err(Error::Evaluation("vector problem evaluated as a scalar one".into()))
}

impl<'a> OscProblem<'a> {
    pub fn new(amplitude: Amplitude<'a>, phase: Phase<'a>, domain: Domain) -> Self {
        OscProblem {
            amplitude,
            phase,
            phase_derivative: None,
            stationary_hints: Vec::new(),
            domain,
            growth_order: -2.0,
            amplitude_frequency: 0.0,
            feature_scale: 1.0,
            regularization_scale: None,
            vector_amplitude: None,
        }
    }

    /// A problem with `dim` amplitudes integrated against the same phase.
    pub fn vector(amplitudes: VectorAmplitude<'a>, dim: usize, phase: Phase<'a>, domain: Domain) -> Self {
        let mut p = OscProblem::new(&no_amplitude, phase, domain);
        p.vector_amplitude = Some((amplitudes, dim));
        p
    }

    pub fn dim(&self) -> usize {
        self.vector_amplitude.map_or(1, |(_, d)| d)
    }

    fn amplitudes(&self, x: f64, out: &mut [C64]) -> Result<()> {
        match self.vector_amplitude {
            Some((f, _)) => f(x, out),
            None => {
                out[0] = (self.amplitude)(x)?;
                Ok(())
            }
        }
    }

    fn integrands(&self, x: f64, out: &mut [C64]) -> Result<()> {
        self.amplitudes(x, out)?;
        let mut rot = None;
        for a in out.iter_mut() {
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::Evaluation(format!("amplitude is not finite at {x}")));
            }
            if *a != C64::new(0.0, 0.0) {
                *a *= *rot.get_or_insert_with(|| C64::from_polar(1.0, (self.phase)(x)));
            }
        }
        Ok(())
    }

    pub fn with_hints(mut self, mut hints: Vec<f64>) -> Self {
        hints.retain(|h| h.is_finite());
        hints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        hints.dedup();
        self.stationary_hints = hints;
        self
    }

    pub fn with_growth(mut self, g: f64) -> Self {
        self.growth_order = g;
        self
    }

    pub fn with_phase_derivative(mut self, d: Phase<'a>) -> Self {
        self.phase_derivative = Some(d);
        self
    }

    fn dphase(&self, x: f64) -> f64 {
        match self.phase_derivative {
            Some(d) => d(x),
            None => {
                let h = 1e-6 * x.abs().max(1.0);
                ((self.phase)(x + h) - (self.phase)(x - h)) / (2.0 * h)
            }
        }
    }
}

/// How the regularized values are extrapolated to `Λ → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Fit `v∞ + cΛ^{−κ}` through the last three values, `κ` free.
    PowerLaw,
    /// Full Richardson table in `Λ^{−2}, Λ^{−4}, …`, the expansion of a
    /// Gaussian cutoff applied to a smooth integrand.
    EvenPowers,
}

/// Engine settings.
#[derive(Debug, Clone)]
pub struct QuadConfig {
    pub max_depth: usize,
    /// Number of cutoffs `Λ₀, 2Λ₀, …` in the regularization schedule.
    pub regularization_levels: usize,
    /// Use the regularized path even for absolutely convergent problems.
    pub force_regularized: bool,
    pub max_panels: usize,
    /// Regularized integrands are truncated at `gaussian_cut · Λ`.
    pub gaussian_cut: f64,
    /// Default `Λ₀` is this multiple of the largest feature location.
    pub regularization_factor: f64,
    pub min_circle_nodes: usize,
    pub max_circle_nodes: usize,
    pub extrapolation: Extrapolation,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            max_depth: 30,
            regularization_levels: 4,
            force_regularized: false,
            max_panels: 4_000_000,
            gaussian_cut: 6.3,
            regularization_factor: 20.0,
            min_circle_nodes: 64,
            max_circle_nodes: 1 << 22,
            extrapolation: Extrapolation::PowerLaw,
        }
    }
}

/// Outcome of an oscillatory integration.
#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: C64,
    pub err_estimate: f64,
    /// `(Λ, value)` pairs of the regularization schedule; empty on the direct path.
    pub regularization_trace: Vec<(f64, C64)>,
    pub converged: bool,
    pub evaluations: usize,
}

/// Integrate with default settings; `NonConvergence` carries the trace in its message.
pub fn integrate(problem: &OscProblem<'_>, tol: f64) -> Result<QuadResult> {
    let res = integrate_report(problem, tol, &QuadConfig::default())?;
    into_checked(res)
}

pub fn integrate_with(problem: &OscProblem<'_>, tol: f64, config: &QuadConfig) -> Result<QuadResult> {
    into_checked(integrate_report(problem, tol, config)?)
}

fn into_checked(res: QuadResult) -> Result<QuadResult> {
    if res.converged {
        Ok(res)
    } else {
        Err(Error::NonConvergence(format!("estimate {:.3e}, trace {:?}", res.err_estimate, res.regularization_trace)))
    }
}

/// Integrate and always return the result, flagging `converged = false`
/// instead of failing. Hard failures (panel depth, amplitude errors) are still errors.
pub fn integrate_report(problem: &OscProblem<'_>, tol: f64, config: &QuadConfig) -> Result<QuadResult> {
    if problem.vector_amplitude.is_some() {
        return Err(Error::Domain("vector problems go through integrate_vector".into()));
    }
    if let Domain::Circle(_) = problem.domain {
        return integrate_circle_with(problem, tol, config);
    }
    Ok(integrate_components(problem, &[tol], config)?.remove(0))
}

/// Integrate every amplitude of a vector problem against the shared phase on
/// one panel grid; `tols[j]` is the absolute tolerance of component `j`.
pub fn integrate_vector(problem: &OscProblem<'_>, tols: &[f64], config: &QuadConfig) -> Result<Vec<QuadResult>> {
    if tols.len() != problem.dim() {
        return Err(Error::Domain(format!("{} tolerances for {} components", tols.len(), problem.dim())));
    }
    if let Domain::Circle(_) = problem.domain {
        return Err(Error::Domain("vector problems are not supported on the circle".into()));
    }
    integrate_components(problem, tols, config)
}

fn integrate_components(problem: &OscProblem<'_>, tols: &[f64], config: &QuadConfig) -> Result<Vec<QuadResult>> {
    match problem.domain {
        Domain::Interval(a, b) => {
            let panels = build_panels(problem, a, b, &breakpoints(problem, a, b), config)?;
            let sums = integrate_panels(problem, &panels, &[], tols, config)?;
            Ok(sums[0]
                .iter()
                .zip(tols)
                .map(|(s, &tol)| QuadResult {
                    value: s.value,
                    err_estimate: s.err,
                    regularization_trace: Vec::new(),
                    converged: s.err <= tol,
                    evaluations: s.evaluations,
                })
                .collect())
        }
        Domain::FullLine => {
            if problem.growth_order < -1.0 && !config.force_regularized {
                integrate_direct(problem, tols, config)
            } else {
                integrate_regularized(problem, tols, config)
            }
        }
        Domain::Circle(_) => unreachable!("circle problems are dispatched before"),
    }
}

fn breakpoints(problem: &OscProblem<'_>, a: f64, b: f64) -> Vec<f64> {
    let mut bp = vec![a, b];
    if a < 0.0 && b > 0.0 {
        bp.push(0.0);
    }
    bp.extend(problem.stationary_hints.iter().copied().filter(|h| *h > a && *h < b));
    bp.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bp.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    bp
}

/// Largest admissible step at `x`: phase change ≤ π and geometric grading
/// away from the nearest breakpoint (distance `dist`).
fn step(problem: &OscProblem<'_>, x: f64, dist: f64) -> f64 {
    let floor = 0.5 * problem.feature_scale;
    let grade = (0.5 * dist).max(floor);
    let rate = problem.dphase(x).abs() + problem.amplitude_frequency;
    let osc = if rate > 0.0 { PI / rate } else { f64::INFINITY };
    grade.min(osc)
}

/// March from `from` towards `to` (either direction), returning the interior
/// cut points, excluding both ends.
fn march(problem: &OscProblem<'_>, from: f64, to: f64, limit: usize) -> Result<Vec<f64>> {
    let dir = if to >= from { 1.0 } else { -1.0 };
    let mut pts = Vec::new();
    let mut x = from;
    loop {
        let mut h = step(problem, x, (x - from).abs());
        // re-check the rate at the far end once, so a rising phase speed is not overshot
        let h2 = step(problem, x + dir * h, (x + dir * h - from).abs());
        if h2 < 0.5 * h {
            h = 2.0 * h2;
        }
        let next = x + dir * h;
        if (to - next) * dir <= 0.0 {
            break;
        }
        pts.push(next);
        x = next;
        if pts.len() > limit {
            return Err(Error::NonConvergence(format!("more than {limit} panels between {from} and {to}")));
        }
    }
    Ok(pts)
}

fn build_panels(problem: &OscProblem<'_>, a: f64, b: f64, bp: &[f64], config: &QuadConfig) -> Result<Vec<(f64, f64)>> {
    let mut cuts = Vec::new();
    for w in bp.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = 0.5 * (p + q);
        cuts.push(p);
        let left = march(problem, p, mid, config.max_panels)?;
        let mut right = march(problem, q, mid, config.max_panels)?;
        right.reverse();
        cuts.extend(left);
        cuts.push(mid);
        cuts.extend(right);
    }
    cuts.push(b);
    cuts.dedup();
    if cuts.len() > config.max_panels {
        return Err(Error::NonConvergence(format!("{} panels exceed the cap", cuts.len())));
    }
    let _ = a;
    Ok(cuts.windows(2).map(|w| (w[0], w[1])).collect())
}

#[derive(Debug, Clone, Copy, Default)]
struct LevelSum {
    value: C64,
    err: f64,
    abs: f64,
    evaluations: usize,
}

type Weight<'w> = &'w (dyn Fn(f64) -> f64 + Sync);

/// Integrate the problem's integrands times each weight over the panels
/// (weight ≡ 1 when `weights` is empty); the result is indexed by
/// `[level][component]`. Panels are processed in parallel and reduced in
/// panel order, so results do not depend on the thread count.
fn integrate_panels(
    problem: &OscProblem<'_>,
    panels: &[(f64, f64)],
    weights: &[Weight<'_>],
    tols: &[f64],
    config: &QuadConfig,
) -> Result<Vec<Vec<LevelSum>>> {
    let nlev = weights.len().max(1);
    let dim = problem.dim();
    let total: f64 = panels.iter().map(|(a, b)| b - a).sum();
    let per_panel: Vec<Result<Vec<Vec<LevelSum>>>> = panels
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = vec![vec![LevelSum::default(); dim]; nlev];
            let ctx = PanelContext { problem, weights, tols, total, max_depth: config.max_depth };
            panel_recurse(&ctx, a, b, 0, &mut acc)?;
            Ok(acc)
        })
        .collect();
    let mut out = vec![vec![LevelSum::default(); dim]; nlev];
    for p in per_panel {
        for (lo, lp) in out.iter_mut().zip(p?) {
            for (o, s) in lo.iter_mut().zip(lp) {
                o.value += s.value;
                o.err += s.err;
                o.abs += s.abs;
                o.evaluations += s.evaluations;
            }
        }
    }
    Ok(out)
}

struct PanelContext<'c, 'p, 'w> {
    problem: &'c OscProblem<'p>,
    weights: &'c [Weight<'w>],
    tols: &'c [f64],
    total: f64,
    max_depth: usize,
}

fn panel_recurse(ctx: &PanelContext<'_, '_, '_>, a: f64, b: f64, depth: usize, acc: &mut [Vec<LevelSum>]) -> Result<()> {
    let dim = ctx.problem.dim();
    let x = kronrod_nodes(a, b);
    // base[c][i]: component c at node i
    let mut base = vec![[C64::new(0.0, 0.0); 15]; dim];
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for (i, &xi) in x.iter().enumerate() {
        ctx.problem.integrands(xi, &mut buf)?;
        for (c, v) in buf.iter().enumerate() {
            base[c][i] = *v;
        }
    }
    let frac = (b - a) / ctx.total;
    let mut results = Vec::with_capacity(acc.len());
    let mut ok = true;
    let nlev = ctx.weights.len().max(1);
    for lev in 0..nlev {
        let mut row = Vec::with_capacity(dim);
        for (c, vals) in base.iter().enumerate() {
            let mut v = *vals;
            if let Some(w) = ctx.weights.get(lev) {
                for (vi, &xi) in v.iter_mut().zip(x.iter()) {
                    *vi *= w(xi);
                }
            }
            let r = kronrod_from_values(a, b, &v);
            ok &= r.1 <= ctx.tols[c] * frac || r.1 <= gauss_kronrod::ROUNDOFF_ACCEPT * r.2;
            row.push(r);
        }
        results.push(row);
    }
    if ok {
        for (lev, row) in acc.iter_mut().zip(results) {
            for (s, (v, e, ab)) in lev.iter_mut().zip(row) {
                s.value += v;
                s.err += e;
                s.abs += ab;
                s.evaluations += 15;
            }
        }
        return Ok(());
    }
    if depth >= ctx.max_depth {
        return Err(Error::NonConvergence(format!("panel [{a:.6e}, {b:.6e}] unresolved at depth {depth}")));
    }
    let m = 0.5 * (a + b);
    panel_recurse(ctx, a, m, depth + 1, acc)?;
    panel_recurse(ctx, m, b, depth + 1, acc)
}

/// Bounds on `|∫_L^∞ a_j e^{iΦ}|` from the local amplitudes: one integration
/// by parts when the phase oscillates fast on the scale `L`, the power law otherwise.
fn tail_bounds(problem: &OscProblem<'_>, l: f64) -> Result<Vec<f64>> {
    let mut a = vec![C64::new(0.0, 0.0); problem.dim()];
    problem.amplitudes(l, &mut a)?;
    let rate = problem.dphase(l).abs();
    let g = problem.growth_order;
    Ok(a.iter()
        .map(|a| {
            let a = a.norm();
            let power = if g < -1.0 { a * l.abs() / (-1.0 - g) } else { f64::INFINITY };
            let ibp = if rate * l.abs() > 10.0 { 2.0 * a / rate } else { f64::INFINITY };
            power.min(ibp)
        })
        .collect())
}

fn tails_small(problem: &OscProblem<'_>, l: f64, tols: &[f64]) -> Result<bool> {
    Ok(tail_bounds(problem, l)?.iter().zip(tols).all(|(t, tol)| *t <= 0.25 * tol))
}

fn integrate_direct(problem: &OscProblem<'_>, tols: &[f64], config: &QuadConfig) -> Result<Vec<QuadResult>> {
    // core interval spans all hints with a margin, then grows until both tails are negligible
    let span = problem.stationary_hints.iter().fold(problem.feature_scale, |m, h| m.max(h.abs()));
    let mut lo = -4.0 * span;
    let mut hi = 4.0 * span;
    let mut guard = 0;
    loop {
        let low_ok = tails_small(problem, lo, tols)?;
        let high_ok = tails_small(problem, hi, tols)?;
        if low_ok && high_ok {
            break;
        }
        if !low_ok {
            lo *= 2.0;
        }
        if !high_ok {
            hi *= 2.0;
        }
        guard += 1;
        if guard > 60 {
            return Err(Error::NonConvergence("tail does not decay below tolerance".into()));
        }
    }
    let (tl, th) = (tail_bounds(problem, lo)?, tail_bounds(problem, hi)?);
    let panels = build_panels(problem, lo, hi, &breakpoints(problem, lo, hi), config)?;
    let half: Vec<f64> = tols.iter().map(|t| 0.5 * t).collect();
    let sums = integrate_panels(problem, &panels, &[], &half, config)?;
    Ok(sums[0]
        .iter()
        .enumerate()
        .map(|(c, s)| {
            let err = s.err + tl[c] + th[c];
            QuadResult { value: s.value, err_estimate: err, regularization_trace: Vec::new(), converged: err <= tols[c], evaluations: s.evaluations }
        })
        .collect())
}

/// Default first cutoff of the regularization schedule.
pub fn default_regularization_scale(problem: &OscProblem<'_>, config: &QuadConfig) -> f64 {
    let feat = problem.stationary_hints.iter().fold(problem.feature_scale.max(1.0), |m, h| m.max(h.abs()));
    config.regularization_factor * feat
}

/// Fit `v(Λ) = v∞ + c Λ^{-κ}` through the last three values of a doubling schedule.
/// Returns `(v∞, κ, used_fallback)`.
pub fn extrapolate_power_law(v: &[C64]) -> (C64, f64, bool) {
    let n = v.len();
    if n < 3 {
        return (v[n - 1], 2.0, true);
    }
    let d1 = v[n - 2] - v[n - 3];
    let d2 = v[n - 1] - v[n - 2];
    let (kappa, fallback) = if d2.norm() > 0.0 && d1.norm() > 0.0 {
        let k = (d1.norm() / d2.norm()).log2();
        if k.is_finite() && (0.5..=4.0).contains(&k) {
            (k, false)
        } else {
            (2.0, true)
        }
    } else {
        (2.0, true)
    };
    let factor = 2f64.powf(kappa) - 1.0;
    (v[n - 1] + d2 / factor, kappa, fallback)
}

fn integrate_regularized(problem: &OscProblem<'_>, tols: &[f64], config: &QuadConfig) -> Result<Vec<QuadResult>> {
    let l0 = problem.regularization_scale.unwrap_or_else(|| default_regularization_scale(problem, config));
    let levels = config.regularization_levels.max(3);
    let cutoffs: Vec<f64> = (0..levels).map(|k| l0 * 2f64.powi(k as i32)).collect();
    let xmax = config.gaussian_cut * cutoffs[levels - 1];
    let gauss: Vec<Box<dyn Fn(f64) -> f64 + Sync>> =
        cutoffs.iter().map(|&l| Box::new(move |x: f64| (-(x / l) * (x / l)).exp()) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
    let weights: Vec<Weight<'_>> = gauss.iter().map(|g| g.as_ref() as Weight<'_>).collect();
    let panels = build_panels(problem, -xmax, xmax, &breakpoints(problem, -xmax, xmax), config)?;
    let quarter: Vec<f64> = tols.iter().map(|t| 0.25 * t).collect();
    let sums = integrate_panels(problem, &panels, &weights, &quarter, config)?;
    Ok((0..problem.dim())
        .map(|c| {
            let vals: Vec<C64> = sums.iter().map(|lev| lev[c].value).collect();
            let quad_err = sums.iter().map(|lev| lev[c].err).fold(0.0, f64::max);
            extrapolate(&cutoffs, &vals, quad_err, tols[c], sums[0][c].evaluations, config)
        })
        .collect())
}

fn extrapolate(cutoffs: &[f64], vals: &[C64], quad_err: f64, tol: f64, evaluations: usize, config: &QuadConfig) -> QuadResult {
    let levels = vals.len();
    let noise = 0.1 * tol + 2.0 * quad_err;
    let (v_inf, err, monotone) = match config.extrapolation {
        Extrapolation::PowerLaw => {
            let (v_inf, kappa, fallback) = extrapolate_power_law(vals);
            // pairwise Richardson with the fitted exponent; the last one equals v_inf
            let factor = 2f64.powf(kappa) - 1.0;
            let extrap: Vec<C64> = vals.windows(2).map(|w| w[1] + (w[1] - w[0]) / factor).collect();
            let incs: Vec<f64> = extrap.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            let mut err = *incs.last().unwrap() + quad_err;
            if fallback {
                err += (vals[levels - 1] - vals[levels - 2]).norm();
            }
            (v_inf, err, shrinking(&incs, noise))
        }
        Extrapolation::EvenPowers => {
            let diag = richardson_even(vals);
            let incs: Vec<f64> = diag.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            let err = *incs.last().unwrap() + quad_err;
            (diag[levels - 1], err, shrinking(&incs, noise))
        }
    };
    QuadResult {
        value: v_inf,
        err_estimate: err,
        regularization_trace: cutoffs.iter().copied().zip(vals.iter().copied()).collect(),
        converged: monotone && err <= tol,
        evaluations,
    }
}

fn shrinking(incs: &[f64], noise: f64) -> bool {
    incs.windows(2).all(|w| w[1] <= w[0] || w[1] <= noise)
}

/// Richardson table for `v(Λ) = v∞ + Σ_j c_j Λ^{−2j}` on a doubling schedule.
/// Returns `T_{m,0}, T_{m,1}, …, T_{m,m}` (`m` the finest level): the finest
/// value after eliminating `0, 1, …, m` error terms.
pub fn richardson_even(v: &[C64]) -> Vec<C64> {
    let mut column = v.to_vec();
    let mut out = vec![*v.last().unwrap()];
    for j in 1..v.len() {
        let f = 4f64.powi(j as i32) - 1.0;
        column = column.windows(2).map(|w| w[1] + (w[1] - w[0]) / f).collect();
        out.push(*column.last().unwrap());
    }
    out
}

/// Periodic integral over one period by the trapezoid rule with node doubling.
pub fn integrate_circle(problem: &OscProblem<'_>, tol: f64) -> Result<QuadResult> {
    into_checked(integrate_circle_with(problem, tol, &QuadConfig::default())?)
}

pub fn integrate_circle_with(problem: &OscProblem<'_>, tol: f64, config: &QuadConfig) -> Result<QuadResult> {
    let period = match problem.domain {
        Domain::Circle(p) => p,
        _ => return Err(Error::Domain("integrate_circle needs a Circle domain".into())),
    };
    let trap = |n: usize| -> Result<(C64, f64)> {
        let h = period / n as f64;
        let vals: Vec<Result<C64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut v = [C64::new(0.0, 0.0)];
                problem.integrands(k as f64 * h, &mut v)?;
                Ok(v[0])
            })
            .collect();
        let mut s = C64::new(0.0, 0.0);
        let mut a = 0.0;
        for v in vals {
            let v = v?;
            s += v;
            a += v.norm();
        }
        Ok((s * h, a * h))
    };
    let mut n = config.min_circle_nodes.max(4).next_power_of_two();
    let (mut prev, _) = trap(n)?;
    let mut evaluations = n;
    let mut streak = 0;
    loop {
        n *= 2;
        let (cur, abs) = trap(n)?;
        evaluations += n;
        let diff = (cur - prev).norm();
        let err = diff.max(1e-15 * abs);
        if diff < tol {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= 2 {
            return Ok(QuadResult { value: cur, err_estimate: err, regularization_trace: Vec::new(), converged: true, evaluations });
        }
        if n >= config.max_circle_nodes {
            return Ok(QuadResult { value: cur, err_estimate: err, regularization_trace: Vec::new(), converged: false, evaluations });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude() {
        let a = |_x: f64| -> Result<C64> { Ok(C64::new(0.0, 0.0)) };
        let p = |x: f64| x * x;
        let prob = OscProblem::new(&a, &p, Domain::FullLine);
        let r = integrate(&prob, 1e-10).unwrap();
        assert_eq!(r.value, C64::new(0.0, 0.0));
        assert_eq!(r.err_estimate, 0.0);
    }

    #[test]
    fn richardson_removes_even_powers() {
        let v: Vec<C64> = (0..4)
            .map(|k| {
                let e = 4f64.powi(-k);
                C64::new(2.0 + 0.7 * e - 0.2 * e * e + 0.05 * e * e * e, -1.0 + 0.3 * e)
            })
            .collect();
        let t = richardson_even(&v);
        assert!((t[3] - C64::new(2.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn extrapolation_recovers_power_law() {
        let v: Vec<C64> = (0..4).map(|k| C64::new(1.0, -2.0) + C64::new(0.3, 0.1) * 2f64.powi(k).powf(-1.5)).collect();
        let (v_inf, kappa, fb) = extrapolate_power_law(&v);
        assert!(!fb);
        assert!((kappa - 1.5).abs() < 1e-12);
        assert!((v_inf - C64::new(1.0, -2.0)).norm() < 1e-13);
    }

    #[test]
    fn interval_polynomial() {
        let a = |x: f64| -> Result<C64> { Ok(C64::new(x * x, 0.0)) };
        let p = |_x: f64| 0.0;
        let prob = OscProblem::new(&a, &p, Domain::Interval(0.0, 3.0));
        let r = integrate(&prob, 1e-12).unwrap();
        assert!((r.value.re - 9.0).abs() < 1e-12);
    }

    #[test]
    fn circle_rejects_other_domains() {
        let a = |_x: f64| -> Result<C64> { Ok(C64::new(1.0, 0.0)) };
        let p = |_x: f64| 0.0;
        let prob = OscProblem::new(&a, &p, Domain::FullLine);
        assert!(integrate_circle(&prob, 1e-10).is_err());
    }
}
