//! The fractional Schrödinger kernel `k_t^σ(r)` on `H^n`: heat-semigroup
//! calibration of the inversion constant, evaluation by oscillatory
//! quadrature, the region-by-region bounds it is checked against, and the
//! Kunze–Stein weighted norm.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hn_geometry::{
    c_function, kunze_stein_weight, phi_hc, phi_large, phi_small_with, plancherel_density, stanton_tomas_coefficients, HarishChandraExpansion,
    HyperbolicSpace, StantonTomasTable,
};
use crate::hn_phase::{stationary_points, theta, PhaseParams};
use crate::oscquad::{
    adaptive_gk, integrate_report, integrate_vector, kronrod_from_values, kronrod_nodes, Domain, Extrapolation, OscProblem, QuadConfig, QuadResult,
};

/// Large-scale spherical expansion radius used at quadrature nodes.
const R0: f64 = 0.5;
/// Below `R0`, the Harish-Chandra integral is used while `λr` stays below this.
const HC_MAX_PHASE: f64 = 30.0;
const SMALL_SCALE_TERMS: usize = 3;
/// First Gaussian cutoff as a multiple of the largest of 1, the stationary
/// points and the time scale `|t|^{−1/α}`.
const REGULARIZATION_FACTOR: f64 = 1.0;
/// Times the first cutoff is quadrupled when the extrapolation has not settled.
const CUTOFF_RETRIES: usize = 3;

/// `φ_λ(r)` at a quadrature node, by the method suited to `(λ, r)`.
fn phi_node(space: &HyperbolicSpace, table: &StantonTomasTable, lambda: f64, r: f64) -> Result<f64> {
    let l = lambda.abs();
    if r == 0.0 {
        return Ok(1.0);
    }
    let v = if r >= R0 && l > 0.0 {
        phi_large(space, l, r, R0)?
    } else if l * r <= HC_MAX_PHASE {
        phi_hc(space, l, r)?
    } else {
        phi_small_with(table, l, r, SMALL_SCALE_TERMS, 1.5)?
    };
    Ok(v.value.re)
}

/// `C_vol ∫₀^∞ h_t(r)(sinh r)^{n−1} dr` for the uncalibrated heat kernel, by
/// a fixed composite Kronrod rule (the inner integrals carry cancellation
/// noise that adaptive refinement would chase).
fn raw_heat_mass(space: &HyperbolicSpace, table: &StantonTomasTable, t: f64) -> Result<f64> {
    let rho = space.rho();
    let n = space.n() as i32;
    // beyond this the density e^{ρr − r²/4t} is below e^{−30} of its peak
    let r_max = 2.0 * rho * t + (4.0 * rho * rho * t * t + 120.0 * t).sqrt() + 1.0;
    let panels = (r_max / 0.25).ceil() as usize;
    let h = r_max / panels as f64;
    let sums = (0..panels)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            let x = kronrod_nodes(a, b);
            let mut f = [C64::new(0.0, 0.0); 15];
            for (fi, &r) in f.iter_mut().zip(x.iter()) {
                *fi = C64::new(raw_heat_kernel(space, table, t, r)? * r.sinh().powi(n - 1), 0.0);
            }
            Ok(kronrod_from_values(a, b, &f).0.re)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(space.sphere_area() * sums.iter().sum::<f64>())
}

fn raw_heat_kernel(space: &HyperbolicSpace, table: &StantonTomasTable, t: f64, r: f64) -> Result<f64> {
    let rho = space.rho();
    let amp = |l: f64| -> Result<C64> {
        let w = (-t * (l * l + rho * rho)).exp();
        if w == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(C64::new(w * plancherel_density(space, l) * phi_node(space, table, l, r)?, 0.0))
    };
    let zero = |_: f64| 0.0;
    let mut prob = OscProblem::new(&amp, &zero, Domain::FullLine).with_growth(-20.0);
    prob.feature_scale = 1.0 / t.sqrt();
    prob.amplitude_frequency = r;
    let scale = (-rho * r).exp() * (1.0 + r) * t.powf(-0.5 * space.n() as f64 - 0.5).max(1.0);
    let res = integrate_report(&prob, 1e-14 * scale, &QuadConfig::default())?;
    Ok(res.value.re)
}

/// Inversion constant `C_n` fixed by unit heat-kernel mass, checked at three times.
pub fn calibrate_constant(space: &HyperbolicSpace) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<u32, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().expect("calibration cache").get(&space.n()) {
        return Ok(c);
    }
    let c = calibrate_uncached(space)?;
    cache.lock().expect("calibration cache").insert(space.n(), c);
    Ok(c)
}

fn calibrate_uncached(space: &HyperbolicSpace) -> Result<f64> {
    let table = stanton_tomas_coefficients(space.n())?;
    let constants = [0.5, 1.0, 2.0].par_iter().map(|&t| raw_heat_mass(space, &table, t).map(|m| 1.0 / m)).collect::<Result<Vec<_>>>()?;
    let c = constants[1];
    if constants.iter().any(|k| (k - c).abs() > 1e-6 * c) {
        return Err(Error::Calibration(format!("heat masses disagree: {constants:?}")));
    }
    Ok(c)
}

/// Calibrated heat kernel `h_t(r) = C_n ∫ e^{−t(λ²+ρ²)} φ_λ(r) |c(λ)|^{−2} dλ`.
pub fn heat_kernel(space: &HyperbolicSpace, t: f64, r: f64) -> Result<f64> {
    let table = stanton_tomas_coefficients(space.n())?;
    Ok(calibrate_constant(space)? * raw_heat_kernel(space, &table, t, r)?)
}

/// Total heat-kernel mass with the calibrated constant.
pub fn heat_mass(space: &HyperbolicSpace, t: f64) -> Result<f64> {
    let table = stanton_tomas_coefficients(space.n())?;
    Ok(calibrate_constant(space)? * raw_heat_mass(space, &table, t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelQuery {
    pub space: HyperbolicSpace,
    pub alpha: f64,
    pub sigma: f64,
    pub t: f64,
    pub r: f64,
}

impl KernelQuery {
    pub fn new(space: HyperbolicSpace, alpha: f64, sigma: f64, t: f64, r: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) || alpha == 1.0 {
            return Err(Error::UnsupportedAlpha(alpha));
        }
        if !(sigma >= 0.0) || t == 0.0 || !t.is_finite() || !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("need sigma >= 0, t != 0, r >= 0; got ({sigma}, {t}, {r})")));
        }
        Ok(KernelQuery { space, alpha, sigma, t, r })
    }
}

/// Subcases of the kernel estimate; the first four are for `1 < α < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RegimeTag {
    #[serde(rename = "1.1.1")]
    S111,
    #[serde(rename = "1.1.2")]
    S112,
    #[serde(rename = "2.1.1")]
    S211,
    #[serde(rename = "2.1.2")]
    S212,
    #[serde(rename = "1.2.1")]
    S121,
    #[serde(rename = "1.2.2")]
    S122,
    #[serde(rename = "1.2.3")]
    S123,
    #[serde(rename = "2.2.1")]
    S221,
    #[serde(rename = "2.2.2")]
    S222,
    #[serde(rename = "2.2.3")]
    S223,
}

impl RegimeTag {
    pub fn label(&self) -> &'static str {
        match self {
            RegimeTag::S111 => "1.1.1",
            RegimeTag::S112 => "1.1.2",
            RegimeTag::S211 => "2.1.1",
            RegimeTag::S212 => "2.1.2",
            RegimeTag::S121 => "1.2.1",
            RegimeTag::S122 => "1.2.2",
            RegimeTag::S123 => "1.2.3",
            RegimeTag::S221 => "2.2.1",
            RegimeTag::S222 => "2.2.2",
            RegimeTag::S223 => "2.2.3",
        }
    }
}

/// Regime, bound with unit constant, and whether `(t, r)` sits on a region boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremBound {
    pub regime: RegimeTag,
    pub bound: f64,
    pub boundary: bool,
}

const BOUNDARY_REL: f64 = 1e-12;

fn on_line(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_REL * a.abs().max(b.abs()).max(1e-300)
}

/// Smallest integer above `(n+1)/2 − σ`, at least 2.
pub fn decay_order_n(n: u32, sigma: f64) -> f64 {
    let x = (n as f64 + 1.0) / 2.0 - sigma;
    (x.floor() + 1.0).max(2.0)
}

/// `θ₀ = max θ` for `α < 1`.
pub fn theta0(space: &HyperbolicSpace, alpha: f64) -> Result<f64> {
    let p = PhaseParams::new(alpha, space.rho(), 0.0)?;
    stationary_points(&p)?.theta0.ok_or(Error::UnsupportedAlpha(alpha))
}

/// The bound of the kernel estimate at `(t, r)`; points on overlapping
/// boundaries go to the large-time/large-scale side and are flagged.
pub fn theorem_bound(q: &KernelQuery) -> Result<TheoremBound> {
    let n = q.space.n() as f64;
    let rho = q.space.rho();
    let (a, s) = (q.alpha, q.sigma);
    let t = q.t.abs();
    let r = q.r;
    let decay = (-rho * r).exp();
    let small_time = t.powf(-(n - s) / a);
    if a > 1.0 {
        if !(0.0..=n / 2.0).contains(&s) {
            return Err(Error::OutOfTheoremRange(format!("sigma = {s} outside [0, n/2] for alpha = {a}")));
        }
        let e = 0.5 * (n - 2.0 * s) / (a - 1.0);
        if t >= 1.0_f64.max(r) {
            let boundary = on_line(t, r) && r >= 1.0 || on_line(t, 1.0) && r < 1.0;
            let regime = if r >= 1.0 { RegimeTag::S111 } else { RegimeTag::S211 };
            return Ok(TheoremBound { regime, bound: t.powf(-1.5) * (1.0 + r) * decay, boundary });
        }
        if r >= 1.0 {
            return Ok(TheoremBound { regime: RegimeTag::S112, bound: t.powf(-e) * r.powf(e - 0.5) * decay, boundary: on_line(r, 1.0) });
        }
        let ra = r.powf(a);
        if ra <= t {
            return Ok(TheoremBound { regime: RegimeTag::S211, bound: small_time, boundary: on_line(ra, t) });
        }
        return Ok(TheoremBound { regime: RegimeTag::S212, bound: t.powf(-e) * r.powf(e - n / 2.0), boundary: false });
    }
    if !(n / 2.0..=n).contains(&s) {
        return Err(Error::OutOfTheoremRange(format!("sigma = {s} outside [n/2, n] for alpha = {a}")));
    }
    let b = 0.5 * (2.0 * s - n) / (1.0 - a);
    let mixed = |t: f64, r: f64| -> f64 {
        let ex = b - n / 2.0;
        if r == 0.0 && ex < 0.0 {
            f64::INFINITY
        } else if r == 0.0 && ex == 0.0 {
            t.powf(-b)
        } else {
            t.powf(-b) * r.powf(ex)
        }
    };
    if r >= 1.0 {
        let th0 = theta0(&q.space, a)?;
        let ratio = r / t;
        let boundary = on_line(r, 1.0) && t >= 1.0;
        let (regime, bound) = if ratio <= 0.5 * th0 {
            (RegimeTag::S123, ratio.powf(1.5f64.min(b)) * r.powf(-0.5) * decay)
        } else if ratio < 2.0 * th0 {
            (RegimeTag::S122, r.powf(-1.0 / 3.0) * decay)
        } else {
            (RegimeTag::S121, r.powf(-decay_order_n(q.space.n(), s)) * decay)
        };
        let edge = on_line(ratio, 0.5 * th0) || on_line(ratio, 2.0 * th0);
        return Ok(TheoremBound { regime, bound, boundary: boundary || edge });
    }
    if t >= 1.0 {
        return Ok(TheoremBound { regime: RegimeTag::S221, bound: t.powf(-1.5) + mixed(t, r), boundary: on_line(t, 1.0) });
    }
    let ra = r.powf(a);
    if ra <= t {
        Ok(TheoremBound { regime: RegimeTag::S222, bound: small_time + mixed(t, r), boundary: on_line(ra, t) })
    } else {
        Ok(TheoremBound { regime: RegimeTag::S223, bound: small_time, boundary: false })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSample {
    pub query: KernelQuery,
    pub value: C64,
    pub err_estimate: f64,
    /// `None` when `(α, σ)` lies outside the theorem's windows.
    pub regime: Option<RegimeTag>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub boundary: bool,
    /// `(Λ, value)` pairs of the Gaussian regularization, empty when absolutely convergent.
    pub regularization_trace: Vec<(f64, C64)>,
}

/// Stationary points `±λᵢ` of `λ ↦ t(λ² + ρ²)^{α/2} ∓ rλ`, used as panel breakpoints.
fn stationary_hints(alpha: f64, rho: f64, ratio: f64) -> Vec<f64> {
    let Ok(p) = PhaseParams::new(alpha, rho, ratio) else {
        return Vec::new();
    };
    let Ok(rep) = stationary_points(&p) else {
        return Vec::new();
    };
    let mut h = Vec::new();
    for l in [rep.lambda1, rep.lambda2].into_iter().flatten() {
        if l > 0.0 {
            h.push(l);
            h.push(-l);
        }
    }
    h
}

/// `(λ²+ρ²)^{−σ/2}|c(λ)|^{−2} φ_λ(r_j)` for every radius, sharing the
/// λ-dependent factors.
fn kernel_amplitudes(space: &HyperbolicSpace, table: &StantonTomasTable, sigma: f64, radii: &[f64], l: f64, out: &mut [C64]) -> Result<()> {
    let rho2 = space.rho() * space.rho();
    let w = (l * l + rho2).powf(-0.5 * sigma) * plancherel_density(space, l);
    let mut shared: Option<(C64, HarishChandraExpansion)> = None;
    for (o, &r) in out.iter_mut().zip(radii) {
        let phi = if r >= R0 && l != 0.0 {
            let (c, e) = match &shared {
                Some(x) => x,
                None => shared.insert((c_function(space, C64::new(l.abs(), 0.0))?, HarishChandraExpansion::new(space, l.abs(), R0)?)),
            };
            2.0 * (c * e.eval(r).0).re
        } else {
            phi_node(space, table, l, r)?
        };
        *o = C64::new(w * phi, 0.0);
    }
    Ok(())
}

/// Raw kernel integrals (without `C_n`) for all radii on one λ-grid, with
/// the cutoff schedule restarted at a larger scale while any component has
/// not settled.
fn integrate_kernels(space: &HyperbolicSpace, alpha: f64, sigma: f64, t: f64, radii: &[f64], tols: &[f64]) -> Result<Vec<QuadResult>> {
    let table = stanton_tomas_coefficients(space.n())?;
    let rho = space.rho();
    let rho2 = rho * rho;
    let amp = |l: f64, out: &mut [C64]| kernel_amplitudes(space, &table, sigma, radii, l, out);
    let phase = move |l: f64| t * (l * l + rho2).powf(0.5 * alpha);
    let dphase = move |l: f64| t * theta(&PhaseParams { alpha, rho, r_ratio: 0.0 }, l);
    let mut hints: Vec<f64> = radii.iter().flat_map(|&r| stationary_hints(alpha, rho, r / t.abs())).collect();
    hints.sort_by(f64::total_cmp);
    hints.dedup();
    let lam_st = hints.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    let r_max = radii.iter().fold(0.0f64, |m, &r| m.max(r));
    let mut prob = OscProblem::vector(&amp, radii.len(), &phase, Domain::FullLine)
        .with_hints(hints)
        .with_growth(space.n() as f64 - 1.0 - sigma)
        .with_phase_derivative(&dphase);
    prob.amplitude_frequency = r_max;
    let cfg = QuadConfig { extrapolation: Extrapolation::EvenPowers, ..QuadConfig::default() };
    let mut scale = REGULARIZATION_FACTOR * 1f64.max(lam_st).max(t.abs().powf(-1.0 / alpha));
    let mut attempt = 0;
    loop {
        prob.regularization_scale = Some(scale);
        let res = integrate_vector(&prob, tols, &cfg)?;
        let settled = res.iter().all(|r| r.converged || r.regularization_trace.is_empty());
        if settled || attempt == CUTOFF_RETRIES {
            return Ok(res);
        }
        attempt += 1;
        scale *= 4.0;
    }
}

fn sample_from(q: KernelQuery, res: &QuadResult, c_n: f64) -> Result<KernelSample> {
    if !res.converged {
        return Err(Error::NonConvergence(format!(
            "kernel at (t, r) = ({}, {}): estimate {:.3e}, trace {:?}",
            q.t,
            q.r,
            res.err_estimate * c_n,
            res.regularization_trace
        )));
    }
    let value = res.value * c_n;
    let tb = theorem_bound(&q).ok();
    Ok(KernelSample {
        query: q,
        value,
        err_estimate: res.err_estimate * c_n,
        regime: tb.map(|b| b.regime),
        bound: tb.map(|b| b.bound),
        ratio: tb.map(|b| value.norm() / b.bound),
        boundary: tb.is_some_and(|b| b.boundary),
        regularization_trace: res.regularization_trace.iter().map(|(l, v)| (*l, v * c_n)).collect(),
    })
}

/// `k_t^σ(r) = C_n ∫ (λ²+ρ²)^{−σ/2} e^{it(λ²+ρ²)^{α/2}} φ_λ(r) |c(λ)|^{−2} dλ`
/// with absolute tolerance `tol`.
pub fn kernel_sigma(q: &KernelQuery, tol: f64) -> Result<KernelSample> {
    let c_n = calibrate_constant(&q.space)?;
    let res = integrate_kernels(&q.space, q.alpha, q.sigma, q.t, &[q.r], &[tol / c_n])?;
    sample_from(*q, &res[0], c_n)
}

/// `k_t^σ(r_j)` for many radii at one time. All radii share a single λ-grid,
/// so this is much cheaper than separate calls; `tols[j]` is absolute.
pub fn kernel_profile(space: &HyperbolicSpace, alpha: f64, sigma: f64, t: f64, radii: &[f64], tols: &[f64]) -> Result<Vec<KernelSample>> {
    if radii.len() != tols.len() {
        return Err(Error::Domain(format!("{} radii but {} tolerances", radii.len(), tols.len())));
    }
    if radii.is_empty() {
        return Ok(Vec::new());
    }
    let queries = radii.iter().map(|&r| KernelQuery::new(*space, alpha, sigma, t, r)).collect::<Result<Vec<_>>>()?;
    let c_n = calibrate_constant(space)?;
    let scaled: Vec<f64> = tols.iter().map(|t| t / c_n).collect();
    let res = integrate_kernels(space, alpha, sigma, t, radii, &scaled)?;
    queries.into_iter().zip(&res).map(|(q, r)| sample_from(q, r, c_n)).collect()
}

/// A product grid of times and radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelGrid {
    pub t_values: Vec<f64>,
    pub r_values: Vec<f64>,
}

impl KernelGrid {
    /// Geometric midpoints between times and arithmetic midpoints between radii.
    pub fn refined(&self) -> KernelGrid {
        let mid = |v: &[f64], geometric: bool| -> Vec<f64> {
            let mut out = Vec::with_capacity(2 * v.len());
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(if geometric && w[0] > 0.0 { (w[0] * w[1]).sqrt() } else { 0.5 * (w[0] + w[1]) });
            }
            out.extend(v.last());
            out
        };
        KernelGrid { t_values: mid(&self.t_values, true), r_values: mid(&self.r_values, false) }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.t_values.iter().flat_map(|&t| self.r_values.iter().map(move |&r| (t, r))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: RegimeTag,
    pub points: usize,
    pub boundary_points: usize,
    pub max_ratio: f64,
    pub max_ratio_refined: Option<f64>,
    pub growth: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelVerificationReport {
    pub n: u32,
    pub alpha: f64,
    pub sigma: f64,
    pub regimes: Vec<RegimeSummary>,
    /// Set when the grid is a single point and no refinement was attempted.
    pub stability_skipped: bool,
    pub samples: Vec<KernelSample>,
    pub pass: bool,
}

/// Allowed growth of a regime's maximal ratio under 2× grid refinement.
pub const REFINEMENT_GROWTH: f64 = 0.25;

fn evaluate_grid(space: &HyperbolicSpace, alpha: f64, sigma: f64, grid: &KernelGrid, tol: f64) -> Result<Vec<KernelSample>> {
    grid.points()
        .par_iter()
        .map(|&(t, r)| {
            let q = KernelQuery::new(*space, alpha, sigma, t, r)?;
            let b = theorem_bound(&q)?;
            kernel_sigma(&q, tol * b.bound.min(1e6))
        })
        .collect()
}

fn max_ratios(samples: &[KernelSample]) -> HashMap<RegimeTag, (usize, usize, f64)> {
    let mut m: HashMap<RegimeTag, (usize, usize, f64)> = HashMap::new();
    for s in samples {
        if let (Some(tag), Some(ratio)) = (s.regime, s.ratio) {
            let e = m.entry(tag).or_insert((0, 0, 0.0));
            e.0 += 1;
            e.1 += s.boundary as usize;
            e.2 = e.2.max(ratio);
        }
    }
    m
}

/// Per-regime maximal ratios `|k_t^σ|/bound` on the grid and on its 2× refinement.
/// `tol` is relative to the local bound.
pub fn verify_kernel_estimate(space: &HyperbolicSpace, alpha: f64, sigma: f64, grid: &KernelGrid, tol: f64) -> Result<KernelVerificationReport> {
    if grid.t_values.is_empty() || grid.r_values.is_empty() {
        return Err(Error::InsufficientData("empty kernel grid".into()));
    }
    let samples = evaluate_grid(space, alpha, sigma, grid, tol)?;
    let single = grid.t_values.len() == 1 && grid.r_values.len() == 1;
    let coarse = max_ratios(&samples);
    let fine = if single { None } else { Some(max_ratios(&evaluate_grid(space, alpha, sigma, &grid.refined(), tol)?)) };
    let mut regimes: Vec<RegimeSummary> = coarse
        .iter()
        .map(|(&tag, &(points, boundary_points, max_ratio))| {
            let refined = fine.as_ref().and_then(|f| f.get(&tag)).map(|x| x.2);
            let growth = refined.map(|f| f / max_ratio - 1.0);
            let finite = max_ratio.is_finite() && refined.is_none_or(f64::is_finite);
            let stable = growth.is_none_or(|g| g < REFINEMENT_GROWTH);
            RegimeSummary { regime: tag, points, boundary_points, max_ratio, max_ratio_refined: refined, growth, pass: finite && stable }
        })
        .collect();
    regimes.sort_by_key(|r| r.regime);
    let pass = regimes.iter().all(|r| r.pass);
    Ok(KernelVerificationReport { n: space.n(), alpha, sigma, regimes, stability_skipped: single, samples, pass })
}

/// `[∫₀^∞ |k(r)|^{q/2} φ₀(r)(sinh r)^{n−1} dr]^{2/q}` with the part beyond
/// `r_max` bounded through `envelope ≥ |k|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KunzeSteinNorm {
    pub value: f64,
    pub err: f64,
    pub tail: f64,
}

pub fn kunze_stein_norm(
    space: &HyperbolicSpace,
    kernel: &(dyn Fn(f64) -> Result<C64> + Sync),
    envelope: &dyn Fn(f64) -> f64,
    q: f64,
    r_max: f64,
    tol: f64,
) -> Result<KunzeSteinNorm> {
    if !(q > 2.0) {
        return Err(Error::Domain(format!("the Kunze–Stein norm needs q > 2, got {q}")));
    }
    let p = q / 2.0;
    let body = |r: f64| -> Result<C64> { Ok(C64::new(kernel(r)?.norm().powf(p) * kunze_stein_weight(space, r)?, 0.0)) };
    let core = adaptive_gk(&body, 0.0, r_max, tol, 20)?;
    let tail = ks_tail(space, envelope, p, r_max, tol)?;
    if tail > tol {
        return Err(Error::Tail(format!("Kunze–Stein tail {tail:e} beyond r = {r_max} exceeds {tol:e}")));
    }
    let integral = core.value.re;
    if integral <= 0.0 {
        return Ok(KunzeSteinNorm { value: 0.0, err: core.err + tail, tail });
    }
    let value = integral.powf(1.0 / p);
    let err = value / p * (core.err + tail) / integral;
    Ok(KunzeSteinNorm { value, err, tail })
}

fn ks_tail(space: &HyperbolicSpace, envelope: &dyn Fn(f64) -> f64, p: f64, r_max: f64, tol: f64) -> Result<f64> {
    let decay = (p - 1.0) * space.rho();
    let span = 60.0 / decay.max(1e-3);
    let tail_fn = |r: f64| -> Result<C64> { Ok(C64::new(envelope(r).powf(p) * kunze_stein_weight(space, r)?, 0.0)) };
    Ok(adaptive_gk(&tail_fn, r_max, r_max + span, 1e-3 * tol.max(1e-300), 30)?.value.re)
}

/// Radial panel width of [`kernel_kunze_stein`].
const KS_PANEL: f64 = 1.0;

/// Kunze–Stein norm of `k_t^σ` itself: the kernel is evaluated on a fixed
/// composite Kronrod grid over `[0, r_max]` in one pass, each radius to the
/// accuracy its weighted contribution needs. Beyond `r_max` the envelope is
/// twice the largest observed `|k|/bound` on `[r_max/2, r_max]` times the bound.
/// `rel_tol` is relative to the norm.
pub fn kernel_kunze_stein(space: &HyperbolicSpace, alpha: f64, sigma: f64, t: f64, q: f64, r_max: f64, rel_tol: f64) -> Result<KunzeSteinNorm> {
    if !(q > 2.0) {
        return Err(Error::Domain(format!("the Kunze–Stein norm needs q > 2, got {q}")));
    }
    if !(r_max > 0.0) {
        return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
    }
    let p = q / 2.0;
    let decay = (p - 1.0) * space.rho();
    let panels = (r_max / KS_PANEL).ceil() as usize;
    let h = r_max / panels as f64;
    let radii: Vec<f64> = (0..panels).flat_map(|k| kronrod_nodes(k as f64 * h, (k + 1) as f64 * h)).collect();
    let bound_at = |r: f64| -> Result<f64> { Ok(theorem_bound(&KernelQuery::new(*space, alpha, sigma, t, r)?)?.bound) };
    let bounds = radii.iter().map(|&r| bound_at(r)).collect::<Result<Vec<_>>>()?;
    let tols: Vec<f64> = radii.iter().zip(&bounds).map(|(&r, &b)| b * (rel_tol * (decay * r).exp()).min(1e-2)).collect();
    let samples = kernel_profile(space, alpha, sigma, t, &radii, &tols)?;
    let mut integral = 0.0;
    let mut err = 0.0;
    for (k, chunk) in samples.chunks(15).enumerate() {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        let mut f = [C64::new(0.0, 0.0); 15];
        let mut df = [C64::new(0.0, 0.0); 15];
        for (i, s) in chunk.iter().enumerate() {
            let w = kunze_stein_weight(space, s.query.r)?;
            let m = s.value.norm();
            f[i] = C64::new(m.powf(p) * w, 0.0);
            df[i] = C64::new(p * m.powf(p - 1.0) * w * s.err_estimate, 0.0);
        }
        let (v, e, _) = kronrod_from_values(a, b, &f);
        integral += v.re;
        err += e + kronrod_from_values(a, b, &df).0.re;
    }
    let far = samples.iter().zip(&bounds).filter(|(s, _)| s.query.r >= 0.5 * r_max).fold(0.0f64, |m, (s, b)| m.max(s.value.norm() / b));
    let envelope = |r: f64| 2.0 * far * bound_at(r).unwrap_or(f64::INFINITY);
    let tail = ks_tail(space, &envelope, p, r_max, rel_tol * integral)?;
    if !(tail <= rel_tol * integral) {
        return Err(Error::Tail(format!("Kunze–Stein tail {tail:e} beyond r = {r_max} exceeds {:e}", rel_tol * integral)));
    }
    if integral <= 0.0 {
        return Ok(KunzeSteinNorm { value: 0.0, err: err + tail, tail });
    }
    let value = integral.powf(1.0 / p);
    Ok(KunzeSteinNorm { value, err: value / p * (err + tail) / integral, tail })
}

/// Check of `e^{itΨ} = −i/(αtλ) (λ²+ρ²)^{1−α/2} ∂_λ e^{itΨ}` with `Ψ = (λ²+ρ²)^{α/2}`
/// by central differences; `|λ| < 0.1` is skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbpDiagnostic {
    pub max_discrepancy: f64,
    pub skipped: usize,
}

pub fn ibp_diagnostic(alpha: f64, rho: f64, t: f64, lambdas: &[f64]) -> IbpDiagnostic {
    const STEP: f64 = 1e-5;
    let e = |l: f64| C64::from_polar(1.0, t * (l * l + rho * rho).powf(alpha / 2.0));
    let mut out = IbpDiagnostic { max_discrepancy: 0.0, skipped: 0 };
    for &l in lambdas {
        if l.abs() < 0.1 {
            out.skipped += 1;
            continue;
        }
        let deriv = (e(l + STEP) - e(l - STEP)) / (2.0 * STEP);
        let rhs = C64::new(0.0, -1.0) / (alpha * t * l) * (l * l + rho * rho).powf(1.0 - alpha / 2.0) * deriv;
        out.max_discrepancy = out.max_discrepancy.max((rhs - e(l)).norm());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h3() -> HyperbolicSpace {
        HyperbolicSpace::new(3).unwrap()
    }

    #[test]
    fn bound_examples() {
        let q = KernelQuery::new(h3(), 1.5, 0.75, 4.0, 2.0).unwrap();
        let b = theorem_bound(&q).unwrap();
        assert_eq!(b.regime, RegimeTag::S111);
        assert!((b.bound - 4f64.powf(-1.5) * 3.0 * (-2f64).exp()).abs() < 1e-15);

        let q = KernelQuery::new(h3(), 1.5, 0.75, 0.1, 0.2).unwrap();
        let b = theorem_bound(&q).unwrap();
        assert_eq!(b.regime, RegimeTag::S211);
        assert!((b.bound - 0.1f64.powf(-1.5)).abs() < 1e-12);

        let q = KernelQuery::new(h3(), 0.5, 2.25, 0.5, 0.9).unwrap();
        let b = theorem_bound(&q).unwrap();
        assert_eq!(b.regime, RegimeTag::S223);
        assert!((b.bound - 0.5f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_sigma() {
        let q = KernelQuery::new(h3(), 1.5, 2.0, 1.0, 1.0).unwrap();
        assert!(matches!(theorem_bound(&q), Err(Error::OutOfTheoremRange(_))));
        let q = KernelQuery::new(h3(), 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(theorem_bound(&q), Err(Error::OutOfTheoremRange(_))));
        assert!(matches!(KernelQuery::new(h3(), 1.0, 1.0, 1.0, 1.0), Err(Error::UnsupportedAlpha(_))));
    }

    #[test]
    fn boundaries_go_to_large_time() {
        let q = KernelQuery::new(h3(), 1.5, 0.75, 3.0, 3.0).unwrap();
        let b = theorem_bound(&q).unwrap();
        assert_eq!(b.regime, RegimeTag::S111);
        assert!(b.boundary);
        let q = KernelQuery::new(h3(), 1.5, 0.75, 0.25, 0.25f64.powf(1.0 / 1.5)).unwrap();
        let b = theorem_bound(&q).unwrap();
        assert_eq!(b.regime, RegimeTag::S211);
        assert!(b.boundary);
        let q = KernelQuery::new(h3(), 0.5, 2.25, 10.0, 1.0).unwrap();
        let b = theorem_bound(&q).unwrap();
        assert_eq!(b.regime, RegimeTag::S123);
        assert!(b.boundary);
    }

    #[test]
    fn decay_order() {
        assert_eq!(decay_order_n(3, 2.25), 2.0);
        assert_eq!(decay_order_n(3, 0.0), 3.0);
        assert_eq!(decay_order_n(7, 3.5), 2.0);
    }

    #[test]
    fn ibp_identity() {
        let d = ibp_diagnostic(1.5, 1.0, 2.0, &[1.0, 0.05, 3.0]);
        assert!(d.max_discrepancy <= 1e-7);
        assert_eq!(d.skipped, 1);
        assert!(ibp_diagnostic(0.5, 1.0, -3.0, &[2.0]).max_discrepancy <= 1e-7);
    }

    #[test]
    fn refined_grid() {
        let g = KernelGrid { t_values: vec![1.0, 4.0], r_values: vec![0.0, 1.0] };
        let f = g.refined();
        assert_eq!(f.t_values, vec![1.0, 2.0, 4.0]);
        assert_eq!(f.r_values, vec![0.0, 0.5, 1.0]);
    }
}
