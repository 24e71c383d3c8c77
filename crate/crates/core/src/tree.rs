//! Harmonic analysis on the homogeneous tree `T_Q`: spectral constants,
//! c-function, spherical functions, the Schrödinger kernel as a circle
//! integral, its stationary-phase structure and the decay checks built on it.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::{fit_decay, DecayFit};
use crate::oscquad::{integrate_circle_with, Domain, OscProblem, QuadConfig};

/// Branching data of `T_Q` (every vertex has `Q + 1` neighbours).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tree {
    q: u32,
    tau: f64,
    gamma0: f64,
    constant: C64,
}

impl Tree {
    /// Builds the tree descriptor and checks that the kernel normalization
    /// reproduces the identity at `t = 0`.
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::Domain(format!("branching number must be at least 2, got {q}")));
        }
        let qf = q as f64;
        let mut tree = Tree { q, tau: 2.0 * PI / qf.ln(), gamma0: 2.0 / (qf.sqrt() + 1.0 / qf.sqrt()), constant: C64::new(1.0, 0.0) };
        let raw = tree_kernel(&tree, 1.0, 0.0, 0, 1e-13)?.value;
        tree.constant = raw.inv();
        tree.identity_self_test()?;
        Ok(tree)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Normalization of the circle integral, fixed by `k_0(0) = 1`; it comes out as `i√Q/π`.
    pub fn kernel_constant(&self) -> C64 {
        self.constant
    }

    fn identity_self_test(&self) -> Result<()> {
        for r in 0..=8u32 {
            let k = tree_kernel(self, 1.0, 0.0, r, 1e-13)?;
            let expected = if r == 0 { 1.0 } else { 0.0 };
            if (k.value - expected).norm() > 1e-12 {
                return Err(Error::Calibration(format!("k_0({r}) = {} instead of {expected}", k.value)));
            }
        }
        Ok(())
    }
}

/// `γ(λ) = (Q^{iλ} + Q^{−iλ})/(Q^{1/2} + Q^{−1/2}) = γ₀ cos(λ ln Q)`.
pub fn tree_gamma(tree: &Tree, lambda: f64) -> f64 {
    tree.gamma0 * (lambda * (tree.q as f64).ln()).cos()
}

/// `c(λ) = (Q^{1/2+iλ} − Q^{−1/2−iλ}) / ((Q^{1/2} + Q^{−1/2})(Q^{iλ} − Q^{−iλ}))`.
pub fn tree_c(tree: &Tree, lambda: f64) -> Result<C64> {
    let lq = (tree.q as f64).ln();
    let s = (tree.q as f64).sqrt();
    let e = C64::from_polar(1.0, lambda * lq);
    let den = e - e.inv();
    if den.norm() <= 1e-15 {
        return Err(Error::Pole(format!("tree c-function at lambda = {lambda}")));
    }
    Ok((e * s - e.inv() / s) / (den * (s + 1.0 / s)))
}

/// A tree spherical function value; `extended` marks values at c-function
/// poles filled in by symmetric averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeSphericalValue {
    pub value: C64,
    pub extended: bool,
}

const POLE_OFFSET: f64 = 1e-6;

/// `φ_λ(r) = c(λ)Q^{(−1/2+iλ)r} + c(−λ)Q^{(−1/2−iλ)r}`.
pub fn tree_phi(tree: &Tree, lambda: f64, r: u32) -> TreeSphericalValue {
    let eval = |l: f64| -> Result<C64> {
        let lq = (tree.q as f64).ln();
        let decay = (tree.q as f64).powf(-0.5 * r as f64);
        let w = C64::from_polar(decay, l * lq * r as f64);
        Ok(tree_c(tree, l)? * w + tree_c(tree, -l)? * w.conj())
    };
    match eval(lambda) {
        Ok(v) => TreeSphericalValue { value: v, extended: false },
        Err(_) => {
            let a = eval(lambda + POLE_OFFSET).expect("offset clears the pole");
            let b = eval(lambda - POLE_OFFSET).expect("offset clears the pole");
            TreeSphericalValue { value: (a + b) * 0.5, extended: true }
        }
    }
}

/// Number of vertices at distance `r` from a fixed vertex: 1, then `(Q + 1)Q^{r−1}`.
pub fn sphere_size(tree: &Tree, r: u32) -> u128 {
    if r == 0 {
        1
    } else {
        (tree.q as u128 + 1).saturating_mul((tree.q as u128).saturating_pow(r - 1))
    }
}

pub(crate) fn sphere_size_f64(tree: &Tree, r: u32) -> f64 {
    if r == 0 {
        1.0
    } else {
        (tree.q as f64 + 1.0) * (tree.q as f64).powi(r as i32 - 1)
    }
}

/// `ψ(λ) = (1 − γ₀ cos λ)^{α/2}`.
pub fn tree_psi(tree: &Tree, alpha: f64, lambda: f64) -> f64 {
    (1.0 - tree.gamma0 * lambda.cos()).powf(alpha / 2.0)
}

pub fn tree_dpsi(tree: &Tree, alpha: f64, lambda: f64) -> f64 {
    let g = tree.gamma0;
    0.5 * alpha * g * (1.0 - g * lambda.cos()).powf(alpha / 2.0 - 1.0) * lambda.sin()
}

/// `θ(λ) = −(α/2)γ₀cos²λ + cos λ − (1 − α/2)γ₀`, whose zero in `(0, π/2]` is the maximum of `ψ'`.
pub fn tree_theta(tree: &Tree, alpha: f64, lambda: f64) -> f64 {
    let (g, c) = (tree.gamma0, lambda.cos());
    -0.5 * alpha * g * c * c + c - (1.0 - 0.5 * alpha) * g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreeCase {
    NoStationary,
    OneStationary,
    TwoStationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreePhaseReport {
    /// `M = max ψ' = ψ'(λ₀)`.
    #[serde(rename = "M")]
    pub m_max: f64,
    pub lambda0: f64,
    pub case: TreeCase,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo.abs() <= 1e-14 {
        return Ok(lo);
    }
    if fhi.abs() <= 1e-14 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stationary points of `tψ(λ) − rλ` on `[0, π]`.
pub fn tree_phase_report(tree: &Tree, alpha: f64, t: f64, r: f64) -> Result<TreePhaseReport> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(t > 0.0) || !(r >= 0.0) {
        return Err(Error::Domain(format!("need t > 0 and r >= 0, got t = {t}, r = {r}")));
    }
    let lambda0 = bisect(|l| tree_theta(tree, alpha, l), 0.0, FRAC_PI_2)?;
    let m_max = tree_dpsi(tree, alpha, lambda0);
    let mu = r / t;
    let mut report = TreePhaseReport { m_max, lambda0, case: TreeCase::NoStationary, lambda1: None, lambda2: None };
    if (mu - m_max).abs() <= 1e-9 * m_max {
        report.case = TreeCase::OneStationary;
        report.lambda1 = Some(lambda0);
        report.lambda2 = Some(lambda0);
    } else if mu < m_max {
        report.case = TreeCase::TwoStationary;
        let f = |l: f64| tree_dpsi(tree, alpha, l) - mu;
        report.lambda1 = Some(if mu == 0.0 { 0.0 } else { bisect(f, 0.0, lambda0)? });
        report.lambda2 = Some(if mu == 0.0 { PI } else { bisect(f, lambda0, PI)? });
    }
    Ok(report)
}

/// One kernel value `k_t(r)` with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeKernelSample {
    pub t: f64,
    pub r: u32,
    pub value: C64,
    pub err: f64,
}

/// `sin λ / (Q^{1/2}e^{iλ} − Q^{−1/2}e^{−iλ})`.
fn kernel_amplitude(tree: &Tree, lambda: f64) -> C64 {
    let s = (tree.q as f64).sqrt();
    let e = C64::from_polar(1.0, lambda);
    C64::new(lambda.sin(), 0.0) / (e * s - e.conj() / s)
}

fn min_nodes(tree: &Tree, alpha: f64, t: f64, r_max: u32) -> usize {
    let m = tree_phase_report(tree, alpha, 1.0, 0.0).map(|p| p.m_max).unwrap_or(1.0);
    (2.0 * (t.abs() * m + r_max as f64)) as usize + 64
}

/// `k_t(r) = C Q^{−r/2} ∮ sin λ/(Q^{1/2}e^{iλ} − Q^{−1/2}e^{−iλ}) e^{itψ(λ)} e^{−irλ} dλ`
/// by the periodic trapezoid rule. `tol` bounds the error of the integral
/// before the factor `C Q^{−r/2}`.
pub fn tree_kernel(tree: &Tree, alpha: f64, t: f64, r: u32, tol: f64) -> Result<TreeKernelSample> {
    let amp = |l: f64| -> Result<C64> { Ok(kernel_amplitude(tree, l)) };
    let rf = r as f64;
    let phase = move |l: f64| t * tree_psi(tree, alpha, l) - rf * l;
    let prob = OscProblem::new(&amp, &phase, Domain::Circle(2.0 * PI));
    let cfg = QuadConfig { min_circle_nodes: min_nodes(tree, alpha, t, r), ..QuadConfig::default() };
    let res = integrate_circle_with(&prob, tol, &cfg)?;
    if !res.converged {
        return Err(Error::NonConvergence(format!("tree kernel at t = {t}, r = {r}: estimate {:e}", res.err_estimate)));
    }
    let scale = tree.kernel_constant() * (tree.q as f64).powf(-0.5 * rf);
    Ok(TreeKernelSample { t, r, value: res.value * scale, err: res.err_estimate * scale.norm() })
}

/// `k_t(r)` for all `0 ≤ r ≤ r_max` from one node set (a direct DFT of the
/// sampled integrand), with node doubling until two successive refinements
/// agree to `tol` for every `r`.
pub fn tree_kernel_profile(tree: &Tree, alpha: f64, t: f64, r_max: u32, tol: f64) -> Result<Vec<TreeKernelSample>> {
    let nr = r_max as usize + 1;
    let dft = |n: usize| -> Vec<C64> {
        let h = 2.0 * PI / n as f64;
        const CHUNK: usize = 256;
        let parts: Vec<Vec<C64>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![C64::new(0.0, 0.0); nr];
                for j in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let l = j as f64 * h;
                    let g = kernel_amplitude(tree, l) * C64::from_polar(1.0, t * tree_psi(tree, alpha, l));
                    let w = C64::from_polar(1.0, -l);
                    let mut p = g;
                    for a in acc.iter_mut() {
                        *a += p;
                        p *= w;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); nr];
        for p in parts {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out.into_iter().map(|v| v * h).collect()
    };
    let mut n = min_nodes(tree, alpha, t, r_max).next_power_of_two();
    let mut prev = dft(n);
    let mut streak = 0;
    loop {
        n *= 2;
        let cur = dft(n);
        let diffs: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm()).collect();
        let worst = diffs.iter().cloned().fold(0.0, f64::max);
        streak = if worst < tol { streak + 1 } else { 0 };
        if streak >= 2 {
            let c = tree.kernel_constant();
            return Ok(cur
                .iter()
                .zip(&diffs)
                .enumerate()
                .map(|(r, (v, d))| {
                    let scale = c * (tree.q as f64).powf(-0.5 * r as f64);
                    TreeKernelSample { t, r: r as u32, value: v * scale, err: d.max(1e-16) * scale.norm() }
                })
                .collect());
        }
        if n > 1 << 22 {
            return Err(Error::NonConvergence(format!("tree kernel profile at t = {t}: worst change {worst:e}")));
        }
        prev = cur;
    }
}

/// Radius beyond which `k_t` is negligible: the light cone `Mt` plus a margin.
pub fn light_cone_radius(tree: &Tree, alpha: f64, t: f64) -> Result<u32> {
    let m = tree_phase_report(tree, alpha, 1.0, 0.0)?.m_max;
    Ok((m * t.abs() + 10.0 * t.abs().cbrt() + 40.0).ceil() as u32)
}

/// `ℓ^q` norm on the tree of a radial function and a bound on the part of
/// `norm^q` beyond the supplied radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LqNorm {
    pub value: f64,
    pub tail: f64,
}

/// `(Σ_r |S_r| |k(r)|^q)^{1/q}` over the supplied radii. The tail beyond
/// `r_max` assumes `|k(r)| ≤ C₁Q^{−r/2}`, with `C₁` read off the upper half of
/// the supplied range, and is summed as a geometric series; it must stay
/// below `tol` relative to `norm^q`.
pub fn tree_lq_norm(tree: &Tree, values: &[C64], q: f64, tol: f64) -> Result<LqNorm> {
    if !(q > 2.0) {
        return Err(Error::Tail(format!("the geometric tail diverges for q = {q} <= 2")));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("no kernel values".into()));
    }
    let qf = tree.q as f64;
    let r_max = values.len() - 1;
    let sum: f64 = values.iter().enumerate().map(|(r, v)| sphere_size_f64(tree, r as u32) * v.norm().powf(q)).sum();
    let start = if r_max == 0 { 0 } else { r_max / 2 + 1 };
    let c1 = values[start..].iter().enumerate().map(|(k, v)| v.norm() * qf.powf(0.5 * (start + k) as f64)).fold(0.0, f64::max);
    let x = qf.powf(1.0 - q / 2.0);
    let tail = c1.powf(q) * (qf + 1.0) / qf * x.powi(r_max as i32 + 1) / (1.0 - x);
    if tail > tol * sum.max(f64::MIN_POSITIVE) {
        return Err(Error::Tail(format!("tail {tail:e} exceeds {tol:e} of the sum {sum:e}")));
    }
    Ok(LqNorm { value: sum.powf(1.0 / q), tail })
}

/// `Σ_r |S_r| |k(r)|²`, the `ℓ²` mass of a radial function.
pub fn tree_l2_mass(tree: &Tree, values: &[C64]) -> f64 {
    values.iter().enumerate().map(|(r, v)| sphere_size_f64(tree, r as u32) * v.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LqFit {
    pub q: f64,
    /// `‖k_t‖_{ℓ^q}` on the time grid.
    pub values: Vec<f64>,
    pub fit: DecayFit,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeVerificationReport {
    #[serde(rename = "Q")]
    pub q: u32,
    pub alpha: f64,
    /// The constant `c` of the cone `1 + r ≤ ct` (chosen as `M/2`).
    pub cone_constant: f64,
    pub t_grid: Vec<f64>,
    /// `sup_{r ≤ ct} |k_t(r)| Q^{r/2}/(1 + r)` per time.
    pub cone_sup: Vec<f64>,
    pub cone_fit: DecayFit,
    pub cone_pass: bool,
    pub lq: Vec<LqFit>,
    /// `max |k_t(r)| Q^{r/2}` on the grid and on the grid with midpoints added.
    pub uniform_c1: f64,
    pub uniform_c1_refined: f64,
    pub uniform_pass: bool,
    /// `max |Σ_r |S_r||k_t(r)|² − 1|` over the grid.
    pub mass_defect: f64,
    pub slope_threshold: f64,
    pub pass: bool,
}

/// Fitted decay slopes must not exceed this (theorem exponent `−3/2` with tolerance 0.15).
pub const SLOPE_THRESHOLD: f64 = -1.35;
pub const LQ_EXPONENTS: [f64; 3] = [3.0, 4.0, 6.0];

struct TimeSlice {
    cone_sup: f64,
    c1: f64,
    lq: Vec<f64>,
    mass: f64,
}

fn time_slice(tree: &Tree, alpha: f64, t: f64, cone: f64, tol: f64) -> Result<TimeSlice> {
    let r_max = light_cone_radius(tree, alpha, t)?;
    let prof = tree_kernel_profile(tree, alpha, t, r_max, tol)?;
    let values: Vec<C64> = prof.iter().map(|s| s.value).collect();
    let qf = tree.q as f64;
    let scaled = |r: usize| values[r].norm() * qf.powf(0.5 * r as f64);
    let cone_sup = (0..=r_max as usize).filter(|&r| 1.0 + r as f64 <= cone * t).map(|r| scaled(r) / (1.0 + r as f64)).fold(0.0, f64::max);
    let c1 = (0..=r_max as usize).map(scaled).fold(0.0, f64::max);
    let lq = LQ_EXPONENTS.iter().map(|&q| tree_lq_norm(tree, &values, q, 1e-6).map(|n| n.value)).collect::<Result<Vec<_>>>()?;
    Ok(TimeSlice { cone_sup, c1, lq, mass: tree_l2_mass(tree, &values) })
}

/// Decay checks of the tree kernel on a time grid with `t ≥ 1` spanning a decade.
pub fn verify_tree_estimates(tree: &Tree, alpha: f64, t_grid: &[f64], tol: f64) -> Result<TreeVerificationReport> {
    if t_grid.len() < 4 || t_grid.iter().any(|&t| t < 1.0) {
        return Err(Error::InsufficientData("need at least 4 times, all >= 1".into()));
    }
    let (tmin, tmax) = t_grid.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if tmax < 10.0 * tmin {
        return Err(Error::InsufficientData("the time grid must span at least one decade".into()));
    }
    let cone = 0.5 * tree_phase_report(tree, alpha, 1.0, 0.0)?.m_max;
    let slices = t_grid.iter().map(|&t| time_slice(tree, alpha, t, cone, tol)).collect::<Result<Vec<_>>>()?;
    let mut mids = Vec::new();
    for w in t_grid.windows(2) {
        let t = (w[0] * w[1]).sqrt();
        mids.push(time_slice(tree, alpha, t, cone, tol)?.c1);
    }
    let window = (tmin, tmax);
    let cone_samples: Vec<(f64, f64)> = t_grid.iter().zip(&slices).map(|(&t, s)| (t, s.cone_sup)).collect();
    let cone_fit = fit_decay(&cone_samples, window)?;
    let cone_pass = cone_fit.slope <= SLOPE_THRESHOLD;
    let lq = LQ_EXPONENTS
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let samples: Vec<(f64, f64)> = t_grid.iter().zip(&slices).map(|(&t, s)| (t, s.lq[k])).collect();
            fit_decay(&samples, window).map(|fit| LqFit { q, values: samples.iter().map(|s| s.1).collect(), pass: fit.slope <= SLOPE_THRESHOLD, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    let uniform_c1 = slices.iter().map(|s| s.c1).fold(0.0, f64::max);
    let uniform_c1_refined = mids.iter().cloned().fold(uniform_c1, f64::max);
    let uniform_pass = uniform_c1.is_finite() && uniform_c1_refined <= 1.1 * uniform_c1;
    let mass_defect = slices.iter().map(|s| (s.mass - 1.0).abs()).fold(0.0, f64::max);
    let pass = cone_pass && uniform_pass && lq.iter().all(|l| l.pass);
    Ok(TreeVerificationReport {
        q: tree.q,
        alpha,
        cone_constant: cone,
        t_grid: t_grid.to_vec(),
        cone_sup: slices.iter().map(|s| s.cone_sup).collect(),
        cone_fit,
        cone_pass,
        lq,
        uniform_c1,
        uniform_c1_refined,
        uniform_pass,
        mass_defect,
        slope_threshold: SLOPE_THRESHOLD,
        pass,
    })
}
