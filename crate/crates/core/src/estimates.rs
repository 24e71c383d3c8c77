//! Exponent calculators, Strichartz admissibility predicates and log-log
//! decay fits.
//!
//! Closed edges of the admissible sets are tested with an absolute slack of
//! `EDGE_SLACK` so that exact boundary points survive floating-point rounding;
//! half-open edges are tested literally.

use serde::Serialize;

use crate::error::{Error, Result};

pub const EDGE_SLACK: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + EDGE_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MBranch {
    /// `2(n − σ)/α`, active for `σ ≥ (1 − α/2)n`.
    Dispersive,
    /// `(n − 2σ)/(α − 1)`, active for `σ ≤ (1 − α/2)n`.
    Smoothing,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MExponent {
    pub value: f64,
    pub branch: MBranch,
}

/// `m = max{2(n − σ)/α, (n − 2σ)/(α − 1)}` for `1 < α < 2`, `0 ≤ σ ≤ n/2`.
pub fn exponent_m(n: u32, alpha: f64, sigma: f64) -> Result<MExponent> {
    let nf = n as f64;
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("exponent m needs 1 < alpha < 2, got {alpha}")));
    }
    if !(0.0..=nf / 2.0).contains(&sigma) {
        return Err(Error::Domain(format!("sigma must lie in [0, n/2], got {sigma}")));
    }
    let a = 2.0 * (nf - sigma) / alpha;
    let b = (nf - 2.0 * sigma) / (alpha - 1.0);
    let threshold = (1.0 - alpha / 2.0) * nf;
    let branch = if (sigma - threshold).abs() <= 1e-12 * nf {
        MBranch::Tie
    } else if sigma > threshold {
        MBranch::Dispersive
    } else {
        MBranch::Smoothing
    };
    Ok(MExponent { value: a.max(b), branch })
}

/// A point `(1/p, 1/q, aux)` of an admissible region; `aux` is `σ` for
/// `α > 1`, `β` for `α < 1` and ignored on trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissiblePoint {
    pub inv_p: f64,
    pub inv_q: f64,
    pub aux: f64,
}

impl AdmissiblePoint {
    pub fn new(inv_p: f64, inv_q: f64, aux: f64) -> Self {
        AdmissiblePoint { inv_p, inv_q, aux }
    }
}

/// Membership in `R_α` for `1 < α < 2`:
/// `(1/p, 1/q, σ) ∈ (0, 1/2] × [0, 1/2) × [0, n/2]` with
/// `α/p + n/q ≥ (n − σ)/2` and `2(α − 1)/p + n/q ≥ (n − 2σ)/2`, together with
/// the isolated point `(0, 1/2, 0)`. Parameters outside `1 < α < 2` give `false`.
pub fn admissible_alpha_large(n: u32, alpha: f64, pt: AdmissiblePoint) -> bool {
    if !(alpha > 1.0 && alpha < 2.0) || n < 2 {
        return false;
    }
    let nf = n as f64;
    let AdmissiblePoint { inv_p, inv_q, aux: sigma } = pt;
    if inv_p == 0.0 && inv_q == 0.5 && sigma == 0.0 {
        return true;
    }
    let in_box = inv_p > 0.0 && le(inv_p, 0.5) && (0.0..0.5).contains(&inv_q) && sigma >= 0.0 && le(sigma, nf / 2.0);
    in_box && le((nf - sigma) / 2.0, alpha * inv_p + nf * inv_q) && le((nf - 2.0 * sigma) / 2.0, 2.0 * (alpha - 1.0) * inv_p + nf * inv_q)
}

/// `σ(β, q) = (1/2 − 1/q)(1 − β/2) n`.
pub fn sigma_of(n: u32, beta: f64, inv_q: f64) -> f64 {
    (0.5 - inv_q) * (1.0 - beta / 2.0) * n as f64
}

/// `α̂ = 6α/((2 − α)n + 3α)`, the effective upper end of the `β` range.
pub fn hat_alpha(n: u32, alpha: f64) -> f64 {
    6.0 * alpha / ((2.0 - alpha) * n as f64 + 3.0 * alpha)
}

/// `1/Q₁ = 1/2 − (1/3)(2 − α)/(2 − β)`; returns `Q₁`.
pub fn q1(alpha: f64, beta: f64) -> f64 {
    1.0 / (0.5 - (2.0 - alpha) / (3.0 * (2.0 - beta)))
}

/// `1/Q₂ = 1/2 − (1/2)(2 − α)/(2 − β)`; returns `Q₂` (infinite when `β = α`).
pub fn q2(alpha: f64, beta: f64) -> f64 {
    1.0 / (0.5 - (2.0 - alpha) / (2.0 * (2.0 - beta)))
}

/// Membership in `R_α` for `0 < α < 1`, `n ≥ 3`:
/// `(1/p, 1/q, β) ∈ [0, 1/2]² × [0, α]` with
/// `(1/2 − 1/q)(β/α)(n/2) ≤ 1/p ≤ (1/2 − 1/q)((2 − β)/(2 − α))(3/2)`,
/// all edges closed, minus the point `(1/2, 0, 2α/n)`.
pub fn admissible_alpha_small(n: u32, alpha: f64, pt: AdmissiblePoint) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("this region needs 0 < alpha < 1, got {alpha}")));
    }
    match n {
        0 | 1 => return Err(Error::Domain(format!("dimension must be at least 2, got {n}"))),
        2 => return Err(Error::Unimplemented("the two-dimensional small-alpha region has no fully specified edge convention".into())),
        _ => {}
    }
    let nf = n as f64;
    let AdmissiblePoint { inv_p, inv_q, aux: beta } = pt;
    let excluded = (inv_p - 0.5).abs() <= EDGE_SLACK && inv_q.abs() <= EDGE_SLACK && (beta - 2.0 * alpha / nf).abs() <= EDGE_SLACK;
    if excluded {
        return Ok(false);
    }
    let in_box = inv_p >= -EDGE_SLACK && le(inv_p, 0.5) && inv_q >= -EDGE_SLACK && le(inv_q, 0.5) && beta >= -EDGE_SLACK && le(beta, alpha);
    let gap = 0.5 - inv_q;
    let lower = gap * (beta / alpha) * (nf / 2.0);
    let upper = gap * ((2.0 - beta) / (2.0 - alpha)) * 1.5;
    Ok(in_box && le(lower, inv_p) && le(inv_p, upper))
}

/// Membership in the tree square `[0, 1/2] × [0, 1/2) ∪ {(0, 1/2)}`.
pub fn admissible_tree(pt: AdmissiblePoint) -> bool {
    let AdmissiblePoint { inv_p, inv_q, .. } = pt;
    if inv_p == 0.0 && inv_q == 0.5 {
        return true;
    }
    (0.0..=0.5).contains(&inv_p) && (0.0..0.5).contains(&inv_q)
}

/// Least-squares line through `(log t, log |value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// A fit is conclusive with `r² ≥ 0.95` over at least one decade.
pub const CONCLUSIVE_R2: f64 = 0.95;

impl DecayFit {
    pub fn is_conclusive(&self) -> bool {
        self.r2 >= CONCLUSIVE_R2 && self.window.1 >= 10.0 * self.window.0
    }
}

/// Fit `log magnitude = slope · log t + intercept` over the samples with `t` in `window`.
pub fn fit_decay(samples: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(t, m)) in samples.iter().enumerate() {
        if !(t >= window.0 && t <= window.1) {
            continue;
        }
        if !(m > 0.0) || t <= 0.0 {
            return Err(Error::NonPositiveMagnitude(i));
        }
        xs.push(t.ln());
        ys.push(m.ln());
    }
    let k = xs.len();
    if k < 4 {
        return Err(Error::InsufficientData(format!("{k} samples in the window, at least 4 needed")));
    }
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all samples share one abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(DecayFit { slope, intercept, r2, window, n_points: k })
}
