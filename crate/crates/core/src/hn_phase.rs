//! The `H^n` phase `ψ_R(λ) = (λ² + ρ²)^{α/2} − Rλ`, its stationary points and
//! empirical checks of the comparability statements about `|ψ'|`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Phase parameters; `R = r/t` is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseParams {
    pub alpha: f64,
    pub rho: f64,
    #[serde(rename = "R")]
    pub r_ratio: f64,
}

impl PhaseParams {
    pub fn new(alpha: f64, rho: f64, r_ratio: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        if !(r_ratio >= 0.0) || !r_ratio.is_finite() {
            return Err(Error::Domain(format!("R must be finite and non-negative, got {r_ratio}")));
        }
        Ok(PhaseParams { alpha, rho, r_ratio })
    }

    pub fn with_r(&self, r_ratio: f64) -> Result<Self> {
        PhaseParams::new(self.alpha, self.rho, r_ratio)
    }

    fn base(&self, lambda: f64) -> f64 {
        lambda * lambda + self.rho * self.rho
    }
}

pub fn psi(p: &PhaseParams, lambda: f64) -> f64 {
    p.base(lambda).powf(p.alpha / 2.0) - p.r_ratio * lambda
}

pub fn dpsi(p: &PhaseParams, lambda: f64) -> f64 {
    theta(p, lambda) - p.r_ratio
}

pub fn d2psi(p: &PhaseParams, lambda: f64) -> f64 {
    let a = p.alpha;
    a * p.base(lambda).powf(a / 2.0 - 2.0) * ((a - 1.0) * lambda * lambda + p.rho * p.rho)
}

pub fn d3psi(p: &PhaseParams, lambda: f64) -> f64 {
    let a = p.alpha;
    a * (2.0 - a) * lambda * ((1.0 - a) * lambda * lambda - 3.0 * p.rho * p.rho) * p.base(lambda).powf(a / 2.0 - 3.0)
}

/// `θ(λ) = αλ(λ² + ρ²)^{α/2 − 1}`, so that `ψ' = θ − R`.
pub fn theta(p: &PhaseParams, lambda: f64) -> f64 {
    p.alpha * lambda * p.base(lambda).powf(p.alpha / 2.0 - 1.0)
}

/// Inflection point `λ₀ = ρ/√(1 − α)` of the phase for `α < 1`.
pub fn lambda0(p: &PhaseParams) -> Option<f64> {
    (p.alpha < 1.0).then(|| p.rho / (1.0 - p.alpha).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    SingleRootAlphaLarge,
    NoRoot,
    DegenerateRoot,
    TwoRoots,
    OriginOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub regime: Regime,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub theta0: Option<f64>,
    /// `|θ(λᵢ) − R|` for every reported stationary point.
    pub residuals: Vec<f64>,
}

/// Classification of `R` against `θ₀` counts as degenerate within this relative band.
pub const DEGENERATE_TOL: f64 = 1e-9;

/// Solve `θ(λ) = R` on `[lo, hi]`, where `θ − R` changes sign, by bisection
/// safeguarding Newton steps.
fn solve_theta(p: &PhaseParams, mut lo: f64, mut hi: f64) -> Result<f64> {
    let target = p.r_ratio;
    let f = |x: f64| theta(p, x) - target;
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!("no sign change of theta - R on [{lo}, {hi}]")));
    }
    let rising = fhi > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let slope = d2psi(p, x);
        let newton = x - fx / slope;
        let next = if slope != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            // pick the better of the two last iterates
            return Ok(if f(next).abs() < fx.abs() { next } else { x });
        }
        x = next;
    }
    let r = f(x).abs();
    if r <= 1e-10 {
        Ok(x)
    } else {
        Err(Error::Convergence(format!("stationary point polish stalled with residual {r:e}")))
    }
}

/// Stationary points of `ψ_R` on `λ ≥ 0` and the regime they define.
pub fn stationary_points(p: &PhaseParams) -> Result<PhaseReport> {
    let a = p.alpha;
    let big_r = p.r_ratio;
    if a == 1.0 {
        return Err(Error::UnsupportedAlpha(a));
    }
    if a > 1.0 {
        if big_r == 0.0 {
            return Ok(PhaseReport {
                regime: Regime::OriginOnly,
                lambda0: None,
                lambda1: Some(0.0),
                lambda2: None,
                theta0: None,
                residuals: vec![0.0],
            });
        }
        // θ is increasing; grow the bracket from the lemma's lower bound
        let mut hi = (big_r / a).powf(1.0 / (a - 1.0)).max(1.0);
        while theta(p, hi) < big_r {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Convergence("no bracket for the stationary point".into()));
            }
        }
        let l1 = solve_theta(p, 0.0, hi)?;
        return Ok(PhaseReport {
            regime: Regime::SingleRootAlphaLarge,
            lambda0: None,
            lambda1: Some(l1),
            lambda2: None,
            theta0: None,
            residuals: vec![(theta(p, l1) - big_r).abs()],
        });
    }
    let l0 = lambda0(p).expect("alpha < 1");
    let t0 = theta(p, l0);
    let mut report =
        PhaseReport { regime: Regime::OriginOnly, lambda0: Some(l0), lambda1: None, lambda2: None, theta0: Some(t0), residuals: Vec::new() };
    if big_r == 0.0 {
        report.lambda1 = Some(0.0);
        report.residuals.push(0.0);
    } else if (big_r - t0).abs() <= DEGENERATE_TOL * t0.max(1.0) {
        report.regime = Regime::DegenerateRoot;
        report.lambda1 = Some(l0);
        report.lambda2 = Some(l0);
        report.residuals.push((t0 - big_r).abs());
    } else if big_r > t0 {
        report.regime = Regime::NoRoot;
    } else {
        report.regime = Regime::TwoRoots;
        let l1 = solve_theta(p, 0.0, l0)?;
        let upper = 2.0 * (big_r / a).powf(-1.0 / (1.0 - a));
        let l2 = solve_theta(p, l0, upper.max(2.0 * l0))?;
        report.lambda1 = Some(l1);
        report.lambda2 = Some(l2);
        report.residuals = vec![(theta(p, l1) - big_r).abs(), (theta(p, l2) - big_r).abs()];
    }
    Ok(report)
}

/// Log-spaced grid of `|λ|` values for the comparability check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparabilityGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// Largest admissible `max/min` ratio of `|ψ'|/comparator`.
    pub band_cap: f64,
}

impl Default for ComparabilityGrid {
    fn default() -> Self {
        ComparabilityGrid { lambda_min: 1e-3, lambda_max: 1e4, points: 400, band_cap: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparabilityReport {
    pub comparator: String,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio` on the base grid.
    pub band: f64,
    /// The same band on the doubled grid.
    pub band_refined: f64,
    pub stable: bool,
    pub pass: bool,
    pub samples: usize,
}

type Comparator = Box<dyn Fn(f64) -> f64>;

struct ComparatorSetup {
    cmp: Comparator,
    label: String,
    /// Smallest sampled `λ`.
    start: f64,
    /// Excluded windows around stationary points.
    excl: Vec<(f64, f64)>,
    both_signs: bool,
}

fn setup(cmp: impl Fn(f64) -> f64 + 'static, label: &str, start: f64, excl: Vec<(f64, f64)>, both_signs: bool) -> ComparatorSetup {
    ComparatorSetup { cmp: Box::new(cmp), label: label.into(), start, excl, both_signs }
}

/// The comparator for the given regime, with its sampling range.
fn comparator_for(p: &PhaseParams, beta: f64) -> Result<ComparatorSetup> {
    let report = stationary_points(p)?;
    let a = p.alpha;
    match report.regime {
        Regime::SingleRootAlphaLarge | Regime::OriginOnly if a > 1.0 => {
            let l1 = report.lambda1.unwrap_or(0.0);
            let excl = if l1 > 0.0 { vec![(beta * l1, l1 / beta)] } else { Vec::new() };
            let cmp = move |l: f64| (l.abs() + l1) / (l.abs() + l1 + 1.0).powf(2.0 - a);
            Ok(setup(cmp, "(|λ|+λ₁)/(|λ|+λ₁+1)^(2−α)", 0.0, excl, true))
        }
        Regime::OriginOnly => {
            let cmp = move |l: f64| l.abs() * (l.abs() + 1.0).powf(-(2.0 - a));
            Ok(setup(cmp, "|λ|(|λ|+1)^(−(2−α))", 0.0, Vec::new(), true))
        }
        Regime::TwoRoots => {
            let l2 = report.lambda2.expect("two roots");
            let cmp = move |l: f64| l.min(l2).powf(-(1.0 - a));
            let start = report.lambda0.expect("alpha < 1");
            Ok(setup(cmp, "min(λ, λ₂)^(−(1−α))", start, vec![(beta * l2, l2 / beta)], false))
        }
        Regime::NoRoot => {
            let gap = p.r_ratio - report.theta0.expect("alpha < 1");
            Ok(setup(move |_| gap, "R − θ₀", 0.0, Vec::new(), true))
        }
        _ => Err(Error::Domain("comparability is not defined at the degenerate root".into())),
    }
}

fn band_on(p: &PhaseParams, cmp: &Comparator, lo: f64, hi: f64, points: usize, excl: &[(f64, f64)], both_signs: bool) -> (f64, f64, usize) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    let mut count = 0;
    for k in 0..points {
        let l = (llo + (lhi - llo) * k as f64 / (points - 1) as f64).exp();
        if excl.iter().any(|&(a, b)| l > a && l < b) {
            continue;
        }
        let signs: &[f64] = if both_signs { &[1.0, -1.0] } else { &[1.0] };
        for &s in signs {
            let ratio = dpsi(p, s * l).abs() / cmp(s * l);
            if ratio.is_finite() {
                min = min.min(ratio);
                max = max.max(ratio);
                count += 1;
            }
        }
    }
    (min, max, count)
}

/// Empirical band of `|ψ'(λ)|` against the lemma's comparator, off the
/// excluded window `(βλᵢ, λᵢ/β)` around the relevant stationary point.
pub fn verify_phase_comparability(p: &PhaseParams, beta: f64, grid: &ComparabilityGrid) -> Result<ComparabilityReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if grid.points < 2 || !(grid.lambda_min > 0.0 && grid.lambda_max > grid.lambda_min) {
        return Err(Error::Domain("comparability grid needs 0 < min < max and at least 2 points".into()));
    }
    let ComparatorSetup { cmp, label, start, excl, both_signs: both } = comparator_for(p, beta)?;
    let lo = grid.lambda_min.max(start);
    let (min, max, count) = band_on(p, &cmp, lo, grid.lambda_max, grid.points, &excl, both);
    let (min2, max2, _) = band_on(p, &cmp, lo, grid.lambda_max, 2 * grid.points - 1, &excl, both);
    if count == 0 {
        return Err(Error::Domain("comparability grid lies entirely in the excluded window".into()));
    }
    let band = max / min;
    let band_refined = max2 / min2;
    let stable = ((band_refined - band) / band).abs() < 0.1;
    Ok(ComparabilityReport {
        comparator: label,
        min_ratio: min,
        max_ratio: max,
        band,
        band_refined,
        stable,
        pass: stable && band <= grid.band_cap,
        samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_case() {
        let p = PhaseParams::new(2.0, 1.0, 3.0).unwrap();
        for l in [-2.0, 0.0, 0.7, 5.0] {
            assert!((dpsi(&p, l) - (2.0 * l - 3.0)).abs() < 1e-14);
        }
        let rep = stationary_points(&p).unwrap();
        assert!((rep.lambda1.unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn convex_for_large_alpha() {
        let p = PhaseParams::new(1.5, 1.0, 0.0).unwrap();
        assert!((0..=1000).all(|k| d2psi(&p, -50.0 + 0.1 * k as f64) > 0.0));
    }

    #[test]
    fn third_derivative_zeros() {
        let p = PhaseParams::new(0.5, 1.0, 0.0).unwrap();
        let l0 = lambda0(&p).unwrap();
        assert_eq!(d3psi(&p, 0.0), 0.0);
        assert!(d3psi(&p, 3f64.sqrt() * l0).abs() < 1e-15);
        assert!(d3psi(&p, -(3f64.sqrt()) * l0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for (a, rho, r) in [(0.4, 1.5, 0.1), (1.3, 0.5, 2.0), (1.9, 2.0, 0.0)] {
            let p = PhaseParams::new(a, rho, r).unwrap();
            for l in [-3.0, -0.2, 0.4, 2.5] {
                let h = 1e-5;
                let fd1 = (psi(&p, l + h) - psi(&p, l - h)) / (2.0 * h);
                let fd2 = (dpsi(&p, l + h) - dpsi(&p, l - h)) / (2.0 * h);
                let fd3 = (d2psi(&p, l + h) - d2psi(&p, l - h)) / (2.0 * h);
                assert!((fd1 - dpsi(&p, l)).abs() < 1e-8);
                assert!((fd2 - d2psi(&p, l)).abs() < 1e-8);
                assert!((fd3 - d3psi(&p, l)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn theta_properties() {
        let p = PhaseParams::new(1.5, 1.0, 0.0).unwrap();
        assert_eq!(theta(&p, 0.0), 0.0);
        for k in 1..=1000 {
            let l = 0.1 * k as f64;
            assert!(theta(&p, l) <= 1.5 * l.powf(0.5) + 1e-12);
            assert!((theta(&p, -l) + theta(&p, l)).abs() < 1e-14);
        }
        let q = PhaseParams::new(0.5, 1.0, 0.0).unwrap();
        for k in 0..=1000 {
            let l = 0.1 * k as f64;
            assert!(theta(&q, l) <= 0.5 * (l * l + 1.0).powf(-0.25) + 1e-15);
        }
    }

    #[test]
    fn inflection_point() {
        let p = PhaseParams::new(0.5, 1.0, 0.0).unwrap();
        assert!((lambda0(&p).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn single_root_lower_bound() {
        let p = PhaseParams::new(1.5, 1.0, 5.0).unwrap();
        let rep = stationary_points(&p).unwrap();
        let l1 = rep.lambda1.unwrap();
        assert!(l1 >= (5.0f64 / 1.5).powi(2));
        assert!((theta(&p, l1) - 5.0).abs() <= 1e-10);
    }

    #[test]
    fn no_root_gap() {
        let base = PhaseParams::new(0.5, 1.0, 0.0).unwrap();
        let t0 = stationary_points(&base).unwrap().theta0.unwrap();
        let p = base.with_r(2.0 * t0).unwrap();
        assert_eq!(stationary_points(&p).unwrap().regime, Regime::NoRoot);
        let min = (0..=20000).map(|k| dpsi(&p, -100.0 + 0.01 * k as f64).abs()).fold(f64::INFINITY, f64::min);
        assert!(min >= t0 - 1e-12);
    }

    #[test]
    fn degenerate_and_unsupported() {
        let base = PhaseParams::new(0.5, 1.0, 0.0).unwrap();
        let t0 = stationary_points(&base).unwrap().theta0.unwrap();
        let rep = stationary_points(&base.with_r(t0).unwrap()).unwrap();
        assert_eq!(rep.regime, Regime::DegenerateRoot);
        let p = PhaseParams::new(1.0, 1.0, 0.3).unwrap();
        assert!(matches!(stationary_points(&p), Err(Error::UnsupportedAlpha(_))));
        assert!(PhaseParams::new(2.5, 1.0, 0.0).is_err());
        assert!(PhaseParams::new(0.5, 1.0, -1.0).is_err());
    }
}
