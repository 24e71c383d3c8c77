use num_complex::Complex64 as C64;

use super::{c_function, HyperbolicSpace, Method, SphericalValue};
use crate::error::{Error, Result};
use crate::specfun::gauss_2f1;

/// Beyond this value of `λ/cosh² r` the transformed series is known to cancel
/// past the limit below, so it is not attempted.
const DIRECT_EXPONENTIAL: f64 = 20.0;

/// Above this ratio of largest series term to the sum, the hypergeometric
/// series has lost too many digits and the coefficient recursion takes over.
const CANCELLATION_LIMIT: f64 = 1e3;

/// `φ_λ(r) = c(λ)Φ_λ(r) + c(−λ)Φ_{−λ}(r)` for real `λ ≠ 0` and `r ≥ r0`.
pub fn phi_large(space: &HyperbolicSpace, lambda: f64, r: f64, r0: f64) -> Result<SphericalValue> {
    if lambda == 0.0 {
        return Err(Error::Pole("large-scale expansion at lambda = 0".into()));
    }
    if !(r >= r0) || !r.is_finite() {
        return Err(Error::Convergence(format!("large-scale expansion needs r >= {r0}, got {r}")));
    }
    let l = lambda.abs();
    let c = c_function(space, C64::new(l, 0.0))?;
    let (big_phi, err_phi) = harish_chandra_series(space, l, r)?;
    // for real λ the two halves are complex conjugates
    let value = 2.0 * (c * big_phi).re;
    let err = 2.0 * c.norm() * (err_phi + 4.0 * f64::EPSILON * big_phi.norm());
    Ok(SphericalValue { lambda, r, value: C64::new(value, 0.0), method: Method::LargeScaleSeries, err_estimate: err })
}

/// The Harish-Chandra function `Φ_λ(r) ~ e^{(iλ−ρ)r}` and an absolute error bound.
///
/// The hypergeometric representation is evaluated after a Pfaff
/// transformation to the argument `1/cosh² r`, which converges for every
/// `r > 0`. When that series cancels badly (large `λ/cosh² r`), the expansion
/// in powers of `e^{−2r}` is summed instead.
pub fn harish_chandra_series(space: &HyperbolicSpace, lambda: f64, r: f64) -> Result<(C64, f64)> {
    if r <= 0.0 {
        return Err(Error::Convergence(format!("Harish-Chandra series diverges at r = {r}")));
    }
    let rho = space.rho();
    let il = C64::new(0.0, lambda);
    let q = (-2.0 * r).exp();
    let a = (C64::new(rho, 0.0) - il) * 0.5;
    let b = (C64::new(rho + 1.0, 0.0) - il) * 0.5;
    let c = C64::new(1.0, 0.0) - il;
    let w = 1.0 / (r.cosh() * r.cosh());
    if lambda.abs() * w > DIRECT_EXPONENTIAL {
        return exponential_series(rho, lambda, r);
    }
    if let Ok(h) = gauss_2f1(a, b, c, w) {
        if h.value.norm() > 0.0 && h.max_term / h.value.norm() < CANCELLATION_LIMIT {
            let ln_2sinh = r + (-q).ln_1p();
            let ln_coth = q.ln_1p() - (-q).ln_1p();
            let pre = ((il - rho) * ln_2sinh - 2.0 * a * ln_coth).exp();
            let err = pre.norm() * (h.truncation_bound + 8.0 * f64::EPSILON * h.max_term);
            return Ok((pre * h.value, err));
        }
    }
    exponential_series(rho, lambda, r)
}

/// `e^{(iλ−ρ)r} Σ_ℓ Γ_ℓ(λ) e^{−2ℓr}` with `Γ_0 = 1` and
/// `ℓ(ℓ − iλ)Γ_ℓ = ρ Σ_{j<ℓ} (ρ + 2j − iλ)Γ_j`.
fn exponential_series(rho: f64, lambda: f64, r: f64) -> Result<(C64, f64)> {
    let il = C64::new(0.0, lambda);
    let q = (-2.0 * r).exp();
    let mut running = C64::new(rho, 0.0) - il;
    let mut sum = C64::new(1.0, 0.0);
    let mut qpow = 1.0;
    let mut small = 0;
    let mut last = 0.0;
    for l in 1..20_000usize {
        let lf = l as f64;
        let gamma_l = running * rho / (lf * (C64::new(lf, 0.0) - il));
        running += (C64::new(rho + 2.0 * lf, 0.0) - il) * gamma_l;
        qpow *= q;
        let term = gamma_l * qpow;
        sum += term;
        last = term.norm();
        if last <= 1e-17 * sum.norm() {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    if small < 3 {
        return Err(Error::Convergence(format!("exponential series stalled at r = {r}, lambda = {lambda}")));
    }
    let pre = ((il - rho) * r).exp();
    let err = pre.norm() * (4.0 * last / (1.0 - q) + 4.0 * f64::EPSILON * sum.norm());
    Ok((pre * sum, err))
}

/// The coefficients `Γ_ℓ(λ)` of the `e^{−2ℓr}` expansion at one `λ`, kept to
/// the length needed for every `r ≥ r_min`, so `Φ_λ` at many radii costs
/// one short sum each.
#[derive(Debug, Clone)]
pub struct HarishChandraExpansion {
    rho: f64,
    lambda: f64,
    coeffs: Vec<C64>,
}

impl HarishChandraExpansion {
    pub fn new(space: &HyperbolicSpace, lambda: f64, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::Convergence(format!("expansion needs r_min > 0, got {r_min}")));
        }
        let rho = space.rho();
        let il = C64::new(0.0, lambda);
        let q = (-2.0 * r_min).exp();
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        let mut running = C64::new(rho, 0.0) - il;
        let mut largest = 1.0f64;
        let mut qpow = 1.0;
        let mut small = 0;
        for l in 1..20_000usize {
            let lf = l as f64;
            let gamma_l = running * rho / (lf * (C64::new(lf, 0.0) - il));
            running += (C64::new(rho + 2.0 * lf, 0.0) - il) * gamma_l;
            coeffs.push(gamma_l);
            qpow *= q;
            let term = gamma_l.norm() * qpow;
            largest = largest.max(term);
            if term <= 1e-18 * largest {
                small += 1;
                if small >= 3 {
                    return Ok(HarishChandraExpansion { rho, lambda, coeffs });
                }
            } else {
                small = 0;
            }
        }
        Err(Error::Convergence(format!("coefficient expansion too long at r = {r_min}, lambda = {lambda}")))
    }

    /// `Φ_λ(r)` and an absolute error bound; `r` must be at least the `r_min` used.
    pub fn eval(&self, r: f64) -> (C64, f64) {
        let q = (-2.0 * r).exp();
        let mut sum = C64::new(0.0, 0.0);
        let mut qpow = 1.0;
        let mut small = 0;
        let mut last = 0.0;
        for g in &self.coeffs {
            let term = g * qpow;
            sum += term;
            last = term.norm();
            if last <= 1e-17 * sum.norm() {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
            qpow *= q;
        }
        let pre = (C64::new(-self.rho, self.lambda) * r).exp();
        let err = pre.norm() * (4.0 * last / (1.0 - q) + 4.0 * f64::EPSILON * sum.norm());
        (pre * sum, err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_dimensional_closed_form() {
        let s = HyperbolicSpace::new(3).unwrap();
        for (l, r) in [(1.0f64, 0.5f64), (2.0, 3.0), (0.2, 8.0), (50.0, 0.7), (300.0, 0.5), (2.0e4, 0.5), (30.0, 0.6)] {
            let v = phi_large(&s, l, r, 0.5).unwrap();
            let exact = (l * r).sin() / (l * r.sinh());
            assert!((v.value.re - exact).abs() < 1e-12, "({l},{r}): {} vs {exact}", v.value.re);
        }
    }

    #[test]
    fn series_forms_agree() {
        for n in [2, 3, 4, 6] {
            let s = HyperbolicSpace::new(n).unwrap();
            for (l, r) in [(0.3, 0.6), (1.0, 1.0), (2.5, 2.0), (4.0, 4.0)] {
                let (h, _) = harish_chandra_series(&s, l, r).unwrap();
                let (e, _) = exponential_series(s.rho(), l, r).unwrap();
                assert!((h - e).norm() < 1e-12 * h.norm().max(1e-300), "n={n} ({l},{r})");
            }
        }
    }

    #[test]
    fn shared_expansion_matches_series() {
        for n in [2, 3, 5] {
            let s = HyperbolicSpace::new(n).unwrap();
            for l in [0.05, 1.0, 7.5, 300.0] {
                let e = HarishChandraExpansion::new(&s, l, 0.5).unwrap();
                for r in [0.5, 0.9, 2.0, 6.0, 15.0] {
                    let (h, _) = harish_chandra_series(&s, l, r).unwrap();
                    assert!((e.eval(r).0 - h).norm() < 1e-12 * h.norm(), "n={n} ({l},{r})");
                }
            }
        }
    }

    #[test]
    fn reference_values() {
        let s2 = HyperbolicSpace::new(2).unwrap();
        let v = phi_large(&s2, 0.7, 5.0, 0.5).unwrap();
        assert!((v.value.re + 0.09099936091233726882).abs() < 1e-12);
        let s3 = HyperbolicSpace::new(3).unwrap();
        let v = phi_large(&s3, 2.0, 3.0, 0.5).unwrap();
        assert!((v.value.re + 0.01394584681000644592).abs() < 1e-13);
    }

    #[test]
    fn rejects_small_radius_and_zero_lambda() {
        let s = HyperbolicSpace::new(3).unwrap();
        assert!(matches!(phi_large(&s, 1.0, 0.1, 0.5), Err(Error::Convergence(_))));
        assert!(matches!(phi_large(&s, 0.0, 1.0, 0.5), Err(Error::Pole(_))));
    }
}
