use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::{HyperbolicSpace, Method, SphericalValue};
use crate::error::{Error, Result};
use crate::oscquad::adaptive_gk;
use crate::specfun::real_gamma;

const ABS_TOL: f64 = 1e-10;

/// `φ_λ(r)` from the Harish-Chandra integral, real spectral parameter.
///
/// The requested accuracy is `1e-10` absolute, tightened in proportion to
/// the ground-state size `(1 + r) e^{−ρr}` so that large radii keep their
/// relative precision.
pub fn phi_hc(space: &HyperbolicSpace, lambda: f64, r: f64) -> Result<SphericalValue> {
    // φ is even in λ; integrating with |λ| makes the symmetry exact
    let (value, err) = phi_hc_complex(space, C64::new(lambda.abs(), 0.0), r)?;
    Ok(SphericalValue { lambda, r, value, method: Method::HCIntegral, err_estimate: err })
}

/// `Γ(n/2)/(√π Γ((n−1)/2)) ∫_0^π (cosh r + sinh r cos θ)^{−ρ−iλ} sin^{n−2}θ dθ`
/// for complex `λ`, returned with its error estimate.
pub fn phi_hc_complex(space: &HyperbolicSpace, lambda: C64, r: f64) -> Result<(C64, f64)> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be finite and non-negative, got {r}")));
    }
    if r == 0.0 {
        return Ok((C64::new(1.0, 0.0), 0.0));
    }
    let n = space.n();
    let rho = space.rho();
    let half = n as f64 / 2.0;
    let norm = real_gamma(half)? / (PI.sqrt() * real_gamma(half - 0.5)?);
    let expo = C64::new(-rho, 0.0) - C64::i() * lambda;
    let (sh, emr) = (r.sinh(), (-r).exp());
    let f = move |theta: f64| -> Result<C64> {
        let c = (0.5 * theta).cos();
        // cosh r + sinh r cos θ without cancellation near θ = π
        let base = emr + 2.0 * sh * c * c;
        let w = theta.sin().max(0.0).powi(n as i32 - 2);
        Ok((expo * base.ln()).exp() * w)
    };

    let size = ((1.0 + r) * ((lambda.im.abs() - rho) * r).exp()).min(1.0);
    let tol = ABS_TOL * size / norm;

    // uniform panels resolve the oscillation, geometric ones the peak at θ = π
    let osc = (lambda.re.abs() * 2.0 * r / PI).ceil() as usize;
    let uniform = osc.clamp(4, 20_000);
    let mut cuts: Vec<f64> = (0..uniform).map(|k| PI * k as f64 / uniform as f64).collect();
    let last = cuts.pop().unwrap_or(0.0);
    cuts.push(last);
    let mut gap = (PI - last) / 2.0;
    let stop = 1e-3 * emr;
    while gap > stop {
        cuts.push(PI - gap);
        gap /= 2.0;
    }
    cuts.push(PI);
    cuts.dedup();

    let share = tol / (cuts.len() - 1) as f64;
    let mut sum = C64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let g = adaptive_gk(&f, w[0], w[1], share, 40)?;
        sum += g.value;
        err += g.err;
    }
    Ok((sum * norm, err * norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_one() {
        for n in 2..6 {
            let s = HyperbolicSpace::new(n).unwrap();
            let v = phi_hc(&s, 3.7, 0.0).unwrap();
            assert_eq!(v.value, C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn normalization_at_tiny_radius() {
        for n in 2..6 {
            let s = HyperbolicSpace::new(n).unwrap();
            let v = phi_hc(&s, 0.0, 1e-9).unwrap();
            assert!((v.value - 1.0).norm() < 1e-12, "n={n}: {}", v.value);
        }
    }

    #[test]
    fn three_dimensional_closed_form() {
        let s = HyperbolicSpace::new(3).unwrap();
        for (l, r) in [(1.0f64, 1.0f64), (2.0, 3.0), (0.3, 7.0), (9.0, 0.4)] {
            let v = phi_hc(&s, l, r).unwrap();
            let exact = (l * r).sin() / (l * r.sinh());
            assert!((v.value.re - exact).abs() < 1e-10, "({l},{r}): {} vs {exact}", v.value.re);
            assert!(v.value.im.abs() < 1e-10);
        }
    }

    #[test]
    fn both_signs_of_lambda_agree() {
        let s = HyperbolicSpace::new(3).unwrap();
        let (a, _) = phi_hc_complex(&s, C64::new(1.3, 0.0), 2.0).unwrap();
        let (b, _) = phi_hc_complex(&s, C64::new(-1.3, 0.0), 2.0).unwrap();
        assert!((a - b).norm() < 1e-11);
    }

    #[test]
    fn reference_values() {
        let s2 = HyperbolicSpace::new(2).unwrap();
        let v = phi_hc(&s2, 0.7, 5.0).unwrap();
        assert!((v.value.re + 0.09099936091233726882).abs() < 1e-11);
        let v0 = phi_hc(&s2, 0.0, 2.0).unwrap();
        assert!((v0.value.re - 0.79565169560597401944).abs() < 1e-11);
    }

    #[test]
    fn imaginary_parameter_gives_one() {
        // λ = ±iρ is the constant function
        let s = HyperbolicSpace::new(4).unwrap();
        let (v, _) = phi_hc_complex(&s, C64::new(0.0, 1.5), 1.7).unwrap();
        assert!((v - 1.0).norm() < 1e-10);
    }
}
