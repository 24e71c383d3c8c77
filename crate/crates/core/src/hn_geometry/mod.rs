//! Spherical analysis on real hyperbolic space `H^n`.
//!
//! Spherical functions `φ_λ(r)` are available from the Harish-Chandra
//! integral, the convergent large-scale expansion and the small-scale Bessel
//! expansion; [`phi`] dispatches between them.

mod harish_chandra;
mod large_scale;
mod small_scale;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{gamma_ratio, real_gamma};

pub use harish_chandra::{phi_hc, phi_hc_complex};
pub use large_scale::{harish_chandra_series, phi_large, HarishChandraExpansion};
pub use small_scale::{phi_small, phi_small_with, stanton_tomas_coefficients, StantonTomasTable};

/// `H^n` with its half-sum of positive roots `ρ = (n − 1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicSpace {
    n: u32,
    rho: f64,
}

impl HyperbolicSpace {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
        }
        Ok(HyperbolicSpace { n, rho: (n as f64 - 1.0) / 2.0 })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Surface area of the unit sphere `S^{n−1}`.
    pub fn sphere_area(&self) -> f64 {
        let h = self.n as f64 / 2.0;
        2.0 * PI.powf(h) / real_gamma(h).expect("n/2 is positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    HCIntegral,
    LargeScaleSeries,
    SmallScaleSeries,
}

/// A spherical function value with the method that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalValue {
    pub lambda: f64,
    pub r: f64,
    pub value: C64,
    pub method: Method,
    pub err_estimate: f64,
}

/// Radii and thresholds of the spherical-function dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalConfig {
    /// The large-scale expansion is used for `r ≥ r0`.
    pub r0: f64,
    /// The small-scale expansion is accepted for `r ≤ r1`.
    pub r1: f64,
    /// `|λ|` below this always goes to the Harish-Chandra integral.
    pub small_lambda: f64,
}

impl Default for SphericalConfig {
    fn default() -> Self {
        SphericalConfig { r0: 0.5, r1: 1.5, small_lambda: 0.05 }
    }
}

/// Harish-Chandra c-function `Γ(2ρ)/Γ(ρ) · Γ(iλ)/Γ(iλ + ρ)`.
pub fn c_function(space: &HyperbolicSpace, lambda: C64) -> Result<C64> {
    let il = C64::i() * lambda;
    if lambda.norm() == 0.0 {
        return Err(Error::Pole("c-function at lambda = 0".into()));
    }
    let rho = space.rho;
    let pre = real_gamma(2.0 * rho)? / real_gamma(rho)?;
    Ok(gamma_ratio(il, il + rho)? * pre)
}

/// Plancherel density `|c(λ)|^{-2}`, written so that the double zero at the
/// origin is exact.
pub fn plancherel_density(space: &HyperbolicSpace, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let rho = space.rho;
    let il = C64::new(0.0, lambda);
    let pre = real_gamma(rho).expect("rho > 0") / real_gamma(2.0 * rho).expect("rho > 0");
    let ratio = gamma_ratio(il + rho, il + 1.0).expect("no poles off the imaginary axis");
    lambda * lambda * (ratio * pre).norm_sqr()
}

/// `φ_λ(r)` with automatic method choice.
pub fn phi(space: &HyperbolicSpace, lambda: f64, r: f64) -> Result<SphericalValue> {
    phi_with(space, lambda, r, &SphericalConfig::default())
}

pub fn phi_with(space: &HyperbolicSpace, lambda: f64, r: f64, cfg: &SphericalConfig) -> Result<SphericalValue> {
    if !(r >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("phi needs finite lambda and r >= 0, got ({lambda}, {r})")));
    }
    if lambda.abs() < cfg.small_lambda || r < cfg.r0 {
        phi_hc(space, lambda, r)
    } else {
        phi_large(space, lambda, r, cfg.r0)
    }
}

/// `φ₀(r) (sinh r)^{n−1}`, the radial density entering Kunze–Stein estimates.
pub fn kunze_stein_weight(space: &HyperbolicSpace, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let phi0 = phi_hc(space, 0.0, r)?.value.re;
    Ok(phi0 * r.sinh().powi(space.n as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rho_and_sphere_area() {
        let s = HyperbolicSpace::new(3).unwrap();
        assert_eq!(s.rho(), 1.0);
        assert_relative_eq!(s.sphere_area(), 4.0 * PI, max_relative = 1e-14);
        assert!(HyperbolicSpace::new(1).is_err());
    }

    #[test]
    fn c_function_in_three_dimensions() {
        let s = HyperbolicSpace::new(3).unwrap();
        let c = c_function(&s, C64::new(1.0, 0.0)).unwrap();
        assert!((c - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!(matches!(c_function(&s, C64::new(0.0, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn c_function_reference_in_two_dimensions() {
        let s = HyperbolicSpace::new(2).unwrap();
        let c = c_function(&s, C64::new(2.0, 0.0)).unwrap();
        let reference = C64::new(0.26371154716749186919, -0.29935309091746938717);
        assert!((c - reference).norm() < 1e-13);
    }

    #[test]
    fn c_function_conjugation_symmetry() {
        for n in [2, 3, 5] {
            let s = HyperbolicSpace::new(n).unwrap();
            for l in [0.5, 1.0, 3.0] {
                let a = c_function(&s, C64::new(l, 0.0)).unwrap().norm();
                let b = c_function(&s, C64::new(-l, 0.0)).unwrap().norm();
                assert_relative_eq!(a, b, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn plancherel_matches_c_function() {
        for n in [2, 3, 4, 7] {
            let s = HyperbolicSpace::new(n).unwrap();
            for l in [0.01, 0.3, 2.0, 40.0] {
                let c = c_function(&s, C64::new(l, 0.0)).unwrap();
                assert_relative_eq!(plancherel_density(&s, l), c.norm_sqr().recip(), max_relative = 1e-11);
            }
        }
        let s3 = HyperbolicSpace::new(3).unwrap();
        assert_relative_eq!(plancherel_density(&s3, 2.5), 6.25, max_relative = 1e-13);
        assert_eq!(plancherel_density(&s3, 0.0), 0.0);
    }

    #[test]
    fn plancherel_growth_bands() {
        let s = HyperbolicSpace::new(3).unwrap();
        let low: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).map(|l| plancherel_density(&s, l) / (l * l)).collect();
        let lo = low.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = low.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 10.0);
        for n in [2, 4] {
            let s = HyperbolicSpace::new(n).unwrap();
            let band: Vec<f64> = (1..=100).map(|k| k as f64 / 2.0).map(|l| plancherel_density(&s, l) / l.powi(n as i32 - 1)).collect();
            let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = band.iter().cloned().fold(0.0, f64::max);
            assert!(lo > 0.0 && hi / lo < 10.0, "n={n}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn dispatch_rules() {
        let s = HyperbolicSpace::new(3).unwrap();
        assert_eq!(phi(&s, 0.0, 2.0).unwrap().method, Method::HCIntegral);
        assert_eq!(phi(&s, 2.0, 4.0).unwrap().method, Method::LargeScaleSeries);
        assert_eq!(phi(&s, 2.0, 0.2).unwrap().method, Method::HCIntegral);
        assert!(phi(&s, 1.0, -0.1).is_err());
    }

    #[test]
    fn weight_vanishes_at_origin() {
        for n in 2..5 {
            let s = HyperbolicSpace::new(n).unwrap();
            assert_eq!(kunze_stein_weight(&s, 0.0).unwrap(), 0.0);
        }
    }
}
