use std::f64::consts::PI;

use super::dd::Dd;
use super::gamma::real_gamma;

/// Below this argument (or below `2 nu^2`, whichever is larger) the power
/// series is used; above it the Hankel asymptotic expansion.
pub const BESSEL_CROSSOVER: f64 = 20.0;

/// `j_nu(z) = Gamma(nu+1) (z/2)^(-nu) J_nu(z)`, even in `z`, `j_nu(0) = 1`.
pub fn bessel_j_modified(nu: f64, z: f64) -> f64 {
    let x = z.abs();
    if x <= BESSEL_CROSSOVER.max(2.0 * nu * nu) {
        bessel_j_modified_series(nu, x)
    } else {
        bessel_j_modified_asymptotic(nu, x).0
    }
}

/// Power series summed in double-double so that the alternating terms
/// (up to ~1e8 at z = 20) cancel without losing the last digits.
pub fn bessel_j_modified_series(nu: f64, z: f64) -> f64 {
    let half = z / 2.0;
    let x = Dd::from_f64(half).mul(Dd::from_f64(half)).neg();
    let nu1 = Dd::from_f64(nu).add(Dd::ONE);
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    let mut m = 0.0f64;
    loop {
        let denom = Dd::from_f64(m + 1.0).mul(nu1.add(Dd::from_f64(m)));
        term = term.mul(x).div(denom);
        sum = sum.add(term);
        m += 1.0;
        if term.abs_f64() < 1e-34 * sum.abs_f64().max(1e-300) || term.hi == 0.0 {
            break;
        }
        if m > 500.0 {
            break;
        }
    }
    sum.to_f64()
}

/// Hankel expansion truncated at its smallest term; returns (value, bound on the omitted part).
pub fn bessel_j_modified_asymptotic(nu: f64, z: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0f64;
    let mut last = f64::INFINITY;
    let mut omitted = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * z);
        let mag = a.abs();
        if mag > last || mag < 1e-18 {
            omitted = mag;
            break;
        }
        let sign = if ((k / 2) % 2) == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
        last = mag;
        if a == 0.0 {
            break;
        }
    }
    let omega = z - nu * PI / 2.0 - PI / 4.0;
    let j = (2.0 / (PI * z)).sqrt() * (p * omega.cos() - q * omega.sin());
    let scale = real_gamma(nu + 1.0).unwrap_or(f64::NAN) * (2.0 / z).powf(nu);
    (scale * j, scale * (2.0 / (PI * z)).sqrt() * omitted)
}
