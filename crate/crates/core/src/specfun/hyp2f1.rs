use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default cap on the number of series terms.
pub const DEFAULT_TERM_CAP: usize = 4000;

/// Value of a truncated hypergeometric series.
#[derive(Debug, Clone, Copy)]
pub struct Hyp2f1Value {
    pub value: C64,
    /// Bound on the neglected tail (absolute).
    pub truncation_bound: f64,
    pub terms: usize,
    /// Largest term modulus met along the way; `max_term / |value|` measures cancellation.
    pub max_term: f64,
}

/// `2F1(a, b; c; z)` by direct power series, real `|z| < 1`, relative tolerance 1e-13.
pub fn gauss_2f1(a: C64, b: C64, c: C64, z: f64) -> Result<Hyp2f1Value> {
    gauss_2f1_with(a, b, c, z, 1e-13, DEFAULT_TERM_CAP)
}

pub fn gauss_2f1_with(a: C64, b: C64, c: C64, z: f64, rel_tol: f64, term_cap: usize) -> Result<Hyp2f1Value> {
    if c.im == 0.0 && c.re <= 0.0 && c.re == c.re.round() {
        return Err(Error::Pole(format!("2F1 with c = {}", c.re)));
    }
    if z.abs() >= 1.0 {
        return Err(Error::Domain(format!("2F1 series needs |z| < 1, got {z}")));
    }
    let mut sum = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    let mut max_term = 1.0f64;
    if z == 0.0 {
        return Ok(Hyp2f1Value { value: sum, truncation_bound: 0.0, terms: 1, max_term });
    }
    for k in 0..term_cap {
        let kf = k as f64;
        let num = (a + kf) * (b + kf);
        if num.norm() == 0.0 {
            // a or b is a non-positive integer: polynomial, exact
            return Ok(Hyp2f1Value { value: sum, truncation_bound: 0.0, terms: k + 1, max_term });
        }
        let ratio = num / ((c + kf) * (kf + 1.0)) * z;
        term *= ratio;
        sum += term;
        max_term = max_term.max(term.norm());
        // once the term ratio is below one and decreasing the tail is geometric
        let q = ratio.norm();
        let q_lim = {
            let kk = kf + 1.0;
            (((a + kk) * (b + kk)) / ((c + kk) * (kk + 1.0)) * z).norm()
        };
        let q_tail = q.max(q_lim).max(z.abs());
        if q_tail < 1.0 {
            let tail = term.norm() * q_tail / (1.0 - q_tail);
            if tail <= rel_tol * sum.norm() {
                return Ok(Hyp2f1Value { value: sum, truncation_bound: tail, terms: k + 2, max_term });
            }
        }
    }
    Err(Error::Convergence(format!("2F1 series with z = {z} needs more than {term_cap} terms")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn trivial_cases() {
        let v = gauss_2f1(C64::new(0.3, 1.0), c(2.0), C64::new(1.5, -2.0), 0.0).unwrap();
        assert_eq!(v.value, c(1.0));
        let v = gauss_2f1(c(0.0), C64::new(0.7, 0.2), c(3.1), -0.3).unwrap();
        assert_eq!(v.value, c(1.0));
    }

    #[test]
    fn log_identity() {
        let v = gauss_2f1(c(1.0), c(1.0), c(2.0), -0.5).unwrap();
        let exact = -(1.5f64).ln() / -0.5;
        assert!((v.value.re - exact).abs() < 1e-13 * exact);
        assert!((exact - 0.810_930_216_216_328_8).abs() < 1e-15);
        assert!(v.terms > 10);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(gauss_2f1(c(1.0), c(1.0), c(-2.0), 0.2), Err(Error::Pole(_))));
        assert!(matches!(gauss_2f1(c(1.0), c(1.0), c(2.0), 1.2), Err(Error::Domain(_))));
        assert!(matches!(gauss_2f1_with(c(1.0), c(1.0), c(2.0), 0.999, 1e-15, 20), Err(Error::Convergence(_))));
    }
}
