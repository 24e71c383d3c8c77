use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::{HyperbolicSpace, Method, SphericalValue};
use crate::error::{Error, Result};
use crate::specfun::bessel_j_modified;

/// Highest Bessel index `m` kept in the table (used for the error term of `M = 3`).
const M_MAX: usize = 3;
/// Highest power `r^{2j}` of each coefficient polynomial (one past the shipped degree 6).
const J_MAX: usize = 4;
/// Degree `j` actually used in the evaluated polynomials.
const J_USED: usize = 3;

/// Even Taylor coefficients `β_{m,j}` of `b̃_m(r) = Σ_j β_{m,j} r^{2j}` in
/// `φ_λ(r) = Σ_m r^{2m} b̃_m(r) j_{m+n/2−1}(λr)`.
///
/// They are obtained by matching, order by order in `r²` and `λ²`, the
/// Taylor expansion of `φ_λ` (from the radial Laplace equation) against the
/// power series of the Bessel functions. The coefficients do not depend on `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StantonTomasTable {
    pub n: u32,
    /// `beta[m][j]` for `m ≤ 3`, `j ≤ 4`.
    pub beta: Vec<Vec<f64>>,
}

/// Coefficients `x coth x = Σ_k a_k x^{2k}` by series division.
fn x_coth_x(terms: usize) -> Vec<f64> {
    // cosh x = Σ x^{2k}/(2k)!, sinh x / x = Σ x^{2k}/(2k+1)!
    let mut num = vec![0.0; terms];
    let mut den = vec![0.0; terms];
    let mut f = 1.0;
    for k in 0..terms {
        if k > 0 {
            f *= (2 * k - 1) as f64 * (2 * k) as f64;
        }
        num[k] = 1.0 / f;
        den[k] = 1.0 / (f * (2 * k + 1) as f64);
    }
    let mut out = vec![0.0; terms];
    for k in 0..terms {
        let s: f64 = (1..=k).map(|i| den[i] * out[k - i]).sum();
        out[k] = num[k] - s;
    }
    out
}

/// Taylor coefficients `φ_λ(r) = Σ_K p_K(μ) r^{2K}`, each `p_K` a polynomial in `μ = λ²`.
fn radial_taylor(n: u32, kmax: usize) -> Vec<Vec<f64>> {
    let rho = (n as f64 - 1.0) / 2.0;
    let nm1 = n as f64 - 1.0;
    // coth r = 1/r + Σ_{j≥1} d_j r^{2j−1}
    let d = x_coth_x(kmax + 1);
    let mut p: Vec<Vec<f64>> = vec![vec![1.0]];
    for k in 1..=kmax {
        let mut acc = vec![0.0; k + 1];
        // (μ + ρ²) p_{k−1}
        for (i, &c) in p[k - 1].iter().enumerate() {
            acc[i] += rho * rho * c;
            acc[i + 1] += c;
        }
        for j in 1..k {
            let factor = nm1 * d[j] * 2.0 * (k - j) as f64;
            for (i, &c) in p[k - j].iter().enumerate() {
                acc[i] += factor * c;
            }
        }
        let denom = -(2.0 * k as f64) * (2.0 * k as f64 + n as f64 - 2.0);
        p.push(acc.into_iter().map(|c| c / denom).collect());
    }
    p
}

/// Coefficient of `μ^i r^{2i}` in `j_{ν+m}(λr)`.
fn bessel_coefficient(nu: f64, m: usize, i: usize) -> f64 {
    let mut e = 1.0;
    for k in 0..i {
        e *= -1.0 / ((k + 1) as f64 * 4.0 * (nu + m as f64 + 1.0 + k as f64));
    }
    e
}

/// Derive the coefficient table for dimension `n`.
pub fn stanton_tomas_coefficients(n: u32) -> Result<StantonTomasTable> {
    let nu = n as f64 / 2.0 - 1.0;
    let dmax = M_MAX + J_MAX;
    let p = radial_taylor(n, 2 * dmax);
    let mut beta = vec![vec![0.0; J_MAX + 1]; M_MAX + 1];
    for d in 0..=dmax {
        let size = d + 1;
        let mat = DMatrix::from_fn(size, size, |i, m| bessel_coefficient(nu, m, i));
        let rhs = DVector::from_fn(size, |i, _| p[d + i][i]);
        let sol = mat.lu().solve(&rhs).ok_or_else(|| Error::Domain(format!("singular matching system at order {d}")))?;
        for m in 0..size {
            let j = d - m;
            if m <= M_MAX && j <= J_MAX {
                beta[m][j] = sol[m];
            }
        }
    }
    Ok(StantonTomasTable { n, beta })
}

impl StantonTomasTable {
    /// `b̃_m(r)` as the shipped even polynomial of degree 6 (`m ≥ 1`) or the
    /// exact `(r/sinh r)^ρ` (`m = 0`).
    pub fn b_tilde(&self, m: usize, r: f64) -> f64 {
        if m == 0 {
            let rho = (self.n as f64 - 1.0) / 2.0;
            return if r == 0.0 { 1.0 } else { (r / r.sinh()).powf(rho) };
        }
        let r2 = r * r;
        self.beta[m][..=J_USED].iter().rev().fold(0.0, |acc, &b| acc * r2 + b)
    }
}

/// Small-scale expansion with `M` Bessel terms (`1 ≤ M ≤ 3`), valid for `0 ≤ r ≤ r1`.
pub fn phi_small(space: &HyperbolicSpace, lambda: f64, r: f64, m_terms: usize, r1: f64) -> Result<SphericalValue> {
    let table = stanton_tomas_coefficients(space.n())?;
    phi_small_with(&table, lambda, r, m_terms, r1)
}

pub fn phi_small_with(table: &StantonTomasTable, lambda: f64, r: f64, m_terms: usize, r1: f64) -> Result<SphericalValue> {
    if !(0.0..=r1).contains(&r) {
        return Err(Error::Domain(format!("small-scale expansion needs 0 <= r <= {r1}, got {r}")));
    }
    if !(1..=M_MAX).contains(&m_terms) {
        return Err(Error::Domain(format!("small-scale expansion supports 1..=3 terms, got {m_terms}")));
    }
    let nu = table.n as f64 / 2.0 - 1.0;
    let rho = (table.n as f64 - 1.0) / 2.0;
    let z = lambda * r;
    let r2 = r * r;
    let mut value = 0.0;
    let mut tail = 0.0;
    for m in 0..m_terms {
        let j = bessel_j_modified(nu + m as f64, z);
        value += r2.powi(m as i32) * table.b_tilde(m, r) * j;
        if m > 0 {
            tail += (table.beta[m][J_MAX] * r2.powi((m + J_MAX) as i32) * j).abs();
        }
    }
    let next_b = r2.powi(m_terms as i32) * table.b_tilde(m_terms, r);
    let next = (next_b * bessel_j_modified(nu + m_terms as f64, z)).abs();
    let envelope = next_b.abs() * (1.0 + z.abs()).powf(-rho - m_terms as f64);
    Ok(SphericalValue {
        lambda,
        r,
        value: C64::new(value, 0.0),
        method: Method::SmallScaleSeries,
        err_estimate: next.max(envelope) + tail + 4.0 * f64::EPSILON * value.abs(),
    })
}
