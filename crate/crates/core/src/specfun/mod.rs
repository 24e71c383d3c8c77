//! Complex gamma, the Gauss hypergeometric series and the normalized Bessel
//! function `j_nu(z) = Gamma(nu + 1) (z / 2)^(-nu) J_nu(z)`.

mod bessel;
mod dd;
mod gamma;
mod hyp2f1;

pub use bessel::{bessel_j_modified, bessel_j_modified_asymptotic, bessel_j_modified_series, BESSEL_CROSSOVER};
pub use gamma::{complex_gamma, complex_ln_gamma, gamma_ratio, real_gamma};
pub use hyp2f1::{gauss_2f1, gauss_2f1_with, Hyp2f1Value, DEFAULT_TERM_CAP};

pub use num_complex::Complex64 as C64;
