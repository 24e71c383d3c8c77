//! Gauss–Kronrod 7/15 rule with adaptive bisection.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Abscissae of the 15-point Kronrod rule mapped to `[a, b]`.
pub fn kronrod_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for j in 0..7 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x[14] = c;
    x
}

/// Panel estimate from precomputed integrand values at `kronrod_nodes(a, b)`.
/// Returns (Kronrod value, error estimate, integral of |f|).
pub fn kronrod_from_values(a: f64, b: f64, f: &[C64; 15]) -> (C64, f64, f64) {
    let h = 0.5 * (b - a);
    let fc = f[14];
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = fc.norm() * WGK[7];
    for j in 0..7 {
        let s = f[2 * j] + f[2 * j + 1];
        resk += s * WGK[j];
        resabs += (f[2 * j].norm() + f[2 * j + 1].norm()) * WGK[j];
        if j % 2 == 1 {
            resg += s * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        resasc += WGK[j] * ((f[2 * j] - mean).norm() + (f[2 * j + 1] - mean).norm());
    }
    let resk = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg * h).norm()).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * resabs;
    (resk, err.max(roundoff), resabs)
}

/// Panels whose error is within this multiple of `∫|f|` are at the roundoff floor
/// and are accepted regardless of the requested tolerance.
pub(crate) const ROUNDOFF_ACCEPT: f64 = 100.0 * f64::EPSILON;

/// Result of an adaptive Gauss–Kronrod integration.
#[derive(Debug, Clone, Copy)]
pub struct GkResult {
    pub value: C64,
    pub err: f64,
    pub abs_integral: f64,
    pub evaluations: usize,
}

/// Adaptive bisection on `[a, b]` until each leaf meets its share of `tol`
/// (absolute), or `max_depth` is exceeded.
pub fn adaptive_gk<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: usize) -> Result<GkResult>
where
    F: Fn(f64) -> Result<C64> + ?Sized,
{
    let width = (b - a).abs();
    let mut out = GkResult { value: C64::new(0.0, 0.0), err: 0.0, abs_integral: 0.0, evaluations: 0 };
    if width == 0.0 {
        return Ok(out);
    }
    recurse(f, a, b, tol, width, 0, max_depth, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, tol: f64, total: f64, depth: usize, max_depth: usize, out: &mut GkResult) -> Result<()>
where
    F: Fn(f64) -> Result<C64> + ?Sized,
{
    let x = kronrod_nodes(a, b);
    let mut vals = [C64::new(0.0, 0.0); 15];
    for (v, &xi) in vals.iter_mut().zip(x.iter()) {
        *v = f(xi)?;
    }
    out.evaluations += 15;
    let (val, err, abs) = kronrod_from_values(a, b, &vals);
    let share = tol * (b - a).abs() / total;
    if err <= share || err <= ROUNDOFF_ACCEPT * abs {
        out.value += val;
        out.err += err;
        out.abs_integral += abs;
        return Ok(());
    }
    if depth >= max_depth {
        return Err(Error::Quadrature(format!("panel [{a}, {b}] still has error {err:.3e} > {share:.3e} at depth {depth}")));
    }
    let m = 0.5 * (a + b);
    recurse(f, a, m, tol, total, depth + 1, max_depth, out)?;
    recurse(f, m, b, tol, total, depth + 1, max_depth, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let f = |x: f64| -> Result<C64> { Ok(C64::new(x.powi(9) - 3.0 * x * x, 0.0)) };
        let r = adaptive_gk(&f, -1.0, 2.0, 1e-14, 10).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((r.value.re - exact).abs() < 1e-12);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn depth_limit_reports_failure() {
        let f = |x: f64| -> Result<C64> { Ok(C64::new(1.0 / x.abs().sqrt().max(1e-300), 0.0)) };
        assert!(adaptive_gk(&f, -1.0, 1.0, 1e-14, 4).is_err());
    }
}
