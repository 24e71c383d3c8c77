use std::f64::consts::PI;

use fracdisp::oscquad::{integrate, integrate_circle, integrate_with, Domain, OscProblem, QuadConfig};
use fracdisp::Result;
use num_complex::Complex64 as C64;

#[test]
fn gaussian_chirp() {
    let t = 3.0;
    let a = |x: f64| -> Result<C64> { Ok(C64::new((-x * x).exp(), 0.0)) };
    let p = move |x: f64| t * x * x;
    let prob = OscProblem::new(&a, &p, Domain::FullLine).with_growth(-20.0).with_hints(vec![0.0]);
    let r = integrate(&prob, 1e-11).unwrap();
    let exact = (C64::new(PI, 0.0) / C64::new(1.0, -t)).sqrt();
    let diff = (r.value - exact).norm();
    assert!(diff < 1e-10, "diff {diff:e}");
    assert!(diff <= 10.0 * r.err_estimate.max(1e-16), "honesty {diff:e} vs {:e}", r.err_estimate);
}

#[test]
fn lorentzian_fourier_transform() {
    let t = 2.0;
    let a = |x: f64| -> Result<C64> { Ok(C64::new(1.0 / (1.0 + x * x), 0.0)) };
    let p = move |x: f64| t * x;
    let dp = move |_x: f64| t;
    let prob = OscProblem::new(&a, &p, Domain::FullLine).with_growth(-2.0).with_phase_derivative(&dp);
    let r = integrate(&prob, 1e-9).unwrap();
    let exact = PI * (-t).exp();
    let diff = (r.value - exact).norm();
    assert!(diff < 1e-8, "diff {diff:e}");
    assert!(diff <= 10.0 * r.err_estimate, "honesty {diff:e} vs {:e}", r.err_estimate);
    assert!(r.regularization_trace.is_empty());
}

#[test]
fn forced_regularization_matches_direct() {
    let t = 2.0;
    let a = |x: f64| -> Result<C64> { Ok(C64::new(1.0 / (1.0 + x * x), 0.0)) };
    let p = move |x: f64| t * x;
    let prob = OscProblem::new(&a, &p, Domain::FullLine).with_growth(-2.0);
    let direct = integrate(&prob, 1e-9).unwrap();
    let cfg = QuadConfig { force_regularized: true, ..QuadConfig::default() };
    let reg = integrate_with(&prob, 1e-8, &cfg).unwrap();
    assert_eq!(reg.regularization_trace.len(), 4);
    let diff = (reg.value - direct.value).norm();
    assert!(diff < 1e-7, "diff {diff:e}");
}

#[test]
fn regularized_distributional_integral() {
    // ∫ e^{iλ²} dλ = √π e^{iπ/4}, amplitude bounded (growth 0)
    let a = |_x: f64| -> Result<C64> { Ok(C64::new(1.0, 0.0)) };
    let p = |x: f64| x * x;
    let prob = OscProblem::new(&a, &p, Domain::FullLine).with_growth(0.0).with_hints(vec![0.0]);
    let r = integrate(&prob, 1e-6).unwrap();
    let exact = C64::from_polar(PI.sqrt(), PI / 4.0);
    let diff = (r.value - exact).norm();
    assert!(diff < 1e-7, "diff {diff:e}");
    assert!(diff <= 10.0 * r.err_estimate, "honesty {diff:e} vs {:e}", r.err_estimate);
    assert_eq!(r.regularization_trace.len(), 4);
}

#[test]
fn circle_orthogonality() {
    for k in -4i32..=4 {
        let a = |_x: f64| -> Result<C64> { Ok(C64::new(1.0, 0.0)) };
        let p = move |x: f64| k as f64 * x;
        let prob = OscProblem::new(&a, &p, Domain::Circle(2.0 * PI));
        let r = integrate_circle(&prob, 1e-14).unwrap();
        let exact = if k == 0 { 2.0 * PI } else { 0.0 };
        assert!((r.value - exact).norm() < 1e-13, "k={k}: {}", r.value);
    }
}

#[test]
fn circle_bessel() {
    // 2π J₀(5) from a 40-digit reference
    let exact = -1.1158734241247834;
    let a = |_x: f64| -> Result<C64> { Ok(C64::new(1.0, 0.0)) };
    let p = |x: f64| 5.0 * x.cos();
    let prob = OscProblem::new(&a, &p, Domain::Circle(2.0 * PI));
    let r = integrate_circle(&prob, 1e-12).unwrap();
    let diff = (r.value - exact).norm();
    assert!(diff < 1e-10, "diff {diff:e}");
    assert!(diff <= 10.0 * r.err_estimate.max(1e-15));
}

#[test]
fn circle_odd_integrand() {
    let a = |x: f64| -> Result<C64> { Ok(C64::new(x.sin(), 0.0)) };
    let p = |_x: f64| 0.0;
    let prob = OscProblem::new(&a, &p, Domain::Circle(2.0 * PI));
    let r = integrate_circle(&prob, 1e-13).unwrap();
    assert!(r.value.norm() < 1e-13);
}

#[test]
fn amplitude_failure_propagates() {
    let a = |x: f64| -> Result<C64> {
        if x > 1.0 {
            Err(fracdisp::Error::Evaluation("boom".into()))
        } else {
            Ok(C64::new(1.0, 0.0))
        }
    };
    let p = |_x: f64| 0.0;
    let prob = OscProblem::new(&a, &p, Domain::Interval(0.0, 2.0));
    assert!(matches!(integrate(&prob, 1e-8), Err(fracdisp::Error::Evaluation(_))));
}

#[test]
fn results_are_bit_reproducible_across_thread_counts() {
    let t = 3.0;
    let a = |x: f64| -> Result<C64> { Ok(C64::new(1.0 / (1.0 + x * x).powf(1.5), 0.0)) };
    let p = move |x: f64| t * x * x.abs().sqrt();
    let prob = OscProblem::new(&a, &p, Domain::FullLine).with_growth(-3.0).with_hints(vec![0.0]);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let r1 = one.install(|| integrate(&prob, 1e-9).unwrap());
    let r4 = four.install(|| integrate(&prob, 1e-9).unwrap());
    assert_eq!(r1.value.re.to_bits(), r4.value.re.to_bits());
    assert_eq!(r1.value.im.to_bits(), r4.value.im.to_bits());
}
