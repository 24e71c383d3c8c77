use fracdisp::nls_tree::*;
use fracdisp::tree::{tree_kernel, tree_kernel_profile, Tree};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};

fn grid(q: u32, r_max: u32) -> RadialGrid {
    RadialGrid::new(Tree::new(q).unwrap(), r_max).unwrap()
}

fn config(alpha: f64, coupling: f64, dt: f64, t_final: f64) -> NlsConfig {
    NlsConfig { alpha, eta: 3.0, coupling, gauge_invariant: true, dt, t_final, sample_every: 1 }
}

fn bump(g: &RadialGrid, amplitude: f64) -> RadialState {
    let vals = (0..g.len()).map(|r| C64::new(amplitude * (-(r as f64) / 2.0).exp(), 0.3 * amplitude * (-(r as f64)).exp())).collect();
    RadialState::new(g.clone(), vals).unwrap()
}

#[test]
fn propagator_is_unitary() {
    let g = grid(3, 60);
    let p = linear_propagator(&g, 0.8, 2.5).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..5 {
        let u = DVector::from_fn(61, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        assert!(((&p * &u).norm() - u.norm()).abs() < 1e-11);
    }
}

#[test]
fn delta_evolution_matches_exact_kernel() {
    let g = grid(2, 200);
    let p = linear_propagator(&g, 1.5, 3.0).unwrap();
    let tree = *g.tree();
    let prof = tree_kernel_profile(&tree, 1.5, 3.0, 100, 1e-13).unwrap();
    // The root column of the symmetrized propagator, unscaled by √w.
    for r in 0..=100usize {
        let u = p[(r, 0)] / g.weights()[r].sqrt();
        assert!((u - prof[r].value).norm() < 1e-6, "r = {r}");
    }
    let k = tree_kernel(&tree, 1.5, 3.0, 7, 1e-13).unwrap();
    assert!((p[(7, 0)] / g.weights()[7].sqrt() - k.value).norm() < 1e-6);
}

#[test]
fn linear_run_is_repeated_propagation() {
    let g = grid(2, 80);
    let cfg = config(2.0, 0.0, 0.05, 2.0);
    let traj = nls_solve(&RadialState::delta(g.clone()), &cfg).unwrap();
    let stepper = Stepper::new(&g, 2.0, 0.05).unwrap();
    let mut v = RadialState::delta(g.clone()).values;
    for _ in 0..40 {
        stepper.apply_linear(&mut v);
    }
    let diff = traj.final_values().iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-10);
    let prof = tree_kernel_profile(g.tree(), 2.0, 2.0, 40, 1e-13).unwrap();
    for (u, k) in traj.final_values().iter().zip(&prof) {
        assert!((u - k.value).norm() < 1e-6);
    }
}

#[test]
fn single_linear_step_matches_propagator() {
    let g = grid(3, 30);
    let cfg = config(1.0, 0.0, 0.1, 0.1);
    let u0 = bump(&g, 1.0);
    let next = nls_step(&u0, &cfg).unwrap();
    let p = linear_propagator(&g, 1.0, 0.1).unwrap();
    let s: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
    let v = DVector::from_iterator(31, u0.values.iter().zip(&s).map(|(u, w)| u * w));
    let out = p * v;
    for r in 0..31 {
        assert!((next.values[r] - out[r] / s[r]).norm() < 1e-12);
    }
}

#[test]
fn gauge_invariant_mass_is_conserved() {
    for q in [2, 3] {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            for eta in [2.0, 3.0] {
                let g = grid(q, 60);
                let cfg = NlsConfig { eta, ..config(alpha, 1.0, 0.01, 10.0) };
                let traj = nls_solve(&bump(&g, 1.0), &NlsConfig { sample_every: 50, ..cfg }).unwrap();
                assert!(traj.relative_mass_drift() <= 1e-9, "Q={q} alpha={alpha} eta={eta}: {}", traj.relative_mass_drift());
            }
        }
    }
}

#[test]
fn non_gauge_source_changes_mass() {
    let g = grid(2, 40);
    let cfg = NlsConfig { gauge_invariant: false, ..config(1.0, 1.0, 0.01, 1.0) };
    let traj = nls_solve(&bump(&g, 1.0), &cfg).unwrap();
    assert!(traj.relative_mass_drift().is_finite());
    assert!(traj.relative_mass_drift() > 1e-6);
}

#[test]
fn strang_is_second_order() {
    let g = grid(2, 60);
    let ratio = strang_order_ratio(&bump(&g, 1.0), &config(1.5, 1.0, 0.1, 1.0)).unwrap();
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn small_data_stays_near_linear() {
    let g = grid(2, 60);
    let mut u0 = bump(&g, 1.0);
    let scale = 1e-3 / u0.mass().sqrt();
    u0.values.iter_mut().for_each(|v| *v *= scale);
    let nl = nls_solve(&u0, &config(1.5, 1.0, 0.01, 1.0)).unwrap();
    let lin = nls_solve(&u0, &config(1.5, 0.0, 0.01, 1.0)).unwrap();
    let d: Vec<C64> = nl.final_values().iter().zip(lin.final_values()).map(|(a, b)| a - b).collect();
    assert!(g.mass(&d).sqrt() < 1e-5);
}

#[test]
fn interior_is_insensitive_to_truncation() {
    let cfg = NlsConfig { sample_every: 1000, ..config(1.5, 1.0, 0.01, 5.0) };
    let small = grid(2, 60);
    let large = grid(2, 120);
    let a = nls_solve(&bump(&small, 1.0), &cfg).unwrap();
    let b = nls_solve(&bump(&large, 1.0), &cfg).unwrap();
    for r in 0..=30 {
        assert!((a.final_values()[r] - b.final_values()[r]).norm() < 1e-8, "r = {r}");
    }
}

#[test]
fn delta_strichartz_partial_integrals_decrease() {
    let g = grid(2, 120);
    let cfg = NlsConfig { sample_every: 10, ..config(2.0, 0.0, 0.01, 50.0) };
    let traj = nls_solve(&RadialState::delta(g.clone()), &cfg).unwrap();
    let norms = traj.lq_series(4.0);
    let start = traj.times.iter().position(|&t| t >= 1.0 - 1e-12).unwrap();
    // Upper partial integrals ∫_s^50 ∥u∥⁴² dt shrink as s grows.
    let mut tails = Vec::new();
    for s in [1.0, 5.0, 10.0, 25.0] {
        let k0 = traj.times.iter().position(|&t| t >= s - 1e-12).unwrap().max(start);
        let tail: f64 = traj.times[k0..].windows(2).zip(norms[k0..].windows(2)).map(|(t, n)| 0.5 * (t[1] - t[0]) * (n[0] * n[0] + n[1] * n[1])).sum();
        tails.push(tail);
    }
    assert!(tails.iter().all(|t| t.is_finite()));
    assert!(tails.windows(2).all(|w| w[1] < w[0]));
    assert!(mixed_norm(&traj, 2.0, 4.0).unwrap().is_finite());
}
