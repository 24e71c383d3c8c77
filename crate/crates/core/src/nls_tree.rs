//! Radial fractional NLS on a truncated homogeneous tree: the symmetrized
//! radial Laplacian, its spectral fractional propagator and a Strang
//! split-step solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{sphere_size_f64, Tree};

/// Radii `0..=r_max` of a tree with sphere weights `w(r) = |S_r|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    tree: Tree,
    r_max: u32,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(tree: Tree, r_max: u32) -> Result<Self> {
        if r_max < 4 {
            return Err(Error::Domain(format!("r_max must be at least 4, got {r_max}")));
        }
        let weights = (0..=r_max).map(|r| sphere_size_f64(&tree, r)).collect();
        Ok(RadialGrid { tree, r_max, weights })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn r_max(&self) -> u32 {
        self.r_max
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `Σ_r w(r)|u(r)|²`.
    pub fn mass(&self, values: &[C64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v.norm_sqr()).sum()
    }

    /// `(Σ_r w(r)|u(r)|^q)^{1/q}`; `q = ∞` gives the sup norm.
    pub fn lq_norm(&self, values: &[C64], q: f64) -> f64 {
        if q.is_infinite() {
            return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let s: f64 = self.weights.iter().zip(values).map(|(w, v)| w * v.norm().powf(q)).sum();
        s.powf(1.0 / q)
    }
}

/// A radial function on the grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialState {
    pub grid: RadialGrid,
    pub values: Vec<C64>,
    pub time: f64,
}

impl RadialState {
    pub fn new(grid: RadialGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!("{} values for {} radii", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("non-finite initial value".into()));
        }
        Ok(RadialState { grid, values, time: 0.0 })
    }

    /// The indicator of the root vertex.
    pub fn delta(grid: RadialGrid) -> Self {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        values[0] = C64::new(1.0, 0.0);
        RadialState { grid, values, time: 0.0 }
    }

    pub fn mass(&self) -> f64 {
        self.grid.mass(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlsConfig {
    pub alpha: f64,
    pub eta: f64,
    pub coupling: f64,
    pub gauge_invariant: bool,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Keep every `sample_every`-th state in the trajectory.
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn one() -> usize {
    1
}

impl NlsConfig {
    pub fn validate(&self) -> Result<usize> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.eta > 1.0) {
            return Err(Error::Domain(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0) || self.sample_every == 0 {
            return Err(Error::Domain("dt, T and sample_every must be positive".into()));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(Error::Domain(format!("T = {} is not a multiple of dt = {}", self.t_final, self.dt)));
        }
        Ok(steps as usize)
    }
}

/// `S = D L D⁻¹` with `D = diag(√w)`, where `L` is the radial action of
/// `Δf(x) = (Q+1)⁻¹ Σ_{y∼x} f(y) − f(x)` with a Dirichlet cut beyond `r_max`.
pub fn radial_laplacian(grid: &RadialGrid) -> DMatrix<f64> {
    let n = grid.len();
    let q = grid.tree.q() as f64;
    let mut s = DMatrix::<f64>::from_diagonal_element(n, n, -1.0);
    let first = 1.0 / (q + 1.0).sqrt();
    s[(0, 1)] = first;
    s[(1, 0)] = first;
    let off = q.sqrt() / (q + 1.0);
    for r in 1..n - 1 {
        s[(r, r + 1)] = off;
        s[(r + 1, r)] = off;
    }
    debug_assert!((&s - s.transpose()).amax() <= 1e-14);
    s
}

/// Spectral data of `−S`, shared by every propagator on the grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

pub fn spectrum(grid: &RadialGrid) -> Result<Spectrum> {
    let eig = SymmetricEigen::new(-radial_laplacian(grid));
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    if let Some(v) = eig.eigenvalues.iter().find(|&&v| v < -1e-12) {
        return Err(Error::Eigen(format!("negative eigenvalue {v} of the Laplacian")));
    }
    Ok(Spectrum { eigenvalues: eig.eigenvalues.map(|v| v.max(0.0)), eigenvectors: eig.eigenvectors })
}

/// `V e^{it(−Λ)^{α/2}} Vᵀ` in the symmetrized coordinates `D u`.
pub fn linear_propagator(grid: &RadialGrid, alpha: f64, t: f64) -> Result<DMatrix<C64>> {
    Ok(propagator_from(&spectrum(grid)?, alpha, t))
}

pub fn propagator_from(spec: &Spectrum, alpha: f64, t: f64) -> DMatrix<C64> {
    let v = spec.eigenvectors.map(|x| C64::new(x, 0.0));
    let phases = spec.eigenvalues.map(|l| C64::from_polar(1.0, t * l.powf(alpha / 2.0)));
    let mut scaled = v.clone();
    for (j, p) in phases.iter().enumerate() {
        for x in scaled.column_mut(j).iter_mut() {
            *x *= p;
        }
    }
    scaled * v.transpose()
}

/// `u ← u·e^{−ih·coupling·|u|^{η−1}}`, the exact flow of the gauge-invariant nonlinearity.
pub fn nonlinear_rotation(values: &mut [C64], coupling: f64, eta: f64, h: f64) {
    for u in values.iter_mut() {
        *u *= C64::from_polar(1.0, -h * coupling * u.norm().powf(eta - 1.0));
    }
}

/// One classical Runge–Kutta step of `u' = −i·coupling·|u|^η` per site.
fn source_step(values: &mut [C64], coupling: f64, eta: f64, h: f64) {
    let f = |u: C64| C64::new(0.0, -coupling * u.norm().powf(eta));
    for u in values.iter_mut() {
        let k1 = f(*u);
        let k2 = f(*u + k1 * (h / 2.0));
        let k3 = f(*u + k2 * (h / 2.0));
        let k4 = f(*u + k3 * h);
        *u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
}

fn half_nonlinear(values: &mut [C64], config: &NlsConfig) {
    if config.coupling == 0.0 {
        return;
    }
    let h = config.dt / 2.0;
    if config.gauge_invariant {
        nonlinear_rotation(values, config.coupling, config.eta, h);
    } else {
        source_step(values, config.coupling, config.eta, h);
    }
}

/// Precomputed one-step linear propagator acting on raw radial values.
#[derive(Debug, Clone)]
pub struct Stepper {
    sqrt_w: Vec<f64>,
    propagator: DMatrix<C64>,
}

impl Stepper {
    pub fn new(grid: &RadialGrid, alpha: f64, dt: f64) -> Result<Self> {
        Ok(Self::from_spectrum(grid, &spectrum(grid)?, alpha, dt))
    }

    pub fn from_spectrum(grid: &RadialGrid, spec: &Spectrum, alpha: f64, dt: f64) -> Self {
        Stepper { sqrt_w: grid.weights.iter().map(|w| w.sqrt()).collect(), propagator: propagator_from(spec, alpha, dt) }
    }

    pub fn apply_linear(&self, values: &mut [C64]) {
        let v = DVector::from_iterator(values.len(), values.iter().zip(&self.sqrt_w).map(|(u, s)| u * s));
        let out = &self.propagator * v;
        for ((u, o), s) in values.iter_mut().zip(out.iter()).zip(&self.sqrt_w) {
            *u = o / s;
        }
    }

    /// Strang step: half nonlinear, full linear, half nonlinear.
    pub fn step(&self, state: &mut RadialState, config: &NlsConfig) {
        half_nonlinear(&mut state.values, config);
        self.apply_linear(&mut state.values);
        half_nonlinear(&mut state.values, config);
        state.time += config.dt;
    }
}

/// One Strang step, building the propagator from scratch.
pub fn nls_step(state: &RadialState, config: &NlsConfig) -> Result<RadialState> {
    config.validate()?;
    let stepper = Stepper::new(&state.grid, config.alpha, config.dt)?;
    let mut next = state.clone();
    stepper.step(&mut next, config);
    Ok(next)
}

/// Sampled states of a run and the mass at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: RadialGrid,
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub mass: Vec<f64>,
}

impl Trajectory {
    pub fn final_values(&self) -> &[C64] {
        self.states.last().expect("a trajectory holds the initial state")
    }

    /// `max |m(t) − m(0)| / m(0)`.
    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
    }

    pub fn lq_series(&self, q: f64) -> Vec<f64> {
        self.states.iter().map(|s| self.grid.lq_norm(s, q)).collect()
    }
}

pub fn nls_solve(u0: &RadialState, config: &NlsConfig) -> Result<Trajectory> {
    let steps = config.validate()?;
    let stepper = Stepper::new(&u0.grid, config.alpha, config.dt)?;
    Ok(run(&stepper, u0, config, steps))
}

fn run(stepper: &Stepper, u0: &RadialState, config: &NlsConfig, steps: usize) -> Trajectory {
    let mut state = u0.clone();
    let mut traj = Trajectory { grid: u0.grid.clone(), times: vec![state.time], states: vec![state.values.clone()], mass: vec![state.mass()] };
    for k in 1..=steps {
        stepper.step(&mut state, config);
        if k % config.sample_every == 0 || k == steps {
            state.time = u0.time + k as f64 * config.dt;
            traj.times.push(state.time);
            traj.states.push(state.values.clone());
            traj.mass.push(state.mass());
        }
    }
    traj
}

/// `[∫ ∥u(t)∥_{ℓ^q}^p dt]^{1/p}` by the composite trapezoid rule over the
/// samples; `p = ∞` takes the largest sampled norm.
pub fn mixed_norm(traj: &Trajectory, p: f64, q: f64) -> Result<f64> {
    if traj.times.len() < 2 {
        return Err(Error::InsufficientData("a mixed norm needs at least two samples".into()));
    }
    let norms = traj.lq_series(q);
    if p.is_infinite() {
        return Ok(norms.iter().cloned().fold(0.0, f64::max));
    }
    let integral: f64 = traj.times.windows(2).zip(norms.windows(2)).map(|(t, n)| 0.5 * (t[1] - t[0]) * (n[0].powf(p) + n[1].powf(p))).sum();
    Ok(integral.powf(1.0 / p))
}

/// Strang self-convergence: `∥u_{dt} − u_{dt/2}∥ / ∥u_{dt/2} − u_{dt/4}∥` at `T`
/// in the weighted `ℓ²` norm; close to 4 for a second-order scheme.
pub fn strang_order_ratio(u0: &RadialState, config: &NlsConfig) -> Result<f64> {
    config.validate()?;
    let spec = spectrum(&u0.grid)?;
    let finals = [1.0, 0.5, 0.25]
        .iter()
        .map(|&f| {
            let cfg = NlsConfig { dt: config.dt * f, sample_every: usize::MAX, ..*config };
            let steps = cfg.validate()?;
            let stepper = Stepper::from_spectrum(&u0.grid, &spec, cfg.alpha, cfg.dt);
            Ok(run(&stepper, u0, &cfg, steps).final_values().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let dist = |a: &[C64], b: &[C64]| {
        let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        u0.grid.mass(&d).sqrt()
    };
    let coarse = dist(&finals[0], &finals[1]);
    let fine = dist(&finals[1], &finals[2]);
    if fine == 0.0 {
        return Err(Error::InsufficientData("step refinement left the solution unchanged".into()));
    }
    Ok(coarse / fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(q: u32, r_max: u32) -> RadialGrid {
        RadialGrid::new(Tree::new(q).unwrap(), r_max).unwrap()
    }

    #[test]
    fn laplacian_entries() {
        let g = grid(2, 10);
        let s = radial_laplacian(&g);
        assert!((s[(0, 1)] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((s[(4, 5)] - 2f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((s[(5, 4)] - 2f64.sqrt() / 3.0).abs() < 1e-15);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn raw_laplacian_kills_constants() {
        let g = grid(3, 12);
        let s = radial_laplacian(&g);
        let d: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
        for r in 0..12 {
            let lf: f64 = (0..=12).map(|c| s[(r, c)] * d[c] / d[r]).sum();
            assert!(lf.abs() < 1e-13, "row {r}: {lf}");
        }
    }

    #[test]
    fn spectrum_fills_the_band() {
        let tree = Tree::new(2).unwrap();
        let g0 = tree.gamma0();
        let mut prev = f64::INFINITY;
        for r_max in [32, 64, 128] {
            let sp = spectrum(&grid(2, r_max)).unwrap();
            let lo = sp.eigenvalues.min();
            let hi = sp.eigenvalues.max();
            assert!(lo >= 1.0 - g0 - 1e-12 && hi <= 1.0 + g0 + 1e-12);
            let eps = (lo - (1.0 - g0)).max(1.0 + g0 - hi);
            assert!(eps < prev);
            prev = eps;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn identity_at_time_zero() {
        let p = linear_propagator(&grid(2, 20), 1.3, 0.0).unwrap();
        assert!((p - DMatrix::<C64>::identity(21, 21)).camax() < 1e-12);
    }

    #[test]
    fn rotation_keeps_modulus() {
        let mut v = vec![C64::new(0.3, -1.2)];
        nonlinear_rotation(&mut v, 2.5, 3.0, 0.7);
        assert!((v[0].norm() - C64::new(0.3, -1.2).norm()).abs() < 1e-15);
    }

    #[test]
    fn mixed_norm_conventions() {
        let g = grid(2, 6);
        let mut unit = vec![C64::new(0.0, 0.0); 7];
        unit[0] = C64::new(1.0, 0.0);
        let traj = Trajectory { grid: g, times: (0..=20).map(|k| k as f64 * 0.1).collect(), states: vec![unit; 21], mass: vec![1.0; 21] };
        assert!((mixed_norm(&traj, 2.0, 4.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(mixed_norm(&traj, f64::INFINITY, 4.0).unwrap(), 1.0);
        let short = Trajectory { times: vec![0.0], states: vec![traj.states[0].clone()], mass: vec![1.0], ..traj };
        assert!(matches!(mixed_norm(&short, 2.0, 4.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn config_rejects_bad_values() {
        let base = NlsConfig { alpha: 1.0, eta: 3.0, coupling: 1.0, gauge_invariant: true, dt: 0.01, t_final: 1.0, sample_every: 1 };
        assert_eq!(base.validate().unwrap(), 100);
        assert!(NlsConfig { eta: 1.0, ..base }.validate().is_err());
        assert!(NlsConfig { alpha: 2.5, ..base }.validate().is_err());
        assert!(NlsConfig { t_final: 1.005, ..base }.validate().is_err());
    }
}
