//! The six batch commands. Each turns a validated configuration into tables
//! and checks; numerical failures become FAIL checks rather than aborts.

use num_complex::Complex64 as C64;

use super::config::*;
use super::output::{num, opt, Check, Outcome, Table};
use crate::estimates::{admissible_alpha_large, admissible_alpha_small, admissible_tree, fit_decay, AdmissiblePoint, DecayFit};
use crate::hn_geometry::HyperbolicSpace;
use crate::hn_kernel::{
    kernel_kunze_stein, kernel_profile, kernel_sigma, theorem_bound, verify_kernel_estimate, KernelGrid, KernelQuery, KernelSample,
};
use crate::hn_phase::{stationary_points, PhaseParams};
use crate::nls_tree::{mixed_norm, nls_solve, RadialGrid, RadialState};
use crate::tree::{tree_kernel_profile, tree_phase_report, verify_tree_estimates, Tree};

const IDENTITY_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-8;

fn kernel_columns(name: &str) -> Table {
    Table::new(
        name,
        &[
            ("t", "time"),
            ("r", "geodesic distance"),
            ("re", "1"),
            ("im", "1"),
            ("abs", "1"),
            ("regime", "-"),
            ("bound", "1"),
            ("ratio", "1"),
            ("err", "1"),
        ],
    )
}

fn push_kernel(table: &mut Table, s: &KernelSample) {
    table.push(vec![
        num(s.query.t),
        num(s.query.r),
        num(s.value.re),
        num(s.value.im),
        num(s.value.norm()),
        s.regime.map(|r| r.label().to_string()).unwrap_or_default(),
        opt(s.bound),
        opt(s.ratio),
        num(s.err_estimate),
    ]);
}

fn fit_detail(fit: &DecayFit) -> String {
    format!("slope {:.4}, r2 {:.4}, window [{}, {}], {} points", fit.slope, fit.r2, fit.window.0, fit.window.1, fit.n_points)
}

fn slope_check(name: &str, samples: &[(f64, f64)], threshold: f64) -> Check {
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(s.0), b.max(s.0)));
    match fit_decay(samples, (lo, hi)) {
        Ok(fit) => Check::new(
            name,
            fit.slope <= threshold && fit.is_conclusive(),
            format!("{} (threshold {threshold}{})", fit_detail(&fit), if fit.is_conclusive() { "" } else { "; fit inconclusive" }),
        ),
        Err(e) => Check::new(name, false, e.to_string()),
    }
}

pub fn phase_report(cfg: &PhaseReportConfig) -> Outcome {
    let mut out = Outcome::default();
    let rho = (cfg.n as f64 - 1.0) / 2.0;
    let mut table = Table::new(
        "hn_phase",
        &[("alpha", "1"), ("R", "1"), ("regime", "-"), ("lambda0", "1"), ("lambda1", "1"), ("lambda2", "1"), ("theta0", "1"), ("residual", "1")],
    );
    let (mut failures, mut worst, mut bound_violations, mut order_violations) = (Vec::new(), 0.0f64, 0, 0);
    for &alpha in &cfg.alphas {
        for big_r in cfg.r_ratios.values() {
            let rep = match PhaseParams::new(alpha, rho, big_r).and_then(|p| stationary_points(&p)) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("alpha {alpha}, R {big_r}: {e}"));
                    continue;
                }
            };
            let residual = rep.residuals.iter().cloned().fold(0.0, f64::max);
            worst = worst.max(residual);
            if alpha > 1.0 && big_r > 0.0 {
                if let Some(l1) = rep.lambda1 {
                    bound_violations += (l1 < (big_r / alpha).powf(1.0 / (alpha - 1.0)) * (1.0 - 1e-12)) as usize;
                }
            }
            if alpha < 1.0 && big_r > 0.0 {
                if let Some(l2) = rep.lambda2 {
                    bound_violations += (l2 > (big_r / alpha).powf(-1.0 / (1.0 - alpha)) * (1.0 + 1e-12)) as usize;
                }
            }
            if let (Some(l1), Some(l0), Some(l2)) = (rep.lambda1, rep.lambda0, rep.lambda2) {
                order_violations += !(l1 < l0 && l0 < l2) as usize;
            }
            table.push(vec![
                num(alpha),
                num(big_r),
                format!("{:?}", rep.regime),
                opt(rep.lambda0),
                opt(rep.lambda1),
                opt(rep.lambda2),
                opt(rep.theta0),
                num(residual),
            ]);
        }
    }
    out.checks.push(Check::new("stationary points computed", failures.is_empty(), failures.join("; ")));
    out.checks.push(Check::new("root residuals", worst <= cfg.tol, format!("max residual {worst:e} (tolerance {:e})", cfg.tol)));
    out.checks.push(Check::new("stationary point bounds", bound_violations == 0, format!("{bound_violations} violations")));
    out.checks.push(Check::new("root ordering", order_violations == 0, format!("{order_violations} violations")));
    out.tables.push(table);

    if let Some(tc) = &cfg.tree {
        let mut table = Table::new(
            "tree_phase",
            &[
                ("Q", "1"),
                ("alpha", "1"),
                ("t", "time"),
                ("r", "edges"),
                ("M", "1"),
                ("lambda0", "1"),
                ("case", "-"),
                ("lambda1", "1"),
                ("lambda2", "1"),
            ],
        );
        let mut failures = Vec::new();
        for &q in &tc.q {
            let tree = match Tree::new(q) {
                Ok(t) => t,
                Err(e) => {
                    failures.push(format!("Q {q}: {e}"));
                    continue;
                }
            };
            for &alpha in &tc.alphas {
                for r in tc.r.values() {
                    match tree_phase_report(&tree, alpha, tc.t, r) {
                        Ok(rep) => table.push(vec![
                            q.to_string(),
                            num(alpha),
                            num(tc.t),
                            num(r),
                            num(rep.m_max),
                            num(rep.lambda0),
                            format!("{:?}", rep.case),
                            opt(rep.lambda1),
                            opt(rep.lambda2),
                        ]),
                        Err(e) => failures.push(format!("Q {q}, alpha {alpha}, r {r}: {e}")),
                    }
                }
            }
        }
        out.checks.push(Check::new("tree phase reports computed", failures.is_empty(), failures.join("; ")));
        out.tables.push(table);
    }
    out
}

fn space(n: u32) -> Result<HyperbolicSpace, String> {
    HyperbolicSpace::new(n).map_err(|e| e.to_string())
}

/// Per-radius absolute tolerances: `tol` times the theorem bound where one applies.
fn kernel_tols(space: &HyperbolicSpace, alpha: f64, sigma: f64, t: f64, radii: &[f64], tol: f64) -> Vec<f64> {
    radii
        .iter()
        .map(|&r| {
            let b = KernelQuery::new(*space, alpha, sigma, t, r).and_then(|q| theorem_bound(&q)).map(|b| b.bound);
            match b {
                Ok(b) if b.is_finite() => tol * b.min(1e6),
                _ => tol,
            }
        })
        .collect()
}

pub fn hn_kernel(cfg: &HnKernelConfig) -> Outcome {
    let mut out = Outcome::default();
    let mut table = kernel_columns("kernel");
    let s = match space(cfg.n) {
        Ok(s) => s,
        Err(e) => {
            out.checks.push(Check::new("kernel evaluations converged", false, e));
            return out;
        }
    };
    let radii = cfg.r.values();
    let mut failures = Vec::new();
    let mut nonfinite = 0;
    for t in cfg.t.values() {
        let tols = kernel_tols(&s, cfg.alpha, cfg.sigma, t, &radii, cfg.tol);
        match kernel_profile(&s, cfg.alpha, cfg.sigma, t, &radii, &tols) {
            Ok(samples) => {
                for smp in &samples {
                    nonfinite += smp.ratio.is_some_and(|r| !r.is_finite()) as usize;
                    push_kernel(&mut table, smp);
                }
            }
            Err(e) => failures.push(format!("t {t}: {e}")),
        }
    }
    out.checks.push(Check::new("kernel evaluations converged", failures.is_empty(), failures.join("; ")));
    out.checks.push(Check::new("ratios to the theorem bound finite", nonfinite == 0, format!("{nonfinite} non-finite ratios")));
    out.tables.push(table);
    out
}

pub fn hn_verify(cfg: &HnVerifyConfig) -> Outcome {
    let mut out = Outcome::default();
    let s = match space(cfg.n) {
        Ok(s) => s,
        Err(e) => {
            out.checks.push(Check::new("setup", false, e));
            return out;
        }
    };
    let grid = KernelGrid { t_values: cfg.grid.t.values(), r_values: cfg.grid.r.values() };
    match verify_kernel_estimate(&s, cfg.alpha, cfg.sigma, &grid, cfg.tol) {
        Ok(rep) => {
            let mut samples = kernel_columns("kernel_grid");
            for smp in &rep.samples {
                push_kernel(&mut samples, smp);
            }
            let mut regimes = Table::new(
                "regimes",
                &[
                    ("regime", "-"),
                    ("points", "1"),
                    ("boundary_points", "1"),
                    ("max_ratio", "1"),
                    ("max_ratio_refined", "1"),
                    ("growth", "1"),
                    ("pass", "-"),
                ],
            );
            for r in &rep.regimes {
                regimes.push(vec![
                    r.regime.label().into(),
                    r.points.to_string(),
                    r.boundary_points.to_string(),
                    num(r.max_ratio),
                    opt(r.max_ratio_refined),
                    opt(r.growth),
                    r.pass.to_string(),
                ]);
            }
            let detail = rep
                .regimes
                .iter()
                .map(|r| format!("{}: max {:.4}, growth {}", r.regime.label(), r.max_ratio, r.growth.map_or("n/a".into(), |g| format!("{g:+.3}"))))
                .collect::<Vec<_>>()
                .join("; ");
            out.checks.push(Check::new("per-regime ratios finite and stable", rep.pass, detail));
            out.tables.push(samples);
            out.tables.push(regimes);
        }
        Err(e) => out.checks.push(Check::new("per-regime ratios finite and stable", false, e.to_string())),
    }
    if let Some(d) = &cfg.decay {
        let mut table = Table::new("decay", &[("t", "time"), ("r", "geodesic distance"), ("abs", "1"), ("bound", "1"), ("err", "1")]);
        let mut samples = Vec::new();
        let mut failure = None;
        for t in d.t.values() {
            let res = KernelQuery::new(s, cfg.alpha, cfg.sigma, t, d.r).and_then(|q| {
                let tol = kernel_tols(&s, cfg.alpha, cfg.sigma, t, &[d.r], cfg.tol)[0];
                kernel_sigma(&q, tol)
            });
            match res {
                Ok(k) => {
                    table.push(vec![num(t), num(d.r), num(k.value.norm()), opt(k.bound), num(k.err_estimate)]);
                    samples.push((t, k.value.norm()));
                }
                Err(e) => {
                    failure = Some(format!("t {t}: {e}"));
                    break;
                }
            }
        }
        out.checks.push(match failure {
            Some(f) => Check::new("fixed-radius decay slope", false, f),
            None => slope_check("fixed-radius decay slope", &samples, d.threshold),
        });
        out.tables.push(table);
    }
    if let Some(k) = &cfg.kunze_stein {
        let mut table = Table::new("kunze_stein", &[("t", "time"), ("norm_q", "1"), ("q", "1"), ("err", "1")]);
        let mut samples = Vec::new();
        let mut failure = None;
        for t in k.t.values() {
            match kernel_kunze_stein(&s, cfg.alpha, cfg.sigma, t, k.q, k.r_max, k.rel_tol) {
                Ok(n) => {
                    table.push(vec![num(t), num(n.value), num(k.q), num(n.err)]);
                    samples.push((t, n.value));
                }
                Err(e) => {
                    failure = Some(format!("t {t}: {e}"));
                    break;
                }
            }
        }
        out.checks.push(match failure {
            Some(f) => Check::new("Kunze-Stein norm decay slope", false, f),
            None => slope_check("Kunze-Stein norm decay slope", &samples, k.threshold),
        });
        out.tables.push(table);
    }
    out
}

pub fn tree_verify(cfg: &TreeVerifyConfig) -> Outcome {
    let mut out = Outcome::default();
    let tree = match Tree::new(cfg.q) {
        Ok(t) => t,
        Err(e) => {
            out.checks.push(Check::new("kernel identity at t = 0", false, e.to_string()));
            return out;
        }
    };
    match tree_kernel_profile(&tree, cfg.alpha, 0.0, 16, cfg.tol) {
        Ok(prof) => {
            let dev = prof.iter().map(|s| (s.value - C64::new(if s.r == 0 { 1.0 } else { 0.0 }, 0.0)).norm()).fold(0.0, f64::max);
            out.checks.push(Check::new("kernel identity at t = 0", dev <= IDENTITY_TOL, format!("max |k_0 - delta| = {dev:e} on r <= 16")));
        }
        Err(e) => out.checks.push(Check::new("kernel identity at t = 0", false, e.to_string())),
    }
    let t_grid = cfg.t.values();
    let rep = match verify_tree_estimates(&tree, cfg.alpha, &t_grid, cfg.tol) {
        Ok(r) => r,
        Err(e) => {
            out.checks.push(Check::new("tree estimates", false, e.to_string()));
            return out;
        }
    };
    out.checks.push(Check::new("l2 mass conservation", rep.mass_defect <= MASS_TOL, format!("max |mass - 1| = {:e}", rep.mass_defect)));
    out.checks.push(Check::new(
        "uniform bound |k_t(r)| Q^(r/2)",
        rep.uniform_pass,
        format!("C1 = {:.6} on the grid, {:.6} with midpoints", rep.uniform_c1, rep.uniform_c1_refined),
    ));
    out.checks.push(Check::new(
        "light-cone decay slope",
        rep.cone_pass,
        format!("{} (threshold {}, cone constant {:.4})", fit_detail(&rep.cone_fit), rep.slope_threshold, rep.cone_constant),
    ));
    for l in &rep.lq {
        out.checks.push(Check::new(
            &format!("l^{} norm decay slope", l.q),
            l.pass,
            format!("{} (threshold {})", fit_detail(&l.fit), rep.slope_threshold),
        ));
    }
    let mut cone = Table::new("cone", &[("t", "time"), ("sup_weighted", "1")]);
    for (t, v) in rep.t_grid.iter().zip(&rep.cone_sup) {
        cone.push(vec![num(*t), num(*v)]);
    }
    let mut norms = Table::new("norms", &[("t", "time"), ("norm_q", "1"), ("q", "1")]);
    for l in &rep.lq {
        for (t, v) in rep.t_grid.iter().zip(&l.values) {
            norms.push(vec![num(*t), num(*v), num(l.q)]);
        }
    }
    out.tables.push(cone);
    out.tables.push(norms);
    out
}

pub fn nls_run(cfg: &NlsRunConfig) -> Outcome {
    let mut out = Outcome::default();
    let setup = Tree::new(cfg.q).and_then(|tree| RadialGrid::new(tree, cfg.r_max));
    let grid = match setup {
        Ok(g) => g,
        Err(e) => {
            out.checks.push(Check::new("run completed", false, e.to_string()));
            return out;
        }
    };
    let u0 = match cfg.initial {
        InitialData::Delta { amplitude } => {
            let mut v = vec![C64::new(0.0, 0.0); grid.len()];
            v[0] = C64::new(amplitude, 0.0);
            RadialState::new(grid, v)
        }
        InitialData::Exponential { amplitude, decay } => {
            let v = (0..grid.len()).map(|r| C64::new(amplitude * (-decay * r as f64).exp(), 0.0)).collect();
            RadialState::new(grid, v)
        }
    };
    let traj = match u0.and_then(|u| nls_solve(&u, &cfg.nls())) {
        Ok(t) => t,
        Err(e) => {
            out.checks.push(Check::new("run completed", false, e.to_string()));
            return out;
        }
    };
    let drift = traj.relative_mass_drift();
    out.checks.push(if cfg.gauge_invariant {
        Check::new("mass conservation", drift <= cfg.mass_drift_tol, format!("relative drift {drift:e} (tolerance {:e})", cfg.mass_drift_tol))
    } else {
        Check::flagged("mass conservation", format!("relative drift {drift:e}; not asserted without gauge invariance"))
    });
    let mut mass = Table::new("mass", &[("t", "time"), ("mass", "1")]);
    for (t, m) in traj.times.iter().zip(&traj.mass) {
        mass.push(vec![num(*t), num(*m)]);
    }
    let mut norms = Table::new("norms", &[("t", "time"), ("norm_q", "1"), ("q", "1")]);
    for &q in &cfg.norms {
        for (t, v) in traj.times.iter().zip(traj.lq_series(q)) {
            norms.push(vec![num(*t), num(v), num(q)]);
        }
    }
    let mut mixed = Table::new("mixed_norms", &[("p", "1"), ("q", "1"), ("value", "1")]);
    for &q in &cfg.norms {
        for p in [2.0, 4.0, f64::INFINITY] {
            if let Ok(v) = mixed_norm(&traj, p, q) {
                mixed.push(vec![num(p), num(q), num(v)]);
            }
        }
    }
    let mut fin = Table::new("final_state", &[("r", "edges"), ("re", "1"), ("im", "1"), ("abs", "1")]);
    for (r, v) in traj.final_values().iter().enumerate() {
        fin.push(vec![r.to_string(), num(v.re), num(v.im), num(v.norm())]);
    }
    out.tables.extend([mass, norms, mixed, fin]);
    out
}

/// Expected `[lower, upper]` range of `1/p` on the row `1/q` (empty when lower > upper).
fn expected_row(kind: &RegionKind, inv_q: f64) -> (f64, f64) {
    match *kind {
        RegionKind::AlphaLarge { n, alpha, sigma } => {
            if inv_q >= 0.5 {
                return (1.0, 0.0);
            }
            let nf = n as f64;
            let a = ((nf - sigma) / 2.0 - nf * inv_q) / alpha;
            let b = ((nf - 2.0 * sigma) / 2.0 - nf * inv_q) / (2.0 * (alpha - 1.0));
            (a.max(b).max(0.0), 0.5)
        }
        RegionKind::AlphaSmall { n, alpha, beta } => {
            let gap = 0.5 - inv_q;
            (gap * (beta / alpha) * (n as f64 / 2.0), (gap * ((2.0 - beta) / (2.0 - alpha)) * 1.5).min(0.5))
        }
        RegionKind::Tree {} => {
            if inv_q < 0.5 {
                (0.0, 0.5)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// Points closer than this to an analytic edge may go either way.
const EDGE_TIE: f64 = 1e-9;

/// Membership from the analytic edges and the stated edge conventions;
/// `None` on a floating-point tie with an edge.
fn expected_member(kind: &RegionKind, inv_p: f64, inv_q: f64) -> Option<bool> {
    let (lo, hi) = expected_row(kind, inv_q);
    let tie = (inv_p - lo).abs() < EDGE_TIE || (inv_p - hi).abs() < EDGE_TIE;
    match *kind {
        RegionKind::AlphaLarge { sigma, .. } => {
            if inv_p == 0.0 && inv_q == 0.5 {
                return Some(sigma == 0.0);
            }
            if inv_q >= 0.5 || inv_p == 0.0 {
                return Some(false);
            }
            if (inv_p - lo).abs() < EDGE_TIE {
                return None;
            }
            Some(inv_p > lo)
        }
        RegionKind::AlphaSmall { n, alpha, beta } => {
            if inv_p == 0.5 && inv_q == 0.0 && (beta - 2.0 * alpha / n as f64).abs() < EDGE_TIE {
                return Some(false);
            }
            if tie {
                return None;
            }
            Some(lo <= inv_p && inv_p <= hi)
        }
        RegionKind::Tree {} => Some(inv_q < 0.5 || inv_p == 0.0),
    }
}

pub fn regions(cfg: &RegionsConfig) -> Outcome {
    let mut out = Outcome::default();
    let (np, nq) = (cfg.inv_p_points, cfg.inv_q_points);
    let aux = match cfg.region {
        RegionKind::AlphaLarge { sigma, .. } => sigma,
        RegionKind::AlphaSmall { beta, .. } => beta,
        RegionKind::Tree {} => 0.0,
    };
    let member = |pt: AdmissiblePoint| -> Result<bool, String> {
        match cfg.region {
            RegionKind::AlphaLarge { n, alpha, .. } => Ok(admissible_alpha_large(n, alpha, pt)),
            RegionKind::AlphaSmall { n, alpha, .. } => admissible_alpha_small(n, alpha, pt).map_err(|e| e.to_string()),
            RegionKind::Tree {} => Ok(admissible_tree(pt)),
        }
    };
    let mut cloud = Table::new("region", &[("inv_p", "1"), ("inv_q", "1"), ("aux", "1"), ("member", "-")]);
    let mut boundary =
        Table::new("boundary", &[("inv_q", "1"), ("inv_p_min", "1"), ("inv_p_max", "1"), ("expected_min", "1"), ("expected_max", "1")]);
    let (mut mismatches, mut ties, mut members) = (Vec::new(), 0usize, 0usize);
    for j in 0..nq {
        let inv_q = 0.5 * j as f64 / (nq - 1) as f64;
        let (mut min, mut max) = (None, None);
        for k in 0..np {
            let inv_p = 0.5 * k as f64 / (np - 1) as f64;
            let m = match member(AdmissiblePoint::new(inv_p, inv_q, aux)) {
                Ok(m) => m,
                Err(e) => {
                    out.checks.push(Check::new("region matches its constraints", false, e));
                    return out;
                }
            };
            match expected_member(&cfg.region, inv_p, inv_q) {
                Some(e) if e != m => mismatches.push(format!("({inv_p}, {inv_q})")),
                None => ties += 1,
                _ => {}
            }
            if m {
                members += 1;
                min.get_or_insert(inv_p);
                max = Some(inv_p);
            }
            cloud.push(vec![num(inv_p), num(inv_q), num(aux), (m as u8).to_string()]);
        }
        let (lo, hi) = expected_row(&cfg.region, inv_q);
        let (lo, hi) = if lo <= hi { (Some(lo), Some(hi)) } else { (None, None) };
        boundary.push(vec![num(inv_q), opt(min), opt(max), opt(lo), opt(hi)]);
    }
    let shown: Vec<_> = mismatches.iter().take(5).cloned().collect();
    out.checks.push(Check::new(
        "region matches its constraints",
        mismatches.is_empty(),
        format!(
            "{} of {} grid points disagree{}; {ties} edge ties; {members} members; {}",
            mismatches.len(),
            np * nq,
            if shown.is_empty() { String::new() } else { format!(" (first: {})", shown.join(", ")) },
            corner_list(&cfg.region)
        ),
    ));
    out.tables.push(cloud);
    out.tables.push(boundary);
    out
}

/// Where the binding constraints meet the axes `1/p = 0` and `1/q = 0`.
fn corner_list(kind: &RegionKind) -> String {
    match *kind {
        RegionKind::AlphaLarge { n, alpha, sigma } => {
            let nf = n as f64;
            let q_axis = ((nf - sigma) / (2.0 * nf)).max((nf - 2.0 * sigma) / (2.0 * nf));
            let p_axis = ((nf - sigma) / (2.0 * alpha)).max((nf - 2.0 * sigma) / (4.0 * (alpha - 1.0)));
            format!("1/q = {q_axis:.6} at 1/p = 0; 1/p = {p_axis:.6} at 1/q = 0")
        }
        RegionKind::AlphaSmall { n, alpha, beta } => {
            let (lo, hi) = expected_row(kind, 0.0);
            format!("1/p in [{lo:.6}, {hi:.6}] at 1/q = 0 (n = {n}, alpha = {alpha}, beta = {beta}); both edges meet at 1/q = 1/2")
        }
        RegionKind::Tree {} => "square [0, 1/2] x [0, 1/2) with (0, 1/2)".into(),
    }
}
