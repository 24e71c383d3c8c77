//! JSON run configurations. Every record rejects unknown keys, and
//! `validate` runs before any computation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;

/// A sampled axis: an explicit list, or `points` values from `min` to `max`
/// (geometrically spaced when `log` is set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range(AxisRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Range(r) => {
                if r.points == 1 {
                    return vec![r.min];
                }
                (0..r.points)
                    .map(|k| {
                        let s = k as f64 / (r.points - 1) as f64;
                        if k + 1 == r.points {
                            r.max
                        } else if r.log {
                            (r.min.ln() + s * (r.max.ln() - r.min.ln())).exp()
                        } else {
                            r.min + s * (r.max - r.min)
                        }
                    })
                    .collect()
            }
        }
    }

    fn check(&self, name: &str, positive: bool) -> Result<(), CliError> {
        if let Axis::Range(r) = self {
            if r.points == 0 {
                return Err(CliError::Config(format!("{name}: range has no points")));
            }
            if !(r.min.is_finite() && r.max.is_finite()) || r.max < r.min {
                return Err(CliError::Config(format!("{name}: range needs finite min <= max")));
            }
            if r.log && !(r.min > 0.0) {
                return Err(CliError::Config(format!("{name}: a log range needs min > 0")));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(CliError::Config(format!("{name}: empty axis")));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite() || (positive && **x <= 0.0) || (!positive && **x < 0.0)) {
            let need = if positive { "positive" } else { "non-negative" };
            return Err(CliError::Config(format!("{name}: value {x} is not {need}")));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 2.0 && alpha != 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("alpha must lie in (0, 2) and differ from 1, got {alpha}")))
    }
}

fn check_tol(tol: f64) -> Result<(), CliError> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("tol must lie in (0, 1), got {tol}")))
    }
}

fn check_dimension(n: u32) -> Result<(), CliError> {
    if n >= 2 {
        Ok(())
    } else {
        Err(CliError::Config(format!("dimension n must be at least 2, got {n}")))
    }
}

fn check_branching(q: u32) -> Result<(), CliError> {
    if q >= 2 {
        Ok(())
    } else {
        Err(CliError::Config(format!("branching number Q must be at least 2, got {q}")))
    }
}

/// Parse a configuration file; unknown keys and type mismatches are config errors.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn default_kernel_tol() -> f64 {
    1e-6
}

fn default_tree_tol() -> f64 {
    1e-12
}

fn default_threshold() -> f64 {
    -1.35
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseReportConfig {
    pub n: u32,
    pub alphas: Vec<f64>,
    /// Values of `R = r/t`.
    pub r_ratios: Axis,
    /// Largest acceptable |ψ'| at a reported stationary point.
    #[serde(default = "default_residual_tol")]
    pub tol: f64,
    #[serde(default)]
    pub tree: Option<TreePhaseConfig>,
}

fn default_residual_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreePhaseConfig {
    pub q: Vec<u32>,
    pub alphas: Vec<f64>,
    pub t: f64,
    pub r: Axis,
}

impl PhaseReportConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_dimension(self.n)?;
        if self.alphas.is_empty() {
            return Err(CliError::Config("alphas: empty list".into()));
        }
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        self.r_ratios.check("r_ratios", false)?;
        check_tol(self.tol)?;
        if let Some(tree) = &self.tree {
            if tree.q.is_empty() || tree.alphas.is_empty() {
                return Err(CliError::Config("tree: q and alphas must be non-empty".into()));
            }
            for &q in &tree.q {
                check_branching(q)?;
            }
            for &a in &tree.alphas {
                if !(a > 0.0 && a <= 2.0) {
                    return Err(CliError::Config(format!("tree alpha must lie in (0, 2], got {a}")));
                }
            }
            if !(tree.t > 0.0 && tree.t.is_finite()) {
                return Err(CliError::Config(format!("tree t must be positive, got {}", tree.t)));
            }
            tree.r.check("tree.r", false)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnKernelConfig {
    pub n: u32,
    pub alpha: f64,
    pub sigma: f64,
    pub t: Axis,
    pub r: Axis,
    /// Accuracy relative to the theorem bound (absolute when no bound applies).
    #[serde(default = "default_kernel_tol")]
    pub tol: f64,
}

impl HnKernelConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_dimension(self.n)?;
        check_alpha(self.alpha)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(CliError::Config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        self.t.check("t", true)?;
        self.r.check("r", false)?;
        check_tol(self.tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnVerifyConfig {
    pub n: u32,
    pub alpha: f64,
    pub sigma: f64,
    pub grid: GridConfig,
    #[serde(default = "default_kernel_tol")]
    pub tol: f64,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub kunze_stein: Option<KunzeSteinConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t: Axis,
    pub r: Axis,
}

/// Log-log slope of `|k_t(r)|` at a fixed radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub r: f64,
    pub t: Axis,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KunzeSteinConfig {
    pub q: f64,
    pub t: Axis,
    pub r_max: f64,
    #[serde(default = "default_ks_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_ks_tol() -> f64 {
    1e-5
}

impl HnVerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_dimension(self.n)?;
        check_alpha(self.alpha)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(CliError::Config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        self.grid.t.check("grid.t", true)?;
        self.grid.r.check("grid.r", false)?;
        check_tol(self.tol)?;
        if let Some(d) = &self.decay {
            if !(d.r >= 0.0 && d.r.is_finite()) {
                return Err(CliError::Config(format!("decay.r must be non-negative, got {}", d.r)));
            }
            d.t.check("decay.t", true)?;
            if d.t.values().len() < 4 {
                return Err(CliError::Config("decay.t needs at least 4 times".into()));
            }
        }
        if let Some(k) = &self.kunze_stein {
            if !(k.q > 2.0 && k.q.is_finite()) {
                return Err(CliError::Config(format!("kunze_stein.q must exceed 2, got {}", k.q)));
            }
            if !(k.r_max > 0.0 && k.r_max.is_finite()) {
                return Err(CliError::Config(format!("kunze_stein.r_max must be positive, got {}", k.r_max)));
            }
            k.t.check("kunze_stein.t", true)?;
            if k.t.values().len() < 4 {
                return Err(CliError::Config("kunze_stein.t needs at least 4 times".into()));
            }
            check_tol(k.rel_tol)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeVerifyConfig {
    pub q: u32,
    pub alpha: f64,
    pub t: Axis,
    #[serde(default = "default_tree_tol")]
    pub tol: f64,
}

impl TreeVerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_branching(self.q)?;
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        self.t.check("t", true)?;
        if self.t.values().len() < 4 {
            return Err(CliError::Config("t needs at least 4 times".into()));
        }
        check_tol(self.tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlsRunConfig {
    pub q: u32,
    pub r_max: u32,
    pub alpha: f64,
    pub eta: f64,
    pub coupling: f64,
    pub gauge_invariant: bool,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    pub initial: InitialData,
    /// Spatial exponents whose norms are tabulated; the mass is always reported.
    #[serde(default = "default_norms")]
    pub norms: Vec<f64>,
    #[serde(default = "default_drift_tol")]
    pub mass_drift_tol: f64,
}

fn default_sample_every() -> usize {
    1
}

fn default_norms() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn default_drift_tol() -> f64 {
    1e-9
}

/// Radial initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude · δ₀`.
    Delta { amplitude: f64 },
    /// `amplitude · e^{−decay·r}` on every sphere.
    Exponential { amplitude: f64, decay: f64 },
}

impl NlsRunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_branching(self.q)?;
        if self.r_max < 4 {
            return Err(CliError::Config(format!("r_max must be at least 4, got {}", self.r_max)));
        }
        if self.r_max > 4096 {
            return Err(CliError::Config(format!("r_max is limited to 4096, got {}", self.r_max)));
        }
        if self.norms.iter().any(|&q| !(q >= 1.0)) {
            return Err(CliError::Config("norm exponents must be at least 1".into()));
        }
        if let InitialData::Exponential { decay, .. } = self.initial {
            if !(decay > 0.0) {
                return Err(CliError::Config(format!("initial decay must be positive, got {decay}")));
            }
        }
        check_tol(self.mass_drift_tol)?;
        self.nls().validate().map(|_| ()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn nls(&self) -> crate::nls_tree::NlsConfig {
        crate::nls_tree::NlsConfig {
            alpha: self.alpha,
            eta: self.eta,
            coupling: self.coupling,
            gauge_invariant: self.gauge_invariant,
            dt: self.dt,
            t_final: self.t_final,
            sample_every: self.sample_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub region: RegionKind,
    /// Number of grid points along `1/p` and `1/q`, both over `[0, 1/2]`.
    pub inv_p_points: usize,
    pub inv_q_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionKind {
    AlphaLarge { n: u32, alpha: f64, sigma: f64 },
    AlphaSmall { n: u32, alpha: f64, beta: f64 },
    Tree {},
}

impl RegionsConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.inv_p_points < 2 || self.inv_q_points < 2 {
            return Err(CliError::Config(format!("region grid needs at least 2 points per axis, got {}×{}", self.inv_p_points, self.inv_q_points)));
        }
        match self.region {
            RegionKind::AlphaLarge { n, alpha, sigma } => {
                check_dimension(n)?;
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(CliError::Config(format!("alpha_large needs 1 < alpha < 2, got {alpha}")));
                }
                if !(0.0..=n as f64 / 2.0).contains(&sigma) {
                    return Err(CliError::Config(format!("sigma must lie in [0, n/2], got {sigma}")));
                }
            }
            RegionKind::AlphaSmall { n, alpha, beta } => {
                if n < 3 {
                    return Err(CliError::Config(format!("alpha_small regions need n >= 3, got {n}")));
                }
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(CliError::Config(format!("alpha_small needs 0 < alpha < 1, got {alpha}")));
                }
                if !(0.0..=alpha).contains(&beta) {
                    return Err(CliError::Config(format!("beta must lie in [0, alpha], got {beta}")));
                }
            }
            RegionKind::Tree {} => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        let a: Axis = serde_json::from_str(r#"{"min": 1, "max": 100, "points": 3, "log": true}"#).unwrap();
        let v = a.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
        let b: Axis = serde_json::from_str("[0.5, 2]").unwrap();
        assert_eq!(b.values(), vec![0.5, 2.0]);
        assert!(serde_json::from_str::<Axis>(r#"{"min": 1, "max": 2, "points": 3, "step": 1}"#).is_err());
        assert!(Axis::Values(vec![]).check("t", true).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"n": 3, "alpha": 1.5, "sigma": 0.75, "t": [1], "r": [1], "colour": 1}"#;
        assert!(serde_json::from_str::<HnKernelConfig>(text).is_err());
        let text = r#"{"region": {"kind": "tree", "extra": 1}, "inv_p_points": 3, "inv_q_points": 3}"#;
        assert!(serde_json::from_str::<RegionsConfig>(text).is_err());
    }
}
