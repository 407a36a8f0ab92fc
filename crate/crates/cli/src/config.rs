//! Experiment configuration.
//!
//! Configs are TOML files with four sections plus two top-level keys; a JSON
//! object with the same shape is accepted as well. Unknown keys are rejected.
//!
//! ```toml
//! seed = 42
//! workers = 4
//!
//! [process]
//! kind = "walk"            # walk | sde_chain | bm_exact | stable_exact | diffusion_reference
//! n = 2048
//! T = 1.0
//! law = "rademacher"       # rademacher | lazy_lattice | finite_lattice | gaussian | pareto_lattice
//!
//! [functional]
//! kind = "censored_point"  # censored_point | doob_zero | visit_count | tube
//! z_star = 0.0
//!
//! [estimate]
//! s = 0.0
//! t = 1.0
//! x = [0.0]
//! paths = 50000
//!
//! [compare]
//! reference = "half_normal"
//! metric = "ks"
//! tolerance = 0.03
//! ```
//!
//! See the README for the full key list.

use std::path::Path;
use std::sync::Arc;

use afmc_core::functionals::{FunctionalSpec, SetOracle, Sphere};
use afmc_core::processes::{CoefFn, ProcessSpec};
use afmc_core::sources::{IncrementLaw, LawKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_coefficient_expr, CoefficientExpr};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("invalid value for '{field}': {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Walk,
    SdeChain,
    BmExact,
    StableExact,
    DiffusionReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    Rademacher,
    LazyLattice,
    FiniteLattice,
    Gaussian,
    ParetoLattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub kind: ProcessKind,
    pub n: usize,
    #[serde(rename = "T", alias = "horizon", default = "one")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawName>,
    /// Normalize the law: unit variance, or for Pareto laws a limit with
    /// characteristic function `exp(-|u|^alpha)`.
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<usize>,
    /// Warn when a finite-difference slope of `a` or `b` on [-10, 10] exceeds this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    CensoredPoint,
    DoobZero,
    VisitCount,
    Tube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetName {
    UnitCircle,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    pub kind: FunctionalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// A start point: a number in one dimension, an array otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Scalar(v) => vec![*v],
            Point::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default)]
    pub s: f64,
    #[serde(default = "one")]
    pub t: f64,
    /// Start points; defaults to the process's natural start.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<Point>,
    /// Monte-Carlo paths per start point (pairs for the coupling reference).
    pub paths: usize,
    /// Grid sizes for the coupling reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    /// Convolution powers for the local-limit reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceName {
    /// `p_nonzero * sqrt(t - s) * |N(0,1)|` (local time at the start point).
    HalfNormal,
    /// Local time of a fine Euler reference path, estimated by band occupation.
    FineGrid,
    /// Analytic characteristic by quadrature.
    Analytic,
    /// Local-limit discrepancies `eps_k` of the increment law.
    Llt,
    /// Coupled chain / limit pairs.
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Ks,
    W1,
    Mean,
    Supnorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Gaussian,
    Stable,
    OrnsteinUhlenbeck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub reference: ReferenceName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricName>,
    pub tolerance: f64,
    /// Density model of the limit process for the analytic reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelName>,
    /// Band half-width of the occupation-density reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Fine grid size of the reference paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fine: Option<usize>,
    /// Reference draws (defaults to `estimate.paths`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_worker")]
    pub workers: usize,
    pub process: ProcessConfig,
    pub functional: FunctionalConfig,
    pub estimate: EstimateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn one_worker() -> usize {
    1
}

impl ExperimentConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }

    /// Canonical JSON used for the config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize to JSON")
    }

    /// Check every invariant and resolve the config into library objects.
    pub fn validate(&self) -> Result<Resolved, ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::field("workers", "must be at least 1"));
        }
        let p = &self.process;
        if p.n == 0 {
            return Err(ConfigError::field("process.n", "must be at least 1"));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(ConfigError::field("process.T", "must be positive and finite"));
        }
        let (process, law, coefficients) = self.resolve_process()?;
        let dim = process.dim();

        let e = &self.estimate;
        if e.paths == 0 {
            return Err(ConfigError::field("estimate.paths", "must be at least 1"));
        }
        if !(e.s >= 0.0 && e.s.is_finite()) {
            return Err(ConfigError::field("estimate.s", "must be non-negative"));
        }
        if !(e.t >= e.s) || !e.t.is_finite() {
            return Err(ConfigError::field("estimate.t", format!("must satisfy t >= s (s = {}, t = {})", e.s, e.t)));
        }
        if e.t > p.horizon + 1e-12 {
            return Err(ConfigError::field("estimate.t", format!("exceeds the horizon T = {}", p.horizon)));
        }
        let n = p.n as f64;
        for (field, v) in [("estimate.s", e.s), ("estimate.t", e.t)] {
            if ((v * n).round() - v * n).abs() > 1e-9 * (1.0 + v * n) {
                return Err(ConfigError::field(field, format!("{v} is not a multiple of 1/n = 1/{}", p.n)));
            }
        }
        let starts: Vec<Vec<f64>> = if e.x.is_empty() {
            vec![process.default_start()]
        } else {
            e.x.iter().map(Point::coords).collect()
        };
        for x in &starts {
            if x.len() != dim {
                return Err(ConfigError::field("estimate.x", format!("point {x:?} does not have dimension {dim}")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::field("estimate.x", "points must be finite"));
            }
        }
        if let Some(ns) = &e.n_values {
            if ns.is_empty() || ns.contains(&0) {
                return Err(ConfigError::field("estimate.n_values", "must be a nonempty list of positive sizes"));
            }
        }
        if let Some(ks) = &e.k_values {
            if ks.is_empty() || ks.contains(&0) {
                return Err(ConfigError::field("estimate.k_values", "must be a nonempty list of positive powers"));
            }
        }

        let functional = self.resolve_functional(dim)?;

        if let Some(c) = &self.compare {
            if !(c.tolerance > 0.0 && c.tolerance.is_finite()) {
                return Err(ConfigError::field("compare.tolerance", "must be positive and finite"));
            }
            if let Some(eps) = c.eps {
                if !(eps > 0.0) {
                    return Err(ConfigError::field("compare.eps", "must be positive"));
                }
            }
            if c.n_fine == Some(0) {
                return Err(ConfigError::field("compare.n_fine", "must be at least 1"));
            }
            if c.reference_paths == Some(0) {
                return Err(ConfigError::field("compare.reference_paths", "must be at least 1"));
            }
            self.check_reference(c, &process)?;
        }

        let mut warnings = Vec::new();
        if let Some(bound) = p.lipschitz_bound {
            for (name, coef) in &coefficients {
                let slope = coef.lipschitz_probe(-10.0, 10.0, 2001);
                if slope > bound {
                    warnings.push(format!(
                        "coefficient {name} has finite-difference slope {slope:.3e} > lipschitz_bound {bound} on [-10, 10]"
                    ));
                }
            }
        }

        Ok(Resolved {
            process,
            law,
            functional,
            starts,
            warnings,
        })
    }

    fn resolve_law(&self) -> Result<IncrementLaw, ConfigError> {
        let p = &self.process;
        let name = p.law.ok_or_else(|| ConfigError::field("process.law", "required for this process kind"))?;
        let kind = match name {
            LawName::Rademacher => LawKind::Rademacher,
            LawName::LazyLattice => LawKind::LazyLattice {
                p0: p.p0.ok_or_else(|| ConfigError::field("process.p0", "required for lazy_lattice"))?,
            },
            LawName::FiniteLattice => LawKind::FiniteLattice {
                support: p.support.clone().ok_or_else(|| ConfigError::field("process.support", "required for finite_lattice"))?,
                probs: p.probs.clone().ok_or_else(|| ConfigError::field("process.probs", "required for finite_lattice"))?,
            },
            LawName::Gaussian => LawKind::GaussianIid { dim: p.dim.unwrap_or(1) },
            LawName::ParetoLattice => LawKind::ParetoLattice {
                alpha: p.alpha.ok_or_else(|| ConfigError::field("process.alpha", "required for pareto_lattice"))?,
            },
        };
        IncrementLaw::new(kind, p.standardize).map_err(|e| ConfigError::field("process.law", e.to_string()))
    }

    fn coefficient(&self, field: &str, text: Option<&String>, default: &str) -> Result<CoefficientExpr, ConfigError> {
        let text = text.map_or(default, String::as_str);
        parse_coefficient_expr(text).map_err(|e| ConfigError::field(field, e.to_string()))
    }

    #[allow(clippy::type_complexity)]
    fn resolve_process(&self) -> Result<(ProcessSpec, Option<IncrementLaw>, Vec<(&'static str, CoefficientExpr)>), ConfigError> {
        let p = &self.process;
        Ok(match p.kind {
            ProcessKind::Walk => {
                let law = self.resolve_law()?;
                let alpha = law.alpha();
                if let Some(a) = p.alpha {
                    if (a - alpha).abs() > 1e-12 {
                        return Err(ConfigError::field("process.alpha", format!("law has tail index {alpha}, not {a}")));
                    }
                }
                (ProcessSpec::Walk { law: law.clone(), alpha }, Some(law), vec![])
            }
            ProcessKind::SdeChain | ProcessKind::DiffusionReference => {
                let a = self.coefficient("process.a", p.a.as_ref(), "0")?;
                let b = self.coefficient("process.b", p.b.as_ref(), "1")?;
                let z0 = p.z0.unwrap_or(0.0);
                if !z0.is_finite() {
                    return Err(ConfigError::field("process.z0", "must be finite"));
                }
                let (ac, bc): (CoefFn, CoefFn) = (Arc::new(a.clone()), Arc::new(b.clone()));
                let coefs = vec![("a", a), ("b", b)];
                if p.kind == ProcessKind::SdeChain {
                    let law = self.resolve_law()?;
                    if law.dim() != 1 || law.alpha() != 2.0 {
                        return Err(ConfigError::field("process.law", "difference chains need a scalar finite-variance law"));
                    }
                    (ProcessSpec::SdeChain { a: ac, b: bc, law: law.clone(), z0 }, Some(law), coefs)
                } else {
                    let refine = p.refine.unwrap_or(1);
                    if refine == 0 {
                        return Err(ConfigError::field("process.refine", "must be at least 1"));
                    }
                    (ProcessSpec::DiffusionReference { a: ac, b: bc, z0, refine }, None, coefs)
                }
            }
            ProcessKind::BmExact => {
                let dim = p.dim.unwrap_or(1);
                if dim == 0 {
                    return Err(ConfigError::field("process.dim", "must be at least 1"));
                }
                (ProcessSpec::BmExact { dim }, None, vec![])
            }
            ProcessKind::StableExact => {
                let alpha = p.alpha.ok_or_else(|| ConfigError::field("process.alpha", "required for stable_exact"))?;
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(ConfigError::field("process.alpha", "must lie in (1, 2]"));
                }
                (ProcessSpec::StableExact { alpha }, None, vec![])
            }
        })
    }

    fn resolve_functional(&self, dim: usize) -> Result<FunctionalSpec, ConfigError> {
        let f = &self.functional;
        let scalar = |kind: &str| {
            if dim != 1 {
                Err(ConfigError::field("functional.kind", format!("{kind} needs a scalar process, got dimension {dim}")))
            } else {
                Ok(())
            }
        };
        Ok(match f.kind {
            FunctionalKind::CensoredPoint => {
                scalar("censored_point")?;
                let z = f.z_star.unwrap_or(0.0);
                if !z.is_finite() {
                    return Err(ConfigError::field("functional.z_star", "must be finite"));
                }
                FunctionalSpec::censored_point(z)
            }
            FunctionalKind::DoobZero => {
                scalar("doob_zero")?;
                if f.z_star.is_some_and(|z| z != 0.0) {
                    return Err(ConfigError::field("functional.z_star", "doob_zero is the local time at 0"));
                }
                FunctionalSpec::doob_zero()
            }
            FunctionalKind::VisitCount => {
                scalar("visit_count")?;
                FunctionalSpec::visit_count()
            }
            FunctionalKind::Tube => FunctionalSpec::tube(self.resolve_set(dim)?),
        })
    }

    fn resolve_set(&self, dim: usize) -> Result<Arc<dyn SetOracle>, ConfigError> {
        let f = &self.functional;
        let sphere = match f.set.ok_or_else(|| ConfigError::field("functional.set", "required for tube"))? {
            SetName::UnitCircle => Sphere::unit_circle(),
            SetName::Sphere => Sphere {
                center: f.center.clone().ok_or_else(|| ConfigError::field("functional.center", "required for sphere"))?,
                radius: f.radius.ok_or_else(|| ConfigError::field("functional.radius", "required for sphere"))?,
            },
        };
        if sphere.center.len() != dim {
            return Err(ConfigError::field(
                "functional.set",
                format!("set lives in dimension {}, process in {dim}", sphere.center.len()),
            ));
        }
        if !(sphere.radius > 0.0) {
            return Err(ConfigError::field("functional.radius", "must be positive"));
        }
        Ok(Arc::new(sphere))
    }

    fn check_reference(&self, c: &CompareConfig, process: &ProcessSpec) -> Result<(), ConfigError> {
        let metric = c.metric;
        let allowed: &[MetricName] = match c.reference {
            ReferenceName::HalfNormal | ReferenceName::FineGrid => &[MetricName::Ks, MetricName::W1, MetricName::Mean],
            ReferenceName::Analytic => &[MetricName::Mean, MetricName::Supnorm],
            ReferenceName::Llt | ReferenceName::Coupling => &[],
        };
        if let Some(m) = metric {
            if !allowed.contains(&m) {
                return Err(ConfigError::field("compare.metric", format!("{m:?} is not available for {:?}", c.reference)));
            }
        } else if !allowed.is_empty() {
            return Err(ConfigError::field("compare.metric", format!("required, one of {allowed:?}")));
        }
        match c.reference {
            ReferenceName::HalfNormal => {
                if self.functional.kind != FunctionalKind::CensoredPoint && self.functional.kind != FunctionalKind::DoobZero {
                    return Err(ConfigError::field("compare.reference", "half_normal needs a point local-time functional"));
                }
                if !matches!(process, ProcessSpec::Walk { alpha, .. } if *alpha == 2.0) && !matches!(process, ProcessSpec::BmExact { dim: 1 }) {
                    return Err(ConfigError::field("compare.reference", "half_normal needs a finite-variance walk"));
                }
            }
            ReferenceName::FineGrid => {
                if !matches!(process, ProcessSpec::SdeChain { .. }) {
                    return Err(ConfigError::field("compare.reference", "fine_grid needs an sde_chain process"));
                }
            }
            ReferenceName::Analytic => {
                let model = c.model.or(match process {
                    ProcessSpec::Walk { alpha, .. } if *alpha == 2.0 => Some(ModelName::Gaussian),
                    ProcessSpec::Walk { .. } | ProcessSpec::StableExact { .. } => Some(ModelName::Stable),
                    ProcessSpec::BmExact { .. } => Some(ModelName::Gaussian),
                    _ => None,
                });
                if model.is_none() {
                    return Err(ConfigError::field("compare.model", "required for this process kind"));
                }
                // the closed-form tube characteristic is the planar Brownian circle measure
                if self.functional.kind == FunctionalKind::Tube && (process.dim() != 2 || model != Some(ModelName::Gaussian)) {
                    return Err(ConfigError::field("compare.reference", "analytic tube characteristics need a planar Gaussian model"));
                }
            }
            ReferenceName::Llt => {
                let law_ok = matches!(process, ProcessSpec::Walk { law, .. } if law.is_lattice() && law.finite_support().is_some());
                if !law_ok {
                    return Err(ConfigError::field("compare.reference", "llt needs a finite-support lattice walk"));
                }
                if self.estimate.k_values.is_none() {
                    return Err(ConfigError::field("estimate.k_values", "required for the llt reference"));
                }
            }
            ReferenceName::Coupling => {
                let gaussian = matches!(process, ProcessSpec::Walk { law, .. } if law.is_gaussian() && law.dim() == 1);
                if !gaussian && !matches!(process, ProcessSpec::SdeChain { .. }) {
                    return Err(ConfigError::field(
                        "compare.reference",
                        "coupling is available for scalar Gaussian walks and difference chains",
                    ));
                }
                if matches!(process, ProcessSpec::SdeChain { law, .. } if !law.is_gaussian()) {
                    return Err(ConfigError::field("process.law", "coupled difference chains need Gaussian increments"));
                }
                if self.functional.kind != FunctionalKind::CensoredPoint && self.functional.kind != FunctionalKind::DoobZero {
                    return Err(ConfigError::field("functional.kind", "coupling compares point local-time functionals"));
                }
            }
        }
        Ok(())
    }
}

/// A validated config turned into library objects.
pub struct Resolved {
    pub process: ProcessSpec,
    pub law: Option<IncrementLaw>,
    pub functional: FunctionalSpec,
    pub starts: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}
