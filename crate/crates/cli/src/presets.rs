//! Pinned experiment presets.
//!
//! Each preset is a complete config in the same TOML grammar users write, so
//! `afmc preset NAME` and `afmc run --config` share one code path.

use thiserror::Error;

use crate::config::ExperimentConfig;

#[derive(Debug, Error, PartialEq)]
#[error("unknown preset '{name}'; valid presets: {}", valid.join(", "))]
pub struct UnknownPreset {
    pub name: String,
    pub valid: Vec<&'static str>,
}

/// `(name, one-line description, TOML)`.
const PRESETS: &[(&str, &str, &str)] = &[
    (
        "prop41",
        "Bernoulli walk, censored point local time at 0: KS distance to |N(0,1)| below 0.03",
        r#"
name = "prop41"
seed = 42
[process]
kind = "walk"
n = 2048
law = "rademacher"
[functional]
kind = "censored_point"
z_star = 0.0
[estimate]
t = 1.0
paths = 50000
[compare]
reference = "half_normal"
metric = "ks"
tolerance = 0.03
"#,
    ),
    (
        "prop41_lazy",
        "lazy lattice walk (P(0) = 1/2): KS distance to (1/2)|N(0,1)| below 0.03",
        r#"
name = "prop41_lazy"
seed = 42
[process]
kind = "walk"
n = 2048
law = "lazy_lattice"
p0 = 0.5
[functional]
kind = "censored_point"
z_star = 0.0
[estimate]
t = 1.0
paths = 50000
[compare]
reference = "half_normal"
metric = "ks"
tolerance = 0.03
"#,
    ),
    (
        "prop41_stable",
        "Pareto lattice walk (alpha = 1.5): mean censored functional within 3 SE + 0.02 of the stable local-time characteristic",
        r#"
name = "prop41_stable"
seed = 42
[process]
kind = "walk"
n = 4096
law = "pareto_lattice"
alpha = 1.5
[functional]
kind = "censored_point"
z_star = 0.0
[estimate]
t = 1.0
paths = 20000
[compare]
reference = "analytic"
metric = "mean"
model = "stable"
tolerance = 0.02
"#,
    ),
    (
        "prop52_ou",
        "Ornstein-Uhlenbeck difference chain, Doob functional at 0: mean within 3 SE + 0.02 of the quadrature value",
        r#"
name = "prop52_ou"
seed = 42
[process]
kind = "sde_chain"
n = 2048
law = "gaussian"
a = "-x"
b = "1"
z0 = 0.0
[functional]
kind = "doob_zero"
[estimate]
t = 1.0
paths = 100000
[compare]
reference = "analytic"
metric = "mean"
model = "ornstein_uhlenbeck"
tolerance = 0.02
"#,
    ),
    (
        "example4_circle",
        "planar Gaussian walk, tube around the unit circle: mean within 3 SE + 0.02 of E1(1/2)/(2 pi)",
        r#"
name = "example4_circle"
seed = 42
[process]
kind = "walk"
n = 4096
law = "gaussian"
dim = 2
[functional]
kind = "tube"
set = "unit_circle"
[estimate]
t = 1.0
x = [[0.0, 0.0]]
paths = 20000
[compare]
reference = "analytic"
metric = "mean"
tolerance = 0.02
"#,
    ),
    (
        "llt",
        "lazy lattice law: local-limit discrepancies eps_k strictly decrease over k = 1, 4, 64, 1024",
        r#"
name = "llt"
seed = 42
[process]
kind = "walk"
n = 256
law = "lazy_lattice"
p0 = 0.5
[functional]
kind = "censored_point"
z_star = 0.0
[estimate]
t = 1.0
x = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]
paths = 1
k_values = [1, 4, 64, 1024]
[compare]
reference = "llt"
tolerance = 1e-4
"#,
    ),
    (
        "coupling_l2",
        "trivial Gaussian coupling: condition (iii) estimate 0 and median L2 discrepancy decreasing over n = 256, 1024, 4096",
        r#"
name = "coupling_l2"
seed = 42
[process]
kind = "walk"
n = 4096
law = "gaussian"
[functional]
kind = "censored_point"
z_star = 0.0
[estimate]
t = 1.0
paths = 1000
n_values = [256, 1024, 4096]
[compare]
reference = "coupling"
n_fine = 65536
tolerance = 0.01
"#,
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset_description(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn preset(name: &str) -> Result<ExperimentConfig, UnknownPreset> {
    let Some((_, _, text)) = PRESETS.iter().find(|p| p.0 == name) else {
        return Err(UnknownPreset {
            name: name.to_string(),
            valid: preset_names(),
        });
    };
    Ok(ExperimentConfig::from_str(text).expect("presets are valid TOML"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            let c = preset(name).unwrap();
            assert_eq!(c.name.as_deref(), Some(name));
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_preset_lists_the_valid_ones() {
        let err = preset("prop99").unwrap_err();
        let msg = err.to_string();
        for name in preset_names() {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn prop41_is_pinned() {
        let c = preset("prop41").unwrap();
        assert_eq!((c.process.n, c.estimate.paths), (2048, 50_000));
        assert_eq!(c.compare.unwrap().tolerance, 0.03);
    }
}
