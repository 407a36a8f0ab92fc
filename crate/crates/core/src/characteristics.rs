//! Transition densities, symbol measures and characteristics
//! `f^{s,t}(x) = E[phi^{s,t} | X(s) = x]`, analytic and simulated, together
//! with the numeric checks on densities, moduli and symbols.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::diagnostics::{mean_and_se, DistanceReport, Metric};
use crate::error::{Error, Result};
use crate::functionals::{chi_reduce, eval_additive, FunctionalSpec};
use crate::processes::{euclid, grid_index, steps_for, walk_spacing, PathGrid, ProcessSpec, TimeGrid};
use crate::quad::{integrate, integrate_pieces, Tolerance};
use crate::sources::{IncrementLaw, RngStream};

/// Transition-density models of the limit processes and of lattice chains.
#[derive(Debug, Clone)]
pub enum DensityModel {
    /// Brownian motion in `R^d`.
    Gaussian { dim: usize },
    /// Symmetric stable process with `E exp(iuX(r)) = exp(-r |u|^alpha)`.
    Stable { alpha: f64 },
    /// `dZ = -Z dt + dW`: mean `x e^{-r}`, variance `(1 - e^{-2r})/2`.
    OrnsteinUhlenbeck,
    /// `p_{n,k}` of the scaled walk, with respect to counting measure on the lattice.
    LatticeExact { law: IncrementLaw, n: usize },
}

fn normal_density(z: f64, var: f64) -> f64 {
    (-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Truncation point where the damping `exp(-r u^alpha)` drops below `1e-12`.
fn stable_cutoff(alpha: f64, r: f64) -> f64 {
    (27.7 / r).powf(1.0 / alpha)
}

/// Tail expansion `(1/pi) sum (-1)^{k+1} Gamma(alpha k + 1)/k! sin(k pi alpha/2) r^k z^{-alpha k - 1}`;
/// `None` when the smallest term is not negligible.
fn stable_tail_series(alpha: f64, r: f64, z: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut fact = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        fact *= kf;
        let term = gamma(alpha * kf + 1.0) / fact * (kf * PI * alpha / 2.0).sin() * r.powf(kf) * z.powf(-alpha * kf - 1.0);
        let mag = (gamma(alpha * kf + 1.0) / fact * r.powf(kf) * z.powf(-alpha * kf - 1.0)).abs();
        if mag > last {
            break;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * term;
        last = mag;
        if mag < 1e-16 {
            break;
        }
    }
    (last < 1e-11).then_some(sum / PI)
}

/// Density of the symmetric stable law at time `r`: `(1/pi) int_0^inf cos(uz) exp(-r u^alpha) du`.
pub fn stable_density(alpha: f64, r: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("stability index must lie in (0, 2], got {alpha}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("time must be positive, got {r}")));
    }
    let z = z.abs();
    if alpha == 2.0 {
        return Ok(normal_density(z, 2.0 * r));
    }
    if alpha == 1.0 {
        return Ok(r / (PI * (r * r + z * z)));
    }
    let scaled = z * r.powf(-1.0 / alpha);
    if scaled > 12.0 {
        if let Some(v) = stable_tail_series(alpha, r, z) {
            return Ok(v.max(0.0));
        }
    }
    let cutoff = stable_cutoff(alpha, r);
    let f = |u: f64| (u * z).cos() * (-r * u.powf(alpha)).exp();
    let pieces = if z > 0.0 { ((cutoff * z / PI).ceil() as usize).clamp(1, 200_000) } else { 1 };
    let breaks: Vec<f64> = (0..=pieces).map(|i| cutoff * i as f64 / pieces as f64).collect();
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-12,
        max_intervals: 20 * pieces + 200,
    };
    let res = integrate_pieces(&f, &breaks, tol);
    Ok((res.value / PI).max(0.0))
}

/// `p_r(x, y)` of a model; lattice models expect `r = k/n` and lattice points.
pub fn density_eval(model: &DensityModel, r: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("time must be positive, got {r}")));
    }
    if x.len() != y.len() {
        return Err(Error::domain("points of different dimension"));
    }
    match model {
        DensityModel::Gaussian { dim } => {
            if x.len() != *dim {
                return Err(Error::domain(format!("model is {dim}-dimensional, points are {}-dimensional", x.len())));
            }
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
            Ok((2.0 * PI * r).powf(-(*dim as f64) / 2.0) * (-d2 / (2.0 * r)).exp())
        }
        DensityModel::Stable { alpha } => {
            scalar_points(x)?;
            stable_density(*alpha, r, y[0] - x[0])
        }
        DensityModel::OrnsteinUhlenbeck => {
            scalar_points(x)?;
            let v = -(-2.0 * r).exp_m1() / 2.0;
            Ok(normal_density(y[0] - x[0] * (-r).exp(), v))
        }
        DensityModel::LatticeExact { law, n } => {
            scalar_points(x)?;
            let k = grid_index(*n, r).ok_or_else(|| Error::domain(format!("time {r} is not a multiple of 1/{n}")))?;
            lattice_transition(law, *n, k, x[0], y[0])
        }
    }
}

fn scalar_points(x: &[f64]) -> Result<()> {
    if x.len() != 1 {
        return Err(Error::domain("model is one-dimensional"));
    }
    Ok(())
}

/// Probabilities on consecutive lattice indices `lo, lo + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    pub lo: i64,
    pub probs: Vec<f64>,
}

impl LatticeDistribution {
    fn point() -> Self {
        LatticeDistribution { lo: 0, probs: vec![1.0] }
    }

    pub fn prob(&self, i: i64) -> f64 {
        let j = i - self.lo;
        if j < 0 {
            0.0
        } else {
            self.probs.get(j as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.probs.len() as i64 - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(j, &p)| (self.lo + j as i64, p))
    }

    fn convolve(&self, other: &LatticeDistribution) -> LatticeDistribution {
        let mut probs = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in other.probs.iter().enumerate() {
                probs[i + j] += p * q;
            }
        }
        LatticeDistribution {
            lo: self.lo + other.lo,
            probs,
        }
    }
}

/// Convolution powers of a finite-support lattice law, cached by binary doubling.
pub struct LatticeKernel {
    step: LatticeDistribution,
    spacing: f64,
    doublings: Mutex<Vec<LatticeDistribution>>,
}

impl LatticeKernel {
    /// Kernel of the walk scaled for step parameter `n`.
    pub fn new(law: &IncrementLaw, n: usize) -> Result<Self> {
        let support = law
            .finite_support()
            .ok_or_else(|| Error::Unsupported("exact transitions need a finite-support lattice law".into()))?;
        let lo = support.iter().map(|&(j, _)| j).min().expect("non-empty support");
        let hi = support.iter().map(|&(j, _)| j).max().expect("non-empty support");
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (j, p) in support {
            probs[(j - lo) as usize] += p;
        }
        let step = LatticeDistribution { lo, probs };
        Ok(LatticeKernel {
            doublings: Mutex::new(vec![step.clone()]),
            step,
            spacing: walk_spacing(law, n),
        })
    }

    /// Scaled lattice spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn step(&self) -> &LatticeDistribution {
        &self.step
    }

    /// Distribution of `S_k` (integer offsets).
    pub fn power(&self, k: usize) -> LatticeDistribution {
        let mut cache = self.doublings.lock().expect("cache lock");
        let mut result = LatticeDistribution::point();
        let mut bit = 0;
        let mut rest = k;
        while rest > 0 {
            while cache.len() <= bit {
                let last = cache.last().expect("non-empty cache");
                let sq = last.convolve(last);
                cache.push(sq);
            }
            if rest & 1 == 1 {
                result = result.convolve(&cache[bit]);
            }
            rest >>= 1;
            bit += 1;
        }
        result
    }

    /// One-step propagation of a distribution.
    pub fn advance(&self, dist: &LatticeDistribution) -> LatticeDistribution {
        dist.convolve(&self.step)
    }

    /// Integer offset of a scaled displacement, or a domain error if it is off the lattice.
    pub fn offset(&self, displacement: f64) -> Result<i64> {
        let i = displacement / self.spacing;
        let r = i.round();
        if (i - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(Error::domain(format!("displacement {displacement} is off the lattice of spacing {}", self.spacing)));
        }
        Ok(r as i64)
    }
}

/// `P(X_n(k/n) = y | X_n(0) = x)` for the scaled lattice walk.
pub fn lattice_transition(law: &IncrementLaw, n: usize, k: usize, x: f64, y: f64) -> Result<f64> {
    let kernel = LatticeKernel::new(law, n)?;
    let i = kernel.offset(y - x)?;
    Ok(kernel.power(k).prob(i))
}

fn standard_normal_density(z: f64) -> f64 {
    normal_density(z, 1.0)
}

fn require_llt_law(law: &IncrementLaw) -> Result<f64> {
    let props = law.properties();
    if law.finite_support().is_none() {
        return Err(Error::Unsupported("local limit diagnostics need a finite-support lattice law".into()));
    }
    if !props.aperiodic {
        return Err(Error::domain(format!(
            "law is periodic with period {}; the local limit discrepancy does not vanish",
            props.span
        )));
    }
    props.sigma.ok_or_else(|| Error::domain("law has infinite variance"))
}

/// `eps_k = sup_i |sigma sqrt(k) P(S_k = i) - phi(i / (sigma sqrt(k)))|` on the unit lattice.
pub fn llt_discrepancy(law: &IncrementLaw, k: usize) -> Result<f64> {
    let sigma = require_llt_law(law)?;
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let kernel = LatticeKernel::new(law, 1)?;
    let dist = kernel.power(k);
    Ok(llt_sup(&dist, sigma, k))
}

fn llt_sup(dist: &LatticeDistribution, sigma: f64, k: usize) -> f64 {
    let scale = sigma * (k as f64).sqrt();
    (dist.lo - 1..=dist.hi() + 1)
        .map(|i| (scale * dist.prob(i) - standard_normal_density(i as f64 / scale)).abs())
        .fold(0.0, f64::max)
}

/// `eps_k` for several `k`, sharing one kernel.
pub fn llt_discrepancies(law: &IncrementLaw, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    let sigma = require_llt_law(law)?;
    let kernel = LatticeKernel::new(law, 1)?;
    ks.iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::domain("k must be at least 1"));
            }
            Ok((k, llt_sup(&kernel.power(k), sigma, k)))
        })
        .collect()
}

/// One row of the density-discrepancy surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LltRow {
    pub n: usize,
    pub k: usize,
    /// `sup_y |p_{n,k}(0, y) / (span h) - p_{k/n}(0, y)|`, the lattice probabilities
    /// rescaled by the cell volume to a density.
    pub sup_gap: f64,
    /// `sup_gap * (k/n)^gamma`.
    pub scaled: f64,
}

/// Discrepancy between the scaled walk's transition probabilities and the
/// Brownian density `p_{k/n}`, for each `k` in `ks`.
pub fn llt_surface(law: &IncrementLaw, n: usize, ks: &[usize], gamma_exp: f64) -> Result<Vec<LltRow>> {
    if law.alpha() != 2.0 || law.properties().sigma.is_none() {
        return Err(Error::Unsupported("the density surface is defined for finite-variance laws".into()));
    }
    if !law.standardized() && (law.natural_scale() - 1.0).abs() > 1e-12 {
        return Err(Error::config("the density surface needs a standardized law"));
    }
    let kernel = LatticeKernel::new(law, n)?;
    let h = kernel.spacing();
    let cell = h * law.properties().span.max(1) as f64;
    ks.iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::domain("k must be at least 1"));
            }
            let t = k as f64 / n as f64;
            let dist = kernel.power(k);
            let sup_gap = dist
                .iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(i, p)| (p / cell - normal_density(i as f64 * h, t)).abs())
                .fold(0.0, f64::max);
            Ok(LltRow {
                n,
                k,
                sup_gap,
                scaled: sup_gap * t.powf(gamma_exp),
            })
        })
        .collect()
}

/// `int_0^tau p_r(x, y) dr`.
pub fn time_integrated_density(model: &DensityModel, tau: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::domain(format!("time span {tau} is negative")));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    match model {
        DensityModel::Gaussian { dim } => {
            if x.len() != *dim || y.len() != *dim {
                return Err(Error::domain("point dimension does not match the model"));
            }
            let rho = euclid(x, y);
            if *dim == 1 {
                // sqrt(2 tau/pi) e^{-rho^2/(2 tau)} - rho erfc(rho / sqrt(2 tau))
                return Ok((2.0 * tau / PI).sqrt() * (-rho * rho / (2.0 * tau)).exp()
                    - rho * erfc(rho / (2.0 * tau).sqrt()));
            }
            if rho == 0.0 {
                return Err(Error::Divergent(format!(
                    "int_0 p_r(x, x) dr diverges in dimension {dim}"
                )));
            }
            let d = *dim as f64;
            let f = |u: f64| {
                if u == 0.0 {
                    0.0
                } else {
                    let r = u * u;
                    2.0 * u * (2.0 * PI * r).powf(-d / 2.0) * (-rho * rho / (2.0 * r)).exp()
                }
            };
            Ok(integrate(f, 0.0, tau.sqrt(), Tolerance::abs(1e-12)).value)
        }
        DensityModel::Stable { alpha } => {
            scalar_points(x)?;
            let alpha = *alpha;
            if !(alpha > 1.0) {
                return Err(Error::Divergent(format!(
                    "local time does not exist for stability index {alpha} <= 1"
                )));
            }
            if alpha > 2.0 {
                return Err(Error::domain(format!("stability index {alpha} exceeds 2")));
            }
            let z = y[0] - x[0];
            // r = u^q flattens the r^{-1/alpha} singularity: integrand q p_1(u^{-1/(alpha-1)} z)
            let q = alpha / (alpha - 1.0);
            let upper = tau.powf(1.0 / q);
            let f = |u: f64| {
                if u == 0.0 {
                    return if z == 0.0 { q * stable_density(alpha, 1.0, 0.0).unwrap_or(0.0) } else { 0.0 };
                }
                q * stable_density(alpha, 1.0, u.powf(-1.0 / (alpha - 1.0)) * z).unwrap_or(f64::NAN)
            };
            let res = integrate(f, 0.0, upper, Tolerance::abs(1e-9));
            if !res.value.is_finite() {
                return Err(Error::Numeric {
                    step: 0,
                    message: "stable density quadrature failed".into(),
                });
            }
            Ok(res.value)
        }
        DensityModel::OrnsteinUhlenbeck => {
            scalar_points(x)?;
            let (x0, y0) = (x[0], y[0]);
            // r = u^2; 2u p_{u^2} stays bounded as u -> 0
            let f = |u: f64| {
                if u == 0.0 {
                    return if x0 == y0 { 2.0 / (2.0 * PI).sqrt() } else { 0.0 };
                }
                let r = u * u;
                let v = -(-2.0 * r).exp_m1() / 2.0;
                2.0 * u * normal_density(y0 - x0 * (-r).exp(), v)
            };
            Ok(integrate(f, 0.0, tau.sqrt(), Tolerance::abs(1e-11)).value)
        }
        DensityModel::LatticeExact { .. } => Err(Error::Unsupported(
            "use characteristic_lattice_exact for lattice chains".into(),
        )),
    }
}

fn check_interval(s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("s = {s} must be non-negative")));
    }
    if t < s {
        return Err(Error::domain(format!("t = {t} precedes s = {s}")));
    }
    Ok(t - s)
}

/// `f^{s,t}(x) = p_nonzero int_0^{t-s} p_r(z* - x) dr` for a point symbol.
pub fn characteristic_analytic_point(z_star: f64, p_nonzero: f64, model: &DensityModel, s: f64, t: f64, x: f64) -> Result<f64> {
    if let DensityModel::Stable { alpha } = model {
        if !(*alpha > 1.0) {
            return Err(Error::Divergent(format!("local time does not exist for stability index {alpha} <= 1")));
        }
    }
    let tau = check_interval(s, t)?;
    match model {
        DensityModel::Gaussian { dim: 1 } | DensityModel::Stable { .. } | DensityModel::OrnsteinUhlenbeck => {}
        _ => {
            return Err(Error::Unsupported(
                "point characteristics need a one-dimensional gaussian, stable or OU model".into(),
            ))
        }
    }
    Ok(p_nonzero * time_integrated_density(model, tau, &[x], &[z_star])?)
}

/// Symbol measures of additive functionals.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// `mass` times the unit mass at `at`.
    Point { at: Vec<f64>, mass: f64 },
    /// `mass` times normalized arclength on a circle in the plane.
    SurfaceCircle { center: [f64; 2], radius: f64, mass: f64 },
    /// Point masses `weights[i]` at `points[i*dim..(i+1)*dim]`.
    LatticeSymbol { dim: usize, points: Vec<f64>, weights: Vec<f64> },
}

impl MeasureSpec {
    pub fn unit_circle() -> Self {
        MeasureSpec::SurfaceCircle {
            center: [0.0, 0.0],
            radius: 1.0,
            mass: 1.0,
        }
    }

    pub fn empty(dim: usize) -> Self {
        MeasureSpec::LatticeSymbol {
            dim,
            points: vec![],
            weights: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::Point { at, .. } => at.len(),
            MeasureSpec::SurfaceCircle { .. } => 2,
            MeasureSpec::LatticeSymbol { dim, .. } => *dim,
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureSpec::Point { mass, .. } | MeasureSpec::SurfaceCircle { mass, .. } => *mass,
            MeasureSpec::LatticeSymbol { weights, .. } => weights.iter().sum(),
        }
    }

    /// `mu(B(x, R))` for the closed ball.
    pub fn ball_mass(&self, x: &[f64], radius: f64) -> f64 {
        match self {
            MeasureSpec::Point { at, mass } => {
                if euclid(x, at) <= radius {
                    *mass
                } else {
                    0.0
                }
            }
            MeasureSpec::SurfaceCircle { center, radius: rho, mass } => mass * circle_arc_fraction(euclid(x, center), *rho, radius),
            MeasureSpec::LatticeSymbol { dim, points, weights } => points
                .chunks(*dim)
                .zip(weights)
                .filter(|(p, _)| euclid(x, p) <= radius)
                .map(|(_, w)| w)
                .sum(),
        }
    }
}

/// Fraction of a circle of radius `rho` inside a ball of radius `big_r`
/// whose center lies at distance `d` from the circle's center.
fn circle_arc_fraction(d: f64, rho: f64, big_r: f64) -> f64 {
    if d == 0.0 {
        return if big_r >= rho { 1.0 } else { 0.0 };
    }
    let c = (d * d + rho * rho - big_r * big_r) / (2.0 * d * rho);
    if c <= -1.0 {
        1.0
    } else if c >= 1.0 {
        0.0
    } else {
        c.acos() / PI
    }
}

/// `int p_r(x, y) mu(dy)`.
fn symbol_density(mu: &MeasureSpec, model: &DensityModel, r: f64, x: &[f64]) -> Result<f64> {
    match mu {
        MeasureSpec::Point { at, mass } => Ok(mass * density_eval(model, r, x, at)?),
        MeasureSpec::LatticeSymbol { dim, points, weights } => {
            let mut acc = 0.0;
            for (p, w) in points.chunks(*dim).zip(weights) {
                acc += w * density_eval(model, r, x, p)?;
            }
            Ok(acc)
        }
        MeasureSpec::SurfaceCircle { center, radius, mass } => {
            if !matches!(model, DensityModel::Gaussian { dim: 2 }) {
                return Err(Error::Unsupported("circle symbols need the planar gaussian model".into()));
            }
            Ok(mass * circle_average(r, x, center, *radius))
        }
    }
}

/// `(1/(2 pi)) int_0^{2 pi} p_r(x, c + rho e^{i theta}) d theta` for the planar heat kernel.
fn circle_average(r: f64, x: &[f64], center: &[f64; 2], rho: f64) -> f64 {
    let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
    let d = (dx * dx + dy * dy).sqrt();
    let norm = 1.0 / (2.0 * PI * r);
    if d == 0.0 {
        return norm * (-rho * rho / (2.0 * r)).exp();
    }
    // distance^2 = d^2 + rho^2 - 2 d rho cos(theta); peak at theta = 0
    let f = |theta: f64| (-(d * d + rho * rho - 2.0 * d * rho * theta.cos()) / (2.0 * r)).exp();
    // the peak at theta = 0 has width about sqrt(r / (d rho)); refine geometrically towards it
    let mut breaks = vec![0.0];
    let mut w = (r / (d * rho)).sqrt().min(PI / 2.0);
    while w < PI {
        breaks.push(w);
        w *= 2.0;
    }
    breaks.push(PI);
    let res = integrate_pieces(&f, &breaks, Tolerance::abs(1e-14));
    norm * res.value / PI
}

/// `int_0^{t-s} int p_r(x, y) mu(dy) dr` for a gaussian model.
pub fn characteristic_analytic_measure(mu: &MeasureSpec, model: &DensityModel, s: f64, t: f64, x: &[f64]) -> Result<f64> {
    let tau = check_interval(s, t)?;
    let dim = match model {
        DensityModel::Gaussian { dim } => *dim,
        _ => return Err(Error::Unsupported("measure characteristics need a gaussian model".into())),
    };
    if mu.dim() != dim || x.len() != dim {
        return Err(Error::domain("measure, model and point dimensions differ"));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    match mu {
        MeasureSpec::Point { at, mass } => Ok(mass * time_integrated_density(model, tau, x, at)?),
        MeasureSpec::LatticeSymbol { dim, points, weights } => {
            let mut acc = 0.0;
            for (p, w) in points.chunks(*dim).zip(weights) {
                acc += w * time_integrated_density(model, tau, x, p)?;
            }
            Ok(acc)
        }
        MeasureSpec::SurfaceCircle { .. } => {
            check_symbol_finite(mu, model, &[x.to_vec()])?;
            let f = |u: f64| {
                if u == 0.0 {
                    return 0.0;
                }
                2.0 * u * symbol_density(mu, model, u * u, x).unwrap_or(f64::NAN)
            };
            let res = integrate(f, 0.0, tau.sqrt(), Tolerance::abs(1e-11));
            Ok(res.value)
        }
    }
}

/// Blow-up exponent of `r -> sup_x int p_r(x, y) mu(dy)` as `r -> 0`, estimated
/// from `r = 1e-4` and `r = 1e-6` over the probe points and the support of `mu`.
pub fn symbol_singularity_exponent(mu: &MeasureSpec, model: &DensityModel, probes: &[Vec<f64>]) -> Result<f64> {
    let mut points: Vec<Vec<f64>> = probes.to_vec();
    match mu {
        MeasureSpec::Point { at, .. } => points.push(at.clone()),
        MeasureSpec::SurfaceCircle { center, radius, .. } => {
            for i in 0..8 {
                let a = i as f64 * PI / 4.0;
                points.push(vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
            }
        }
        MeasureSpec::LatticeSymbol { dim, points: pts, .. } => points.extend(pts.chunks(*dim).map(|p| p.to_vec())),
    }
    if mu.total_mass() == 0.0 {
        return Ok(0.0);
    }
    let sup = |r: f64| -> Result<f64> {
        let mut best: f64 = 0.0;
        for p in &points {
            best = best.max(symbol_density(mu, model, r, p)?);
        }
        Ok(best)
    };
    let (r1, r2) = (1e-4, 1e-6);
    let (s1, s2) = (sup(r1)?, sup(r2)?);
    if s1 <= 0.0 || s2 <= 0.0 {
        return Ok(0.0);
    }
    Ok(-(s2 / s1).ln() / (r2 / r1).ln())
}

fn check_symbol_finite(mu: &MeasureSpec, model: &DensityModel, probes: &[Vec<f64>]) -> Result<()> {
    let exponent = symbol_singularity_exponent(mu, model, probes)?;
    if exponent >= 0.999 {
        return Err(Error::Divergent(format!(
            "sup_x int p_r(x,y) mu(dy) grows like r^-{exponent:.3} as r -> 0; not integrable"
        )));
    }
    Ok(())
}

/// Symbol `mu_n = sum_y n h Psi_n(y) delta_y` of a window-2 functional of a lattice
/// walk, restricted to lattice points within `radius` of the origin.
pub fn lattice_symbol(spec: &FunctionalSpec, process: &ProcessSpec, n: usize, radius: f64) -> Result<MeasureSpec> {
    let reduced = chi_reduce(spec, process, n)?;
    let law = match process {
        ProcessSpec::Walk { law, .. } => law,
        _ => unreachable!("reduction succeeded only for walks"),
    };
    let h = walk_spacing(law, n);
    let bound = reduced.bind(n, 1)?;
    let m = (radius / h).floor() as i64;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in -m..=m {
        let y = i as f64 * h;
        let w = bound.eval(&[y]);
        if w > 0.0 {
            points.push(y);
            weights.push(n as f64 * h * w);
        }
    }
    Ok(MeasureSpec::LatticeSymbol { dim: 1, points, weights })
}

/// How a table's values were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    MonteCarlo { paths: usize },
    LatticeExact,
}

impl Provenance {
    fn label(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::MonteCarlo { .. } => "monte_carlo",
            Provenance::LatticeExact => "lattice_exact",
        }
    }
}

/// One `(s, t, x)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub s: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

impl Cell {
    pub fn new(s: f64, t: f64, x: Vec<f64>) -> Self {
        Cell { s, t, x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicRow {
    pub cell: Cell,
    pub value: f64,
    pub se: f64,
}

/// Characteristic values on a grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicTable {
    pub provenance: Provenance,
    /// Step parameter of the chain, if any.
    pub n: Option<usize>,
    pub rows: Vec<CharacteristicRow>,
}

impl CharacteristicTable {
    /// Fill a table cell by cell; `f` returns `(value, se)`.
    pub fn build<F>(provenance: Provenance, n: Option<usize>, cells: &[Cell], mut f: F) -> Result<Self>
    where
        F: FnMut(&Cell) -> Result<(f64, f64)>,
    {
        let rows = cells
            .iter()
            .map(|c| {
                let (value, se) = f(c)?;
                Ok(CharacteristicRow {
                    cell: c.clone(),
                    value,
                    se,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CharacteristicTable { provenance, n, rows })
    }

    pub fn max_se(&self) -> f64 {
        self.rows.iter().map(|r| r.se).fold(0.0, f64::max)
    }

    /// CSV with columns `s, t, x_1..x_d, value, se, provenance, n, M`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.rows.first().map_or(1, |r| r.cell.x.len());
        write!(w, "s,t")?;
        for c in 1..=d {
            write!(w, ",x_{c}")?;
        }
        writeln!(w, ",value,se,provenance,n,M")?;
        let n = self.n.map(|v| v.to_string()).unwrap_or_default();
        let m = match self.provenance {
            Provenance::MonteCarlo { paths } => paths.to_string(),
            _ => String::new(),
        };
        for r in &self.rows {
            write!(w, "{},{}", r.cell.s, r.cell.t)?;
            for v in &r.cell.x {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{},{},{},{},{}", r.value, r.se, self.provenance.label(), n, m)?;
        }
        Ok(())
    }
}

/// Largest absolute difference over matching grids; the noise floor is
/// three times the largest combined standard error.
pub fn supnorm_gap(fn_table: &CharacteristicTable, f_table: &CharacteristicTable) -> Result<DistanceReport> {
    if fn_table.rows.len() != f_table.rows.len() {
        return Err(Error::domain(format!(
            "tables have {} and {} cells",
            fn_table.rows.len(),
            f_table.rows.len()
        )));
    }
    let mut gap: f64 = 0.0;
    let mut floor: f64 = 0.0;
    for (a, b) in fn_table.rows.iter().zip(&f_table.rows) {
        let same = (a.cell.s - b.cell.s).abs() <= 1e-12
            && (a.cell.t - b.cell.t).abs() <= 1e-12
            && a.cell.x.len() == b.cell.x.len()
            && a.cell.x.iter().zip(&b.cell.x).all(|(u, v)| (u - v).abs() <= 1e-12);
        if !same {
            return Err(Error::domain(format!("cell {:?} does not match {:?}", a.cell, b.cell)));
        }
        gap = gap.max((a.value - b.value).abs());
        floor = floor.max((a.se * a.se + b.se * b.se).sqrt());
    }
    let mut report = DistanceReport::new(Metric::Supnorm, gap, fn_table.rows.len(), Some(f_table.rows.len()));
    report.noise_floor = Some(3.0 * floor);
    Ok(report)
}

/// Monte-Carlo mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
    pub m: usize,
}

impl McEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let (value, se) = mean_and_se(values);
        McEstimate {
            value,
            se,
            m: values.len(),
        }
    }
}

/// `phi_n^{0, t-s}` on `paths` independent chains started at `x`; path `i`
/// uses stream `(seed, i)`. Values are returned in path order whatever the
/// number of worker threads.
pub fn functional_samples(
    spec: &FunctionalSpec,
    process: &ProcessSpec,
    n: usize,
    x: &[f64],
    s: f64,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let tau = check_interval(s, t)?;
    if grid_index(n, s).is_none() {
        return Err(Error::domain(format!("s = {s} is not on the grid 1/{n}")));
    }
    if paths == 0 {
        return Err(Error::domain("need at least one path"));
    }
    if tau == 0.0 {
        return Ok(vec![0.0; paths]);
    }
    let grid = TimeGrid::new(n, tau).with_lookahead(spec.window() - 1);
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64).generator();
            let path = process.sample_path(&grid, x, &mut rng)?;
            eval_additive(spec, &path, 0.0, tau)
        })
        .collect()
}

/// `f_n^{s,t}(x)` by simulation.
pub fn characteristic_mc(
    spec: &FunctionalSpec,
    process: &ProcessSpec,
    n: usize,
    x: &[f64],
    s: f64,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let values = functional_samples(spec, process, n, x, s, t, paths, seed)?;
    Ok(McEstimate::from_samples(&values))
}

/// Exact `f_n^{s,t}(x) = sum_{k < n(t-s)} sum_i P(S_k = i) Psi_n(x + i h)` for a
/// window-2 functional of a finite-support lattice walk, at every `x` in `xs`.
pub fn characteristic_lattice_exact(spec: &FunctionalSpec, process: &ProcessSpec, n: usize, s: f64, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let tau = check_interval(s, t)?;
    if grid_index(n, s).is_none() {
        return Err(Error::domain(format!("s = {s} is not on the grid 1/{n}")));
    }
    let reduced = chi_reduce(spec, process, n)?;
    let law = match process {
        ProcessSpec::Walk { law, .. } => law,
        _ => unreachable!("reduction succeeded only for walks"),
    };
    let kernel = LatticeKernel::new(law, n)?;
    let h = kernel.spacing();
    let bound = reduced.bind(n, 1)?;
    let steps = steps_for(n, tau);
    let reach = kernel.step().lo.abs().max(kernel.step().hi().abs()) * steps as i64;
    // sparse Psi(x + i h) per x
    let psi: Vec<Vec<(i64, f64)>> = xs
        .iter()
        .map(|&x| {
            // lattice starting points are snapped so that hits of the level are exact
            let origin = x / h;
            let snapped = (origin - origin.round()).abs() <= 1e-9 * origin.abs().max(1.0);
            let m = origin.round() as i64;
            (-reach..=reach)
                .filter_map(|i| {
                    let y = if snapped { (m + i) as f64 * h } else { x + i as f64 * h };
                    let v = bound.eval(&[y]);
                    (v != 0.0).then_some((i, v))
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; xs.len()];
    let mut dist = LatticeDistribution::point();
    for k in 0..steps {
        if k > 0 {
            dist = kernel.advance(&dist);
        }
        for (o, nz) in out.iter_mut().zip(&psi) {
            *o += nz.iter().map(|&(i, v)| dist.prob(i) * v).sum::<f64>();
        }
    }
    Ok(out)
}

/// `H_{delta,n}^{0,T} = sup |X(t) - X(s)| / |t - s|^delta` over knot pairs with `|t - s| >= 1/n`.
pub fn holder_modulus(path: &PathGrid, delta: f64, horizon: f64) -> f64 {
    let n = path.n();
    let last = steps_for(n, horizon).min(path.knot_count() - 1);
    let weights: Vec<f64> = (0..=last).map(|l| (l as f64 / n as f64).powf(-delta)).collect();
    let d = path.dim();
    let knots = path.knots();
    let mut best: f64 = 0.0;
    if d == 1 && delta >= 0.0 {
        // Lags are visited in dyadic blocks [L, 2L); weights decrease with the lag, so the
        // range extremes of a block give an upper bound and most blocks are skipped.
        let table = RangeTable::new(&knots[..=last]);
        for j in 0..last {
            let xj = knots[j];
            let mut lag = 1;
            while j + lag <= last {
                let hi = (j + 2 * lag - 1).min(last);
                let (lo_v, hi_v) = table.extremes(j + lag, hi);
                let bound = (hi_v - xj).max(xj - lo_v) * weights[lag];
                if bound > best {
                    for k in j + lag..=hi {
                        best = best.max((knots[k] - xj).abs() * weights[k - j]);
                    }
                }
                lag *= 2;
            }
        }
    } else if d == 1 {
        for j in 0..last {
            let xj = knots[j];
            for k in j + 1..=last {
                best = best.max((knots[k] - xj).abs() * weights[k - j]);
            }
        }
    } else {
        for j in 0..last {
            for k in j + 1..=last {
                best = best.max(euclid(&knots[j * d..(j + 1) * d], &knots[k * d..(k + 1) * d]) * weights[k - j]);
            }
        }
    }
    best
}

/// Sparse table answering range minimum/maximum queries in constant time.
struct RangeTable {
    min: Vec<Vec<f64>>,
    max: Vec<Vec<f64>>,
}

impl RangeTable {
    fn new(values: &[f64]) -> Self {
        let mut min = vec![values.to_vec()];
        let mut max = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let (pmin, pmax) = (min.last().unwrap(), max.last().unwrap());
            let len = values.len() + 1 - 2 * width;
            let nmin = (0..len).map(|i| pmin[i].min(pmin[i + width])).collect();
            let nmax = (0..len).map(|i| pmax[i].max(pmax[i + width])).collect();
            min.push(nmin);
            max.push(nmax);
            width *= 2;
        }
        RangeTable { min, max }
    }

    /// `(min, max)` over the inclusive index range `[a, b]`.
    fn extremes(&self, a: usize, b: usize) -> (f64, f64) {
        let level = (usize::BITS - 1 - (b - a + 1).leading_zeros()) as usize;
        let other = b + 1 - (1 << level);
        (
            self.min[level][a].min(self.min[level][other]),
            self.max[level][a].max(self.max[level][other]),
        )
    }
}

/// Monte-Carlo estimate of `E[H_{delta,n}^{0,T}]^{C_delta}`.
pub fn modulus_moment(paths: &[PathGrid], delta: f64, c_delta: f64, horizon: f64) -> Result<McEstimate> {
    if paths.is_empty() {
        return Err(Error::domain("need at least one path"));
    }
    let values: Vec<f64> = paths.par_iter().map(|p| holder_modulus(p, delta, horizon).powf(c_delta)).collect();
    Ok(McEstimate::from_samples(&values))
}

/// Ball-growth check `mu(B(x,R)) <= C_theta R^theta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallGrowthReport {
    pub theta: f64,
    pub bound: f64,
    pub max_ratio: f64,
    pub worst_center: Vec<f64>,
    pub worst_radius: f64,
    pub violated: bool,
}

/// `max mu(B(x,R)) / R^theta` over `probes = [(x, R)]`, flagged when above `bound`.
pub fn ball_growth(mu: &MeasureSpec, theta: f64, bound: f64, probes: &[(Vec<f64>, f64)]) -> BallGrowthReport {
    let mut report = BallGrowthReport {
        theta,
        bound,
        max_ratio: 0.0,
        worst_center: vec![],
        worst_radius: 0.0,
        violated: false,
    };
    for (x, r) in probes {
        let ratio = mu.ball_mass(x, *r) / r.powf(theta);
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst_center = x.clone();
            report.worst_radius = *r;
        }
    }
    report.violated = report.max_ratio > bound;
    report
}

/// Constants of the tightness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thm61Constants {
    /// Density blow-up exponent.
    pub gamma: f64,
    /// Hölder exponent.
    pub delta: f64,
    /// Ball-growth exponent.
    pub theta: f64,
    pub c_gamma: f64,
    pub c_theta: f64,
    pub small_c_theta: f64,
    pub c_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cond7Report {
    /// `delta theta + 1 > gamma`.
    pub exponent_relation: bool,
    /// `C_delta > 2 theta + 2`.
    pub moment_relation: bool,
    pub pass: bool,
}

impl Thm61Constants {
    pub fn new(delta: f64, theta: f64, gamma: f64, c_delta: f64) -> Self {
        Thm61Constants {
            gamma,
            delta,
            theta,
            c_gamma: 1.0,
            c_theta: 1.0,
            small_c_theta: 1.0,
            c_delta,
        }
    }

    pub fn check(&self) -> Cond7Report {
        let exponent_relation = self.delta * self.theta + 1.0 > self.gamma;
        let moment_relation = self.c_delta > 2.0 * self.theta + 2.0;
        Cond7Report {
            exponent_relation,
            moment_relation,
            pass: exponent_relation && moment_relation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::Interpolation;
    use crate::sources::LawKind;

    fn lazy() -> IncrementLaw {
        IncrementLaw::new(LawKind::LazyLattice { p0: 0.5 }, true).unwrap()
    }

    #[test]
    fn gaussian_density_values() {
        let g1 = DensityModel::Gaussian { dim: 1 };
        assert!((density_eval(&g1, 1.0, &[0.0], &[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let g2 = DensityModel::Gaussian { dim: 2 };
        let v = density_eval(&g2, 1.0, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - (-0.5f64).exp() / (2.0 * PI)).abs() < 1e-15);
        assert!(matches!(density_eval(&g1, 0.0, &[0.0], &[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn stable_closed_forms() {
        assert!((stable_density(1.0, 1.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        // quadrature path near alpha = 1 agrees with the Cauchy form
        for z in [0.0, 0.5, 3.0] {
            let q = stable_density(1.000001, 1.0, z).unwrap();
            assert!((q - 1.0 / (PI * (1.0 + z * z))).abs() < 1e-6, "z={z} {q}");
        }
        assert!((stable_density(2.0, 1.0, 0.0).unwrap() - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stable_tail_matches_quadrature() {
        let alpha = 1.5;
        let series = stable_tail_series(alpha, 1.0, 15.0).unwrap();
        let f = |u: f64| (u * 15.0).cos() * (-u.powf(alpha)).exp();
        let pieces = 400;
        let cutoff = stable_cutoff(alpha, 1.0);
        let breaks: Vec<f64> = (0..=pieces).map(|i| cutoff * i as f64 / pieces as f64).collect();
        let quad = integrate_pieces(&f, &breaks, Tolerance::abs(1e-14)).value / PI;
        assert!((series - quad).abs() < 1e-9, "{series} {quad}");
    }

    #[test]
    fn lattice_transition_hand_values() {
        let rad = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        assert_eq!(lattice_transition(&rad, 1, 2, 0.0, 0.0).unwrap(), 0.5);
        let law = lazy();
        let n = 16;
        assert_eq!(lattice_transition(&law, n, 1, 0.0, 0.0).unwrap(), 0.5);
        assert_eq!(lattice_transition(&law, n, 2, 0.0, 0.0).unwrap(), 0.375);
        let h = walk_spacing(&law, n);
        assert_eq!(lattice_transition(&law, n, 2, h, -h).unwrap(), 0.0625);
        assert!(matches!(lattice_transition(&law, n, 2, 0.0, 0.3 * h), Err(Error::Domain(_))));
    }

    #[test]
    fn doubling_matches_iteration() {
        let law = IncrementLaw::new(
            LawKind::FiniteLattice {
                support: vec![-2, 1],
                probs: vec![1.0 / 3.0, 2.0 / 3.0],
            },
            true,
        )
        .unwrap();
        let kernel = LatticeKernel::new(&law, 1).unwrap();
        let mut iter = LatticeDistribution::point();
        for _ in 0..13 {
            iter = kernel.advance(&iter);
        }
        let fast = kernel.power(13);
        assert_eq!(fast.lo, iter.lo);
        for (a, b) in fast.probs.iter().zip(&iter.probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn llt_first_value_and_periodic_error() {
        let e1 = llt_discrepancy(&lazy(), 1).unwrap();
        let sigma = 0.5f64.sqrt();
        let expect = (sigma * 0.5 - standard_normal_density(0.0))
            .abs()
            .max((sigma * 0.25 - standard_normal_density(1.0 / sigma)).abs());
        assert!((e1 - expect).abs() < 1e-15);
        assert!((e1 - 0.0454).abs() < 5e-4);
        let rad = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        match llt_discrepancy(&rad, 4) {
            Err(Error::Domain(msg)) => assert!(msg.contains("period 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gaussian_point_characteristic() {
        let g = DensityModel::Gaussian { dim: 1 };
        let v = characteristic_analytic_point(0.0, 1.0, &g, 0.0, 1.0, 0.0).unwrap();
        assert!((v - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert_eq!(characteristic_analytic_point(0.0, 1.0, &g, 0.5, 0.5, 0.0).unwrap(), 0.0);
        assert!(characteristic_analytic_point(0.0, 1.0, &g, 0.5, 0.2, 0.0).is_err());
        let st = DensityModel::Stable { alpha: 1.0 };
        assert!(matches!(
            characteristic_analytic_point(0.0, 1.0, &st, 0.0, 1.0, 0.0),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn stable_two_matches_scaled_gaussian() {
        // alpha = 2 in this normalization is Brownian motion run at twice the speed
        let st = DensityModel::Stable { alpha: 2.0 };
        let g = DensityModel::Gaussian { dim: 1 };
        for x in [0.0, 0.4, 1.5] {
            let a = characteristic_analytic_point(0.0, 1.0, &st, 0.0, 1.0, x).unwrap();
            let b = 0.5 * characteristic_analytic_point(0.0, 1.0, &g, 0.0, 2.0, x).unwrap();
            assert!((a - b).abs() < 1e-8, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn circle_at_center_and_far_away() {
        let g = DensityModel::Gaussian { dim: 2 };
        let mu = MeasureSpec::unit_circle();
        assert_eq!(characteristic_analytic_measure(&mu, &g, 0.3, 0.3, &[0.0, 0.0]).unwrap(), 0.0);
        let far = characteristic_analytic_measure(&mu, &g, 0.0, 1.0, &[10.0, 0.0]).unwrap();
        assert!(far >= 0.0 && far < 1e-8, "{far}");
    }

    #[test]
    fn point_symbol_in_the_plane_diverges() {
        let g = DensityModel::Gaussian { dim: 2 };
        let mu = MeasureSpec::Point {
            at: vec![0.0, 0.0],
            mass: 1.0,
        };
        assert!(matches!(
            characteristic_analytic_measure(&mu, &g, 0.0, 1.0, &[0.0, 0.0]),
            Err(Error::Divergent(_))
        ));
        let e = symbol_singularity_exponent(&mu, &g, &[]).unwrap();
        assert!((e - 1.0).abs() < 1e-9);
        let e = symbol_singularity_exponent(&MeasureSpec::unit_circle(), &g, &[]).unwrap();
        assert!((e - 0.5).abs() < 0.01, "{e}");
    }

    #[test]
    fn constant_functional_is_exact() {
        let law = IncrementLaw::new(LawKind::GaussianIid { dim: 1 }, false).unwrap();
        let process = ProcessSpec::Walk { law, alpha: 2.0 };
        let n = 10;
        let spec = FunctionalSpec::constant(1.0 / n as f64);
        let est = characteristic_mc(&spec, &process, n, &[0.0], 0.2, 0.75, 50, 1).unwrap();
        assert_eq!(est.se, 0.0);
        assert!((est.value - 6.0 / 10.0).abs() < 1e-15);
        assert!(characteristic_mc(&spec, &process, n, &[0.0], 0.25, 0.75, 50, 1).is_err());
    }

    #[test]
    fn modulus_hand_paths() {
        let n = 8;
        let knots: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let line = PathGrid::from_knots(n, 1.0, 1, knots, Interpolation::BrokenLine).unwrap();
        assert!((holder_modulus(&line, 0.5, 1.0) - 1.0).abs() < 1e-15);
        let flat = PathGrid::from_knots(n, 1.0, 1, vec![2.0; n + 1], Interpolation::BrokenLine).unwrap();
        assert_eq!(holder_modulus(&flat, 0.5, 1.0), 0.0);
    }

    #[test]
    fn pruned_modulus_matches_brute_force() {
        use rand::Rng;
        let n = 300;
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0).generator();
            let mut x = 0.0;
            let knots: Vec<f64> = (0..=n)
                .map(|_| {
                    x += rng.random_range(-1.0..1.0) / (n as f64).sqrt();
                    x
                })
                .collect();
            let path = PathGrid::from_knots(n, 1.0, 1, knots.clone(), Interpolation::BrokenLine).unwrap();
            for delta in [0.1, 0.3, 0.49] {
                let mut brute: f64 = 0.0;
                for j in 0..n {
                    for k in j + 1..=n {
                        let w = ((k - j) as f64 / n as f64).powf(-delta);
                        brute = brute.max((knots[k] - knots[j]).abs() * w);
                    }
                }
                assert_eq!(holder_modulus(&path, delta, 1.0), brute);
            }
        }
    }

    #[test]
    fn ball_growth_cases() {
        let probes: Vec<(Vec<f64>, f64)> = (1..=10)
            .flat_map(|i| {
                let r = 0.2 * i as f64;
                [(vec![1.0, 0.0], r), (vec![0.0, 0.0], r), (vec![0.3, -0.7], r)]
            })
            .collect();
        let circle = ball_growth(&MeasureSpec::unit_circle(), 1.0, 1.0, &probes);
        assert!(!circle.violated, "{circle:?}");
        let point = MeasureSpec::Point {
            at: vec![0.0, 0.0],
            mass: 1.0,
        };
        let small: Vec<(Vec<f64>, f64)> = [1e-1, 1e-2, 1e-3].iter().map(|&r| (vec![0.0, 0.0], r)).collect();
        let rep = ball_growth(&point, 1.0, 1.0, &small);
        assert!(rep.violated);
        assert!((rep.max_ratio - 1e3).abs() < 1e-9);
        let empty = ball_growth(&MeasureSpec::empty(2), 1.0, 1.0, &small);
        assert_eq!(empty.max_ratio, 0.0);
    }

    #[test]
    fn condition_seven_relations() {
        assert!(Thm61Constants::new(0.4, 1.0, 1.0, 6.0).check().pass);
        let rej = Thm61Constants::new(0.1, 1.0, 2.0, 3.0).check();
        assert!(!rej.pass && !rej.exponent_relation && !rej.moment_relation);
    }

    #[test]
    fn lattice_exact_single_step() {
        // one step from 0 with the lazy law: f = Psi(0) = sigma/(4 sqrt n)
        let process = ProcessSpec::Walk { law: lazy(), alpha: 2.0 };
        let n = 64;
        let f = characteristic_lattice_exact(&FunctionalSpec::censored_point(0.0), &process, n, 0.0, 1.0 / n as f64, &[0.0]).unwrap();
        assert!((f[0] - 0.5f64.sqrt() / 32.0).abs() < 1e-15);
    }

    #[test]
    fn censored_symbol_has_mass_p_nonzero() {
        let process = ProcessSpec::Walk { law: lazy(), alpha: 2.0 };
        let mu = lattice_symbol(&FunctionalSpec::censored_point(0.0), &process, 256, 1.0).unwrap();
        assert!((mu.total_mass() - 0.5).abs() < 1e-12, "{}", mu.total_mass());
    }

    #[test]
    fn table_csv_and_gap() {
        let cells = vec![Cell::new(0.0, 1.0, vec![0.0]), Cell::new(0.0, 1.0, vec![0.5])];
        let a = CharacteristicTable::build(Provenance::Analytic, None, &cells, |c| Ok((c.x[0], 0.0))).unwrap();
        let b = CharacteristicTable::build(Provenance::MonteCarlo { paths: 10 }, Some(4), &cells, |c| {
            Ok((c.x[0] + if c.x[0] > 0.0 { 0.3 } else { 0.0 }, 0.01))
        })
        .unwrap();
        assert_eq!(supnorm_gap(&a, &a).unwrap().value, 0.0);
        let r = supnorm_gap(&b, &a).unwrap();
        assert!((r.value - 0.3).abs() < 1e-15);
        assert!((r.noise_floor.unwrap() - 0.03).abs() < 1e-15);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,t,x_1,value,se,provenance,n,M\n0,1,0,0,0.01,monte_carlo,4,10\n"));
        let other = vec![Cell::new(0.0, 0.5, vec![0.0]), Cell::new(0.0, 1.0, vec![0.5])];
        let c = CharacteristicTable::build(Provenance::Analytic, None, &other, |_| Ok((0.0, 0.0))).unwrap();
        assert!(supnorm_gap(&a, &c).is_err());
    }
}
