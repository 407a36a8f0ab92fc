//! Reproducible random streams and the increment laws driving every walk.
//!
//! Each simulated path owns one [`RngStream`], identified by the pair
//! `(master_seed, stream_index)`. The generator behind it is ChaCha8 keyed
//! by the master seed with the stream index selecting one of its 2^64
//! independent counter streams, so paths can be generated in any order and
//! on any number of workers without changing a single bit of output.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Zeta};
use serde::Serialize;

use crate::error::{Error, Result};

/// Generator type handed out by [`RngStream::generator`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    /// Stream `index` inside block `block`; blocks keep the path streams of
    /// different sub-experiments (start points, grid sizes) disjoint.
    pub fn in_block(master_seed: u64, block: u32, index: u32) -> Self {
        RngStream::new(master_seed, (u64::from(block) << 32) | u64::from(index))
    }

    pub fn generator(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// The kind of an increment law, before validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    Rademacher,
    LazyLattice { p0: f64 },
    FiniteLattice { support: Vec<i64>, probs: Vec<f64> },
    GaussianIid { dim: usize },
    ParetoLattice { alpha: f64 },
}

/// Exact derived quantities of a law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawProperties {
    /// Standard deviation; `None` for infinite-variance laws.
    pub sigma: Option<f64>,
    /// Lattice span (gcd of support differences); 0 for non-lattice laws.
    pub span: u64,
    pub p_nonzero: f64,
    pub aperiodic: bool,
    /// Stability index: 2 for finite-variance laws.
    pub alpha: f64,
}

#[derive(Debug, Clone)]
struct LatticeTable {
    support: Vec<i64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl LatticeTable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        for (j, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return self.support[j];
            }
        }
        *self.support.last().expect("nonempty support")
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Lattice(LatticeTable),
    Gaussian,
    Pareto(Zeta<f64>),
}

/// A validated increment law. Construction is the only way to obtain one,
/// so every law handed to a generator satisfies its invariants.
#[derive(Debug, Clone)]
pub struct IncrementLaw {
    kind: LawKind,
    standardize: bool,
    props: LawProperties,
    /// Natural scale: sigma for finite variance, the stable scale for Pareto tails.
    scale: f64,
    sampler: Sampler,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl IncrementLaw {
    pub fn new(kind: LawKind, standardize: bool) -> Result<Self> {
        match &kind {
            LawKind::Rademacher => Self::lattice(kind.clone(), vec![-1, 1], vec![0.5, 0.5], standardize),
            LawKind::LazyLattice { p0 } => {
                let p0 = *p0;
                if !(0.0..1.0).contains(&p0) {
                    return Err(Error::config(format!("lazy_lattice p0 must lie in [0, 1), got {p0}")));
                }
                let side = 0.5 * (1.0 - p0);
                Self::lattice(kind.clone(), vec![-1, 0, 1], vec![side, p0, side], standardize)
            }
            LawKind::FiniteLattice { support, probs } => {
                Self::lattice(kind.clone(), support.clone(), probs.clone(), standardize)
            }
            LawKind::GaussianIid { dim } => {
                if *dim == 0 {
                    return Err(Error::config("gaussian_iid dimension must be at least 1"));
                }
                Ok(IncrementLaw {
                    kind,
                    standardize,
                    props: LawProperties {
                        sigma: Some(1.0),
                        span: 0,
                        p_nonzero: 1.0,
                        aperiodic: true,
                        alpha: 2.0,
                    },
                    scale: 1.0,
                    sampler: Sampler::Gaussian,
                })
            }
            LawKind::ParetoLattice { alpha } => {
                let alpha = *alpha;
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(Error::config(format!("pareto_lattice tail index must lie in (1, 2), got {alpha}")));
                }
                let zeta = Zeta::new(1.0 + alpha).map_err(|e| Error::config(format!("pareto_lattice: {e}")))?;
                Ok(IncrementLaw {
                    kind,
                    standardize,
                    props: LawProperties {
                        sigma: None,
                        span: 1,
                        p_nonzero: 1.0,
                        aperiodic: true,
                        alpha,
                    },
                    scale: pareto_stable_scale(alpha),
                    sampler: Sampler::Pareto(zeta),
                })
            }
        }
    }

    fn lattice(kind: LawKind, support: Vec<i64>, probs: Vec<f64>, standardize: bool) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::config("finite_lattice support and probs must be nonempty and of equal length"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config("finite_lattice probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("finite_lattice probabilities sum to {total}, not 1")));
        }
        let mean: f64 = support.iter().zip(&probs).map(|(&j, &p)| j as f64 * p).sum();
        if mean.abs() > 1e-12 {
            return Err(Error::config(format!("increment law must have zero mean, got {mean}")));
        }
        let var: f64 = support.iter().zip(&probs).map(|(&j, &p)| (j * j) as f64 * p).sum();
        if var <= 0.0 {
            return Err(Error::config("increment law is degenerate at 0"));
        }
        let charged: Vec<i64> = support.iter().zip(&probs).filter(|(_, &p)| p > 0.0).map(|(&j, _)| j).collect();
        let base = charged[0];
        let span = charged.iter().fold(0u64, |g, &j| gcd(g, (j - base).unsigned_abs()));
        let p_zero: f64 = support.iter().zip(&probs).filter(|(&j, _)| j == 0).map(|(_, &p)| p).sum();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let sigma = var.sqrt();
        Ok(IncrementLaw {
            kind,
            standardize,
            props: LawProperties {
                sigma: Some(sigma),
                span,
                p_nonzero: 1.0 - p_zero,
                aperiodic: span == 1,
                alpha: 2.0,
            },
            scale: sigma,
            sampler: Sampler::Lattice(LatticeTable { support, probs, cdf }),
        })
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn standardized(&self) -> bool {
        self.standardize
    }

    pub fn properties(&self) -> LawProperties {
        self.props
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            LawKind::GaussianIid { dim } => dim,
            _ => 1,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.props.alpha
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, LawKind::GaussianIid { .. })
    }

    pub fn is_lattice(&self) -> bool {
        !self.is_gaussian()
    }

    /// Sigma for finite-variance laws, the stable scale `c^{1/alpha}` for
    /// Pareto tails (see [`pareto_stable_scale`]).
    pub fn natural_scale(&self) -> f64 {
        self.scale
    }

    /// Divisor applied to raw draws: the natural scale when standardizing, 1 otherwise.
    pub fn divisor(&self) -> f64 {
        if self.standardize {
            self.scale
        } else {
            1.0
        }
    }

    /// `(offset, probability)` pairs of a finite-support lattice law.
    pub fn finite_support(&self) -> Option<Vec<(i64, f64)>> {
        match &self.sampler {
            Sampler::Lattice(t) => Some(t.support.iter().copied().zip(t.probs.iter().copied()).collect()),
            _ => None,
        }
    }

    /// Smallest nonzero |j| in the support (1 for Pareto tails).
    pub fn min_nonzero_step(&self) -> Option<u64> {
        match &self.sampler {
            Sampler::Lattice(t) => t.support.iter().filter(|&&j| j != 0).map(|j| j.unsigned_abs()).min(),
            Sampler::Pareto(_) => Some(1),
            Sampler::Gaussian => None,
        }
    }

    pub fn max_abs_step(&self) -> Option<u64> {
        match &self.sampler {
            Sampler::Lattice(t) => t.support.iter().map(|j| j.unsigned_abs()).max(),
            _ => None,
        }
    }

    /// Raw integer draw of a lattice law (before any scaling).
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<i64> {
        match &self.sampler {
            Sampler::Lattice(t) => Some(t.sample(rng)),
            Sampler::Pareto(z) => {
                let k = z.sample(rng);
                let k = if k >= i64::MAX as f64 { i64::MAX } else { k as i64 };
                Some(if rng.random::<bool>() { k } else { -k })
            }
            Sampler::Gaussian => None,
        }
    }

    /// One scalar draw, divided by the natural scale when standardizing.
    /// For multi-dimensional laws this is the first coordinate.
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.sample_index(rng) {
            Some(j) => j as f64 / self.divisor(),
            None => rng.sample(StandardNormal),
        }
    }

    /// Fill `out` with one draw of the law (length must equal `dim()`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        match &self.sampler {
            Sampler::Gaussian => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            _ => out[0] = self.sample_scalar(rng),
        }
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Exact derived quantities of `law`.
pub fn law_properties(law: &IncrementLaw) -> LawProperties {
    law.properties()
}

/// Riemann zeta for real `s > 1`: direct sum to 64 plus an Euler-Maclaurin tail.
pub fn riemann_zeta(s: f64) -> f64 {
    const N: usize = 64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let nf = N as f64;
    let t0 = nf.powf(1.0 - s) / (s - 1.0);
    let t1 = 0.5 * nf.powf(-s);
    let t2 = s / 12.0 * nf.powf(-s - 1.0);
    let t3 = s * (s + 1.0) * (s + 2.0) / 720.0 * nf.powf(-s - 3.0);
    let t4 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0 * nf.powf(-s - 5.0);
    head + t0 + t1 + t2 - t3 + t4
}

/// Stable scale of the symmetric Pareto lattice law `P(xi = ±k) = k^{-1-alpha} / (2 zeta(1+alpha))`.
///
/// The two-sided tail is `P(|xi| > x) ~ C x^{-alpha}` with `C = 1 / (alpha zeta(1+alpha))`,
/// so `n^{-1/alpha} S_n` converges to the symmetric stable law with
/// characteristic function `exp(-c |u|^alpha)`, `c = C Gamma(1-alpha) cos(pi alpha / 2)`.
/// Returns `c^{1/alpha}`; dividing draws by it normalizes the limit to `exp(-|u|^alpha)`.
pub fn pareto_stable_scale(alpha: f64) -> f64 {
    let tail = 1.0 / (alpha * riemann_zeta(1.0 + alpha));
    let c = tail * statrs::function::gamma::gamma(1.0 - alpha) * (FRAC_PI_2 * alpha).cos();
    c.powf(1.0 / alpha)
}

/// One draw from the symmetric alpha-stable law with characteristic
/// function `exp(-|u|^alpha)` (Chambers-Mallows-Stuck transform of a
/// uniform angle and a unit exponential).
pub fn stable_variate<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("stability index must lie in (0, 2], got {alpha}")));
    }
    Ok(stable_unchecked(alpha, rng))
}

pub(crate) fn stable_unchecked<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // V uniform on (-pi/2, pi/2), W ~ Exp(1).
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        return v.tan();
    }
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}
