//! Empirical distributions, distances to reference laws, coupling
//! diagnostics and the reference samples used to judge convergence.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::{BallGrowthReport, Cond7Report, LltRow, McEstimate};
use crate::error::{Error, Result};
use crate::functionals::{eval_additive, CompensatedSum, DeltaSup, FunctionalSpec, SetOracle};
use crate::processes::{euclid, gen_diffusion_reference, grid_index, CoefFn, Coefficient, CoupledPair, PathGrid, TimeGrid};
use crate::sources::RngStream;
use std::sync::Arc;

/// Percentile bootstrap interval for the sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceBand {
    pub level: f64,
    pub replicates: usize,
    pub lower: f64,
    pub upper: f64,
}

/// A sorted sample with its mean and standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    sorted: Vec<f64>,
    mean: f64,
    se: f64,
    band: Option<ConfidenceBand>,
}

impl SampleSummary {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("sample contains NaN"));
        }
        let (mean, se) = mean_and_se(&values);
        values.sort_by(f64::total_cmp);
        Ok(SampleSummary {
            sorted: values,
            mean,
            se,
            band: None,
        })
    }

    /// Attach a percentile bootstrap band for the mean.
    pub fn with_bootstrap(mut self, level: f64, replicates: usize, seed: u64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) || replicates == 0 {
            return Err(Error::domain("bootstrap needs a level in (0,1) and at least one replicate"));
        }
        let m = self.sorted.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut means: Vec<f64> = (0..replicates)
            .map(|_| (0..m).map(|_| self.sorted[rng.random_range(0..m)]).sum::<f64>() / m as f64)
            .collect();
        means.sort_by(f64::total_cmp);
        let q = |p: f64| means[((p * (replicates - 1) as f64).round() as usize).min(replicates - 1)];
        self.band = Some(ConfidenceBand {
            level,
            replicates,
            lower: q((1.0 - level) / 2.0),
            upper: q((1.0 + level) / 2.0),
        });
        Ok(self)
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn se(&self) -> f64 {
        self.se
    }

    pub fn band(&self) -> Option<ConfidenceBand> {
        self.band
    }

    pub fn median(&self) -> f64 {
        median_sorted(&self.sorted)
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Mean and standard error `std / sqrt(M)` (unbiased variance), accumulated in index order.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return (first, 0.0);
    }
    let mut acc = CompensatedSum::default();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.value() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let mut ss = CompensatedSum::default();
    for &v in values {
        ss.add((v - mean) * (v - mean));
    }
    let var = ss.value() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    KsOneSample,
    KsTwoSample,
    Wasserstein1,
    Supnorm,
}

/// Outcome of one distance computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub metric: Metric,
    pub value: f64,
    pub m_a: usize,
    pub m_b: Option<usize>,
    pub noise_floor: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl DistanceReport {
    pub fn new(metric: Metric, value: f64, m_a: usize, m_b: Option<usize>) -> Self {
        DistanceReport {
            metric,
            value,
            m_a,
            m_b,
            noise_floor: None,
            tolerance: None,
            pass: None,
        }
    }

    /// Judge the report: passes when `value < tolerance`.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self.pass = Some(self.value < tolerance);
        self
    }
}

/// What a sample is compared against.
pub enum Reference<'a> {
    Cdf(&'a dyn Fn(f64) -> f64),
    Sample(&'a SampleSummary),
}

pub fn ks_distance(sample: &SampleSummary, reference: Reference<'_>) -> DistanceReport {
    match reference {
        Reference::Cdf(cdf) => ks_one_sample(sample, cdf),
        Reference::Sample(other) => ks_two_sample(sample, other),
    }
}

/// `sup |F_M - F|`, evaluated at the sample points with both one-sided gaps.
pub fn ks_one_sample(sample: &SampleSummary, cdf: &dyn Fn(f64) -> f64) -> DistanceReport {
    let m = sample.count() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.sorted().iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    DistanceReport::new(Metric::KsOneSample, d.clamp(0.0, 1.0), sample.count(), None)
}

/// Two-sample Kolmogorov–Smirnov statistic over the merged grid (ties handled jointly).
pub fn ks_two_sample(a: &SampleSummary, b: &SampleSummary) -> DistanceReport {
    let (xa, xb) = (a.sorted(), b.sorted());
    let (ma, mb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= next {
            i += 1;
        }
        while j < xb.len() && xb[j] <= next {
            j += 1;
        }
        d = d.max((i as f64 / ma - j as f64 / mb).abs());
    }
    DistanceReport::new(Metric::KsTwoSample, d, a.count(), Some(b.count()))
}

/// `W_1 = integral of |F_a - F_b|`, computed exactly from the merged order statistics.
/// For equal sizes this is the mean absolute difference of order statistics.
pub fn wasserstein1(a: &SampleSummary, b: &SampleSummary) -> DistanceReport {
    let (xa, xb) = (a.sorted(), b.sorted());
    let (ma, mb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut acc = CompensatedSum::default();
    let mut prev: Option<f64> = None;
    while i < xa.len() || j < xb.len() {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            acc.add((i as f64 / ma - j as f64 / mb).abs() * (next - p));
        }
        while i < xa.len() && xa[i] <= next {
            i += 1;
        }
        while j < xb.len() && xb[j] <= next {
            j += 1;
        }
        prev = Some(next);
    }
    DistanceReport::new(Metric::Wasserstein1, acc.value().max(0.0), a.count(), Some(b.count()))
}

/// Estimate of `E(phi_n - phi)^2` from coupled functional values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L2Discrepancy {
    pub mean: f64,
    pub se: f64,
    /// Median of the squared differences (robust to heavy tails).
    pub median: f64,
    /// Mean of `phi_n - phi`; `mean >= mean_diff^2` always.
    pub mean_diff: f64,
    pub m: usize,
}

pub fn coupled_l2_discrepancy(chain_values: &[f64], limit_values: &[f64]) -> Result<L2Discrepancy> {
    if chain_values.len() != limit_values.len() {
        return Err(Error::domain(format!(
            "{} chain values but {} limit values",
            chain_values.len(),
            limit_values.len()
        )));
    }
    if chain_values.is_empty() {
        return Err(Error::domain("no coupled pairs"));
    }
    let diffs: Vec<f64> = chain_values.iter().zip(limit_values).map(|(a, b)| a - b).collect();
    let squares: Vec<f64> = diffs.iter().map(|d| d * d).collect();
    let (mean, se) = mean_and_se(&squares);
    let (mean_diff, _) = mean_and_se(&diffs);
    let mut sorted = squares;
    sorted.sort_by(f64::total_cmp);
    Ok(L2Discrepancy {
        mean,
        se,
        median: median_sorted(&sorted),
        mean_diff,
        m: diffs.len(),
    })
}

/// Shape of the discrepancy bound `4 |f| G + 4 sqrt(2 gamma) |f|^2` for a
/// caller-supplied characteristic norm `|f^{0,T}|` and modulus term `G(f, gamma, T)`.
pub fn l2_bound(f_norm: f64, g: f64, gamma: f64) -> f64 {
    4.0 * f_norm * g + 4.0 * (2.0 * gamma).sqrt() * f_norm * f_norm
}

/// How the limit functional is computed on the fine component of a coupled pair.
#[derive(Clone)]
pub enum LimitFunctional {
    /// `(1/(2 eps)) int 1{|X(r) - z*| < eps} dr`, exact on the broken line.
    PointOccupation { z_star: f64, eps: f64 },
    /// `int 1{X(r) in K_eps} dr / lambda(K_eps)`, left-point rule on the knots.
    TubeOccupation { set: Arc<dyn SetOracle>, eps: f64 },
    /// The same additive functional evaluated on the limit path.
    Additive(FunctionalSpec),
}

impl LimitFunctional {
    pub fn eval(&self, path: &PathGrid, s: f64, t: f64) -> Result<f64> {
        match self {
            LimitFunctional::PointOccupation { z_star, eps } => band_occupation(path, *z_star, *eps, None, s, t),
            LimitFunctional::TubeOccupation { set, eps } => {
                let vol = set
                    .tube_volume(*eps)
                    .filter(|v| *v > 0.0)
                    .ok_or_else(|| Error::config("tube occupation needs a positive tube volume"))?;
                let (j, k) = grid_range(path, s, t)?;
                let d = path.dim();
                let hits = (j..k).filter(|&i| set.contains(&path.knots()[i * d..(i + 1) * d], *eps)).count();
                Ok(hits as f64 / (path.n() as f64 * vol))
            }
            LimitFunctional::Additive(spec) => eval_additive(spec, path, s, t),
        }
    }
}

fn grid_range(path: &PathGrid, s: f64, t: f64) -> Result<(usize, usize)> {
    match (grid_index(path.n(), s), grid_index(path.n(), t)) {
        (Some(j), Some(k)) if j <= k && k < path.knot_count() => Ok((j, k)),
        _ => Err(Error::domain(format!("times ({s}, {t}) are not grid times of the path"))),
    }
}

/// `(1/(2 eps)) int_s^t 1{|X(r) - z*| < eps} w(X(r)) dr` along the broken line.
/// The weight is frozen at the left knot of each cell; the band time is exact.
pub fn band_occupation(path: &PathGrid, z_star: f64, eps: f64, weight: Option<&dyn Coefficient>, s: f64, t: f64) -> Result<f64> {
    if path.dim() != 1 {
        return Err(Error::config("band occupation needs a scalar path"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain("band half-width must be positive"));
    }
    let (j, k) = grid_range(path, s, t)?;
    let dt = 1.0 / path.n() as f64;
    let (lo, hi) = (z_star - eps, z_star + eps);
    let mut acc = CompensatedSum::default();
    for i in j..k {
        let (y0, y1) = (path.scalar(i), path.scalar(i + 1));
        let frac = if y0 == y1 {
            if (y0 - z_star).abs() < eps {
                1.0
            } else {
                0.0
            }
        } else {
            let (a, b) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
            (b.min(hi) - a.max(lo)).max(0.0) / (b - a)
        };
        if frac > 0.0 {
            let w = weight.map_or(1.0, |w| w.eval(y0));
            acc.add(frac * dt * w);
        }
    }
    Ok(acc.value() / (2.0 * eps))
}

/// Evaluate `phi_n` on the chain and the limit functional on the limit of every pair.
pub fn coupled_pair_values(
    pairs: &[CoupledPair],
    chain_functional: &FunctionalSpec,
    limit_functional: &LimitFunctional,
    s: f64,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let values: Result<Vec<(f64, f64)>> = pairs
        .par_iter()
        .map(|p| {
            Ok((
                eval_additive(chain_functional, &p.chain, s, t)?,
                limit_functional.eval(&p.limit, s, t)?,
            ))
        })
        .collect();
    Ok(values?.into_iter().unzip())
}

/// Empirical probability with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub p: f64,
    pub se: f64,
    pub m: usize,
}

/// Fraction of pairs whose distance at some block time `iK/n <= T` exceeds `gamma`.
pub fn coupling_condition_iii(pairs: &[CoupledPair], gamma: f64, horizon: f64, block: usize) -> Result<ProbabilityEstimate> {
    if block == 0 {
        return Err(Error::domain("block constant K must be a positive integer"));
    }
    if pairs.is_empty() {
        return Err(Error::domain("no coupled pairs"));
    }
    let mut exceed = 0usize;
    for pair in pairs {
        let n = pair.chain.n();
        let last = crate::processes::steps_for(n, horizon).min(pair.chain.knot_count() - 1);
        let refine = pair.limit.n() / n;
        let aligned = refine * n == pair.limit.n();
        let mut worst: f64 = 0.0;
        let mut k = 0;
        while k <= last {
            let d = if aligned {
                euclid(pair.chain.knot(k), pair.limit.knot(k * refine))
            } else {
                euclid(pair.chain.knot(k), &pair.limit.eval(k as f64 / n as f64)?)
            };
            worst = worst.max(d);
            k += block;
        }
        if worst > gamma {
            exceed += 1;
        }
    }
    let m = pairs.len();
    let p = exceed as f64 / m as f64;
    Ok(ProbabilityEstimate {
        p,
        se: (p * (1.0 - p) / m as f64).sqrt(),
        m,
    })
}

/// Reference laws for the limit local time `phi^{0,t}`.
#[derive(Clone)]
pub enum ReferenceKind {
    /// Brownian local time at its start point: `sqrt(t) |N(0,1)|`.
    BmPointLevy { t: f64, start: f64, z_star: f64 },
    /// Fine Euler path with the `b^2`-weighted band occupation of half-width `eps`.
    FineGrid {
        a: CoefFn,
        b: CoefFn,
        z0: f64,
        z_star: f64,
        t: f64,
        n_fine: usize,
        eps: f64,
    },
}

/// `m` draws from a reference law, draw `i` using stream `(seed, i)`.
pub fn reference_local_time_sample(kind: &ReferenceKind, m: usize, seed: u64) -> Result<SampleSummary> {
    if m == 0 {
        return Err(Error::domain("need at least one draw"));
    }
    let values: Vec<f64> = match kind {
        ReferenceKind::BmPointLevy { t, start, z_star } => {
            if start != z_star {
                return Err(Error::Unsupported(
                    "the closed-form law holds only at the start point; use the fine-grid reference".into(),
                ));
            }
            if !(*t > 0.0) {
                return Err(Error::domain("t must be positive"));
            }
            (0..m)
                .map(|i| {
                    let z: f64 = RngStream::new(seed, i as u64).generator().sample(StandardNormal);
                    t.sqrt() * z.abs()
                })
                .collect()
        }
        ReferenceKind::FineGrid {
            a,
            b,
            z0,
            z_star,
            t,
            n_fine,
            eps,
        } => {
            let grid = TimeGrid::new(*n_fine, *t);
            let drawn: Result<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = RngStream::new(seed, i as u64).generator();
                    let path = gen_diffusion_reference(&grid, a.as_ref(), b.as_ref(), *z0, 1, &mut rng)?;
                    let b2 = |x: f64| {
                        let v = b.eval(x);
                        v * v
                    };
                    band_occupation(&path, *z_star, *eps, Some(&b2), 0.0, *t)
                })
                .collect();
            drawn?
        }
    };
    SampleSummary::new(values)
}

/// CSV with columns `path_index, value`.
pub fn write_samples_csv<W: Write>(values: &[f64], mut w: W) -> io::Result<()> {
    writeln!(w, "path_index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

/// Hölder-modulus report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusReport {
    pub delta: f64,
    pub c_delta: f64,
    pub n: usize,
    pub estimate: McEstimate,
}

/// Condition diagnostics keyed by condition name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConditionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond1_delta: Option<Vec<(usize, DeltaSup)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond2_supnorm: Option<DistanceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond4_llt: Option<Vec<LltRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond5_modulus: Option<ModulusReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond6_ballgrowth: Option<BallGrowthReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond7_relations: Option<Cond7Report>,
}
