//! Trajectory generators: scaled random walks (broken lines), difference
//! approximations of one-dimensional diffusions, exact Brownian and stable
//! references, a fine-grid Euler surrogate for the limit diffusion, and
//! coupled chain/limit pairs.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sources::{stable_unchecked, IncrementLaw};

/// A scalar coefficient function `x -> a(x)`.
pub trait Coefficient: Send + Sync {
    fn eval(&self, x: f64) -> f64;
}

impl<F> Coefficient for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

pub type CoefFn = Arc<dyn Coefficient>;

pub fn constant_coef(c: f64) -> CoefFn {
    Arc::new(move |_x: f64| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    BrokenLine,
    Step,
}

/// Time discretization: `n` steps per unit time up to `horizon`, plus
/// `lookahead` extra steps past the last knot so that window functionals
/// can read beyond `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n: usize,
    pub horizon: f64,
    pub lookahead: usize,
}

impl TimeGrid {
    pub fn new(n: usize, horizon: f64) -> Self {
        TimeGrid {
            n,
            horizon,
            lookahead: 0,
        }
    }

    pub fn with_lookahead(mut self, lookahead: usize) -> Self {
        self.lookahead = lookahead;
        self
    }

    /// Number of steps covering `[0, horizon]`: `ceil(n * horizon)`.
    pub fn steps(&self) -> usize {
        steps_for(self.n, self.horizon)
    }

    fn total_steps(&self) -> usize {
        self.steps() + self.lookahead
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}

pub(crate) fn steps_for(n: usize, horizon: f64) -> usize {
    let x = n as f64 * horizon;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Index `k` with `k/n` equal to `t` when `t` is (numerically) a grid time.
pub(crate) fn grid_index(n: usize, t: f64) -> Option<usize> {
    let x = n as f64 * t;
    let r = x.round();
    if r >= 0.0 && (x - r).abs() <= 1e-9 * r.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

/// A trajectory stored at the knots `k/n` together with its interpolation rule.
#[derive(Clone, PartialEq)]
pub struct PathGrid {
    n: usize,
    horizon: f64,
    dim: usize,
    knots: Vec<f64>,
    interpolation: Interpolation,
    driver: Option<Vec<f64>>,
}

impl fmt::Debug for PathGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathGrid")
            .field("n", &self.n)
            .field("horizon", &self.horizon)
            .field("dim", &self.dim)
            .field("knots", &self.knot_count())
            .field("interpolation", &self.interpolation)
            .field("driver", &self.driver.is_some())
            .finish()
    }
}

impl PathGrid {
    /// Build a path from row-major knot values (`dim` coordinates per knot).
    pub fn from_knots(n: usize, horizon: f64, dim: usize, knots: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        TimeGrid::new(n, horizon).validate()?;
        if dim == 0 || knots.len() % dim != 0 {
            return Err(Error::config("knot storage is not a whole number of points"));
        }
        let count = knots.len() / dim;
        if count < steps_for(n, horizon) + 1 {
            return Err(Error::config(format!(
                "{} knots do not cover horizon {} at n = {}",
                count, horizon, n
            )));
        }
        Ok(PathGrid {
            n,
            horizon,
            dim,
            knots,
            interpolation,
            driver: None,
        })
    }

    pub fn with_driver(mut self, driver: Vec<f64>) -> Self {
        self.driver = Some(driver);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len() / self.dim
    }

    /// Steps covering `[0, horizon]`; knots beyond index `steps()` are lookahead.
    pub fn steps(&self) -> usize {
        steps_for(self.n, self.horizon)
    }

    pub fn knot(&self, k: usize) -> &[f64] {
        &self.knots[k * self.dim..(k + 1) * self.dim]
    }

    /// First coordinate of knot `k`.
    pub fn scalar(&self, k: usize) -> f64 {
        self.knots[k * self.dim]
    }

    /// Row-major knot storage.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Driving increments `Delta X_n(k/n)` retained by difference chains.
    pub fn driver(&self) -> Option<&[f64]> {
        self.driver.as_deref()
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    /// Value at time `t`. Between knots the broken line is
    /// `knot_{k-1} + (nt - k + 1)(knot_k - knot_{k-1})` for `t` in `[(k-1)/n, k/n)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let last = (self.knot_count() - 1) as f64 / self.n as f64;
        if !(t >= 0.0 && t <= last) {
            return Err(Error::domain(format!("time {t} outside [0, {last}]")));
        }
        if let Some(k) = grid_index(self.n, t) {
            out.copy_from_slice(self.knot(k));
            return Ok(());
        }
        let nt = self.n as f64 * t;
        let k = nt.floor() as usize + 1;
        let lo = self.knot(k - 1);
        match self.interpolation {
            Interpolation::Step => out.copy_from_slice(lo),
            Interpolation::BrokenLine => {
                let hi = self.knot(k);
                let frac = nt - (k as f64) + 1.0;
                for c in 0..self.dim {
                    out[c] = lo[c] + frac * (hi[c] - lo[c]);
                }
            }
        }
        Ok(())
    }

    /// Every `factor`-th knot, as a path with `n / factor` steps per unit time.
    pub fn downsample(&self, factor: usize) -> Result<PathGrid> {
        if factor == 0 || self.n % factor != 0 {
            return Err(Error::config(format!("cannot downsample n = {} by {}", self.n, factor)));
        }
        let count = (self.knot_count() - 1) / factor + 1;
        let mut knots = Vec::with_capacity(count * self.dim);
        for i in 0..count {
            knots.extend_from_slice(self.knot(i * factor));
        }
        Ok(PathGrid {
            n: self.n / factor,
            horizon: self.horizon,
            dim: self.dim,
            knots,
            interpolation: self.interpolation,
            driver: None,
        })
    }

    /// CSV with columns `t, x_1..x_d`, one row per knot.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for c in 1..=self.dim {
            write!(w, ",x_{c}")?;
        }
        writeln!(w)?;
        for k in 0..self.knot_count() {
            write!(w, "{}", k as f64 / self.n as f64)?;
            for v in self.knot(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::config(format!("stability index must lie in (1, 2], got {alpha}")))
    }
}

fn check_start(start: &[f64], dim: usize) -> Result<()> {
    if start.len() != dim {
        return Err(Error::config(format!("start point has dimension {}, expected {}", start.len(), dim)));
    }
    Ok(())
}

/// Lattice spacing of the scaled walk: `1 / (divisor * n^{1/alpha})`.
pub fn walk_spacing(law: &IncrementLaw, n: usize) -> f64 {
    1.0 / (law.divisor() * (n as f64).powf(1.0 / law.alpha()))
}

fn check_walk_law(law: &IncrementLaw, alpha: f64) -> Result<()> {
    check_alpha(alpha)?;
    if (law.alpha() - alpha).abs() > 1e-12 {
        return Err(Error::config(format!(
            "walk scaling index {alpha} does not match the law's index {}",
            law.alpha()
        )));
    }
    if alpha == 2.0 {
        if let Some(sigma) = law.properties().sigma {
            if !law.standardized() && (sigma - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!(
                    "finite-variance law with sigma = {sigma} must be standardized"
                )));
            }
        }
    }
    Ok(())
}

/// Broken line through `start + S_k / n^{1/alpha}`, `S_k` the partial sums of `law`.
///
/// Lattice walks started on the lattice are accumulated in integers, so
/// knot values (and in particular zeros) are exact multiples of the spacing.
pub fn gen_walk_path<R: Rng + ?Sized>(
    grid: &TimeGrid,
    law: &IncrementLaw,
    alpha: f64,
    start: &[f64],
    rng: &mut R,
) -> Result<PathGrid> {
    grid.validate()?;
    check_walk_law(law, alpha)?;
    let dim = law.dim();
    check_start(start, dim)?;
    let steps = grid.total_steps();
    let mut knots = Vec::with_capacity((steps + 1) * dim);
    if law.is_lattice() {
        let h = walk_spacing(law, grid.n);
        let origin = start[0] / h;
        let on_lattice = (origin - origin.round()).abs() <= 1e-9 * origin.abs().max(1.0);
        let mut s: i64 = if on_lattice { origin.round() as i64 } else { 0 };
        knots.push(if on_lattice { s as f64 * h } else { start[0] });
        for _ in 0..steps {
            let j = law.sample_index(rng).expect("lattice law");
            s = s.saturating_add(j);
            knots.push(if on_lattice { s as f64 * h } else { start[0] + s as f64 * h });
        }
    } else {
        knots.extend_from_slice(start);
        let h = (grid.n as f64).powf(-1.0 / alpha);
        let mut sum = vec![0.0; dim];
        let mut xi = vec![0.0; dim];
        for _ in 0..steps {
            law.sample_into(rng, &mut xi);
            for c in 0..dim {
                sum[c] += xi[c];
                knots.push(start[c] + sum[c] * h);
            }
        }
    }
    PathGrid::from_knots(grid.n, grid.horizon, dim, knots, Interpolation::BrokenLine)
}

/// Broken line through `S_k / n^{1/alpha}` for a prescribed increment sequence
/// (row-major, `dim` values per step).
pub fn walk_from_increments(grid: &TimeGrid, increments: &[f64], dim: usize, alpha: f64) -> Result<PathGrid> {
    grid.validate()?;
    check_alpha(alpha)?;
    let steps = grid.total_steps();
    if increments.len() != steps * dim {
        return Err(Error::config(format!(
            "{} increments supplied, {} needed",
            increments.len() / dim.max(1),
            steps
        )));
    }
    let h = (grid.n as f64).powf(-1.0 / alpha);
    let mut knots = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    for step in increments.chunks(dim) {
        for c in 0..dim {
            sum[c] += step[c];
            knots.push(sum[c] * h);
        }
    }
    PathGrid::from_knots(grid.n, grid.horizon, dim, knots, Interpolation::BrokenLine)
}

/// Difference chain `Z((k+1)/n) = Z(k/n) + a(Z)/n + b(Z) dX_k` for given driving increments.
pub fn sde_chain_from_driver(
    n: usize,
    horizon: f64,
    a: &dyn Coefficient,
    b: &dyn Coefficient,
    z0: f64,
    driver: Vec<f64>,
) -> Result<PathGrid> {
    let dt = 1.0 / n as f64;
    let mut knots = Vec::with_capacity(driver.len() + 1);
    let mut z = z0;
    knots.push(z);
    for (k, &dx) in driver.iter().enumerate() {
        let drift = a.eval(z);
        let diffusion = b.eval(z);
        if !drift.is_finite() || !diffusion.is_finite() {
            return Err(Error::Numeric {
                step: k,
                message: format!("coefficient evaluation at z = {z} gave a = {drift}, b = {diffusion}"),
            });
        }
        z = z + drift * dt + diffusion * dx;
        if !z.is_finite() {
            return Err(Error::Numeric {
                step: k + 1,
                message: "chain value is not finite".into(),
            });
        }
        knots.push(z);
    }
    Ok(PathGrid::from_knots(n, horizon, 1, knots, Interpolation::BrokenLine)?.with_driver(driver))
}

/// Difference approximation of `dZ = a(Z) dt + b(Z) dX` driven by the walk
/// increments `dX_k = xi_{k+1} / sqrt(n)`; the increments are retained on the path.
pub fn gen_sde_chain<R: Rng + ?Sized>(
    grid: &TimeGrid,
    a: &dyn Coefficient,
    b: &dyn Coefficient,
    z0: f64,
    law: &IncrementLaw,
    rng: &mut R,
) -> Result<PathGrid> {
    grid.validate()?;
    if law.dim() != 1 {
        return Err(Error::config("difference chains are one-dimensional"));
    }
    check_walk_law(law, 2.0)?;
    let steps = grid.total_steps();
    let driver: Vec<f64> = if law.is_lattice() {
        let h = walk_spacing(law, grid.n);
        (0..steps).map(|_| law.sample_index(rng).expect("lattice law") as f64 * h).collect()
    } else {
        let h = 1.0 / (grid.n as f64).sqrt();
        (0..steps).map(|_| law.sample_scalar(rng) * h).collect()
    };
    sde_chain_from_driver(grid.n, grid.horizon, a, b, z0, driver)
}

fn gaussian_increments<R: Rng + ?Sized>(count: usize, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn cumulative(start: &[f64], increments: &[f64], dim: usize) -> Vec<f64> {
    let mut knots = Vec::with_capacity(increments.len() + dim);
    knots.extend_from_slice(start);
    let mut cur = start.to_vec();
    for step in increments.chunks(dim) {
        for c in 0..dim {
            cur[c] += step[c];
        }
        knots.extend_from_slice(&cur);
    }
    knots
}

/// Brownian motion in `R^d` sampled exactly at the knots (increments `N(0, I/n)`).
pub fn gen_bm_exact<R: Rng + ?Sized>(grid: &TimeGrid, dim: usize, start: &[f64], rng: &mut R) -> Result<PathGrid> {
    grid.validate()?;
    check_start(start, dim)?;
    let inc = gaussian_increments(grid.total_steps() * dim, (1.0 / grid.n as f64).sqrt(), rng);
    PathGrid::from_knots(grid.n, grid.horizon, dim, cumulative(start, &inc, dim), Interpolation::BrokenLine)
}

/// Symmetric alpha-stable Levy process sampled exactly at the knots
/// (increments stable with scale `n^{-1/alpha}`); step interpolation.
pub fn gen_stable_exact<R: Rng + ?Sized>(grid: &TimeGrid, alpha: f64, start: f64, rng: &mut R) -> Result<PathGrid> {
    grid.validate()?;
    check_alpha(alpha)?;
    let scale = (grid.n as f64).powf(-1.0 / alpha);
    let inc: Vec<f64> = (0..grid.total_steps()).map(|_| scale * stable_unchecked(alpha, rng)).collect();
    PathGrid::from_knots(grid.n, grid.horizon, 1, cumulative(&[start], &inc, 1), Interpolation::Step)
}

fn euler_on_increments(
    fine_n: usize,
    horizon: f64,
    a: &dyn Coefficient,
    b: &dyn Coefficient,
    z0: f64,
    increments: &[f64],
) -> Result<Vec<f64>> {
    let dt = 1.0 / fine_n as f64;
    let mut knots = Vec::with_capacity(increments.len() + 1);
    let mut z = z0;
    knots.push(z);
    for (k, &dw) in increments.iter().enumerate() {
        z = z + a.eval(z) * dt + b.eval(z) * dw;
        if !z.is_finite() {
            return Err(Error::Numeric {
                step: k + 1,
                message: format!("reference Euler scheme diverged at horizon {horizon}"),
            });
        }
        knots.push(z);
    }
    Ok(knots)
}

/// Fine-grid Euler surrogate of the limit diffusion: step `1/(n R)`, exact
/// Gaussian increments. The returned path has `n R` steps per unit time;
/// use [`PathGrid::downsample`] for the view at step `1/n`.
pub fn gen_diffusion_reference<R: Rng + ?Sized>(
    grid: &TimeGrid,
    a: &dyn Coefficient,
    b: &dyn Coefficient,
    z0: f64,
    refine: usize,
    rng: &mut R,
) -> Result<PathGrid> {
    grid.validate()?;
    if refine == 0 {
        return Err(Error::config("refinement factor must be at least 1"));
    }
    let fine_n = grid.n * refine;
    let steps = grid.total_steps() * refine;
    let inc = gaussian_increments(steps, (1.0 / fine_n as f64).sqrt(), rng);
    let knots = euler_on_increments(fine_n, grid.horizon, a, b, z0, &inc)?;
    Ok(PathGrid::from_knots(fine_n, grid.horizon, 1, knots, Interpolation::BrokenLine)?.with_driver(inc))
}

/// A chain and a limit path living on one probability space.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub chain: PathGrid,
    pub limit: PathGrid,
    /// Block constant `K`: the pair is compared at the times `iK/n`.
    pub block: usize,
}

impl CoupledPair {
    /// Limit-path knots per chain knot.
    pub fn refine(&self) -> usize {
        self.limit.n() / self.chain.n()
    }

    /// Largest Euclidean distance between chain and limit over the block times `iK/n <= T`.
    pub fn block_distance(&self, horizon: f64) -> f64 {
        let r = self.refine();
        let last = steps_for(self.chain.n(), horizon).min(self.chain.knot_count() - 1);
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i * self.block <= last {
            let k = i * self.block;
            let d = euclid(self.chain.knot(k), self.limit.knot(k * r));
            worst = worst.max(d);
            i += 1;
        }
        worst
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Trivial exact coupling for Gaussian increments: one Brownian path `W`
/// sampled at step `1/(n R)`; the chain is the broken line through `W(k/n)`
/// and the limit is `W` itself. `K = 1`.
pub fn gen_trivial_coupling<R: Rng + ?Sized>(
    grid: &TimeGrid,
    law: &IncrementLaw,
    refine: usize,
    start: &[f64],
    rng: &mut R,
) -> Result<CoupledPair> {
    if !law.is_gaussian() {
        return Err(Error::config(
            "the trivial coupling exists only for Gaussian increments; other laws need a dedicated construction",
        ));
    }
    if refine == 0 {
        return Err(Error::config("refinement factor must be at least 1"));
    }
    let dim = law.dim();
    let fine = TimeGrid {
        n: grid.n * refine,
        horizon: grid.horizon,
        lookahead: grid.lookahead * refine,
    };
    let limit = gen_bm_exact(&fine, dim, start, rng)?;
    let chain = limit.downsample(refine)?;
    Ok(CoupledPair {
        chain,
        limit,
        block: 1,
    })
}

/// Coupled difference chain and reference diffusion driven by one Brownian
/// path: the chain uses `dX_k = W((k+1)/n) - W(k/n)`, the limit runs Euler on
/// the fine increments of the same `W`.
pub fn gen_sde_coupled_pair<R: Rng + ?Sized>(
    grid: &TimeGrid,
    a: &dyn Coefficient,
    b: &dyn Coefficient,
    z0: f64,
    refine: usize,
    rng: &mut R,
) -> Result<CoupledPair> {
    grid.validate()?;
    if refine == 0 {
        return Err(Error::config("refinement factor must be at least 1"));
    }
    let fine_n = grid.n * refine;
    let fine_steps = grid.total_steps() * refine;
    let inc = gaussian_increments(fine_steps, (1.0 / fine_n as f64).sqrt(), rng);
    let w = cumulative(&[0.0], &inc, 1);
    let driver: Vec<f64> = (0..grid.total_steps()).map(|k| w[(k + 1) * refine] - w[k * refine]).collect();
    let chain = sde_chain_from_driver(grid.n, grid.horizon, a, b, z0, driver)?;
    let limit_knots = euler_on_increments(fine_n, grid.horizon, a, b, z0, &inc)?;
    let limit = PathGrid::from_knots(fine_n, grid.horizon, 1, limit_knots, Interpolation::BrokenLine)?.with_driver(inc);
    Ok(CoupledPair {
        chain,
        limit,
        block: 1,
    })
}

/// What to simulate, independent of the time grid and the random stream.
#[derive(Clone)]
pub enum ProcessSpec {
    Walk { law: IncrementLaw, alpha: f64 },
    SdeChain { a: CoefFn, b: CoefFn, law: IncrementLaw, z0: f64 },
    BmExact { dim: usize },
    StableExact { alpha: f64 },
    DiffusionReference { a: CoefFn, b: CoefFn, z0: f64, refine: usize },
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Walk { law, alpha } => write!(f, "Walk({:?}, alpha={alpha})", law.kind()),
            ProcessSpec::SdeChain { law, z0, .. } => write!(f, "SdeChain({:?}, z0={z0})", law.kind()),
            ProcessSpec::BmExact { dim } => write!(f, "BmExact(d={dim})"),
            ProcessSpec::StableExact { alpha } => write!(f, "StableExact(alpha={alpha})"),
            ProcessSpec::DiffusionReference { z0, refine, .. } => {
                write!(f, "DiffusionReference(z0={z0}, refine={refine})")
            }
        }
    }
}

impl ProcessSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProcessSpec::Walk { law, .. } => law.dim(),
            ProcessSpec::BmExact { dim } => *dim,
            _ => 1,
        }
    }

    /// Default start point (`z0` for diffusions, the origin otherwise).
    pub fn default_start(&self) -> Vec<f64> {
        match self {
            ProcessSpec::SdeChain { z0, .. } | ProcessSpec::DiffusionReference { z0, .. } => vec![*z0],
            _ => vec![0.0; self.dim()],
        }
    }

    /// One trajectory on `grid` started at `start`. Chains keep step `1/n`;
    /// the diffusion reference is returned downsampled to step `1/n`.
    pub fn sample_path<R: Rng + ?Sized>(&self, grid: &TimeGrid, start: &[f64], rng: &mut R) -> Result<PathGrid> {
        check_start(start, self.dim())?;
        match self {
            ProcessSpec::Walk { law, alpha } => gen_walk_path(grid, law, *alpha, start, rng),
            ProcessSpec::SdeChain { a, b, law, .. } => gen_sde_chain(grid, a.as_ref(), b.as_ref(), start[0], law, rng),
            ProcessSpec::BmExact { dim } => gen_bm_exact(grid, *dim, start, rng),
            ProcessSpec::StableExact { alpha } => gen_stable_exact(grid, *alpha, start[0], rng),
            ProcessSpec::DiffusionReference { a, b, refine, .. } => {
                gen_diffusion_reference(grid, a.as_ref(), b.as_ref(), start[0], *refine, rng)?.downsample(*refine)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{LawKind, RngStream};

    fn rng(i: u64) -> crate::sources::StreamRng {
        RngStream::new(99, i).generator()
    }

    #[test]
    fn single_step_midpoint() {
        let law = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        let p = gen_walk_path(&TimeGrid::new(1, 1.0), &law, 2.0, &[0.0], &mut rng(0)).unwrap();
        assert_eq!(p.knot_count(), 2);
        let end = p.scalar(1);
        assert!(end == 1.0 || end == -1.0);
        assert_eq!(p.eval(0.5).unwrap()[0], end / 2.0);
    }

    #[test]
    fn forced_increments() {
        let p = walk_from_increments(&TimeGrid::new(4, 1.0), &[1.0; 4], 1, 2.0).unwrap();
        assert_eq!(p.knots(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn knots_are_exact_and_count_matches() {
        let law = IncrementLaw::new(LawKind::GaussianIid { dim: 2 }, false).unwrap();
        let grid = TimeGrid::new(10, 1.35);
        let p = gen_walk_path(&grid, &law, 2.0, &[0.0, 0.0], &mut rng(1)).unwrap();
        assert_eq!(p.knot_count(), 15);
        for k in 0..p.knot_count() {
            assert_eq!(p.eval(k as f64 / 10.0).unwrap(), p.knot(k));
        }
    }

    #[test]
    fn step_interpolation_holds_left_value() {
        let p = gen_stable_exact(&TimeGrid::new(8, 1.0), 1.5, 0.0, &mut rng(2)).unwrap();
        assert_eq!(p.interpolation(), Interpolation::Step);
        assert_eq!(p.eval(0.2).unwrap()[0], p.scalar(1));
    }

    #[test]
    fn deterministic_euler() {
        let a = constant_coef(1.0);
        let b = constant_coef(0.0);
        let law = IncrementLaw::new(LawKind::GaussianIid { dim: 1 }, false).unwrap();
        let p = gen_sde_chain(&TimeGrid::new(4, 1.0), a.as_ref(), b.as_ref(), 0.0, &law, &mut rng(3)).unwrap();
        assert_eq!(p.knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.driver().unwrap().len(), 4);
    }

    #[test]
    fn numeric_failure_names_step() {
        let a = Arc::new(|x: f64| 1.0 / x) as CoefFn;
        let b = constant_coef(1.0);
        let law = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        let err = gen_sde_chain(&TimeGrid::new(4, 1.0), a.as_ref(), b.as_ref(), 0.0, &law, &mut rng(4)).unwrap_err();
        assert!(matches!(err, Error::Numeric { step: 0, .. }));
    }

    #[test]
    fn walk_rejects_mismatched_index_and_unstandardized_law() {
        let law = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        assert!(gen_walk_path(&TimeGrid::new(4, 1.0), &law, 1.5, &[0.0], &mut rng(5)).is_err());
        let lazy = IncrementLaw::new(LawKind::LazyLattice { p0: 0.5 }, false).unwrap();
        assert!(gen_walk_path(&TimeGrid::new(4, 1.0), &lazy, 2.0, &[0.0], &mut rng(5)).is_err());
    }

    #[test]
    fn trivial_coupling_requires_gaussian() {
        let law = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        let err = gen_trivial_coupling(&TimeGrid::new(4, 1.0), &law, 1, &[0.0], &mut rng(6)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn trivial_coupling_shares_knots() {
        let law = IncrementLaw::new(LawKind::GaussianIid { dim: 2 }, false).unwrap();
        let pair = gen_trivial_coupling(&TimeGrid::new(16, 1.0), &law, 4, &[0.0, 0.0], &mut rng(7)).unwrap();
        assert_eq!(pair.block_distance(1.0), 0.0);
        assert_eq!(pair.refine(), 4);
    }

    #[test]
    fn lookahead_extends_the_path() {
        let law = IncrementLaw::new(LawKind::Rademacher, false).unwrap();
        let p = gen_walk_path(&TimeGrid::new(8, 1.0).with_lookahead(1), &law, 2.0, &[0.0], &mut rng(8)).unwrap();
        assert_eq!(p.knot_count(), 10);
        assert_eq!(p.steps(), 8);
    }

    #[test]
    fn downsample_rejects_non_divisor() {
        let p = gen_bm_exact(&TimeGrid::new(6, 1.0), 1, &[0.0], &mut rng(9)).unwrap();
        assert!(p.downsample(4).is_err());
        assert_eq!(p.downsample(3).unwrap().knot_count(), 3);
    }
}
