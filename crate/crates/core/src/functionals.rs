//! Additive functionals `phi_n^{s,t} = sum_{s <= k/n < t} F_n(X(k/n), ..., X((k+L-1)/n))`
//! of a trajectory, their two-time fields, and the concrete kernel library.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::processes::{grid_index, walk_spacing, Coefficient, PathGrid, ProcessSpec};

/// Membership oracle for a compact set `K` and its closed tubes `K_eps`.
pub trait SetOracle: Send + Sync {
    fn dim(&self) -> usize;
    /// Whether `dist(x, K) <= eps`.
    fn contains(&self, x: &[f64], eps: f64) -> bool;
    /// Lebesgue volume of `K_eps`, when known.
    fn tube_volume(&self, eps: f64) -> Option<f64>;
    fn describe(&self) -> String;
}

/// Sphere `{x : |x - center| = radius}`; in two dimensions, a circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Sphere {
    pub fn unit_circle() -> Self {
        Sphere {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }
    }
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    // pi^{d/2} r^d / Gamma(d/2 + 1)
    let d = dim as f64;
    PI.powf(d / 2.0) * r.powf(d) / statrs::function::gamma::gamma(d / 2.0 + 1.0)
}

impl SetOracle for Sphere {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains(&self, x: &[f64], eps: f64) -> bool {
        let r = crate::processes::euclid(x, &self.center);
        (r - self.radius).abs() <= eps
    }

    fn tube_volume(&self, eps: f64) -> Option<f64> {
        let inner = (self.radius - eps).max(0.0);
        Some(ball_volume(self.dim(), self.radius + eps) - ball_volume(self.dim(), inner))
    }

    fn describe(&self) -> String {
        format!("sphere(center={:?}, radius={})", self.center, self.radius)
    }
}

/// Wraps an oracle without an analytic tube volume; the volume is estimated
/// by uniform sampling of a bounding box with a fixed seed.
pub struct EstimatedVolume<S> {
    pub inner: S,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl<S: SetOracle> SetOracle for EstimatedVolume<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn contains(&self, x: &[f64], eps: f64) -> bool {
        self.inner.contains(x, eps)
    }

    fn tube_volume(&self, eps: f64) -> Option<f64> {
        Some(mc_tube_volume(&self.inner, eps, &self.lower, &self.upper, self.samples, self.seed))
    }

    fn describe(&self) -> String {
        format!("{} (volume by {} samples)", self.inner.describe(), self.samples)
    }
}

/// Monte-Carlo estimate of `lambda^d(K_eps)` inside the box `[lower, upper]`.
pub fn mc_tube_volume(set: &dyn SetOracle, eps: f64, lower: &[f64], upper: &[f64], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let box_volume: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
    let mut x = vec![0.0; lower.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (c, v) in x.iter_mut().enumerate() {
            *v = lower[c] + (upper[c] - lower[c]) * rng.random::<f64>();
        }
        if set.contains(&x, eps) {
            hits += 1;
        }
    }
    box_volume * hits as f64 / samples as f64
}

/// A user window kernel `F_n(x_1, ..., x_L)`; must be non-negative.
pub trait Kernel: Send + Sync {
    fn window(&self) -> usize;
    /// `window` holds `L` consecutive points of dimension `dim`, row-major.
    fn eval(&self, window: &[f64], dim: usize, n: usize) -> f64;
}

#[derive(Clone)]
pub enum FunctionalKind {
    /// Censored local time at `z_star` (window 2).
    CensoredPoint { z_star: f64 },
    /// Doob-decomposition local time at zero (window 2).
    DoobZero,
    /// Scaled visit count of zero (window 1).
    VisitCount,
    /// Normalized occupation of the tube `K_{1/sqrt(n)}` (window 1).
    Tube { set: Arc<dyn SetOracle> },
    /// `F_n == value` (window 1).
    Constant { value: f64 },
    /// One-step conditional expectation of a window-2 kernel for a walk with step `n`.
    Reduced {
        inner: Box<FunctionalSpec>,
        steps: Vec<(f64, f64)>,
        n: usize,
    },
    Generic { kernel: Arc<dyn Kernel> },
}

/// An additive functional: a kernel and its window length.
#[derive(Clone)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
}

impl fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionalSpec({}, L={})", self.name(), self.window())
    }
}

impl FunctionalSpec {
    pub fn censored_point(z_star: f64) -> Self {
        FunctionalSpec {
            kind: FunctionalKind::CensoredPoint { z_star },
        }
    }

    pub fn doob_zero() -> Self {
        FunctionalSpec {
            kind: FunctionalKind::DoobZero,
        }
    }

    pub fn visit_count() -> Self {
        FunctionalSpec {
            kind: FunctionalKind::VisitCount,
        }
    }

    pub fn tube(set: Arc<dyn SetOracle>) -> Self {
        FunctionalSpec {
            kind: FunctionalKind::Tube { set },
        }
    }

    pub fn constant(value: f64) -> Self {
        FunctionalSpec {
            kind: FunctionalKind::Constant { value },
        }
    }

    pub fn generic(kernel: Arc<dyn Kernel>) -> Self {
        FunctionalSpec {
            kind: FunctionalKind::Generic { kernel },
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            FunctionalKind::CensoredPoint { z_star } => format!("censored_point({z_star})"),
            FunctionalKind::DoobZero => "doob_zero".into(),
            FunctionalKind::VisitCount => "visit_count".into(),
            FunctionalKind::Tube { set } => format!("tube({})", set.describe()),
            FunctionalKind::Constant { value } => format!("constant({value})"),
            FunctionalKind::Reduced { inner, n, .. } => format!("reduced({}, n={n})", inner.name()),
            FunctionalKind::Generic { .. } => "generic".into(),
        }
    }

    /// Window length `L`.
    pub fn window(&self) -> usize {
        match &self.kind {
            FunctionalKind::CensoredPoint { .. } | FunctionalKind::DoobZero => 2,
            FunctionalKind::VisitCount
            | FunctionalKind::Tube { .. }
            | FunctionalKind::Constant { .. }
            | FunctionalKind::Reduced { .. } => 1,
            FunctionalKind::Generic { kernel } => kernel.window(),
        }
    }

    /// Fix the step parameter `n`, precomputing what depends on it.
    pub fn bind(&self, n: usize, dim: usize) -> Result<BoundFunctional<'_>> {
        if n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        let mut tube_weight = 0.0;
        match &self.kind {
            FunctionalKind::Tube { set } => {
                if set.dim() != dim {
                    return Err(Error::config(format!(
                        "tube set lives in R^{}, path in R^{}",
                        set.dim(),
                        dim
                    )));
                }
                let eps = 1.0 / (n as f64).sqrt();
                let vol = set
                    .tube_volume(eps)
                    .ok_or_else(|| Error::config("tube functional needs the volume of K_eps"))?;
                if !(vol > 0.0) {
                    return Err(Error::config(format!("tube volume at eps = {eps} is {vol}; must be positive")));
                }
                tube_weight = 1.0 / (n as f64 * vol);
            }
            FunctionalKind::Reduced { n: bound_n, .. } if *bound_n != n => {
                return Err(Error::config(format!(
                    "reduced kernel was built for n = {bound_n}, path has n = {n}"
                )));
            }
            FunctionalKind::CensoredPoint { .. } | FunctionalKind::DoobZero | FunctionalKind::VisitCount
                if dim != 1 =>
            {
                return Err(Error::config(format!("{} needs a scalar path, got dimension {dim}", self.name())));
            }
            _ => {}
        }
        Ok(BoundFunctional {
            spec: self,
            n,
            dim,
            inv_n: 1.0 / n as f64,
            inv_sqrt_n: 1.0 / (n as f64).sqrt(),
            tube_weight,
        })
    }
}

/// A functional with `n` fixed.
pub struct BoundFunctional<'a> {
    spec: &'a FunctionalSpec,
    n: usize,
    dim: usize,
    inv_n: f64,
    inv_sqrt_n: f64,
    tube_weight: f64,
}

impl BoundFunctional<'_> {
    pub fn window(&self) -> usize {
        self.spec.window()
    }

    /// `F_n` on one window of `L` consecutive knots (row-major).
    #[inline]
    pub fn eval(&self, w: &[f64]) -> f64 {
        match &self.spec.kind {
            FunctionalKind::CensoredPoint { z_star } => censored_point_scaled(*z_star, w[0], w[1], self.inv_n),
            FunctionalKind::DoobZero => kernel_doob_zero(w[0], w[1]),
            FunctionalKind::VisitCount => {
                if w[0] == 0.0 {
                    self.inv_sqrt_n
                } else {
                    0.0
                }
            }
            FunctionalKind::Tube { set } => {
                if set.contains(w, self.inv_sqrt_n) {
                    self.tube_weight
                } else {
                    0.0
                }
            }
            FunctionalKind::Constant { value } => *value,
            FunctionalKind::Reduced { inner, steps, .. } => {
                let bound = BoundFunctional { spec: inner, ..*self };
                steps.iter().map(|&(dx, p)| p * bound.eval(&[w[0], w[0] + dx])).sum()
            }
            FunctionalKind::Generic { kernel } => kernel.eval(w, self.dim, self.n),
        }
    }
}

#[inline]
fn censored_point_scaled(z: f64, x: f64, y: f64, inv_n: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    let (dx, dy) = (x - z, y - z);
    let weight = if dx * dy < 0.0 {
        1.0
    } else if (dx != 0.0 && dy == 0.0) || (dx == 0.0 && dy != 0.0) {
        0.5
    } else {
        return 0.0;
    };
    inv_n * weight / (y - x).abs()
}

/// Censored-point kernel: `(1/n)(1/|y-x|)[1{crossing} + (1/2)(1{one endpoint at z*})]`, 0 when `x = y`.
pub fn kernel_censored_point(z_star: f64, x: f64, y: f64, n: usize) -> f64 {
    censored_point_scaled(z_star, x, y, 1.0 / n as f64)
}

/// Doob kernel `|cur| (2 1{prev cur < 0} + 1{prev = 0})`.
#[inline]
pub fn kernel_doob_zero(prev: f64, cur: f64) -> f64 {
    let mut w = 0.0;
    if prev * cur < 0.0 {
        w += 2.0;
    }
    if prev == 0.0 {
        w += 1.0;
    }
    cur.abs() * w
}

/// Visit-count kernel `(1/sqrt(n)) 1{cur = 0}`.
pub fn kernel_visit_count(cur: f64, n: usize) -> f64 {
    if cur == 0.0 {
        1.0 / (n as f64).sqrt()
    } else {
        0.0
    }
}

/// Tube kernel `1{cur in K_{1/sqrt(n)}} / (n lambda^d(K_{1/sqrt(n)}))`.
pub fn kernel_tube(set: &dyn SetOracle, cur: &[f64], n: usize) -> Result<f64> {
    let eps = 1.0 / (n as f64).sqrt();
    let vol = set.tube_volume(eps).unwrap_or(0.0);
    if !(vol > 0.0) {
        return Err(Error::config("tube volume is zero"));
    }
    Ok(if set.contains(cur, eps) { 1.0 / (n as f64 * vol) } else { 0.0 })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// First index `k` with `k/n >= t`.
fn first_index_at_or_after(n: usize, t: f64) -> usize {
    match grid_index(n, t) {
        Some(k) => k,
        None => (n as f64 * t).ceil().max(0.0) as usize,
    }
}

fn check_times(s: f64, t: f64, horizon: f64) -> Result<()> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("s = {s} must be non-negative")));
    }
    if s > t {
        return Err(Error::domain(format!("s = {s} exceeds t = {t}")));
    }
    if t > horizon * (1.0 + 1e-12) {
        return Err(Error::domain(format!("t = {t} exceeds the horizon {horizon}")));
    }
    Ok(())
}

/// `phi_n^{s,t}` of `path`, summed left to right with compensation.
pub fn eval_additive(spec: &FunctionalSpec, path: &PathGrid, s: f64, t: f64) -> Result<f64> {
    check_times(s, t, path.horizon())?;
    let bound = spec.bind(path.n(), path.dim())?;
    let lo = first_index_at_or_after(path.n(), s);
    let hi = first_index_at_or_after(path.n(), t);
    sum_windows(&bound, path, lo, hi)
}

fn sum_windows(bound: &BoundFunctional<'_>, path: &PathGrid, lo: usize, hi: usize) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let l = bound.window();
    let last_needed = hi - 1 + l - 1;
    let available = path.knot_count() - 1;
    if last_needed > available {
        return Err(Error::config(format!(
            "window of length {l} needs knot {last_needed}, path stops at knot {available}; generate {} more lookahead step(s)",
            last_needed - available
        )));
    }
    let d = path.dim();
    let knots = path.knots();
    let mut acc = CompensatedSum::default();
    for k in lo..hi {
        acc.add(bound.eval(&knots[k * d..(k + l) * d]));
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    /// Step function in both time variables.
    Phi,
    /// Broken line in both time variables.
    Psi,
}

/// Per-cell increments `phi_n^{(k-1)/n, k/n}` of one path over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimeField {
    n: usize,
    horizon: f64,
    increments: Vec<f64>,
    prefix: Vec<f64>,
}

impl TwoTimeField {
    pub fn build(spec: &FunctionalSpec, path: &PathGrid) -> Result<Self> {
        let bound = spec.bind(path.n(), path.dim())?;
        let cells = path.steps();
        let l = bound.window();
        if cells + l - 1 > path.knot_count() {
            return Err(Error::config(format!(
                "field over {cells} cells needs {} lookahead step(s)",
                cells + l - path.knot_count()
            )));
        }
        let d = path.dim();
        let knots = path.knots();
        let increments: Vec<f64> = (0..cells).map(|k| bound.eval(&knots[k * d..(k + l) * d])).collect();
        Ok(Self::from_increments(path.n(), path.horizon(), increments))
    }

    pub fn from_increments(n: usize, horizon: f64, increments: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(increments.len() + 1);
        let mut acc = CompensatedSum::default();
        prefix.push(0.0);
        for &c in &increments {
            acc.add(c);
            prefix.push(acc.value());
        }
        TwoTimeField {
            n,
            horizon,
            increments,
            prefix,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    fn cell_of(&self, t: f64) -> (usize, f64) {
        // t in [(k-1)/n, k/n) -> (k, nt - k + 1)
        let nt = self.n as f64 * t;
        let k = (nt.floor() as usize + 1).min(self.increments.len());
        (k, nt - k as f64 + 1.0)
    }

    /// `phi` at grid times `j/n`, `k/n`.
    pub fn phi_grid(&self, j: usize, k: usize) -> f64 {
        self.prefix[k] - self.prefix[j]
    }

    pub fn eval(&self, mode: FieldMode, s: f64, t: f64) -> Result<f64> {
        check_times(s, t, self.horizon)?;
        match mode {
            FieldMode::Phi => {
                let j = first_index_at_or_after(self.n, s).min(self.increments.len());
                let k = first_index_at_or_after(self.n, t).min(self.increments.len());
                Ok(self.phi_grid(j, k.max(j)))
            }
            FieldMode::Psi => Ok(self.psi(s, t)),
        }
    }

    fn psi(&self, s: f64, t: f64) -> f64 {
        let grid_s = grid_index(self.n, s);
        let grid_t = grid_index(self.n, t);
        if let (Some(j), Some(k)) = (grid_s, grid_t) {
            return self.phi_grid(j, k);
        }
        let (j, fs) = match grid_s {
            Some(j) if j < self.increments.len() => (j + 1, 0.0),
            Some(j) => (j, 1.0),
            None => self.cell_of(s),
        };
        let (k, ft) = match grid_t {
            Some(k) if k < self.increments.len() => (k + 1, 0.0),
            Some(k) => (k, 1.0),
            None => self.cell_of(t),
        };
        // psi = phi^{(j-1)/n,(k-1)/n} - (ns - j + 1) c_j + (nt - k + 1) c_k
        let base = self.prefix[k - 1] - self.prefix[j - 1];
        let v = base - fs * self.increments[j - 1] + ft * self.increments[k - 1];
        v.max(0.0)
    }

    /// CSV with columns `k, increment` (cell `k` spans `[(k-1)/n, k/n)`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,increment")?;
        for (i, c) in self.increments.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, c)?;
        }
        Ok(())
    }
}

/// `psi_n^{s,t}` of a field.
pub fn eval_psi(field: &TwoTimeField, s: f64, t: f64) -> Result<f64> {
    field.eval(FieldMode::Psi, s, t)
}

/// Both sides of the pathwise Doob identity for a difference chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoobResidual {
    pub residual: f64,
    /// Sum of absolute values of all terms, for relative comparison.
    pub scale: f64,
}

impl DoobResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.scale
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|Z(t)| - |Z(s)| - phi^{s,t} - sum_{k=ns}^{nt-1} [a(Z_k)/n + b(Z_k) dX_k] sign(Z_k)`
/// for a difference chain that retained its driving increments.
pub fn doob_residual(path: &PathGrid, a: &dyn Coefficient, b: &dyn Coefficient, s: f64, t: f64) -> Result<DoobResidual> {
    let driver = path
        .driver()
        .ok_or_else(|| Error::config("path does not retain its driving increments"))?;
    check_times(s, t, path.horizon())?;
    let n = path.n();
    let (j, k) = match (grid_index(n, s), grid_index(n, t)) {
        (Some(j), Some(k)) => (j, k),
        _ => return Err(Error::domain("doob residual needs grid times s, t")),
    };
    if k > driver.len() {
        return Err(Error::config("driver shorter than the requested range"));
    }
    let inv_n = 1.0 / n as f64;
    let mut phi = CompensatedSum::default();
    let mut drift = CompensatedSum::default();
    let mut scale = CompensatedSum::default();
    for i in j..k {
        let (z, z_next) = (path.scalar(i), path.scalar(i + 1));
        let f = kernel_doob_zero(z, z_next);
        phi.add(f);
        let term = (a.eval(z) * inv_n + b.eval(z) * driver[i]) * sign(z);
        drift.add(term);
        scale.add(f + term.abs());
    }
    let (zt, zs) = (path.scalar(k).abs(), path.scalar(j).abs());
    let residual = (zt - zs) - phi.value() - drift.value();
    Ok(DoobResidual {
        residual,
        scale: scale.value() + zt + zs,
    })
}

/// Replace a window-2 functional of a finite-support lattice walk by its
/// one-step conditional expectation `Psi_n(x) = sum_j P_j F_n(x, x + j h)`.
pub fn chi_reduce(spec: &FunctionalSpec, process: &ProcessSpec, n: usize) -> Result<FunctionalSpec> {
    if spec.window() != 2 {
        return Err(Error::Unsupported(format!("reduction expects a window-2 functional, got L = {}", spec.window())));
    }
    let law = match process {
        ProcessSpec::Walk { law, .. } => law,
        _ => return Err(Error::Unsupported("reduction is only available for random walks".into())),
    };
    let support = law
        .finite_support()
        .ok_or_else(|| Error::Unsupported("reduction needs a finite-support lattice law".into()))?;
    let h = walk_spacing(law, n);
    let steps = support.into_iter().filter(|&(_, p)| p > 0.0).map(|(j, p)| (j as f64 * h, p)).collect();
    Ok(FunctionalSpec {
        kind: FunctionalKind::Reduced {
            inner: Box::new(spec.clone()),
            steps,
            n,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    /// Closed-form value (or closed-form upper bound) of the kernel supremum.
    Analytic,
    /// Grid-search lower estimate of the supremum.
    Approximate,
    /// The kernel is unbounded for this process.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSup {
    pub value: f64,
    pub kind: DeltaKind,
}

impl DeltaSup {
    fn analytic(value: f64) -> Self {
        DeltaSup {
            value,
            kind: DeltaKind::Analytic,
        }
    }

    fn unbounded() -> Self {
        DeltaSup {
            value: f64::INFINITY,
            kind: DeltaKind::Unbounded,
        }
    }
}

/// Censored-point bound `2 n^{1/alpha - 1}` on the unit-spacing lattice.
pub fn censored_delta_unit(alpha: f64, n: usize) -> f64 {
    2.0 * (n as f64).powf(1.0 / alpha - 1.0)
}

/// `delta(F_n) = sup F_n` for the library kernels.
///
/// For the censored point on a lattice walk, consecutive knots either
/// coincide or differ by at least the spacing `min|j| / (divisor n^{1/alpha})`,
/// which gives the bound `2 n^{1/alpha - 1} divisor / min|j|`.
pub fn delta_sup(spec: &FunctionalSpec, process: &ProcessSpec, n: usize) -> Result<DeltaSup> {
    let lattice_law = match process {
        ProcessSpec::Walk { law, .. } if law.is_lattice() => Some(law),
        _ => None,
    };
    Ok(match &spec.kind {
        FunctionalKind::CensoredPoint { .. } => match lattice_law {
            Some(law) => {
                let min_step = law.min_nonzero_step().expect("lattice law has a nonzero step") as f64;
                DeltaSup::analytic(censored_delta_unit(law.alpha(), n) * law.divisor() / min_step)
            }
            None => DeltaSup::unbounded(),
        },
        FunctionalKind::DoobZero => match lattice_law.and_then(|l| l.max_abs_step().map(|m| (l, m))) {
            Some((law, max_step)) => DeltaSup::analytic(2.0 * max_step as f64 * walk_spacing(law, n)),
            None => DeltaSup::unbounded(),
        },
        FunctionalKind::VisitCount => DeltaSup::analytic(1.0 / (n as f64).sqrt()),
        FunctionalKind::Tube { set } => {
            let vol = set
                .tube_volume(1.0 / (n as f64).sqrt())
                .ok_or_else(|| Error::config("tube functional needs the volume of K_eps"))?;
            DeltaSup::analytic(1.0 / (n as f64 * vol))
        }
        FunctionalKind::Constant { value } => DeltaSup::analytic(*value),
        FunctionalKind::Reduced { inner, .. } => delta_sup(inner, process, n)?,
        FunctionalKind::Generic { .. } => {
            return Err(Error::Unsupported(
                "generic kernels need a search domain; use delta_sup_search".into(),
            ))
        }
    })
}

/// Largest kernel value over the supplied windows; a lower estimate of `delta(F_n)`.
pub fn delta_sup_search(spec: &FunctionalSpec, n: usize, dim: usize, windows: &[Vec<f64>]) -> Result<DeltaSup> {
    let bound = spec.bind(n, dim)?;
    let value = windows.iter().map(|w| bound.eval(w)).fold(0.0, f64::max);
    Ok(DeltaSup {
        value,
        kind: DeltaKind::Approximate,
    })
}
