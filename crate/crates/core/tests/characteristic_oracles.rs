use std::f64::consts::PI;

use afmc_core::characteristics::{
    ball_growth, characteristic_analytic_measure, characteristic_analytic_point, characteristic_lattice_exact,
    characteristic_mc, density_eval, holder_modulus, llt_discrepancies, llt_surface, modulus_moment, stable_density,
    CharacteristicTable, Cell, DensityModel, LatticeKernel, MeasureSpec, Provenance,
};
use afmc_core::functionals::FunctionalSpec;
use afmc_core::processes::{gen_bm_exact, ProcessSpec, TimeGrid};
use afmc_core::sources::{IncrementLaw, LawKind, RngStream};

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `E_1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)`.
fn exp_integral_e1(x: f64) -> f64 {
    let euler_gamma = 0.577_215_664_901_532_9;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..60 {
        term *= -x / k as f64;
        sum += term / k as f64;
    }
    -euler_gamma - x.ln() - sum
}

#[test]
fn exponential_integral_oracle_value() {
    assert!((exp_integral_e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
}

#[test]
fn gaussian_density_integrates_to_one() {
    let g1 = DensityModel::Gaussian { dim: 1 };
    let total = simpson(|y| density_eval(&g1, 0.7, &[0.3], &[y]).unwrap(), -12.0, 12.0, 4000);
    assert!((total - 1.0).abs() < 1e-8);
    let g2 = DensityModel::Gaussian { dim: 2 };
    let inner = |x: f64| simpson(|y| density_eval(&g2, 0.5, &[0.0, 0.0], &[x, y]).unwrap(), -8.0, 8.0, 800);
    let total = simpson(inner, -8.0, 8.0, 800);
    assert!((total - 1.0).abs() < 1e-6);
}

#[test]
fn stable_density_is_self_similar() {
    for alpha in [1.3, 1.5, 1.8] {
        for r in [0.1, 0.3, 1.0, 2.5, 7.0] {
            for x in [0.0, 0.2, 1.0, 3.0, 9.0] {
                let direct = stable_density(alpha, r, x).unwrap();
                let scale = r.powf(-1.0 / alpha);
                let rescaled = scale * stable_density(alpha, 1.0, scale * x).unwrap();
                assert!((direct - rescaled).abs() < 1e-6, "alpha {alpha} r {r} x {x}: {direct} vs {rescaled}");
            }
        }
    }
}

#[test]
fn stable_density_normalization() {
    for alpha in [1.3, 1.5, 1.8] {
        let body = simpson(|z| stable_density(alpha, 1.0, z).unwrap(), 0.0, 60.0, 12_000);
        // tail mass beyond 60 from the leading asymptotic term
        let tail = statrs::function::gamma::gamma(alpha) * (PI * alpha / 2.0).sin() / PI * 60f64.powf(-alpha);
        assert!((2.0 * (body + tail) - 1.0).abs() < 1e-4, "alpha {alpha}: {}", 2.0 * (body + tail));
    }
}

#[test]
fn lattice_rows_sum_to_one_and_are_symmetric() {
    let law = IncrementLaw::new(LawKind::LazyLattice { p0: 0.3 }, true).unwrap();
    let kernel = LatticeKernel::new(&law, 64).unwrap();
    for k in [1usize, 7, 64, 1000] {
        let d = kernel.power(k);
        let total: f64 = d.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "k {k}: {total}");
        for i in 0..=k as i64 {
            assert!((d.prob(i) - d.prob(-i)).abs() < 1e-15);
        }
    }
}

#[test]
fn llt_discrepancy_decreases() {
    let law = IncrementLaw::new(LawKind::LazyLattice { p0: 0.5 }, true).unwrap();
    let eps = llt_discrepancies(&law, &[4, 64, 1024]).unwrap();
    assert!(eps[0].1 > eps[1].1 && eps[1].1 > eps[2].1, "{eps:?}");
    let surface = llt_surface(&law, 256, &[4, 64, 256], 0.5).unwrap();
    assert!(surface.iter().all(|r| r.sup_gap >= 0.0 && r.scaled <= r.sup_gap));
}

#[test]
fn ou_characteristic_against_direct_quadrature() {
    let ou = DensityModel::OrnsteinUhlenbeck;
    let value = characteristic_analytic_point(0.0, 1.0, &ou, 0.0, 1.0, 0.0).unwrap();
    // int_0^1 (2 pi v_r)^{-1/2} dr with r = u^2 removes the endpoint singularity
    let oracle = simpson(
        |u: f64| {
            if u == 0.0 {
                return 2.0 / (2.0 * PI).sqrt();
            }
            let v = (1.0 - (-2.0 * u * u).exp()) / 2.0;
            2.0 * u / (2.0 * PI * v).sqrt()
        },
        0.0,
        1.0,
        20_000,
    );
    assert!((value - oracle).abs() < 1e-7, "{value} vs {oracle}");
    // sanity: more local time than Brownian motion because of mean reversion
    assert!(value > (2.0 / PI).sqrt());
    let shifted = characteristic_analytic_point(0.0, 1.0, &ou, 0.0, 1.0, 0.7).unwrap();
    let oracle = simpson(
        |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let r = u * u;
            let v = (1.0 - (-2.0 * r).exp()) / 2.0;
            let m = 0.7 * (-r).exp();
            2.0 * u * (-m * m / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
        },
        0.0,
        1.0,
        20_000,
    );
    assert!((shifted - oracle).abs() < 1e-7);
}

#[test]
fn stable_point_characteristic_against_series_free_oracle() {
    // at x = z* the integrand is p_r(0) = r^{-1/alpha} Gamma(1 + 1/alpha) / pi,
    // so int_0^t p_r(0) dr = Gamma(1 + 1/alpha) / pi * t^{1 - 1/alpha} / (1 - 1/alpha)
    for alpha in [1.3, 1.5, 1.8] {
        let model = DensityModel::Stable { alpha };
        let v = characteristic_analytic_point(0.0, 1.0, &model, 0.0, 2.0, 0.0).unwrap();
        let g = statrs::function::gamma::gamma(1.0 + 1.0 / alpha) / PI;
        let oracle = g * 2f64.powf(1.0 - 1.0 / alpha) / (1.0 - 1.0 / alpha);
        assert!((v - oracle).abs() < 1e-7, "alpha {alpha}: {v} vs {oracle}");
    }
}

#[test]
fn circle_characteristic_matches_exponential_integral() {
    let g = DensityModel::Gaussian { dim: 2 };
    let mu = MeasureSpec::unit_circle();
    let v = characteristic_analytic_measure(&mu, &g, 0.0, 1.0, &[0.0, 0.0]).unwrap();
    let oracle = exp_integral_e1(0.5) / (2.0 * PI);
    assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
    assert!((oracle - 0.0891).abs() < 5e-5);
    // off-center point: compare with a brute-force double Simpson rule
    let x = [0.4, 0.2];
    let v = characteristic_analytic_measure(&mu, &g, 0.0, 1.0, &x).unwrap();
    let inner = |r: f64| {
        simpson(
            |th: f64| {
                let (dx, dy) = (th.cos() - x[0], th.sin() - x[1]);
                (-(dx * dx + dy * dy) / (2.0 * r)).exp() / (2.0 * PI * r)
            },
            0.0,
            2.0 * PI,
            400,
        ) / (2.0 * PI)
    };
    let oracle = simpson(|u: f64| if u == 0.0 { 0.0 } else { 2.0 * u * inner(u * u) }, 0.0, 1.0, 4000);
    assert!((v - oracle).abs() < 1e-7, "{v} vs {oracle}");
}

#[test]
fn tables_are_monotone_in_t_and_vanish_on_the_diagonal() {
    let g = DensityModel::Gaussian { dim: 1 };
    let ts = [0.0, 0.1, 0.3, 0.6, 1.0];
    for x in [-1.0, -0.25, 0.0, 0.5, 2.0] {
        let cells: Vec<Cell> = ts.iter().map(|&t| Cell::new(0.0, t, vec![x])).collect();
        let table = CharacteristicTable::build(Provenance::Analytic, None, &cells, |c| {
            Ok((characteristic_analytic_point(0.0, 1.0, &g, c.s, c.t, c.x[0])?, 0.0))
        })
        .unwrap();
        assert_eq!(table.rows[0].value, 0.0);
        for w in table.rows.windows(2) {
            assert!(w[1].value >= w[0].value && w[0].value >= 0.0);
        }
    }
}

#[test]
fn lattice_exact_matches_simulation() {
    let law = IncrementLaw::new(LawKind::LazyLattice { p0: 0.5 }, true).unwrap();
    let process = ProcessSpec::Walk { law, alpha: 2.0 };
    let spec = FunctionalSpec::censored_point(0.0);
    let n = 128;
    let h = 1.0 / (0.5f64.sqrt() * (n as f64).sqrt());
    let xs = [0.0, 3.0 * h];
    let exact = characteristic_lattice_exact(&spec, &process, n, 0.0, 1.0, &xs).unwrap();
    for (x, e) in xs.iter().zip(&exact) {
        let mc = characteristic_mc(&spec, &process, n, &[*x], 0.0, 1.0, 20_000, 40).unwrap();
        assert!((mc.value - e).abs() < 4.0 * mc.se, "x {x}: exact {e}, mc {mc:?}");
    }
    // and it approaches the limit characteristic p_nonzero * sqrt(2/pi) at the rate n^{-1/2}
    let limit = 0.5 * (2.0 / PI).sqrt();
    let gaps: Vec<f64> = [n, 4 * n, 16 * n]
        .iter()
        .map(|&m| limit - characteristic_lattice_exact(&spec, &process, m, 0.0, 1.0, &[0.0]).unwrap()[0])
        .collect();
    for (g, m) in gaps.iter().zip([n, 4 * n, 16 * n]) {
        assert!(*g > 0.0 && *g < 0.5 / (m as f64).sqrt(), "{gaps:?}");
    }
    for w in gaps.windows(2) {
        assert!((w[0] / w[1] - 2.0).abs() < 0.1, "{gaps:?}");
    }
}

#[test]
fn modulus_moment_is_stable_under_refinement() {
    // Common random numbers: every coarse path is the finest Brownian path thinned, so H only
    // grows under refinement. The growth factor per 4x refinement shrinks (about halving its
    // excess over 1) and drops below 10% from n = 4096 on; at n = 1024 it is still about 13%.
    let (delta, c_delta) = (0.4, 6.0);
    let finest = 16384;
    let m = 300;
    let fine: Vec<_> = (0..m)
        .map(|i| gen_bm_exact(&TimeGrid::new(finest, 1.0), 1, &[0.0], &mut RngStream::new(50, i).generator()).unwrap())
        .collect();
    let moments: Vec<f64> = [64, 16, 4, 1]
        .iter()
        .map(|&f| {
            let thinned: Vec<_> = fine.iter().map(|p| p.downsample(f).unwrap()).collect();
            modulus_moment(&thinned, delta, c_delta, 1.0).unwrap().value
        })
        .collect();
    let growth: Vec<f64> = moments.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(growth.iter().all(|&g| g >= 1.0), "{growth:?}");
    assert!(growth.windows(2).all(|w| w[1] < w[0]), "{growth:?}");
    assert!(growth[2] - 1.0 < 0.10, "n=4096 vs 16384: {growth:?}");
    for f in &fine[..20] {
        let c = f.downsample(4).unwrap();
        assert!(holder_modulus(f, delta, 1.0) >= holder_modulus(&c, delta, 1.0));
    }
}

#[test]
fn circle_ball_growth_on_probes() {
    let mu = MeasureSpec::unit_circle();
    let mut probes = Vec::new();
    for i in 0..100 {
        let a = i as f64 * 0.37;
        let d = (i % 7) as f64 * 0.3;
        let r = 0.02 + (i % 10) as f64 * 0.2;
        probes.push((vec![d * a.cos(), d * a.sin()], r));
    }
    let report = ball_growth(&mu, 1.0, 1.0, &probes);
    assert!(!report.violated, "{report:?}");
    // centers on the circle: arc fraction 2 arcsin(R/2)/pi, bounded by R/2 for R <= 2
    for &r in &[0.05, 0.5, 1.0, 2.0] {
        let f = mu.ball_mass(&[1.0, 0.0], r);
        assert!((f - 2.0 * (r / 2.0f64).asin() / PI).abs() < 1e-12);
        assert!(f <= r / 2.0 + 1e-12);
    }
}


