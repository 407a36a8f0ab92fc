use std::f64::consts::PI;

use afmc_core::diagnostics::*;
use afmc_core::processes::{constant_coef, gen_bm_exact, gen_trivial_coupling, CoupledPair, Interpolation, PathGrid, TimeGrid};
use afmc_core::sources::{IncrementLaw, LawKind, RngStream};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal_sample(seed: u64, m: usize, shift: f64) -> SampleSummary {
    let mut rng = RngStream::new(seed, 0).generator();
    SampleSummary::new((0..m).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
}

/// Brute-force one-sample KS: `max_i max(i/m - F(x_i), F(x_i) - (i-1)/m)`.
fn ks_oracle(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..60)
}

proptest! {
    #[test]
    fn ks_is_symmetric_and_rank_based(a in sample_strategy(), b in sample_strategy()) {
        let sa = SampleSummary::new(a.clone()).unwrap();
        let sb = SampleSummary::new(b.clone()).unwrap();
        let ab = ks_two_sample(&sa, &sb).value;
        prop_assert_eq!(ab, ks_two_sample(&sb, &sa).value);
        prop_assert!((0.0..=1.0).contains(&ab));
        // strictly increasing transforms leave the ranks, hence the distance, unchanged
        let f = |x: f64| x * x * x + x;
        let ta = SampleSummary::new(a.iter().map(|&x| f(x)).collect()).unwrap();
        let tb = SampleSummary::new(b.iter().map(|&x| f(x)).collect()).unwrap();
        prop_assert_eq!(ab, ks_two_sample(&ta, &tb).value);
        prop_assert_eq!(ks_two_sample(&sa, &sa).value, 0.0);
    }

    #[test]
    fn ks_one_sample_matches_brute_force(a in sample_strategy()) {
        let cdf = |x: f64| 1.0 / (1.0 + (-x / 10.0).exp());
        let s = SampleSummary::new(a.clone()).unwrap();
        let v = ks_one_sample(&s, &cdf).value;
        prop_assert!((v - ks_oracle(&a, cdf)).abs() < 1e-14);
    }

    #[test]
    fn w1_equal_sizes_is_mean_sorted_gap(a in prop::collection::vec(-5.0f64..5.0, 1..40), shift in -3.0f64..3.0) {
        let b: Vec<f64> = a.iter().rev().map(|x| x * 0.5 + shift).collect();
        let (sa, sb) = (SampleSummary::new(a).unwrap(), SampleSummary::new(b).unwrap());
        let oracle = sa.sorted().iter().zip(sb.sorted()).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.count() as f64;
        prop_assert!((wasserstein1(&sa, &sb).value - oracle).abs() < 1e-12);
    }

    #[test]
    fn second_moment_dominates_squared_mean(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..80)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let l2 = coupled_l2_discrepancy(&a, &b).unwrap();
        prop_assert!(l2.mean + 1e-12 >= l2.mean_diff * l2.mean_diff);
        prop_assert!(l2.median >= 0.0);
    }
}

#[test]
fn w1_triangle_inequality() {
    for i in 0..20 {
        let a = normal_sample(100 + i, 200 + 13 * i as usize, 0.0);
        let b = normal_sample(200 + i, 150, 0.3 * i as f64);
        let c = normal_sample(300 + i, 90 + i as usize, -0.2 * i as f64);
        let (ab, bc, ac) = (wasserstein1(&a, &b).value, wasserstein1(&b, &c).value, wasserstein1(&a, &c).value);
        assert!(ac <= ab + bc + 1e-12, "triple {i}: {ac} > {ab} + {bc}");
    }
}

#[test]
fn w1_of_a_shift_is_the_shift() {
    let a = normal_sample(7, 500, 0.0);
    let b = SampleSummary::new(a.sorted().iter().map(|x| x + 0.25).collect()).unwrap();
    assert!((wasserstein1(&a, &b).value - 0.25).abs() < 1e-12);
}

#[test]
fn levy_reference_has_half_normal_mean() {
    let kind = ReferenceKind::BmPointLevy { t: 1.0, start: 0.0, z_star: 0.0 };
    let sample = reference_local_time_sample(&kind, 40_000, 3).unwrap();
    let target = (2.0 / PI).sqrt();
    assert!((sample.mean() - target).abs() < 3.0 * sample.se(), "{} vs {target}", sample.mean());
}

#[test]
fn levy_reference_scales_like_sqrt_t() {
    let m = 40_000;
    let one = reference_local_time_sample(&ReferenceKind::BmPointLevy { t: 1.0, start: 0.0, z_star: 0.0 }, m, 11).unwrap();
    let four = reference_local_time_sample(&ReferenceKind::BmPointLevy { t: 4.0, start: 0.0, z_star: 0.0 }, m, 12).unwrap();
    let rescaled = SampleSummary::new(four.sorted().iter().map(|x| x / 2.0).collect()).unwrap();
    let ks = ks_two_sample(&one, &rescaled);
    assert!(ks.value < 0.02, "{ks:?}");
}

#[test]
fn levy_reference_off_start_is_unsupported() {
    let kind = ReferenceKind::BmPointLevy { t: 1.0, start: 0.0, z_star: 0.5 };
    assert!(reference_local_time_sample(&kind, 10, 1).is_err());
}

#[test]
fn fine_grid_reference_is_stable_in_eps() {
    // Brownian motion: the band occupation divided by 2 eps estimates the local time at 0
    let reference = |eps: f64| {
        let kind = ReferenceKind::FineGrid {
            a: constant_coef(0.0),
            b: constant_coef(1.0),
            z0: 0.0,
            z_star: 0.0,
            t: 1.0,
            n_fine: 8192,
            eps,
        };
        reference_local_time_sample(&kind, 2000, 5).unwrap()
    };
    let wide = reference(0.08);
    let narrow = reference(0.04);
    let target = (2.0 / PI).sqrt();
    for s in [&wide, &narrow] {
        assert!((s.mean() - target).abs() < 3.0 * s.se() + 0.02, "{} vs {target}", s.mean());
    }
    // common random numbers: the two estimates differ much less than their spread
    assert!((wide.mean() - narrow.mean()).abs() < 0.03);
    assert!(ks_two_sample(&wide, &narrow).value < 0.05);
}

#[test]
fn band_occupation_on_a_line() {
    let n = 10;
    let knots: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let line = PathGrid::from_knots(n, 1.0, 1, knots, Interpolation::BrokenLine).unwrap();
    // X(t) = t spends 0.2 in [0.4, 0.6]
    assert!((band_occupation(&line, 0.5, 0.1, None, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    // the weight is frozen at the left knot of each cell: cells starting at 0.4 and 0.5
    let w = |x: f64| x * x;
    let expected = (0.4f64 * 0.4 + 0.5 * 0.5) * 0.1 / 0.2;
    assert!((band_occupation(&line, 0.5, 0.1, Some(&w), 0.0, 1.0).unwrap() - expected).abs() < 1e-12);
    // restricted window [0, 0.5] sees half of the band
    assert!((band_occupation(&line, 0.5, 0.1, None, 0.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn condition_iii_separates_coupled_from_independent_paths() {
    let n = 1024;
    let law = IncrementLaw::new(LawKind::GaussianIid { dim: 1 }, false).unwrap();
    let coupled: Vec<CoupledPair> = (0..200)
        .map(|i| gen_trivial_coupling(&TimeGrid::new(n, 1.0), &law, 4, &[0.0], &mut RngStream::new(9, i).generator()).unwrap())
        .collect();
    let independent: Vec<CoupledPair> = (0..200)
        .map(|i| {
            let chain = gen_bm_exact(&TimeGrid::new(n, 1.0), 1, &[0.0], &mut RngStream::new(10, i).generator()).unwrap();
            let limit = gen_bm_exact(&TimeGrid::new(4 * n, 1.0), 1, &[0.0], &mut RngStream::new(11, i).generator()).unwrap();
            CoupledPair { chain, limit, block: 1 }
        })
        .collect();
    assert_eq!(coupling_condition_iii(&coupled, 0.01, 1.0, 1).unwrap().p, 0.0);
    let p = coupling_condition_iii(&independent, 0.01, 1.0, 1).unwrap();
    assert!(p.p > 0.99, "{p:?}");
    // an unattainable threshold is never exceeded
    assert_eq!(coupling_condition_iii(&independent, 1e300, 1.0, 1).unwrap().p, 0.0);
    assert!(coupling_condition_iii(&independent, 0.01, 1.0, 0).is_err());
}

#[test]
fn bootstrap_band_brackets_the_mean() {
    let s = normal_sample(21, 400, 1.0).with_bootstrap(0.95, 500, 4).unwrap();
    let band = s.band().unwrap();
    assert!(band.lower < s.mean() && s.mean() < band.upper);
    // the percentile band width is close to the normal-theory width
    let width = band.upper - band.lower;
    assert!((width / (2.0 * 1.96 * s.se()) - 1.0).abs() < 0.2, "{band:?}");
}

#[test]
fn summaries_reject_bad_input() {
    assert!(SampleSummary::new(vec![]).is_err());
    assert!(SampleSummary::new(vec![1.0, f64::NAN]).is_err());
    let (mean, se) = mean_and_se(&[2.5; 10]);
    assert_eq!((mean, se), (2.5, 0.0));
    assert!(coupled_l2_discrepancy(&[1.0], &[1.0, 2.0]).is_err());
}
