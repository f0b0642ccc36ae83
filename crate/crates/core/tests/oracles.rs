//! Statistical and numerical checks against oracles computed independently
//! of the library code paths they test.

use bvmax::density::{limit_integral, lt_zero, lt_zero_closed_form};
use bvmax::gaussian_bv::{concentration_offband_mass, halfspace_perimeter, tube_perimeter, HalfspaceSpec};
use bvmax::malliavin::{duality_residual, FDConfig};
use bvmax::path::{adjoint_apply, CylindricalFunction};
use bvmax::sampling::{mc_run_vec, normal, sample_bridge, sample_brownian};
use bvmax::{Direction, DirectionKind, SeedSpec, TimeGrid};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

#[test]
fn walk_moments_and_symmetry() {
    let est = mc_run_vec(200_000, 2, SeedSpec::new(101, 0), 3, || (), |rng, _, out| {
        let w: f64 = (0..10).map(|_| normal(rng)).sum();
        out[0] = w;
        out[1] = w * w;
        out[2] = (w <= 0.0) as u8 as f64;
    })
    .unwrap();
    assert!(est[0].within(0.0, 4.0, 0.0), "mean {:?}", est[0]);
    assert!(est[1].within(10.0, 4.0, 0.0), "second moment {:?}", est[1]);
    assert!(est[2].within(0.5, 4.0, 0.0), "P(W_10 <= 0) {:?}", est[2]);
}

#[test]
fn brownian_terminal_variance() {
    let grid = TimeGrid::new(50, 2.0).unwrap();
    let base = SeedSpec::new(102, 0);
    let xs: Vec<f64> = (0..40_000u64).map(|i| sample_brownian(grid, base.with_stream(i)).terminal()).collect();
    let n = xs.len() as f64;
    let var = xs.iter().map(|x| x * x).sum::<f64>() / n;
    // sd of the second-moment estimator is sqrt(2) T / sqrt(n)
    assert!((var - 2.0).abs() < 4.0 * 2.0 * 2f64.sqrt() / n.sqrt(), "variance {var}");
}

#[test]
fn reflection_principle_for_discrete_maximum() {
    // P(max_{t <= 1} W_t > a) = erfc(a / sqrt 2); the grid maximum behaves
    // like a continuous maximum crossing a level shifted by 0.5826 sqrt(dt)
    let n = 500;
    let grid = TimeGrid::new(n, 1.0).unwrap();
    let a = 0.5;
    let shifted = a + 0.5826 * (1.0 / n as f64).sqrt();
    let base = SeedSpec::new(103, 0);
    let samples = 40_000u64;
    let hits = (0..samples)
        .filter(|&i| sample_brownian(grid, base.with_stream(i)).global_max().max_value > a)
        .count() as f64;
    let p = hits / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    let oracle = erfc(shifted / 2f64.sqrt());
    assert!((p - oracle).abs() < 4.0 * se + 0.004, "{p} vs {oracle}");
    assert!((erfc(a / 2f64.sqrt()) - 0.617_075).abs() < 1e-6);
}

#[test]
fn bridge_covariance() {
    let n = 8;
    let base = SeedSpec::new(104, 0);
    let samples = 50_000u64;
    let mut cov = vec![0.0; (n + 1) * (n + 1)];
    for s in 0..samples {
        let b = sample_bridge(n, base.with_stream(s)).unwrap();
        let w = b.partial_sums();
        assert_eq!(w[n], 0.0);
        for i in 0..=n {
            for j in 0..=n {
                cov[i * (n + 1) + j] += w[i] * w[j];
            }
        }
    }
    for i in 1..n {
        for j in i..n {
            let c = cov[i * (n + 1) + j] / samples as f64;
            let exact = i as f64 * (n - j) as f64 / n as f64;
            assert!((c - exact).abs() < 0.05, "cov({i}, {j}) = {c}, expected {exact}");
        }
    }
}

#[test]
fn tube_estimates_cover_exact_perimeter() {
    for (n, offset) in [(1usize, 0.0), (10, 0.0), (3, 1.5)] {
        let spec = HalfspaceSpec::new(vec![1.0; n], offset).unwrap();
        let exact = std_normal().pdf(offset / (n as f64).sqrt());
        assert!((halfspace_perimeter(&spec).value - exact).abs() < 1e-15);
        let tube = tube_perimeter(&spec, 0.02, 400_000, 2, SeedSpec::new(105, n as u64)).unwrap();
        assert!((tube.value - exact).abs() <= tube.error_bound, "n = {n}: {} vs {exact}", tube.value);
    }
}

#[test]
fn offband_fraction_matches_normal_cdf() {
    let (eps, band) = (0.2, 0.1);
    let f = concentration_offband_mass(20, eps, band, 400_000, 2, SeedSpec::new(106, 0)).unwrap();
    let d = std_normal();
    let exact = (d.cdf(eps) - d.cdf(band)) / (d.cdf(eps) - 0.5);
    assert!(f.within(exact, 4.0, 0.0), "{:?} vs {exact}", f);
}

/// Double-exponential quadrature on (0, 1). The integrand receives `x` and
/// `1 - x`, the latter computed without cancellation, so `x^{-1/2}` type
/// endpoint singularities are resolved to full precision.
fn tanh_sinh(f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let mut total = 0.0;
    for k in -256i32..=256 {
        let t = k as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = 1.0 / (1.0 + (-2.0 * u).exp());
        let xc = 1.0 / (1.0 + (2.0 * u).exp());
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() * x * xc * 2.0;
        if x > 0.0 && xc > 0.0 && w > 0.0 {
            total += w * f(x, xc);
        }
    }
    total * h
}

#[test]
fn limit_integral_matches_independent_quadrature() {
    // s = t + (1 - t) u maps the inner range onto (0, 1)
    let inner = |tc: f64| tc * tanh_sinh(|u, uc| 1.0 / (u.sqrt() * uc.sqrt() * tc));
    let oracle = tanh_sinh(|t, tc| inner(tc) / t.sqrt());
    let lib = limit_integral().unwrap();
    assert!((oracle - std::f64::consts::TAU).abs() < 1e-8, "oracle {oracle}");
    assert!((lib.value - oracle).abs() < 1e-8, "{} vs {oracle}", lib.value);
    assert!(lib.error < 1e-6);
}

#[test]
fn delta_density_at_zero_is_constant_in_t() {
    let closed = lt_zero_closed_form(1.5);
    for t in [0.1f64, 0.5, 1.2] {
        // difference of independent half-normals with variances t and T - t
        let (s1, s2) = (t.sqrt(), (1.5 - t).sqrt());
        let oracle = tanh_sinh(|u, uc| {
            let y = u / uc;
            let jac = 1.0 / (uc * uc);
            let p = |y: f64, s: f64| 2.0 * (-(y * y) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            p(y, s1) * p(y, s2) * jac
        });
        assert!((oracle - closed).abs() < 1e-9, "oracle {oracle} vs {closed}");
        assert!((lt_zero(t, 1.5).unwrap() - closed).abs() < 1e-10);
    }
}

#[test]
fn skorokhod_adjoint_has_mean_zero() {
    let grid = TimeGrid::new(100, 1.0).unwrap();
    let h = Direction::from_kind(grid, DirectionKind::Cosine);
    for g in CylindricalFunction::catalog(grid) {
        let base = SeedSpec::new(107, 0);
        let samples = 40_000u64;
        let vals: Vec<f64> = (0..samples)
            .map(|i| adjoint_apply(&g, &h, &sample_brownian(grid, base.with_stream(i))).unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / samples as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "{}: mean {mean}, se {se}", g.id());
    }
}

#[test]
fn max_duality_residual_vanishes() {
    let grid = TimeGrid::new(200, 1.0).unwrap();
    let h = Direction::from_kind(grid, DirectionKind::FirstHalf);
    for id in ["one", "sigmoid"] {
        let g = CylindricalFunction::from_catalog(grid, id).unwrap();
        let d = duality_residual(&g, &h, grid, 100_000, 2, SeedSpec::new(108, 0), &FDConfig::first_order(1.0)).unwrap();
        assert!(d.within(0.0, 4.0, 1e-6), "{id}: {d:?}");
    }
}
