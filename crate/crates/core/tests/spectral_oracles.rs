mod common;

use common::{half_line, ohmic_density, simpson};
use qslb::spectral::{DiscreteBath, Environment, OhmicFamily, ResonatorArray, SpectralError};
use qslb::C64;

fn ohmic(eta: f64, s: f64) -> Environment {
    OhmicFamily::new(eta, s, 1.0).unwrap().into()
}

#[test]
fn density_matches_closed_form_at_grid_points() {
    let env = ohmic(0.1, 1.0);
    for &w in &[0.25f64, 1.0, 3.5] {
        let expect = 0.1 * w * (-w).exp();
        assert!((env.density_at(w).unwrap() - expect).abs() < 1e-15);
    }
    assert!((env.density_at(1.0).unwrap() - 0.036_787_944).abs() < 1e-9);
    assert!(matches!(
        env.density_at(-0.1),
        Err(SpectralError::InvalidParameter(_))
    ));
}

#[test]
fn band_density_integrates_to_mode_counts() {
    // ∫_a^b g²/(π√(4ξ²−d²)) dd = (g²/π)[asin(d/2ξ)]_a^b against (g²/N)·#modes in [a, b].
    let (g, xi, n) = (0.1, 0.05, 100_000);
    let arr = ResonatorArray::new(g, xi, 1.0, n).unwrap();
    let eps = arr.dispersion();
    for &(a, b) in &[(0.92, 0.97), (0.99, 1.06), (1.05, 1.099)] {
        let count = eps.iter().filter(|&&e| e >= a && e <= b).count() as f64;
        let discrete = g * g * count / n as f64;
        let asin = |w: f64| ((w - 1.0) / (2.0 * xi)).asin();
        let continuum = g * g / std::f64::consts::PI * (asin(b) - asin(a));
        assert!(
            (discrete - continuum).abs() < 1e-3 * g * g,
            "[{a}, {b}]: {discrete} vs {continuum}"
        );
    }
    let env: Environment = arr.into();
    assert_eq!(env.density_at(1.2).unwrap(), 0.0);
}

#[test]
fn correlation_at_origin_is_total_weight() {
    for &s in &[0.5, 1.0, 2.0, 3.0] {
        let env = ohmic(0.1, s);
        let oracle = half_line(|w| ohmic_density(0.1, s, w), 8.0, 400_000);
        let f0 = env.correlation(0.0);
        assert!(
            (f0.re - oracle).abs() < 1e-6 * oracle,
            "s={s}: {} vs {oracle}",
            f0.re
        );
        assert!(f0.im.abs() < 1e-15);
    }
    assert!((ohmic(0.1, 1.0).correlation(0.0).re - 0.1).abs() < 1e-14);
}

#[test]
fn correlation_matches_fourier_integral() {
    let env = ohmic(0.15, 1.0);
    for &x in &[0.5, 2.0, 7.0] {
        let re = half_line(
            |w| ohmic_density(0.15, 1.0, w) * (w * x).cos(),
            8.0,
            400_000,
        );
        let im = -half_line(
            |w| ohmic_density(0.15, 1.0, w) * (w * x).sin(),
            8.0,
            400_000,
        );
        let f = env.correlation(x);
        assert!(
            (f - C64::new(re, im)).norm() < 1e-9,
            "x={x}: {f} vs {re} {im}"
        );
    }
}

#[test]
fn trivial_correlations() {
    let single: Environment = DiscreteBath::new(vec![1.0], vec![0.1]).unwrap().into();
    for &x in &[0.0, 0.3, 17.0] {
        let expect = C64::new(0.0, -x).exp() * 0.01;
        assert!((single.correlation(x) - expect).norm() < 1e-16);
    }
    let free = ohmic(0.0, 1.7);
    for &x in &[0.0, 1.0, 10.0] {
        assert_eq!(free.correlation(x), C64::new(0.0, 0.0));
    }
}

#[test]
fn self_energy_examples() {
    assert!((ohmic(0.1, 1.0).self_energy(0.0).unwrap() - 0.1).abs() < 1e-12);
    let oracle = half_line(|w| 0.1 * w * (-w).exp() / (w + 0.3), 8.0, 400_000);
    assert!((ohmic(0.1, 1.0).self_energy(-0.3).unwrap() - oracle).abs() < 1e-9);
    assert_eq!(ohmic(0.0, 1.0).self_energy(-0.5).unwrap(), 0.0);

    let band: Environment = ResonatorArray::new(0.1, 0.05, 1.0, 800).unwrap().into();
    let closed = 0.01 / (0.04f64 - 0.01).sqrt();
    assert!((band.self_energy(0.8).unwrap() - closed).abs() < 1e-14);
    assert!((closed - 0.057_735).abs() < 1e-6);
    // finite sum over a large ring
    let big = ResonatorArray::new(0.1, 0.05, 1.0, 100_000).unwrap();
    let sum: f64 = big
        .dispersion()
        .iter()
        .map(|e| 0.01 / (e - 0.8))
        .sum::<f64>()
        / 1e5;
    assert!((sum - closed).abs() < 1e-8, "{sum}");
    // above the band the integral is negative
    assert!(band.self_energy(1.2).unwrap() < 0.0);
    assert!(matches!(
        band.self_energy(1.0),
        Err(SpectralError::InsideSupport { .. })
    ));
    assert!(matches!(
        band.weight_integral(1.1 + 1e-12),
        Err(SpectralError::EdgeDivergence { .. })
    ));
    assert!(ohmic(0.1, 1.0).self_energy(0.05).is_err());
}

#[test]
fn self_energy_increases_below_support() {
    for env in [ohmic(0.2, 0.5), ohmic(0.2, 1.0), ohmic(0.2, 2.5)] {
        let values: Vec<f64> = (0..40)
            .map(|i| env.self_energy(-3.0 + 0.07 * i as f64).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }
    let band: Environment = ResonatorArray::new(0.1, 0.05, 1.0, 800).unwrap().into();
    let values: Vec<f64> = (0..40)
        .map(|i| band.self_energy(0.5 + 0.01 * i as f64).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn weight_integral_examples() {
    let env = ohmic(0.1, 1.0);
    let oracle = half_line(
        |w| 0.1 * w * (-w).exp() / ((w + 1.0) * (w + 1.0)),
        8.0,
        400_000,
    );
    let value = env.weight_integral(-1.0).unwrap();
    assert!(
        (value - oracle).abs() < 1e-10 * oracle.max(1.0),
        "{value} vs {oracle}"
    );
    let h = 1e-3;
    let d = (env.self_energy(-1.0 + h).unwrap() - env.self_energy(-1.0 - h).unwrap()) / (2.0 * h);
    assert!((value - d).abs() < 1e-4 * value);
    assert_eq!(ohmic(0.0, 1.0).weight_integral(-1.0).unwrap(), 0.0);
    let single: Environment = DiscreteBath::new(vec![1.0], vec![0.1]).unwrap().into();
    assert!((single.weight_integral(0.8).unwrap() - 0.25).abs() < 1e-14);
}

/// Exclusion-window principal value: `∫` over `|ω−ω₀| > ε` with the log
/// substitution `ω = ω₀ ± e^v`, Richardson-extrapolated in ε (the error is odd in ε).
fn excluded_window_pv(eta: f64, s: f64, omega0: f64, eps: f64) -> f64 {
    let j = |w: f64| ohmic_density(eta, s, w);
    // near the pole in log form; near ω = 0 with ω = v² so ω^s stays smooth
    let left = simpson(
        |v| -j(omega0 - v.exp()),
        eps.ln(),
        (0.5 * omega0).ln(),
        200_000,
    ) + simpson(
        |v| 2.0 * v * j(v * v) / (v * v - omega0),
        0.0,
        (0.5 * omega0).sqrt(),
        200_000,
    );
    let right = simpson(|v| j(omega0 + v.exp()), eps.ln(), 4.0, 200_000);
    left + right
}

#[test]
fn principal_value_matches_extrapolated_exclusion() {
    for &(eta, s, omega0) in &[(0.1, 1.0, 0.1), (0.2, 2.0, 0.3), (0.05, 0.5, 1.2)] {
        let o = OhmicFamily::new(eta, s, 1.0).unwrap();
        let [a, b, c] = [1e-2, 1e-3, 1e-4].map(|e| excluded_window_pv(eta, s, omega0, e));
        let r1 = (10.0 * b - a) / 9.0;
        let r2 = (10.0 * c - b) / 9.0;
        let pv = o.principal_value_shift(omega0).unwrap();
        assert!((r1 - r2).abs() < 1e-8, "oracle not converged: {r1} {r2}");
        assert!(
            (pv - r2).abs() < 1e-9,
            "eta={eta} s={s} w0={omega0}: {pv} vs {r2}"
        );
    }
    assert_eq!(
        OhmicFamily::new(0.0, 1.0, 1.0)
            .unwrap()
            .principal_value_shift(0.1)
            .unwrap(),
        0.0
    );
    assert!(OhmicFamily::new(0.1, 1.0, 1.0)
        .unwrap()
        .principal_value_shift(0.0)
        .is_err());
}

#[test]
fn discretization_preserves_weight_and_correlation() {
    let o = OhmicFamily::new(0.1, 1.0, 1.0).unwrap();
    let bath = o.discretize(4000, 20.0).unwrap();
    assert!(bath.mode_freqs().windows(2).all(|w| w[1] > w[0]));
    assert!((bath.total_weight() - 0.1).abs() < 1e-3);
    let disc: Environment = bath.into();
    let cont: Environment = o.into();
    let worst = (0..=5000)
        .map(|i| {
            let x = 0.01 * i as f64;
            (disc.correlation(x) - cont.correlation(x)).norm()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");

    let zero = OhmicFamily::new(0.0, 1.0, 1.0)
        .unwrap()
        .discretize(100, 20.0)
        .unwrap();
    assert!(zero.couplings().iter().all(|&g| g == 0.0));
    assert!(o.discretize(1, 20.0).is_err());
}

#[test]
fn array_converts_losslessly() {
    let arr = ResonatorArray::new(0.1, 0.05, 1.0, 800).unwrap();
    let (lo, hi) = arr.band_edges();
    assert!(arr
        .dispersion()
        .iter()
        .all(|&e| e >= lo - 1e-15 && e <= hi + 1e-15));
    let bath = arr.to_discrete();
    // ±k pairs merge; the two band-edge modes stay single
    assert_eq!(bath.len(), 401);
    assert!((bath.total_weight() - 0.01).abs() < 1e-15);
    let env: Environment = arr.into();
    for &x in &[0.0, 3.0, 40.0] {
        let direct: C64 = arr
            .dispersion()
            .iter()
            .map(|e| C64::new(0.0, -e * x).exp() * 0.01 / 800.0)
            .sum();
        assert!((env.correlation(x) - direct).norm() < 1e-14);
    }
    assert!(ResonatorArray::new(0.1, 0.05, 1.0, 801).is_err());
}
