//! Independent numerical oracles for the integration tests. Nothing here
//! calls into the library's own quadrature.
#![allow(dead_code)]

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// `∫₀^∞ f(ω) dω` for integrands decaying like `e^{−ω}`, via `ω = v²` on
/// `v ∈ [0, vmax]` which smooths `ω^s` endpoint behaviour.
pub fn half_line(f: impl Fn(f64) -> f64, vmax: f64, n: usize) -> f64 {
    simpson(|v| 2.0 * v * f(v * v), 0.0, vmax, n)
}

pub fn ohmic_density(eta: f64, s: f64, omega: f64) -> f64 {
    eta * omega.powf(s) * (-omega).exp()
}
