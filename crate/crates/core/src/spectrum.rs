//! Single-excitation spectrum of emitter + bath: isolated (bound) eigenvalues
//! outside the bath continuum and exact diagonalisation of discrete baths.

use rayon::prelude::*;
use thiserror::Error;

use crate::quad::{self, Tolerance};
use crate::spectral::{DiscreteBath, Environment, SpectralError};

/// Bound states whose overlap with `|+, vac⟩` is below this are not counted.
/// Chosen so the array (ξ = 0.05, ω₀ = 1.08) gains its upper bound state near
/// g ≈ 0.014 and its lower one near g ≈ 0.075.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 0.045;
/// An exterior eigenvalue is isolated when its gap to the band exceeds this
/// many local level spacings.
pub const ISOLATION_SPACINGS: f64 = 5.0;
/// Number of band levels averaged for the local level spacing.
const SPACING_WINDOW: usize = 5;

const ROOT_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("root finder did not converge in [{lo}, {hi}] (F = {f_lo}, {f_hi})")]
    NoConvergence {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("duplicate mode frequency {0}; merge degenerate modes before diagonalising")]
    Degenerate(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

type Result<T> = std::result::Result<T, SpectrumError>;

/// Isolated eigenvalue of the single-excitation sector and its overlap
/// probability `d₀²` with the excited emitter and empty bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    pub weight: f64,
}

/// `η_c = ω₀ / (ω_c Γ(s))`: coupling above which an Ohmic-family bath binds the emitter.
pub fn critical_coupling(s: f64, omega0: f64, omega_c: f64) -> Result<f64> {
    if !(s > 0.0 && omega0 > 0.0 && omega_c > 0.0) {
        return Err(SpectrumError::InvalidParameter(format!(
            "critical coupling needs s, omega0, omega_c > 0 (got {s}, {omega0}, {omega_c})"
        )));
    }
    Ok(omega0 / (omega_c * quad::gamma(s)))
}

/// `d₀² = [1 + ∫ J(ω)/(E−ω)² dω]⁻¹`; zero on a band edge where the integral diverges.
pub fn bound_state_weight(env: &Environment, energy: f64) -> Result<f64> {
    match env.weight_integral(energy) {
        Ok(w) => Ok(1.0 / (1.0 + w)),
        Err(SpectralError::EdgeDivergence { .. }) => Ok(0.0),
        Err(e) => Err(e.into()),
    }
}

/// Options for [`find_bound_states_with`].
#[derive(Debug, Clone, Copy)]
pub struct BoundStateSearch {
    pub weight_threshold: f64,
}

impl Default for BoundStateSearch {
    fn default() -> Self {
        Self {
            weight_threshold: DEFAULT_WEIGHT_THRESHOLD,
        }
    }
}

pub fn find_bound_states(env: &Environment, omega0: f64) -> Result<Vec<BoundState>> {
    find_bound_states_with(env, omega0, BoundStateSearch::default())
}

/// Roots of `y(E) = ω₀ − ∫ J(ω)/(ω−E) dω = E` outside the bath support,
/// ascending in energy.
pub fn find_bound_states_with(
    env: &Environment,
    omega0: f64,
    opts: BoundStateSearch,
) -> Result<Vec<BoundState>> {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(SpectrumError::InvalidParameter(format!(
            "omega0 must be > 0, got {omega0}"
        )));
    }
    match env {
        Environment::Ohmic(ohmic) => {
            let tol = Tolerance {
                abs: 1e-14,
                rel: 1e-13,
                max_intervals: 8000,
            };
            let scale = ohmic.omega_c();
            let secular =
                |e: f64| -> Result<f64> { Ok(omega0 - env.self_energy_with(e, tol)? - e) };
            // F decreases monotonically on E ≤ 0 and F(−∞) = +∞; a root exists iff F(0) < 0.
            let at_edge = secular(0.0)?;
            if at_edge >= 0.0 {
                return Ok(Vec::new());
            }
            let mut lo = -(omega0 + env.self_energy_with(-10.0 * scale, tol)? + 10.0 * scale);
            let mut f_lo = secular(lo)?;
            while f_lo <= 0.0 {
                lo *= 2.0;
                f_lo = secular(lo)?;
                if !lo.is_finite() {
                    return Err(SpectrumError::NoConvergence {
                        lo,
                        hi: 0.0,
                        f_lo,
                        f_hi: at_edge,
                    });
                }
            }
            let energy = bisect(secular, lo, 0.0, f_lo, at_edge, ROOT_TOL * scale)?;
            let weight = bound_state_weight(env, energy)?;
            Ok(vec![BoundState { energy, weight }])
        }
        Environment::Array(array) => {
            let (band_lo, band_hi) = array.band_edges();
            let secular = |e: f64| -> Result<f64> { Ok(omega0 - env.self_energy(e)? - e) };
            let reach = 2.0 * (omega0 - array.omega_c()).abs()
                + 4.0 * array.xi()
                + array.g()
                + array.omega_c();
            let guard = 2.0 * crate::spectral::EDGE_GUARD * array.omega_c();
            let mut found = Vec::new();
            // Below the band F runs from +∞ (E → −∞) to −∞ (lower edge); above it
            // from +∞ (upper edge) to −∞.
            let intervals = [
                (band_lo - reach, band_lo - guard),
                (band_hi + guard, band_hi + reach),
            ];
            for (lo, hi) in intervals {
                if array.g() == 0.0 {
                    break;
                }
                let (f_lo, f_hi) = (secular(lo)?, secular(hi)?);
                if f_lo.signum() == f_hi.signum() {
                    continue;
                }
                let energy = bisect(secular, lo, hi, f_lo, f_hi, ROOT_TOL * array.omega_c())?;
                let weight = bound_state_weight(env, energy)?;
                if weight > opts.weight_threshold {
                    found.push(BoundState { energy, weight });
                }
            }
            Ok(found)
        }
        Environment::Discrete(bath) => {
            let eig = arrowhead_eigensystem(bath, omega0)?;
            Ok(eig
                .isolated(opts.weight_threshold)
                .into_iter()
                .map(|i| BoundState {
                    energy: eig.energies[i],
                    weight: eig.system_weights[i],
                })
                .collect())
        }
    }
}

fn bisect<F>(f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, f_hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if f_lo.signum() == f_hi.signum() {
        return Err(SpectrumError::NoConvergence { lo, hi, f_lo, f_hi });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(SpectrumError::NoConvergence { lo, hi, f_lo, f_hi })
}

/// Eigenvalues and emitter weights `|⟨φ_α|+, vac⟩|²` of the single-excitation sector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    pub system_weights: Vec<f64>,
    /// Marks eigenpairs of modes that do not couple to the emitter.
    pub dark: Vec<bool>,
    /// Ascending frequencies of the coupled modes.
    pub coupled_freqs: Vec<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.system_weights.iter().sum()
    }

    fn bright(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.dark[i]).collect()
    }

    /// Checks that exactly one bright eigenvalue sits strictly between each
    /// pair of consecutive coupled mode frequencies, one below and one above.
    pub fn interlaces(&self) -> bool {
        let bright: Vec<f64> = self
            .bright()
            .into_iter()
            .map(|i| self.energies[i])
            .collect();
        let w = &self.coupled_freqs;
        if bright.len() != w.len() + 1 {
            return false;
        }
        if w.is_empty() {
            return true;
        }
        if bright[0] >= w[0] || bright[w.len()] <= w[w.len() - 1] {
            return false;
        }
        (1..w.len()).all(|k| bright[k] > w[k - 1] && bright[k] < w[k])
    }

    /// Indices of the exterior eigenvalues that are separated from the band
    /// by more than [`ISOLATION_SPACINGS`] local level spacings and carry
    /// weight above `weight_threshold`.
    pub fn isolated(&self, weight_threshold: f64) -> Vec<usize> {
        let bright = self.bright();
        let m = bright.len();
        if m < 2 {
            return Vec::new();
        }
        let e = |k: usize| self.energies[bright[k]];
        let mut out = Vec::new();
        let band_levels = m - 1;
        let window = SPACING_WINDOW.min(band_levels.saturating_sub(1));
        let passes = |gap: f64, spacing: Option<f64>| match spacing {
            Some(sp) => gap > ISOLATION_SPACINGS * sp,
            None => true,
        };
        // bottom
        let gap = e(1) - e(0);
        let spacing = (window > 0).then(|| (e(1 + window) - e(1)) / window as f64);
        if self.system_weights[bright[0]] > weight_threshold && passes(gap, spacing) {
            out.push(bright[0]);
        }
        // top
        let gap = e(m - 1) - e(m - 2);
        let spacing = (window > 0).then(|| (e(m - 2) - e(m - 2 - window)) / window as f64);
        if self.system_weights[bright[m - 1]] > weight_threshold && passes(gap, spacing) {
            out.push(bright[m - 1]);
        }
        out
    }
}

/// Exact diagonalisation of the arrowhead single-excitation Hamiltonian
/// with diagonal `(ω₀, ω₁, …, ω_N)` and border couplings `g_k`.
pub fn arrowhead_eigensystem(bath: &DiscreteBath, omega0: f64) -> Result<EigenSystem> {
    arrowhead_from_modes(bath.mode_freqs(), bath.couplings(), omega0)
}

/// As [`arrowhead_eigensystem`] for raw mode lists, which may be empty.
/// Modes with zero coupling are returned as dark eigenpairs of weight zero.
pub fn arrowhead_from_modes(freqs: &[f64], couplings: &[f64], omega0: f64) -> Result<EigenSystem> {
    if freqs.len() != couplings.len() {
        return Err(SpectrumError::InvalidParameter(
            "mode and coupling lists differ in length".into(),
        ));
    }
    if !omega0.is_finite() {
        return Err(SpectrumError::InvalidParameter(format!(
            "omega0 must be finite, got {omega0}"
        )));
    }
    let mut order: Vec<usize> = (0..freqs.len()).collect();
    order.sort_by(|&a, &b| freqs[a].total_cmp(&freqs[b]));
    let mut w = Vec::new();
    let mut g2 = Vec::new();
    let mut dark_freqs = Vec::new();
    for &i in &order {
        if couplings[i] > 0.0 {
            if w.last() == Some(&freqs[i]) {
                return Err(SpectrumError::Degenerate(freqs[i]));
            }
            w.push(freqs[i]);
            g2.push(couplings[i] * couplings[i]);
        } else {
            dark_freqs.push(freqs[i]);
        }
    }
    let secular = Secular {
        omega0,
        w: &w,
        g2: &g2,
    };

    let roots: Vec<Root> = if w.is_empty() {
        vec![Root {
            origin: omega0,
            offset: 0.0,
            origin_index: None,
        }]
    } else {
        let n = w.len();
        let spread: f64 = g2.iter().map(|x| x.sqrt()).sum::<f64>()
            + (omega0 - w[0]).abs().max((omega0 - w[n - 1]).abs());
        let pad = spread + 1.0;
        (0..=n)
            .into_par_iter()
            .map(|k| secular.root_in_interval(k, pad))
            .collect::<Result<Vec<_>>>()?
    };

    let mut pairs: Vec<(f64, f64, bool)> = roots
        .iter()
        .map(|r| (r.origin + r.offset, secular.weight(r), false))
        .chain(dark_freqs.iter().map(|&f| (f, 0.0, true)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    Ok(EigenSystem {
        energies: pairs.iter().map(|p| p.0).collect(),
        system_weights: pairs.iter().map(|p| p.1).collect(),
        dark: pairs.iter().map(|p| p.2).collect(),
        coupled_freqs: w,
    })
}

/// As [`arrowhead_from_modes`] for modes that may repeat a frequency. Each
/// group of `m` coincident modes couples to the emitter through one
/// combination with `g² = Σ g_k²`; the other `m − 1` combinations are dark
/// eigenstates at that frequency.
pub fn arrowhead_with_degeneracies(
    freqs: &[f64],
    couplings: &[f64],
    omega0: f64,
) -> Result<EigenSystem> {
    if freqs.len() != couplings.len() {
        return Err(SpectrumError::InvalidParameter(
            "mode and coupling lists differ in length".into(),
        ));
    }
    let mut modes: Vec<(f64, f64)> = freqs
        .iter()
        .copied()
        .zip(couplings.iter().map(|g| g * g))
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w: Vec<f64> = Vec::with_capacity(modes.len());
    let mut g2: Vec<f64> = Vec::with_capacity(modes.len());
    let mut dark = Vec::new();
    for (f, c) in modes {
        if w.last() == Some(&f) {
            *g2.last_mut().expect("non-empty") += c;
            dark.push(f);
        } else {
            w.push(f);
            g2.push(c);
        }
    }
    let n_dark = dark.len();
    w.extend(dark);
    g2.extend(std::iter::repeat(0.0).take(n_dark));
    let g: Vec<f64> = g2.into_iter().map(f64::sqrt).collect();
    arrowhead_from_modes(&w, &g, omega0)
}

/// Eigenvalue stored as an offset from a reference pole so that the
/// differences `E − ω_k` keep full relative accuracy near that pole.
struct Root {
    origin: f64,
    offset: f64,
    origin_index: Option<usize>,
}

struct Secular<'a> {
    omega0: f64,
    w: &'a [f64],
    g2: &'a [f64],
}

impl Secular<'_> {
    fn gap(&self, origin: f64, origin_index: Option<usize>, offset: f64, k: usize) -> f64 {
        match origin_index {
            Some(j) if j == k => offset,
            _ => (origin - self.w[k]) + offset,
        }
    }

    /// `S(E) = E − ω₀ − Σ g_k²/(E − ω_k)` and `dS/dE`.
    fn eval(&self, origin: f64, origin_index: Option<usize>, offset: f64) -> (f64, f64) {
        let mut value = (origin - self.omega0) + offset;
        let mut slope = 1.0;
        for k in 0..self.w.len() {
            let d = self.gap(origin, origin_index, offset, k);
            let t = self.g2[k] / d;
            value -= t;
            slope += t / d;
        }
        (value, slope)
    }

    fn weight(&self, r: &Root) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.w.len() {
            let d = self.gap(r.origin, r.origin_index, r.offset, k);
            sum += self.g2[k] / (d * d);
        }
        1.0 / (1.0 + sum)
    }

    /// Root in interval `k`: `(−∞, ω_0)` for `k = 0`, `(ω_{k−1}, ω_k)` inside,
    /// `(ω_{n−1}, ∞)` for `k = n`. `S` increases from −∞ to +∞ across each.
    fn root_in_interval(&self, k: usize, pad: f64) -> Result<Root> {
        let n = self.w.len();
        let (origin_index, lo, hi) = if k == 0 {
            (0, -pad, 0.0)
        } else if k == n {
            (n - 1, 0.0, pad)
        } else {
            let width = self.w[k] - self.w[k - 1];
            let (mid_value, _) = self.eval(self.w[k - 1], Some(k - 1), 0.5 * width);
            if mid_value > 0.0 {
                (k - 1, 0.0, 0.5 * width)
            } else {
                (k, -0.5 * width, 0.0)
            }
        };
        let origin = self.w[origin_index];
        let offset = self.solve_interval(k, origin, Some(origin_index), lo, hi)?;
        Ok(Root {
            origin,
            offset,
            origin_index: Some(origin_index),
        })
    }

    /// Secular function split at interval `k`: poles `j < k` lie to the left
    /// of the root and `j ≥ k` to the right. Returns the left and right sums
    /// `Σ g_j²/(ω_j − E)` with their E-derivatives.
    fn eval_split(&self, k: usize, origin: f64, idx: Option<usize>, offset: f64) -> [f64; 4] {
        let (mut left, mut d_left, mut right, mut d_right) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..self.w.len() {
            let d = -self.gap(origin, idx, offset, j);
            let t = self.g2[j] / d;
            if j < k {
                left += t;
                d_left += t / d;
            } else {
                right += t;
                d_right += t / d;
            }
        }
        [left, d_left, right, d_right]
    }

    /// Root of `S` in interval `k`, as an offset from `origin` within `[lo, hi]`.
    ///
    /// Each step replaces the left and right pole sums by single poles at the
    /// neighbouring frequencies with matching value and slope (the unit slope
    /// of the linear term is lumped into one of them) and solves that model
    /// exactly; steps leaving the bracket fall back to bisection.
    fn solve_interval(
        &self,
        k: usize,
        origin: f64,
        idx: Option<usize>,
        mut lo: f64,
        mut hi: f64,
    ) -> Result<f64> {
        let n = self.w.len();
        let mut x = 0.5 * (lo + hi);
        for _ in 0..MAX_BISECTIONS {
            let [left, d_left, right, d_right] = self.eval_split(k, origin, idx, x);
            let value = (origin - self.omega0) + x + left + right;
            if value == 0.0 {
                return Ok(x);
            }
            if value < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            // distances from the current point to the bracketing poles
            let to_left = (k > 0).then(|| -self.gap(origin, idx, x, k - 1));
            let to_right = (k < n).then(|| -self.gap(origin, idx, x, k));
            let step = match (to_left, to_right) {
                (Some(dl), Some(dr)) => {
                    let p = d_left * dl * dl;
                    let q = (d_right + 1.0) * dr * dr;
                    let c = value - p / dl - q / dr;
                    // c τ² − [c(dl+dr) + p + q] τ + value·dl·dr = 0
                    let a1 = -(c * (dl + dr) + p + q);
                    let a0 = value * dl * dr;
                    quadratic_root_between(c, a1, a0, dl, dr)
                }
                (None, Some(dr)) => {
                    let q = (d_right + 1.0) * dr * dr;
                    let c = value - q / dr;
                    (c != 0.0).then(|| dr + q / c)
                }
                (Some(dl), None) => {
                    let p = (d_left + 1.0) * dl * dl;
                    let c = value - p / dl;
                    (c != 0.0).then(|| dl + p / c)
                }
                (None, None) => Some(-value),
            };
            let next = match step.map(|t| x + t) {
                Some(y) if y > lo && y < hi => y,
                _ => 0.5 * (lo + hi),
            };
            let scale = next.abs().max(f64::MIN_POSITIVE);
            if (next - x).abs() <= 4.0 * f64::EPSILON * scale
                || hi - lo <= 4.0 * f64::EPSILON * scale
            {
                return Ok(next);
            }
            x = next;
        }
        let (f_lo, _) = self.eval(origin, idx, lo);
        let (f_hi, _) = self.eval(origin, idx, hi);
        Err(SpectrumError::NoConvergence {
            lo: origin + lo,
            hi: origin + hi,
            f_lo,
            f_hi,
        })
    }
}

/// Root of `a2 τ² + a1 τ + a0` strictly between `dl < 0 < dr`, if any.
fn quadratic_root_between(a2: f64, a1: f64, a0: f64, dl: f64, dr: f64) -> Option<f64> {
    let inside = |t: f64| t.is_finite() && t > dl && t < dr;
    if a2 == 0.0 {
        return (a1 != 0.0).then(|| -a0 / a1).filter(|&t| inside(t));
    }
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
    [q / a2, if q != 0.0 { a0 / q } else { f64::NAN }]
        .into_iter()
        .find(|&t| inside(t))
}
