//! Bath models: spectral densities, the bath correlation kernel, and the
//! spectral integrals that enter the bound-state condition.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::quad::{self, QuadError, Tolerance};

/// Distance from a band edge inside which weight integrals are treated as divergent,
/// in units of the bath frequency scale.
pub const EDGE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("energy {energy} lies inside the spectral support {support}")]
    InsideSupport { energy: f64, support: String },
    #[error("spectral integral diverges at the band edge (energy {energy})")]
    EdgeDivergence { energy: f64 },
    #[error("discrete bath has no pointwise spectral density")]
    NoDensity,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

type Result<T> = std::result::Result<T, SpectralError>;

/// Ohmic-family density `J(ω) = η ω^s ω_c^{1−s} e^{−ω/ω_c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicFamily {
    eta: f64,
    s: f64,
    omega_c: f64,
}

impl OhmicFamily {
    pub fn new(eta: f64, s: f64, omega_c: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "coupling eta must be >= 0, got {eta}"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "power index s must be > 0, got {s}"
            )));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "cutoff omega_c must be > 0, got {omega_c}"
            )));
        }
        Ok(Self { eta, s, omega_c })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(eta, self.s, self.omega_c)
    }

    /// `J(ω)` for `ω ≥ 0`; callers guarantee the sign.
    fn density(&self, omega: f64) -> f64 {
        if self.eta == 0.0 || omega <= 0.0 {
            return 0.0;
        }
        let x = omega / self.omega_c;
        self.eta * self.omega_c * (self.s * x.ln() - x).exp()
    }

    /// `∫₀^∞ J(ω) dω = η ω_c² Γ(s+1)`.
    pub fn total_weight(&self) -> f64 {
        self.eta * self.omega_c * self.omega_c * quad::gamma(self.s + 1.0)
    }

    fn correlation(&self, x: f64) -> C64 {
        if self.eta == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let prefactor = self.eta * self.omega_c.powf(1.0 - self.s) * quad::gamma(self.s + 1.0);
        prefactor * C64::new(1.0 / self.omega_c, x).powf(-(self.s + 1.0))
    }

    fn self_energy(&self, energy: f64, tol: Tolerance) -> Result<f64> {
        if energy > 0.0 {
            return Err(SpectralError::InsideSupport {
                energy,
                support: "[0, inf)".into(),
            });
        }
        if self.eta == 0.0 {
            return Ok(0.0);
        }
        if energy == 0.0 {
            // ∫ J(ω)/ω dω = η ω_c Γ(s)
            return Ok(self.eta * self.omega_c * quad::gamma(self.s));
        }
        Ok(quad::integrate_semi_infinite(
            |w| self.density(w) / (w - energy),
            0.0,
            self.omega_c,
            tol,
        )?)
    }

    fn weight_integral(&self, energy: f64, tol: Tolerance) -> Result<f64> {
        if energy.abs() < EDGE_GUARD * self.omega_c {
            return Err(SpectralError::EdgeDivergence { energy });
        }
        if energy > 0.0 {
            return Err(SpectralError::InsideSupport {
                energy,
                support: "[0, inf)".into(),
            });
        }
        if self.eta == 0.0 {
            return Ok(0.0);
        }
        Ok(quad::integrate_semi_infinite(
            |w| {
                let d = w - energy;
                self.density(w) / (d * d)
            },
            0.0,
            self.omega_c,
            tol,
        )?)
    }

    /// Cauchy principal value `P∫₀^∞ J(ω)/(ω−ω₀) dω`.
    ///
    /// The pole is removed by subtracting `J(ω₀)` on the symmetric window
    /// `[0, 2ω₀]`, where the subtracted term integrates to zero; the tail
    /// `[2ω₀, ∞)` is regular.
    pub fn principal_value_shift(&self, omega0: f64) -> Result<f64> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "principal value needs omega0 > 0 inside the support, got {omega0}"
            )));
        }
        if self.eta == 0.0 {
            return Ok(0.0);
        }
        let tol = Tolerance::default();
        let j0 = self.density(omega0);
        let subtracted = |w: f64| (self.density(w) - j0) / (w - omega0);
        let window = quad::integrate(subtracted, 0.0, omega0, tol)?
            + quad::integrate(subtracted, omega0, 2.0 * omega0, tol)?;
        let tail = quad::integrate_semi_infinite(
            |w| self.density(w) / (w - omega0),
            2.0 * omega0,
            self.omega_c,
            tol,
        )?;
        Ok(window + tail)
    }

    /// Uniform-grid discretisation `ω_k = kΔω`, `k = 1..=n`, with `g_k = √(J(ω_k)Δω)`.
    pub fn discretize(&self, n_modes: usize, omega_max: f64) -> Result<DiscreteBath> {
        if n_modes < 2 {
            return Err(SpectralError::InvalidParameter(format!(
                "discretisation needs at least 2 modes, got {n_modes}"
            )));
        }
        if !(omega_max > 0.0 && omega_max.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "omega_max must be > 0, got {omega_max}"
            )));
        }
        let step = omega_max / n_modes as f64;
        let mode_freqs: Vec<f64> = (1..=n_modes).map(|k| k as f64 * step).collect();
        let couplings = mode_freqs
            .iter()
            .map(|&w| (self.density(w) * step).sqrt())
            .collect();
        DiscreteBath::new(mode_freqs, couplings)
    }
}

/// Ring of `N` coupled resonators with one of them coupled to the emitter.
/// In momentum space every mode `ε_k = ω_c + 2ξ cos(k x₀)` couples with `g/√N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorArray {
    g: f64,
    xi: f64,
    omega_c: f64,
    n_modes: usize,
}

impl ResonatorArray {
    pub fn new(g: f64, xi: f64, omega_c: f64, n_modes: usize) -> Result<Self> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "coupling g must be >= 0, got {g}"
            )));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "hopping xi must be > 0, got {xi}"
            )));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "resonator frequency must be > 0, got {omega_c}"
            )));
        }
        if n_modes == 0 || n_modes % 2 != 0 {
            return Err(SpectralError::InvalidParameter(format!(
                "array size must be a positive even integer, got {n_modes}"
            )));
        }
        Ok(Self {
            g,
            xi,
            omega_c,
            n_modes,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(g, self.xi, self.omega_c, self.n_modes)
    }

    pub fn band_edges(&self) -> (f64, f64) {
        (self.omega_c - 2.0 * self.xi, self.omega_c + 2.0 * self.xi)
    }

    /// Mode frequencies `ε_m` for `m = −N/2 .. N/2−1`, unsorted, one per mode.
    pub fn dispersion(&self) -> Vec<f64> {
        let n = self.n_modes as i64;
        (-n / 2..n / 2)
            .map(|m| {
                let phase = 2.0 * PI * (m.unsigned_abs() as f64) / n as f64;
                self.omega_c + 2.0 * self.xi * phase.cos()
            })
            .collect()
    }

    /// Exact finite-`N` bath; the `±k` degenerate pairs are merged into one
    /// mode carrying the summed squared coupling.
    pub fn to_discrete(&self) -> DiscreteBath {
        let per_mode = self.g / (self.n_modes as f64).sqrt();
        let freqs = self.dispersion();
        let couplings = vec![per_mode; freqs.len()];
        DiscreteBath::merged(&freqs, &couplings).expect("array dispersion is finite and non-empty")
    }

    /// Continuum-limit density `g²/(π√(4ξ²−(ω−ω_c)²))` inside the band.
    fn density(&self, omega: f64) -> f64 {
        let d = omega - self.omega_c;
        let r2 = 4.0 * self.xi * self.xi - d * d;
        if r2 <= 0.0 {
            0.0
        } else {
            self.g * self.g / (PI * r2.sqrt())
        }
    }

    fn check_outside(&self, energy: f64) -> Result<f64> {
        let (lo, hi) = self.band_edges();
        let guard = EDGE_GUARD * self.omega_c;
        if energy > lo - guard && energy < hi + guard {
            if (energy - lo).abs() < guard || (energy - hi).abs() < guard {
                return Err(SpectralError::EdgeDivergence { energy });
            }
            return Err(SpectralError::InsideSupport {
                energy,
                support: format!("[{lo}, {hi}]"),
            });
        }
        let d = energy - self.omega_c;
        Ok(d * d - 4.0 * self.xi * self.xi)
    }

    fn self_energy(&self, energy: f64) -> Result<f64> {
        let disc = self.check_outside(energy)?;
        // Positive below the band, negative above.
        Ok((self.omega_c - energy).signum() * self.g * self.g / disc.sqrt())
    }

    fn weight_integral(&self, energy: f64) -> Result<f64> {
        let disc = self.check_outside(energy)?;
        Ok(self.g * self.g * (energy - self.omega_c).abs() / (disc * disc.sqrt()))
    }
}

/// Finite set of bath modes with strictly ascending frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    mode_freqs: Vec<f64>,
    couplings: Vec<f64>,
}

impl DiscreteBath {
    pub fn new(mode_freqs: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if mode_freqs.is_empty() {
            return Err(SpectralError::InvalidParameter(
                "discrete bath needs at least one mode".into(),
            ));
        }
        if mode_freqs.len() != couplings.len() {
            return Err(SpectralError::InvalidParameter(format!(
                "{} mode frequencies but {} couplings",
                mode_freqs.len(),
                couplings.len()
            )));
        }
        if let Some(w) = mode_freqs.iter().find(|w| !w.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "non-finite mode frequency {w}"
            )));
        }
        if let Some(g) = couplings.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(SpectralError::InvalidParameter(format!(
                "couplings must be finite and >= 0, got {g}"
            )));
        }
        if let Some(pair) = mode_freqs.windows(2).find(|p| p[1] <= p[0]) {
            return Err(SpectralError::InvalidParameter(format!(
                "mode frequencies must be strictly ascending ({} followed by {}); merge degenerate modes first",
                pair[0], pair[1]
            )));
        }
        Ok(Self {
            mode_freqs,
            couplings,
        })
    }

    /// Sorts arbitrary modes and merges coincident frequencies by adding
    /// their couplings in quadrature.
    pub fn merged(freqs: &[f64], couplings: &[f64]) -> Result<Self> {
        if freqs.len() != couplings.len() {
            return Err(SpectralError::InvalidParameter(format!(
                "{} mode frequencies but {} couplings",
                freqs.len(),
                couplings.len()
            )));
        }
        let mut modes: Vec<(f64, f64)> = freqs
            .iter()
            .copied()
            .zip(couplings.iter().map(|g| g * g))
            .collect();
        modes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out_w: Vec<f64> = Vec::with_capacity(modes.len());
        let mut out_g2: Vec<f64> = Vec::with_capacity(modes.len());
        for (w, g2) in modes {
            match out_w.last() {
                Some(&last) if w == last => *out_g2.last_mut().unwrap() += g2,
                _ => {
                    out_w.push(w);
                    out_g2.push(g2);
                }
            }
        }
        Self::new(out_w, out_g2.into_iter().map(f64::sqrt).collect())
    }

    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mode_freqs.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }

    fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mode_freqs
            .iter()
            .copied()
            .zip(self.couplings.iter().map(|g| g * g))
    }

    fn correlation(&self, x: f64) -> C64 {
        self.modes()
            .map(|(w, g2)| g2 * C64::from_polar(1.0, -w * x))
            .sum()
    }

    fn check_off_mode(&self, energy: f64) -> Result<()> {
        if self.modes().any(|(w, g2)| g2 > 0.0 && w == energy) {
            return Err(SpectralError::InsideSupport {
                energy,
                support: "discrete mode frequencies".into(),
            });
        }
        Ok(())
    }

    fn self_energy(&self, energy: f64) -> Result<f64> {
        self.check_off_mode(energy)?;
        Ok(self
            .modes()
            .filter(|m| m.1 > 0.0)
            .map(|(w, g2)| g2 / (w - energy))
            .sum())
    }

    fn weight_integral(&self, energy: f64) -> Result<f64> {
        self.check_off_mode(energy)?;
        Ok(self
            .modes()
            .filter(|m| m.1 > 0.0)
            .map(|(w, g2)| {
                let d = w - energy;
                g2 / (d * d)
            })
            .sum())
    }
}

/// Any bath the emitter can be coupled to.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Ohmic(OhmicFamily),
    /// Resonator array; spectral integrals use the continuum band form while
    /// the correlation kernel is the exact finite-`N` mode sum.
    Array(ResonatorArray),
    Discrete(DiscreteBath),
}

impl From<OhmicFamily> for Environment {
    fn from(env: OhmicFamily) -> Self {
        Environment::Ohmic(env)
    }
}

impl From<ResonatorArray> for Environment {
    fn from(env: ResonatorArray) -> Self {
        Environment::Array(env)
    }
}

impl From<DiscreteBath> for Environment {
    fn from(env: DiscreteBath) -> Self {
        Environment::Discrete(env)
    }
}

impl Environment {
    /// Natural frequency scale of the model (cutoff or resonator frequency).
    pub fn frequency_scale(&self) -> f64 {
        match self {
            Environment::Ohmic(o) => o.omega_c,
            Environment::Array(a) => a.omega_c,
            Environment::Discrete(d) => d
                .mode_freqs
                .iter()
                .fold(0.0_f64, |m, w| m.max(w.abs()))
                .max(1.0),
        }
    }

    /// Spectral density `J(ω)`; zero outside the support.
    pub fn density_at(&self, omega: f64) -> Result<f64> {
        match self {
            Environment::Ohmic(o) => {
                if omega < 0.0 {
                    Err(SpectralError::InvalidParameter(format!(
                        "Ohmic density needs omega >= 0, got {omega}"
                    )))
                } else {
                    Ok(o.density(omega))
                }
            }
            Environment::Array(a) => Ok(a.density(omega)),
            Environment::Discrete(_) => Err(SpectralError::NoDensity),
        }
    }

    /// Bath correlation `f(x) = ∫ J(ω) e^{−iωx} dω`.
    pub fn correlation(&self, x: f64) -> C64 {
        match self {
            Environment::Ohmic(o) => o.correlation(x),
            Environment::Array(a) => a.to_discrete().correlation(x),
            Environment::Discrete(d) => d.correlation(x),
        }
    }

    /// Tabulates `f(j·dt)` for `j = 0..n`.
    pub fn correlation_table(&self, n: usize, dt: f64) -> Vec<C64> {
        match self {
            Environment::Array(a) => {
                let bath = a.to_discrete();
                (0..n).map(|j| bath.correlation(j as f64 * dt)).collect()
            }
            _ => (0..n).map(|j| self.correlation(j as f64 * dt)).collect(),
        }
    }

    /// `∫ J(ω)/(ω−E) dω` for `E` outside the support.
    pub fn self_energy(&self, energy: f64) -> Result<f64> {
        self.self_energy_with(energy, Tolerance::default())
    }

    pub fn self_energy_with(&self, energy: f64, tol: Tolerance) -> Result<f64> {
        match self {
            Environment::Ohmic(o) => o.self_energy(energy, tol),
            Environment::Array(a) => a.self_energy(energy),
            Environment::Discrete(d) => d.self_energy(energy),
        }
    }

    /// `∫ J(ω)/(E−ω)² dω` for `E` outside the support.
    pub fn weight_integral(&self, energy: f64) -> Result<f64> {
        match self {
            Environment::Ohmic(o) => o.weight_integral(energy, Tolerance::default()),
            Environment::Array(a) => a.weight_integral(energy),
            Environment::Discrete(d) => d.weight_integral(energy),
        }
    }

    /// Exact discrete representation when one exists without approximation.
    pub fn as_discrete(&self) -> Option<DiscreteBath> {
        match self {
            Environment::Ohmic(_) => None,
            Environment::Array(a) => Some(a.to_discrete()),
            Environment::Discrete(d) => Some(d.clone()),
        }
    }
}
