//! Emitter amplitude `c(t)` for an initially excited emitter in an empty bath,
//! from the memory-kernel equation `ċ + iω₀c + ∫₀ᵗ f(t−t′)c(t′)dt′ = 0` or from
//! the eigen-expansion of a discrete bath, plus the master-equation rates
//! `Γ(t) + iΩ(t) = −2ċ/c`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::spectral::{Environment, OhmicFamily, SpectralError};
use crate::spectrum::EigenSystem;

/// Below this `|c|` the rates `Γ`, `Ω` are flagged invalid.
pub const RATE_FLOOR: f64 = 1e-6;
/// Largest tolerated `|c|` before a solve is declared unstable.
pub const INSTABILITY_LIMIT: f64 = 1.0 + 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("bath correlation is not finite at t = {t}")]
    NonFiniteKernel { t: f64 },
    #[error("|c| = {magnitude} exceeds 1 at t = {t}; reduce the time step")]
    Unstable { t: f64, magnitude: f64 },
    #[error("eigen-system weights sum to {0}, expected 1")]
    Incomplete(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

type Result<T> = std::result::Result<T, DynamicsError>;

/// Uniform grid `t_i = i·dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Grid on `[0, τ]`; `τ/dt` must be an integer of at least 2.
    pub fn new(tau: f64, dt: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite() && dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidGrid(format!(
                "tau and dt must be positive (tau = {tau}, dt = {dt})"
            )));
        }
        let ratio = tau / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 2.0 {
            return Err(DynamicsError::InvalidGrid(format!(
                "tau/dt = {ratio} must be an integer >= 2"
            )));
        }
        Ok(Self {
            dt,
            steps: steps as usize,
        })
    }

    pub fn from_steps(dt: f64, steps: usize) -> Result<Self> {
        Self::new(dt * steps as f64, dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// `Γ` and `Ω` at one instant, with `valid = false` where `|c|` is below [`RATE_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub gamma: f64,
    pub omega_shift: f64,
    pub valid: bool,
}

pub fn derive_rates(c: C64, c_dot: C64) -> Rates {
    if c.norm() < RATE_FLOOR {
        return Rates {
            gamma: f64::NAN,
            omega_shift: f64::NAN,
            valid: false,
        };
    }
    let r = -2.0 * c_dot / c;
    Rates {
        gamma: r.re,
        omega_shift: r.im,
        valid: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub amplitudes: Vec<C64>,
    pub derivatives: Vec<C64>,
    pub populations: Vec<f64>,
    /// `∂_t|c|² = 2 Re(c* ċ)`.
    pub pop_rates: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega_shift: Vec<f64>,
    pub rate_valid: Vec<bool>,
}

impl Trajectory {
    pub fn from_amplitudes(grid: TimeGrid, amplitudes: Vec<C64>, derivatives: Vec<C64>) -> Self {
        assert_eq!(amplitudes.len(), grid.len());
        assert_eq!(derivatives.len(), grid.len());
        let populations = amplitudes.iter().map(|c| c.norm_sqr()).collect();
        let pop_rates = amplitudes
            .iter()
            .zip(&derivatives)
            .map(|(c, d)| 2.0 * (c.conj() * d).re)
            .collect();
        let rates: Vec<Rates> = amplitudes
            .iter()
            .zip(&derivatives)
            .map(|(&c, &d)| derive_rates(c, d))
            .collect();
        Self {
            grid,
            amplitudes,
            derivatives,
            populations,
            pop_rates,
            gamma: rates.iter().map(|r| r.gamma).collect(),
            omega_shift: rates.iter().map(|r| r.omega_shift).collect(),
            rate_valid: rates.iter().map(|r| r.valid).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// Leading `steps` intervals of the trajectory.
    pub fn truncated(&self, steps: usize) -> Trajectory {
        let n = steps.min(self.grid.steps) + 1;
        Trajectory {
            grid: TimeGrid {
                dt: self.grid.dt,
                steps: n - 1,
            },
            amplitudes: self.amplitudes[..n].to_vec(),
            derivatives: self.derivatives[..n].to_vec(),
            populations: self.populations[..n].to_vec(),
            pop_rates: self.pop_rates[..n].to_vec(),
            gamma: self.gamma[..n].to_vec(),
            omega_shift: self.omega_shift[..n].to_vec(),
            rate_valid: self.rate_valid[..n].to_vec(),
        }
    }

    /// `max_i |c_i − other_i|` over the common leading grid points.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Solves the memory-kernel equation on `[0, τ]` with step `dt`.
pub fn solve_volterra(env: &Environment, omega0: f64, tau: f64, dt: f64) -> Result<Trajectory> {
    let grid = TimeGrid::new(tau, dt)?;
    let kernel = env.correlation_table(grid.len(), dt);
    solve_volterra_with_kernel(&kernel, omega0, grid)
}

/// Solves with a precomputed table `kernel[j] = f(j·dt)`, which may be shared
/// between solves on the same bath and grid.
///
/// The equation is integrated in the frame rotating at `ω₀`: with
/// `c = e^{−iω₀t} b`, `ḃ(t) = −∫₀ᵗ K(t−t′) b(t′) dt′` where
/// `K(x) = f(x) e^{iω₀x}`. The memory integral uses the trapezoidal rule on
/// the grid, and each step is a Heun predictor–corrector whose endpoint
/// term uses the predicted value.
pub fn solve_volterra_with_kernel(
    kernel: &[C64],
    omega0: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    let n = grid.len();
    let dt = grid.dt;
    if kernel.len() < n {
        return Err(DynamicsError::InvalidGrid(format!(
            "kernel table has {} entries, grid needs {n}",
            kernel.len()
        )));
    }
    let rotated: Vec<C64> = kernel[..n]
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            if f.re.is_finite() && f.im.is_finite() {
                Ok(f * C64::from_polar(1.0, omega0 * grid.time(j)))
            } else {
                Err(DynamicsError::NonFiniteKernel { t: grid.time(j) })
            }
        })
        .collect::<Result<_>>()?;

    let mut b = vec![C64::new(0.0, 0.0); n];
    let mut b_dot = vec![C64::new(0.0, 0.0); n];
    b[0] = C64::new(1.0, 0.0);
    let k0 = rotated[0];

    for i in 0..n - 1 {
        // history = ½K_{i+1}b_0 + Σ_{j=1..i} K_{i+1−j} b_j, shared by predictor and corrector
        let mut history = 0.5 * rotated[i + 1] * b[0];
        for j in 1..=i {
            history += rotated[i + 1 - j] * b[j];
        }
        let predicted = b[i] + dt * b_dot[i];
        let slope_pred = -dt * (history + 0.5 * k0 * predicted);
        let next = b[i] + 0.5 * dt * (b_dot[i] + slope_pred);
        b[i + 1] = next;
        b_dot[i + 1] = -dt * (history + 0.5 * k0 * next);
        let magnitude = next.norm();
        if !magnitude.is_finite() || magnitude > INSTABILITY_LIMIT {
            return Err(DynamicsError::Unstable {
                t: grid.time(i + 1),
                magnitude,
            });
        }
    }

    let mut amplitudes = Vec::with_capacity(n);
    let mut derivatives = Vec::with_capacity(n);
    for i in 0..n {
        let phase = C64::from_polar(1.0, -omega0 * grid.time(i));
        let c = phase * b[i];
        amplitudes.push(c);
        derivatives.push(C64::new(0.0, -omega0) * c + phase * b_dot[i]);
    }
    amplitudes[0] = C64::new(1.0, 0.0);
    Ok(Trajectory::from_amplitudes(grid, amplitudes, derivatives))
}

/// Exact amplitude of a discrete bath, `c(t) = Σ_α |q_α|² e^{−iE_α t}`.
pub fn propagate_eigen(eig: &EigenSystem, grid: TimeGrid) -> Result<Trajectory> {
    let total = eig.weight_sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(DynamicsError::Incomplete(total));
    }
    let modes: Vec<(f64, f64)> = eig
        .energies
        .iter()
        .zip(&eig.system_weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&e, &w)| (e, w))
        .collect();
    const BLOCK: usize = 512;
    let n = grid.len();
    let blocks: Vec<(Vec<C64>, Vec<C64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let start = blk * BLOCK;
            let len = BLOCK.min(n - start);
            let mut c = vec![C64::new(0.0, 0.0); len];
            let mut d = vec![C64::new(0.0, 0.0); len];
            for &(e, w) in &modes {
                let step = C64::from_polar(1.0, -e * grid.dt);
                let mut phase = C64::from_polar(w, -e * grid.time(start));
                let rate = C64::new(0.0, -e);
                for (ci, di) in c.iter_mut().zip(d.iter_mut()) {
                    *ci += phase;
                    *di += rate * phase;
                    phase *= step;
                }
            }
            (c, d)
        })
        .collect();
    let mut amplitudes = Vec::with_capacity(n);
    let mut derivatives = Vec::with_capacity(n);
    for (c, d) in blocks {
        amplitudes.extend(c);
        derivatives.extend(d);
    }
    Ok(Trajectory::from_amplitudes(grid, amplitudes, derivatives))
}

/// Weak-coupling comparator `c(t) = exp[−i(ω₀−δω)t − πJ(ω₀)t]` with
/// `δω = P∫J(ω)/(ω−ω₀)dω`.
pub fn markovian_approximation(
    env: &OhmicFamily,
    omega0: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    let shift = env.principal_value_shift(omega0)?;
    let density = Environment::Ohmic(*env).density_at(omega0)?;
    let exponent = C64::new(-PI * density, -(omega0 - shift));
    let amplitudes: Vec<C64> = grid.times().iter().map(|&t| (exponent * t).exp()).collect();
    let derivatives = amplitudes.iter().map(|&c| exponent * c).collect();
    Ok(Trajectory::from_amplitudes(grid, amplitudes, derivatives))
}
