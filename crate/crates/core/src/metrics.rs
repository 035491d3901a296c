//! Quantum-speed-limit time, non-Markovianity, steady-state predictions and
//! late-time oscillation analysis of the emitter population `P(t) = |c(t)|²`.
//!
//! For the excited initial state the trace distance of the optimal pair
//! `|±⟩` is `P(t)` itself, so both the QSL time and the non-Markovianity are
//! functionals of the population alone:
//!
//! ```text
//! τ_QSL = τ (1 − P(τ)) / A,   N = ½ [P(τ) − 1 + A],   A = ∫₀^τ |∂_t P| dt
//! ```

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::spectrum::BoundState;

/// `|N(τ) − N(0.9τ)|` below which the non-Markovianity counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Per-step action below which the population has not evolved beyond rounding
/// and the QSL time is 0/0.
const MIN_ACTION_PER_STEP: f64 = 1e-14;
/// Smallest population oscillation amplitude reported by [`oscillation_frequency`].
pub const OSCILLATION_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("QSL time undefined: population never changes (P(tau) = {final_population}, action = {action})")]
    UndefinedQsl { final_population: f64, action: f64 },
    #[error("trajectory must have at least 2 points starting from |c(0)| = 1")]
    InvalidTrajectory,
    #[error("{0} bound states given; at most two are supported")]
    TooManyBoundStates(usize),
    #[error("window [{start}, {end}] is outside the trajectory span or too short")]
    InvalidWindow { start: f64, end: f64 },
}

type Result<T> = std::result::Result<T, MetricsError>;

/// Behaviour of `N` under extension of the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonMarkovianTrend {
    Converged,
    /// `N` keeps growing; `growth_rate` is `[N(τ) − N(0.9τ)] / 0.1τ`.
    Diverging {
        growth_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QslReport {
    pub tau: f64,
    pub final_population: f64,
    pub action_integral: f64,
    pub qsl_time: f64,
    pub non_markovianity: f64,
    pub identity_residual: f64,
    pub trend: NonMarkovianTrend,
}

impl QslReport {
    pub fn qsl_ratio(&self) -> f64 {
        self.qsl_time / self.tau
    }

    pub fn converged(&self) -> bool {
        matches!(self.trend, NonMarkovianTrend::Converged)
    }
}

/// `∫|∂_t P| dt` over the first `upto` intervals.
///
/// Intervals on which the sampled rate keeps its sign contribute
/// `|P_{i+1} − P_i|` exactly; an interval whose end-point rates have opposite
/// signs contains a turning point, located on the cubic Hermite interpolant
/// built from `P` and `∂_t P`, and contributes the variation on both sides.
fn total_variation(traj: &Trajectory, upto: usize) -> f64 {
    let p = &traj.populations;
    let r = &traj.pop_rates;
    let h = traj.grid.dt();
    let mut acc = 0.0;
    for i in 0..upto {
        let (p0, p1, d0, d1) = (p[i], p[i + 1], r[i] * h, r[i + 1] * h);
        if d0 * d1 < 0.0 {
            let turn = hermite_extremum(p0, p1, d0, d1);
            acc += (turn - p0).abs() + (p1 - turn).abs();
        } else {
            acc += (p1 - p0).abs();
        }
    }
    acc
}

/// Value of the cubic Hermite interpolant on `θ ∈ [0, 1]` at its interior
/// stationary point; `d0`, `d1` are end slopes scaled by the interval length
/// and have opposite signs.
fn hermite_extremum(p0: f64, p1: f64, d0: f64, d1: f64) -> f64 {
    // p'(θ) = aθ² + bθ + d0
    let a = 6.0 * (p0 - p1) + 3.0 * (d0 + d1);
    let b = 6.0 * (p1 - p0) - 4.0 * d0 - 2.0 * d1;
    let theta = if a.abs() < 1e-14 * (b.abs() + d0.abs()) {
        -d0 / b
    } else {
        let disc = (b * b - 4.0 * a * d0).max(0.0).sqrt();
        // numerically stable pair of roots
        let q = -0.5 * (b + b.signum() * disc);
        let r1 = q / a;
        let r2 = if q != 0.0 { d0 / q } else { r1 };
        if (0.0..=1.0).contains(&r1) {
            r1
        } else {
            r2
        }
    };
    let t = theta.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0
        + (t3 - 2.0 * t2 + t) * d0
        + (-2.0 * t3 + 3.0 * t2) * p1
        + (t3 - t2) * d1
}

fn non_markovianity_upto(traj: &Trajectory, upto: usize) -> (f64, f64) {
    let action = total_variation(traj, upto);
    let final_population = traj.populations[upto];
    let n = (0.5 * (final_population - 1.0 + action)).max(0.0);
    (action, n)
}

pub fn qsl_report(traj: &Trajectory) -> Result<QslReport> {
    if traj.len() < 2 || (traj.populations[0] - 1.0).abs() > 1e-8 {
        return Err(MetricsError::InvalidTrajectory);
    }
    let steps = traj.len() - 1;
    let tau = traj.grid.tau();
    let final_population = traj.populations[steps];
    let (action, non_markovianity) = non_markovianity_upto(traj, steps);
    if action <= MIN_ACTION_PER_STEP * steps.max(100) as f64 {
        return Err(MetricsError::UndefinedQsl {
            final_population,
            action,
        });
    }
    let qsl_time = tau * (1.0 - final_population) / action;
    let relation =
        tau * (1.0 - final_population) / (1.0 - final_population + 2.0 * non_markovianity);
    let identity_residual = (qsl_time - relation).abs();

    let earlier = ((0.9 * steps as f64).round() as usize).max(1);
    let (_, n_earlier) = non_markovianity_upto(traj, earlier);
    let delta = non_markovianity - n_earlier;
    let trend = if delta.abs() < CONVERGENCE_TOL {
        NonMarkovianTrend::Converged
    } else {
        NonMarkovianTrend::Diverging {
            growth_rate: delta / (traj.grid.time(steps) - traj.grid.time(earlier)),
        }
    };
    Ok(QslReport {
        tau,
        final_population,
        action_integral: action,
        qsl_time,
        non_markovianity,
        identity_residual,
        trend,
    })
}

/// `N` as the sum of population increases between consecutive samples.
pub fn non_markovianity_from_increases(populations: &[f64]) -> f64 {
    populations.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteadyStatePrediction {
    DecayToZero,
    /// `P(∞) = d₀⁴`.
    Plateau {
        population: f64,
    },
    /// `P(t) → mean + amplitude·cos(frequency·t + φ)`.
    TwoStateOscillation {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl SteadyStatePrediction {
    /// Range `[min, max]` of the asymptotic population.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            SteadyStatePrediction::DecayToZero => (0.0, 0.0),
            SteadyStatePrediction::Plateau { population } => (population, population),
            SteadyStatePrediction::TwoStateOscillation {
                mean, amplitude, ..
            } => (mean - amplitude, mean + amplitude),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SteadyStatePrediction::DecayToZero => 0.0,
            SteadyStatePrediction::Plateau { population } => population,
            SteadyStatePrediction::TwoStateOscillation { mean, .. } => mean,
        }
    }
}

pub fn steady_state_prediction(bound_states: &[BoundState]) -> Result<SteadyStatePrediction> {
    match bound_states {
        [] => Ok(SteadyStatePrediction::DecayToZero),
        [one] => Ok(SteadyStatePrediction::Plateau {
            population: one.weight * one.weight,
        }),
        [a, b] => Ok(SteadyStatePrediction::TwoStateOscillation {
            mean: a.weight * a.weight + b.weight * b.weight,
            amplitude: 2.0 * a.weight * b.weight,
            frequency: (a.energy - b.energy).abs(),
        }),
        more => Err(MetricsError::TooManyBoundStates(more.len())),
    }
}

/// Reduced emitter state in the `{|+⟩, |−⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub [[C64; 2]; 2]);

impl DensityMatrix {
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Eigenvalues of the hermitian matrix, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let off = self.0[0][1].norm();
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + off * off).sqrt();
        [mean - radius, mean + radius]
    }
}

/// `ρ(t_i) = diag(|c|², 1 − |c|²)` for the excited initial state.
pub fn density_matrix(traj: &Trajectory, index: usize) -> DensityMatrix {
    let p = traj.populations[index];
    let zero = C64::new(0.0, 0.0);
    DensityMatrix([[C64::new(p, 0.0), zero], [zero, C64::new(1.0 - p, 0.0)]])
}

/// Dominant oscillation of the population inside a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillation {
    /// Angular frequency of the peak bin.
    pub frequency: f64,
    /// Angular width of one DFT bin.
    pub bin_width: f64,
    pub amplitude: f64,
}

/// Last quarter of the trajectory, the default analysis window.
pub fn default_window(traj: &Trajectory) -> (f64, f64) {
    let tau = traj.grid.tau();
    (0.75 * tau, tau)
}

/// Peak of the Hann-tapered, detrended population spectrum over `window`;
/// `None` when the peak amplitude is below [`OSCILLATION_FLOOR`].
pub fn oscillation_frequency(traj: &Trajectory, window: (f64, f64)) -> Result<Option<Oscillation>> {
    let dt = traj.grid.dt();
    let (start, end) = window;
    if !(start >= 0.0 && end > start && end <= traj.grid.tau() * (1.0 + 1e-12)) {
        return Err(MetricsError::InvalidWindow { start, end });
    }
    let i0 = (start / dt).round() as usize;
    let i1 = ((end / dt).round() as usize).min(traj.len() - 1);
    let m = i1.saturating_sub(i0) + 1;
    if m < 8 {
        return Err(MetricsError::InvalidWindow { start, end });
    }
    let samples = &traj.populations[i0..=i1];
    // Remove the least-squares line so slow drift does not leak into the low bins.
    let centre = 0.5 * (m - 1) as f64;
    let mean = samples.iter().sum::<f64>() / m as f64;
    let (sxy, sxx) = samples
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(sxy, sxx), (k, &p)| {
            let x = k as f64 - centre;
            (sxy + x * (p - mean), sxx + x * x)
        });
    let slope = sxy / sxx;
    let taper: Vec<f64> = (0..m)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (m - 1) as f64).cos())
        .collect();
    let signal: Vec<f64> = samples
        .iter()
        .zip(&taper)
        .enumerate()
        .map(|(k, (p, w))| (p - mean - slope * (k as f64 - centre)) * w)
        .collect();
    let taper_sum: f64 = taper.iter().sum();

    // Bin 1 (one period per window) is indistinguishable from drift.
    let mut best = (0usize, 0.0f64);
    for bin in 2..=m / 2 {
        let step = C64::from_polar(1.0, -2.0 * PI * bin as f64 / m as f64);
        let mut phase = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for (k, &x) in signal.iter().enumerate() {
            if k % 256 == 0 {
                phase = C64::from_polar(1.0, -2.0 * PI * (bin * k) as f64 / m as f64);
            }
            acc += x * phase;
            phase *= step;
        }
        if acc.norm() > best.1 {
            best = (bin, acc.norm());
        }
    }
    // A sinusoid of amplitude A gives a peak of A·Σw/2.
    let amplitude = 2.0 * best.1 / taper_sum;
    if best.0 == 0 || amplitude < OSCILLATION_FLOOR {
        return Ok(None);
    }
    let bin_width = 2.0 * PI / (m as f64 * dt);
    Ok(Some(Oscillation {
        frequency: best.0 as f64 * bin_width,
        bin_width,
        amplitude,
    }))
}
