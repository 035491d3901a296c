//! Fast self-checks against closed-form oracles, shared by the `selftest`
//! subcommand and the acceptance tests.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dynamics::{propagate_eigen, solve_volterra, TimeGrid, Trajectory};
use crate::metrics::qsl_report;
use crate::spectral::{DiscreteBath, Environment, OhmicFamily, ResonatorArray};
use crate::spectrum::{arrowhead_eigensystem, critical_coupling, find_bound_states};

/// Seed for the randomized baths so every run checks the same samples.
pub const SELFTEST_SEED: u64 = 0x5eed_0b5e;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> CheckOutcome {
    CheckOutcome::new(name, false, format!("error: {err}"))
}

/// `η_c = ω₀/(ω_c Γ(s))` at s = 1, ω₀ = 0.1, and the bound-state count on either side.
pub fn critical_coupling_check() -> CheckOutcome {
    const NAME: &str = "critical coupling";
    let run = || -> Result<CheckOutcome, Box<dyn std::error::Error>> {
        let eta_c = critical_coupling(1.0, 0.1, 1.0)?;
        let below = find_bound_states(&OhmicFamily::new(0.099, 1.0, 1.0)?.into(), 0.1)?;
        let above = find_bound_states(&OhmicFamily::new(0.101, 1.0, 1.0)?.into(), 0.1)?;
        let ok = (eta_c - 0.1).abs() < 1e-10 && below.is_empty() && !above.is_empty();
        Ok(CheckOutcome::new(
            NAME,
            ok,
            format!(
                "eta_c = {eta_c:.12}, bound states at 0.099: {}, at 0.101: {}",
                below.len(),
                above.len()
            ),
        ))
    };
    run().unwrap_or_else(|e| failed(NAME, e))
}

/// Single resonant mode: `|c(t)|² = cos²(gt)`.
pub fn vacuum_rabi_check() -> (CheckOutcome, Vec<Trajectory>) {
    const NAME: &str = "vacuum Rabi oscillation";
    let (g, omega) = (0.1, 1.0);
    let run = || -> Result<(CheckOutcome, Vec<Trajectory>), Box<dyn std::error::Error>> {
        let bath = DiscreteBath::new(vec![omega], vec![g])?;
        let volterra = solve_volterra(&bath.clone().into(), omega, 100.0, 0.01)?;
        let eig = arrowhead_eigensystem(&bath, omega)?;
        let eigen = propagate_eigen(&eig, TimeGrid::new(100.0, 0.01)?)?;
        let err = |traj: &Trajectory| {
            traj.populations
                .iter()
                .enumerate()
                .map(|(i, p)| (p - (g * traj.grid.time(i)).cos().powi(2)).abs())
                .fold(0.0, f64::max)
        };
        let (ev, ee) = (err(&volterra), err(&eigen));
        let ok = ev < 1e-6 && ee < 1e-12;
        Ok((
            CheckOutcome::new(
                NAME,
                ok,
                format!("max error volterra {ev:.2e}, eigen {ee:.2e}"),
            ),
            vec![volterra, eigen],
        ))
    };
    run().unwrap_or_else(|e| (failed(NAME, e), Vec::new()))
}

/// `|τ_QSL − τ(1−P)/(1−P+2N)| < 10⁻¹⁰ τ` on every trajectory given.
/// Trajectories without a defined QSL time are skipped.
pub fn metric_identity_check(trajectories: &[Trajectory]) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for traj in trajectories {
        let Ok(r) = qsl_report(traj) else { continue };
        let p = r.final_population;
        let relation = r.tau * (1.0 - p) / (1.0 - p + 2.0 * r.non_markovianity);
        worst = worst.max((r.qsl_time - relation).abs() / r.tau);
        checked += 1;
    }
    CheckOutcome::new(
        "metric identity",
        checked > 0 && worst < 1e-10,
        format!("{checked} trajectories, worst residual/tau {worst:.2e}"),
    )
}

/// Random bath of `1..=max_modes` distinct modes in [0, 2) and a random emitter frequency.
pub fn random_bath(rng: &mut StdRng, max_modes: usize) -> (DiscreteBath, f64) {
    let n = rng.gen_range(1..=max_modes);
    let mut freqs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let couplings = freqs.iter().map(|_| rng.gen_range(0.0..0.1)).collect();
    let omega0 = rng.gen_range(0.0..2.0);
    (
        DiscreteBath::new(freqs, couplings).expect("sorted, distinct, non-negative"),
        omega0,
    )
}

/// Interlacing and `Σ|q_α|² = 1` on randomized baths of at most 200 modes.
pub fn arrowhead_check(seed: u64, samples: usize) -> (CheckOutcome, Vec<Trajectory>) {
    const NAME: &str = "arrowhead interlacing and completeness";
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut interlaced = true;
    let mut trajectories = Vec::new();
    for i in 0..samples {
        let (bath, omega0) = random_bath(&mut rng, 200);
        let eig = match arrowhead_eigensystem(&bath, omega0) {
            Ok(e) => e,
            Err(e) => return (failed(NAME, e), trajectories),
        };
        worst = worst.max((eig.weight_sum() - 1.0).abs());
        interlaced &= eig.interlaces();
        if i < 4 {
            if let Ok(traj) = propagate_eigen(&eig, TimeGrid::new(50.0, 0.05).expect("valid grid"))
            {
                trajectories.push(traj);
            }
        }
    }
    let ok = interlaced && worst < 1e-10;
    (
        CheckOutcome::new(
            NAME,
            ok,
            format!("{samples} baths, interlaced {interlaced}, worst |sum - 1| {worst:.2e}"),
        ),
        trajectories,
    )
}

/// `weight_integral(E) = d/dE self_energy(E)` on random (environment, E) samples.
pub fn weight_derivative_check(seed: u64, samples: usize) -> CheckOutcome {
    const NAME: &str = "weight integral vs self-energy derivative";
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let (env, energy): (Environment, f64) = if i % 2 == 0 {
            let o = OhmicFamily::new(rng.gen_range(0.05..0.3), rng.gen_range(0.5..3.0), 1.0)
                .expect("valid");
            (o.into(), -rng.gen_range(0.02..1.0))
        } else {
            let a = ResonatorArray::new(
                rng.gen_range(0.01..0.15),
                rng.gen_range(0.02..0.1),
                1.0,
                800,
            )
            .expect("valid");
            let edge = if rng.gen_bool(0.5) {
                a.band_edges().1
            } else {
                a.band_edges().0
            };
            let side = if edge > 1.0 { 1.0 } else { -1.0 };
            (a.into(), edge + side * rng.gen_range(0.01..0.2))
        };
        let h = 1e-3 * energy.abs().max(0.01);
        let se = |e: f64| env.self_energy(e);
        // five-point central difference
        let derivative = match (
            se(energy - 2.0 * h),
            se(energy - h),
            se(energy + h),
            se(energy + 2.0 * h),
        ) {
            (Ok(a), Ok(b), Ok(c), Ok(d)) => (a - 8.0 * b + 8.0 * c - d) / (12.0 * h),
            _ => return failed(NAME, format!("self-energy failed near E = {energy}")),
        };
        let w = match env.weight_integral(energy) {
            Ok(w) => w,
            Err(e) => return failed(NAME, e),
        };
        worst = worst.max((w - derivative).abs() / w.abs());
    }
    CheckOutcome::new(
        NAME,
        worst < 1e-4,
        format!("{samples} samples, worst relative error {worst:.2e}"),
    )
}

/// Error of the Volterra solution against a fine reference at three step sizes;
/// the observed order should be close to two.
pub fn convergence_order_check() -> (CheckOutcome, Vec<Trajectory>) {
    const NAME: &str = "second-order convergence";
    let run = || -> Result<(CheckOutcome, Vec<Trajectory>), Box<dyn std::error::Error>> {
        let env: Environment = OhmicFamily::new(0.2, 1.0, 1.0)?.into();
        let tau = 20.0;
        let reference = solve_volterra(&env, 0.1, tau, 0.0025)?;
        let mut errors = Vec::new();
        let mut runs = Vec::new();
        for dt in [0.04, 0.02, 0.01] {
            let traj = solve_volterra(&env, 0.1, tau, dt)?;
            let stride = (dt / 0.0025f64).round() as usize;
            let err = traj
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, c)| (c - reference.amplitudes[i * stride]).norm())
                .fold(0.0, f64::max);
            errors.push(err);
            runs.push(traj);
        }
        let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
        let ok = ratios.iter().all(|r| (3.5..=4.6).contains(r));
        runs.push(reference);
        Ok((
            CheckOutcome::new(
                NAME,
                ok,
                format!(
                    "errors {:.2e} {:.2e} {:.2e}, ratios {:.2} {:.2}",
                    errors[0], errors[1], errors[2], ratios[0], ratios[1]
                ),
            ),
            runs,
        ))
    };
    run().unwrap_or_else(|e| (failed(NAME, e), Vec::new()))
}

/// The fast subset run by `selftest`.
pub fn fast_suite() -> Vec<CheckOutcome> {
    let mut outcomes = vec![critical_coupling_check()];
    let mut trajectories = Vec::new();
    let (rabi, t) = vacuum_rabi_check();
    trajectories.extend(t);
    let (order, t) = convergence_order_check();
    trajectories.extend(t);
    let (arrow, t) = arrowhead_check(SELFTEST_SEED, 50);
    trajectories.extend(t);
    outcomes.push(rabi);
    outcomes.push(order);
    outcomes.push(arrow);
    outcomes.push(weight_derivative_check(SELFTEST_SEED, 10));
    outcomes.push(metric_identity_check(&trajectories));
    outcomes
}
