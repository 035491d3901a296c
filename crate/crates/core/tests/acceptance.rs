//! End-to-end acceptance suite. Each test prints one `PASS`/`FAIL` line and
//! then asserts, so `cargo test --test acceptance -- --nocapture` gives a
//! per-criterion summary.

use std::sync::OnceLock;
use std::time::Instant;

use qslb::checks::{
    arrowhead_check, convergence_order_check, metric_identity_check, vacuum_rabi_check,
    weight_derivative_check, SELFTEST_SEED,
};
use qslb::dynamics::{propagate_eigen, solve_volterra, TimeGrid, Trajectory};
use qslb::metrics::{
    oscillation_frequency, qsl_report, steady_state_prediction, NonMarkovianTrend,
};
use qslb::spectral::{Environment, OhmicFamily, ResonatorArray};
use qslb::spectrum::{
    arrowhead_with_degeneracies, critical_coupling, find_bound_states, EigenSystem,
    DEFAULT_WEIGHT_THRESHOLD,
};

const OMEGA0: f64 = 0.1;
const ETAS: [f64; 7] = [0.02, 0.04, 0.06, 0.08, 0.12, 0.16, 0.2];

fn ohmic(eta: f64) -> Environment {
    OhmicFamily::new(eta, 1.0, 1.0).unwrap().into()
}

fn verdict(criterion: u32, ok: bool, detail: String) {
    println!(
        "{} criterion {criterion}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion}: {detail}");
}

/// The η sweep at τ = 800, dt = 0.02, shared by several criteria.
fn eta_sweep() -> &'static [Trajectory] {
    static CELL: OnceLock<Vec<Trajectory>> = OnceLock::new();
    CELL.get_or_init(|| {
        ETAS.iter()
            .map(|&eta| solve_volterra(&ohmic(eta), OMEGA0, 800.0, 0.02).unwrap())
            .collect()
    })
}

/// Volterra and eigen-expansion trajectories for η ∈ {0.05, 0.2} on [0, 100].
fn oracle_pairs() -> &'static [(Trajectory, Trajectory)] {
    static CELL: OnceLock<Vec<(Trajectory, Trajectory)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [0.05, 0.2]
            .iter()
            .map(|&eta| {
                let env = ohmic(eta);
                let volterra = solve_volterra(&env, OMEGA0, 100.0, 0.01).unwrap();
                let Environment::Ohmic(o) = env else {
                    unreachable!()
                };
                let eig = qslb::spectrum::arrowhead_eigensystem(
                    &o.discretize(4000, 20.0).unwrap(),
                    OMEGA0,
                )
                .unwrap();
                let eigen = propagate_eigen(&eig, volterra.grid).unwrap();
                (volterra, eigen)
            })
            .collect()
    })
}

fn markov_run() -> &'static Trajectory {
    static CELL: OnceLock<Trajectory> = OnceLock::new();
    CELL.get_or_init(|| solve_volterra(&ohmic(0.01), OMEGA0, 400.0, 0.02).unwrap())
}

fn rabi_runs() -> &'static (bool, String, Vec<Trajectory>) {
    static CELL: OnceLock<(bool, String, Vec<Trajectory>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (outcome, runs) = vacuum_rabi_check();
        (outcome.passed, outcome.detail, runs)
    })
}

fn array_eigensystem(g: f64) -> EigenSystem {
    let array = ResonatorArray::new(g, 0.05, 1.0, 800).unwrap();
    let couplings = vec![g / 800f64.sqrt(); 800];
    arrowhead_with_degeneracies(&array.dispersion(), &couplings, 1.08).unwrap()
}

/// Array trajectories at g ∈ {0.005, 0.04, 0.1}, eigen method, τ = 2000.
fn array_runs() -> &'static [(f64, EigenSystem, Trajectory)] {
    static CELL: OnceLock<Vec<(f64, EigenSystem, Trajectory)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [0.005, 0.04, 0.1]
            .iter()
            .map(|&g| {
                let eig = array_eigensystem(g);
                let traj = propagate_eigen(&eig, TimeGrid::new(2000.0, 0.05).unwrap()).unwrap();
                (g, eig, traj)
            })
            .collect()
    })
}

fn hygiene_runs() -> &'static (Vec<(bool, String)>, Vec<Trajectory>) {
    static CELL: OnceLock<(Vec<(bool, String)>, Vec<Trajectory>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (order, mut runs) = convergence_order_check();
        let (arrow, more) = arrowhead_check(SELFTEST_SEED, 200);
        runs.extend(more);
        let deriv = weight_derivative_check(SELFTEST_SEED, 10);
        let outcomes = [order, arrow, deriv]
            .into_iter()
            .map(|o| (o.passed, o.line()))
            .collect();
        (outcomes, runs)
    })
}

#[test]
fn criterion_1_critical_coupling() {
    let start = Instant::now();
    let eta_c = critical_coupling(1.0, OMEGA0, 1.0).unwrap();
    let below = find_bound_states(&ohmic(0.099), OMEGA0).unwrap();
    let above = find_bound_states(&ohmic(0.101), OMEGA0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (eta_c - 0.1).abs() < 1e-10 && below.is_empty() && !above.is_empty() && elapsed < 1.0;
    verdict(
        1,
        ok,
        format!(
            "eta_c = {eta_c:.12}, states at 0.099/0.101: {}/{}, {elapsed:.3} s",
            below.len(),
            above.len()
        ),
    );
}

#[test]
fn criterion_2_eta_threshold() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (&eta, traj) in ETAS.iter().zip(eta_sweep()) {
        let r = qsl_report(traj).unwrap();
        let (ratio, n) = (r.qsl_ratio(), r.non_markovianity);
        ok &= if eta <= 0.08 {
            ratio >= 0.98 && n <= 1e-3
        } else {
            ratio <= 0.9 && n >= 1e-2
        };
        detail.push(format!("eta {eta}: ratio {ratio:.4} N {n:.2e}"));
    }
    verdict(2, ok, detail.join("; "));
}

#[test]
fn criterion_3_plateau() {
    let traj = &eta_sweep()[6];
    let states = find_bound_states(&ohmic(0.2), OMEGA0).unwrap();
    let plateau = steady_state_prediction(&states).unwrap().mean();
    let start = (700.0 / 0.02f64).round() as usize;
    let window = &traj.populations[start..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    verdict(
        3,
        (mean - plateau).abs() < 0.02,
        format!("late mean {mean:.5}, d0^4 = {plateau:.5}"),
    );
}

#[test]
fn criterion_4_oracle_equivalence() {
    let start = Instant::now();
    let devs: Vec<f64> = oracle_pairs()
        .iter()
        .map(|(v, e)| v.max_deviation(e))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = devs.iter().all(|&d| d < 1e-3) && elapsed < 60.0;
    verdict(
        4,
        ok,
        format!(
            "max |c_volterra - c_eigen| at eta 0.05/0.2: {:.2e}/{:.2e}, {elapsed:.1} s",
            devs[0], devs[1]
        ),
    );
}

#[test]
fn criterion_5_metric_identity() {
    let mut all: Vec<Trajectory> = eta_sweep().to_vec();
    for (v, e) in oracle_pairs() {
        all.push(v.clone());
        all.push(e.clone());
    }
    all.push(markov_run().clone());
    all.extend(rabi_runs().2.iter().cloned());
    all.extend(array_runs().iter().map(|(_, _, t)| t.clone()));
    all.extend(hygiene_runs().1.iter().cloned());
    let outcome = metric_identity_check(&all);
    verdict(5, outcome.passed, outcome.detail);
}

#[test]
fn criterion_6_markovian_limit() {
    let traj = markov_run();
    let Environment::Ohmic(o) = ohmic(0.01) else {
        unreachable!()
    };
    let rate = std::f64::consts::PI * Environment::Ohmic(o).density_at(OMEGA0).unwrap();
    // diagnostic only: the rate at the shifted frequency
    let shifted = std::f64::consts::PI
        * Environment::Ohmic(o)
            .density_at(OMEGA0 - o.principal_value_shift(OMEGA0).unwrap())
            .unwrap();
    let (mut worst, mut worst_shifted) = (0.0f64, 0.0f64);
    let mut reached = false;
    for (i, c) in traj.amplitudes.iter().enumerate() {
        let modulus = c.norm();
        let t = traj.grid.time(i);
        worst = worst.max((modulus - (-rate * t).exp()).abs() / (-rate * t).exp());
        worst_shifted =
            worst_shifted.max((modulus - (-shifted * t).exp()).abs() / (-shifted * t).exp());
        if modulus <= (-1.0f64).exp() {
            reached = true;
            break;
        }
    }
    verdict(
        6,
        reached && worst < 0.05,
        format!("worst relative error against exp(-pi J(w0) t) down to 1/e: {worst:.4} (against exp(-pi J(w0 - dw) t): {worst_shifted:.4})"),
    );
}

#[test]
fn criterion_7_vacuum_rabi() {
    let (passed, detail, _) = rabi_runs();
    verdict(7, *passed, detail.clone());
}

#[test]
fn criterion_8_array_regimes() {
    let runs = array_runs();
    let mut ok = true;
    let mut detail = Vec::new();
    for (g, eig, traj) in runs {
        let isolated = eig.isolated(DEFAULT_WEIGHT_THRESHOLD);
        let r = qsl_report(traj).unwrap();
        let expected = if *g < 0.01 {
            0
        } else if *g < 0.07 {
            1
        } else {
            2
        };
        ok &= isolated.len() == expected;
        detail.push(format!(
            "g {g}: {} isolated, ratio {:.4}",
            isolated.len(),
            r.qsl_ratio()
        ));
        if *g < 0.01 {
            ok &= r.qsl_ratio() >= 0.95;
        }
        if *g > 0.07 && isolated.len() == 2 {
            let gap = (eig.energies[isolated[1]] - eig.energies[isolated[0]]).abs();
            let osc = oscillation_frequency(traj, (1500.0, 2000.0)).unwrap();
            match osc {
                Some(o) => {
                    ok &= (o.frequency - gap).abs() <= o.bin_width;
                    detail.push(format!(
                        "peak {:.4} vs |dE| {gap:.4} (bin {:.4})",
                        o.frequency, o.bin_width
                    ));
                }
                None => {
                    ok = false;
                    detail.push("no late oscillation".into());
                }
            }
            let diverging = matches!(r.trend, NonMarkovianTrend::Diverging { .. });
            ok &= diverging;
            detail.push(format!("N diverging {diverging}"));
        }
    }
    verdict(8, ok, detail.join("; "));
}

#[test]
fn criterion_9_numerical_hygiene() {
    let (outcomes, _) = hygiene_runs();
    let ok = outcomes.iter().all(|(p, _)| *p);
    let lines: Vec<&str> = outcomes.iter().map(|(_, l)| l.as_str()).collect();
    verdict(9, ok, lines.join("; "));
}
