use proptest::prelude::*;

use qslb::dynamics::{propagate_eigen, TimeGrid, Trajectory};
use qslb::metrics::{density_matrix, non_markovianity_from_increases, qsl_report};
use qslb::spectral::{DiscreteBath, Environment, OhmicFamily, ResonatorArray};
use qslb::spectrum::arrowhead_eigensystem;
use qslb::C64;

fn bath_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..=200).prop_flat_map(|n| {
        (
            prop::collection::btree_set(0u32..2_000_000, n),
            prop::collection::vec(0.0f64..0.1, n),
            0.0f64..2.0,
        )
            .prop_map(|(freqs, g, w0)| {
                let freqs: Vec<f64> = freqs.into_iter().map(|k| k as f64 * 1e-6).collect();
                let g = g[..freqs.len()].to_vec();
                (freqs, g, w0)
            })
    })
}

/// Random amplitudes with `c(0) = 1`, `|c| ≤ 1`, and arbitrary derivatives.
fn trajectory_strategy() -> impl Strategy<Value = Trajectory> {
    (2usize..300, 0.001f64..1.0).prop_flat_map(|(steps, dt)| {
        (
            prop::collection::vec((0.0f64..=1.0, -3.2f64..3.2), steps),
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), steps + 1),
        )
            .prop_map(move |(amps, ders)| {
                let grid = TimeGrid::from_steps(dt, steps).unwrap();
                let mut c = vec![C64::new(1.0, 0.0)];
                c.extend(amps.iter().map(|&(r, phi)| C64::from_polar(r, phi)));
                let d = ders.iter().map(|&(a, b)| C64::new(a, b)).collect();
                Trajectory::from_amplitudes(grid, c, d)
            })
    })
}

/// Monotone non-increasing populations whose rates `−γ|c|²` agree in sign.
fn monotone_strategy() -> impl Strategy<Value = Trajectory> {
    prop::collection::vec((0.0f64..0.2, 0.0f64..2.0), 2..300).prop_map(|drops| {
        let mut p = vec![1.0f64];
        for &(f, _) in &drops {
            p.push(p.last().unwrap() * (1.0 - f));
        }
        let rates = std::iter::once(0.5).chain(drops.iter().map(|&(_, g)| g));
        let c: Vec<C64> = p.iter().map(|x| C64::new(x.sqrt(), 0.0)).collect();
        let d = c.iter().zip(rates).map(|(c, g)| -0.5 * g * c).collect();
        Trajectory::from_amplitudes(TimeGrid::from_steps(0.1, drops.len()).unwrap(), c, d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arrowhead_interlaces_and_is_complete((freqs, g, w0) in bath_strategy()) {
        let bath = DiscreteBath::new(freqs, g).unwrap();
        let eig = arrowhead_eigensystem(&bath, w0).unwrap();
        prop_assert_eq!(eig.len(), bath.len() + 1);
        prop_assert!(eig.interlaces());
        prop_assert!((eig.weight_sum() - 1.0).abs() < 1e-10, "{}", eig.weight_sum());
        prop_assert!(eig.energies.windows(2).all(|w| w[1] >= w[0]));
        // the spectrum preserves the trace of the arrowhead matrix
        let trace = w0 + bath.mode_freqs().iter().sum::<f64>();
        let sum: f64 = eig.energies.iter().sum();
        prop_assert!((trace - sum).abs() < 1e-9 * (1.0 + trace.abs()));
    }

    #[test]
    fn eigen_trajectories_satisfy_report_invariants((freqs, g, w0) in bath_strategy()) {
        let eig = arrowhead_eigensystem(&DiscreteBath::new(freqs, g).unwrap(), w0).unwrap();
        let traj = propagate_eigen(&eig, TimeGrid::new(40.0, 0.1).unwrap()).unwrap();
        prop_assert!(traj.populations.iter().all(|&p| p <= 1.0 + 1e-9));
        if let Ok(r) = qsl_report(&traj) {
            prop_assert!(r.non_markovianity >= 0.0);
            prop_assert!(r.identity_residual < 1e-10 * r.tau);
            prop_assert!(r.qsl_time <= r.tau * (1.0 + 1e-12));
        }
    }

    #[test]
    fn report_invariants_hold_for_any_trajectory(traj in trajectory_strategy()) {
        if let Ok(r) = qsl_report(&traj) {
            prop_assert!(r.non_markovianity >= 0.0);
            prop_assert!(r.qsl_time >= 0.0 && r.qsl_time <= r.tau * (1.0 + 1e-12));
            prop_assert!(r.action_integral >= 1.0 - r.final_population - 1e-12);
            let p = r.final_population;
            let relation = r.tau * (1.0 - p) / (1.0 - p + 2.0 * r.non_markovianity);
            prop_assert!((r.qsl_time - relation).abs() < 1e-10 * r.tau);
            prop_assert!(r.identity_residual < 1e-10 * r.tau);
            // integral formulation never counts less backflow than the samples show
            prop_assert!(r.non_markovianity >= non_markovianity_from_increases(&traj.populations) - 1e-12);
        }
        for i in 0..traj.len() {
            let rho = density_matrix(&traj, i);
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-15);
            let [a, b] = rho.eigenvalues();
            prop_assert!(a >= -1e-15 && b <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn monotone_decay_is_markovian(traj in monotone_strategy()) {
        let r = qsl_report(&traj).unwrap();
        prop_assert_eq!(non_markovianity_from_increases(&traj.populations), 0.0);
        prop_assert!(r.non_markovianity < 1e-12);
        prop_assert!((r.qsl_ratio() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weight_integral_is_self_energy_derivative(
        ohmic in any::<bool>(),
        a in 0.05f64..0.3,
        b in 0.5f64..3.0,
        offset in 0.02f64..0.5,
        above in any::<bool>(),
    ) {
        let (env, e): (Environment, f64) = if ohmic {
            (OhmicFamily::new(a, b, 1.0).unwrap().into(), -offset)
        } else {
            let arr = ResonatorArray::new(a * 0.5, 0.02 * b, 1.0, 800).unwrap();
            let (lo, hi) = arr.band_edges();
            (arr.into(), if above { hi + offset } else { lo - offset })
        };
        let h = 1e-3 * offset;
        let se = |x: f64| env.self_energy(x).unwrap();
        let d = (se(e - 2.0 * h) - 8.0 * se(e - h) + 8.0 * se(e + h) - se(e + 2.0 * h)) / (12.0 * h);
        let w = env.weight_integral(e).unwrap();
        prop_assert!((w - d).abs() < 1e-4 * w, "{} vs {}", w, d);
    }
}
