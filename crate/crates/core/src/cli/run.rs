use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::config::{Method, Model, RunConfig};
use super::output::{extension, render_report, write_file, Cell, Table};
use super::CliError;
use crate::dynamics::{propagate_eigen, solve_volterra_with_kernel, TimeGrid, Trajectory};
use crate::metrics::{
    default_window, oscillation_frequency, qsl_report, steady_state_prediction, NonMarkovianTrend,
    QslReport, SteadyStatePrediction,
};
use crate::quad;
use crate::spectral::{DiscreteBath, Environment, ResonatorArray};
use crate::spectrum::{
    arrowhead_eigensystem, arrowhead_with_degeneracies, critical_coupling, find_bound_states_with,
    BoundState, BoundStateSearch, EigenSystem,
};

/// Everything computed for one parameter point.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub bound_states: Vec<BoundState>,
    /// Isolated eigenvalues of the exact finite bath, when one is diagonalised.
    pub isolated: Option<Vec<BoundState>>,
    pub trajectory: Trajectory,
    pub eigen_trajectory: Option<Trajectory>,
    pub solver_deviation: Option<f64>,
    pub report: Result<QslReport, String>,
}

fn grid(cfg: &RunConfig) -> Result<TimeGrid, CliError> {
    Ok(TimeGrid::new(cfg.tau, cfg.dt)?)
}

fn eigen_bath(cfg: &RunConfig, env: &Environment) -> Result<DiscreteBath, CliError> {
    match env {
        Environment::Ohmic(o) => {
            Ok(o.discretize(cfg.discretize_modes, cfg.discretize_omega_max * cfg.omega_c)?)
        }
        other => Ok(other
            .as_discrete()
            .expect("array and file baths are discrete")),
    }
}

fn isolated_states(eig: &EigenSystem, threshold: f64) -> Vec<BoundState> {
    eig.isolated(threshold)
        .into_iter()
        .map(|i| BoundState {
            energy: eig.energies[i],
            weight: eig.system_weights[i],
        })
        .collect()
}

/// Solves one point. `kernel` may carry a precomputed correlation table for
/// this environment and grid.
pub fn solve_point(cfg: &RunConfig, kernel: Option<&[C64]>) -> Result<PointOutcome, CliError> {
    let env = cfg.environment()?;
    let grid = grid(cfg)?;
    let search = BoundStateSearch {
        weight_threshold: cfg.weight_threshold,
    };
    let bound_states = find_bound_states_with(&env, cfg.omega0, search)?;

    let needs_eigen =
        matches!(cfg.method, Method::Eigen | Method::Both) || cfg.model != Model::Ohmic;
    let eig = if needs_eigen {
        Some(arrowhead_eigensystem(&eigen_bath(cfg, &env)?, cfg.omega0)?)
    } else {
        None
    };
    let isolated = match (&eig, cfg.model) {
        (Some(e), Model::Array | Model::DiscreteFile) => {
            Some(isolated_states(e, cfg.weight_threshold))
        }
        _ => None,
    };

    let volterra = if matches!(cfg.method, Method::Volterra | Method::Both) {
        let owned;
        let table = match kernel {
            Some(k) => k,
            None => {
                owned = env.correlation_table(grid.len(), grid.dt());
                &owned
            }
        };
        Some(solve_volterra_with_kernel(table, cfg.omega0, grid)?)
    } else {
        None
    };
    let eigen = match (&eig, cfg.method) {
        (Some(e), Method::Eigen | Method::Both) => Some(propagate_eigen(e, grid)?),
        _ => None,
    };
    let solver_deviation = match (&volterra, &eigen) {
        (Some(v), Some(e)) => Some(v.max_deviation(e)),
        _ => None,
    };
    let (trajectory, eigen_trajectory) = match (volterra, eigen) {
        (Some(v), e) => (v, e),
        (None, Some(e)) => (e, None),
        (None, None) => unreachable!("method selects at least one solver"),
    };
    let report = qsl_report(&trajectory).map_err(|e| e.to_string());
    Ok(PointOutcome {
        bound_states,
        isolated,
        trajectory,
        eigen_trajectory,
        solver_deviation,
        report,
    })
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&[
        "t",
        "re_c",
        "im_c",
        "pop",
        "pop_rate",
        "gamma",
        "omega_shift",
        "rate_valid",
    ]);
    for i in 0..traj.len() {
        let c = traj.amplitudes[i];
        t.push(vec![
            Cell::Num(traj.grid.time(i)),
            Cell::Num(c.re),
            Cell::Num(c.im),
            Cell::Num(traj.populations[i]),
            Cell::Num(traj.pop_rates[i]),
            Cell::Num(traj.gamma[i]),
            Cell::Num(traj.omega_shift[i]),
            Cell::Bool(traj.rate_valid[i]),
        ]);
    }
    t
}

fn late_mean(traj: &Trajectory) -> f64 {
    let n = traj.len();
    let start = n - 1 - (n - 1) / 8;
    let tail = &traj.populations[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn energies(states: &[BoundState]) -> Cell {
    Cell::List(states.iter().map(|b| b.energy).collect())
}

fn weights(states: &[BoundState]) -> Cell {
    Cell::List(states.iter().map(|b| b.weight).collect())
}

fn report_entries(cfg: &RunConfig, out: &PointOutcome) -> Result<Vec<(String, Cell)>, CliError> {
    let mut e: Vec<(String, Cell)> = Vec::new();
    let mut put = |k: &str, v: Cell| e.push((k.to_string(), v));
    put(
        "units",
        Cell::Text("frequency: omega_c, time: 1/omega_c".into()),
    );
    put("model", Cell::Text(cfg.model.to_string()));
    put("method", Cell::Text(cfg.method.to_string()));
    put("omega0", Cell::Num(cfg.omega0));
    match cfg.model {
        Model::Ohmic => {
            put("eta", Cell::Num(cfg.eta));
            put("s", Cell::Num(cfg.s));
            put(
                "critical_coupling",
                Cell::Num(critical_coupling(cfg.s, cfg.omega0, cfg.omega_c)?),
            );
        }
        Model::Array => {
            put("g", Cell::Num(cfg.g));
            put("xi", Cell::Num(cfg.xi));
            put("n_modes", Cell::Int(cfg.n_modes));
        }
        Model::DiscreteFile => {}
    }
    put("tau", Cell::Num(cfg.tau));
    put("dt", Cell::Num(cfg.dt));
    put("bound_states", Cell::Int(out.bound_states.len()));
    put("bound_state_energies", energies(&out.bound_states));
    put("bound_state_weights", weights(&out.bound_states));
    if let Some(iso) = &out.isolated {
        put("isolated_eigenvalues", Cell::Int(iso.len()));
        put("isolated_energies", energies(iso));
        put("isolated_weights", weights(iso));
    }
    match steady_state_prediction(&out.bound_states) {
        Ok(SteadyStatePrediction::DecayToZero) => {
            put("steady_state", Cell::Text("decay-to-zero".into()))
        }
        Ok(SteadyStatePrediction::Plateau { population }) => {
            put("steady_state", Cell::Text("constant-plateau".into()));
            put("steady_state_plateau", Cell::Num(population));
        }
        Ok(SteadyStatePrediction::TwoStateOscillation {
            mean,
            amplitude,
            frequency,
        }) => {
            put("steady_state", Cell::Text("two-state-oscillation".into()));
            put("steady_state_mean", Cell::Num(mean));
            put("steady_state_amplitude", Cell::Num(amplitude));
            put("steady_state_frequency", Cell::Num(frequency));
        }
        Err(err) => put("steady_state", Cell::Text(format!("unsupported: {err}"))),
    }
    put(
        "late_mean_population",
        Cell::Num(late_mean(&out.trajectory)),
    );
    let osc = oscillation_frequency(&out.trajectory, default_window(&out.trajectory))?;
    put(
        "late_oscillation_frequency",
        Cell::Num(osc.map_or(f64::NAN, |o| o.frequency)),
    );
    if let Some(dev) = out.solver_deviation {
        put("solver_deviation", Cell::Num(dev));
    }
    if let Ok(r) = &out.report {
        put("final_population", Cell::Num(r.final_population));
        put("action_integral", Cell::Num(r.action_integral));
        put("qsl_time", Cell::Num(r.qsl_time));
        put("qsl_ratio", Cell::Num(r.qsl_ratio()));
        put("non_markovianity", Cell::Num(r.non_markovianity));
        put("identity_residual", Cell::Num(r.identity_residual));
        match r.trend {
            NonMarkovianTrend::Converged => {
                put("non_markovianity_trend", Cell::Text("converged".into()))
            }
            NonMarkovianTrend::Diverging { growth_rate } => {
                put("non_markovianity_trend", Cell::Text("diverging".into()));
                put("non_markovianity_growth_rate", Cell::Num(growth_rate));
            }
        }
    }
    Ok(e)
}

/// `solve`: trajectory table(s) plus a report. Returns the written paths.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if !cfg.axes.is_empty() {
        return Err(CliError::Config(
            "solve takes a single point; remove the [sweep] section or use sweep".into(),
        ));
    }
    let out = solve_point(cfg, None)?;
    let mut written = vec![write_file(&cfg.out_dir, "config.toml", &cfg.to_toml())?];
    let ext = extension(cfg.format, false);
    if cfg.write_trajectory {
        written.push(write_file(
            &cfg.out_dir,
            &format!("trajectory.{ext}"),
            &trajectory_table(&out.trajectory).render(cfg.format),
        )?);
        if let Some(e) = &out.eigen_trajectory {
            written.push(write_file(
                &cfg.out_dir,
                &format!("trajectory_eigen.{ext}"),
                &trajectory_table(e).render(cfg.format),
            )?);
        }
    }
    let entries = report_entries(cfg, &out)?;
    written.push(write_file(
        &cfg.out_dir,
        &format!("report.{}", extension(cfg.format, true)),
        &render_report(&entries, cfg.format),
    )?);
    if let Err(msg) = out.report {
        return Err(CliError::UndefinedQsl(msg));
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Ok,
    UndefinedQsl,
    SolverError(String),
}

impl PointStatus {
    fn label(&self) -> String {
        match self {
            PointStatus::Ok => "ok".into(),
            PointStatus::UndefinedQsl => "undefined-qsl".into(),
            PointStatus::SolverError(msg) => {
                format!("solver-error: {}", msg.replace([',', '\n'], ";"))
            }
        }
    }
}

/// One sweep point's summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub values: Vec<f64>,
    pub status: PointStatus,
    pub qsl_ratio: f64,
    pub non_markovianity: f64,
    pub converged: bool,
    pub growth_rate: f64,
    pub bound_states: Vec<BoundState>,
    pub isolated: Option<usize>,
    pub final_population: f64,
}

fn point_configs(cfg: &RunConfig) -> Vec<(Vec<f64>, RunConfig)> {
    let mut points = vec![(Vec::new(), cfg.clone())];
    for axis in &cfg.axes {
        points = points
            .into_iter()
            .flat_map(|(vals, c)| {
                axis.values().into_iter().map(move |v| {
                    let mut vals = vals.clone();
                    vals.push(v);
                    (vals, c.with_param(&axis.name, v))
                })
            })
            .collect();
    }
    points
}

fn env_key(cfg: &RunConfig) -> String {
    format!(
        "{:?}|{:e}|{:e}|{:e}|{:e}|{:e}|{}|{:e}|{:e}",
        cfg.model, cfg.eta, cfg.s, cfg.omega_c, cfg.g, cfg.xi, cfg.n_modes, cfg.tau, cfg.dt
    )
}

/// Computes every grid point of the configured axes on `jobs` workers.
/// Output order follows the axes (first axis outermost) regardless of `jobs`.
pub fn sweep_points(cfg: &RunConfig, jobs: usize) -> Result<Vec<SweepPoint>, CliError> {
    let points = point_configs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        // Correlation tables depend only on the bath and the grid; share them.
        let mut unique: BTreeMap<String, RunConfig> = BTreeMap::new();
        if matches!(cfg.method, Method::Volterra | Method::Both) {
            for (_, c) in &points {
                unique.entry(env_key(c)).or_insert_with(|| c.clone());
            }
        }
        let kernels: BTreeMap<String, Arc<Vec<C64>>> = unique
            .into_par_iter()
            .filter_map(|(key, c)| {
                let env = c.environment().ok()?;
                let grid = TimeGrid::new(c.tau, c.dt).ok()?;
                Some((key, Arc::new(env.correlation_table(grid.len(), grid.dt()))))
            })
            .collect();
        Ok(points
            .par_iter()
            .map(|(values, c)| {
                let kernel = kernels.get(&env_key(c)).map(|k| k.as_slice());
                summarize(values.clone(), solve_point(c, kernel))
            })
            .collect())
    })
}

fn summarize(values: Vec<f64>, outcome: Result<PointOutcome, CliError>) -> SweepPoint {
    let mut point = SweepPoint {
        values,
        status: PointStatus::Ok,
        qsl_ratio: f64::NAN,
        non_markovianity: f64::NAN,
        converged: false,
        growth_rate: f64::NAN,
        bound_states: Vec::new(),
        isolated: None,
        final_population: f64::NAN,
    };
    match outcome {
        Err(e) => point.status = PointStatus::SolverError(e.to_string()),
        Ok(out) => {
            point.bound_states = out.bound_states;
            point.isolated = out.isolated.map(|v| v.len());
            point.final_population = *out.trajectory.populations.last().expect("non-empty");
            match out.report {
                Ok(r) => {
                    point.qsl_ratio = r.qsl_ratio();
                    point.non_markovianity = r.non_markovianity;
                    point.converged = r.converged();
                    point.growth_rate = match r.trend {
                        NonMarkovianTrend::Converged => 0.0,
                        NonMarkovianTrend::Diverging { growth_rate } => growth_rate,
                    };
                }
                Err(_) => point.status = PointStatus::UndefinedQsl,
            }
        }
    }
    point
}

fn grid_table(cfg: &RunConfig, points: &[SweepPoint], critical: bool) -> Table {
    let mut header: Vec<&str> = cfg.axes.iter().map(|a| a.name.as_str()).collect();
    header.extend([
        "status",
        "qsl_ratio",
        "non_markovianity",
        "n_converged",
        "n_growth_rate",
        "bound_states",
        "isolated_eigenvalues",
        "bound_state_energies",
        "final_population",
    ]);
    if critical {
        header.push("critical_omega0");
    }
    let mut t = Table::new(&header);
    for p in points {
        let mut row: Vec<Cell> = p.values.iter().map(|&v| Cell::Num(v)).collect();
        row.extend([
            Cell::Text(p.status.label()),
            Cell::Num(p.qsl_ratio),
            Cell::Num(p.non_markovianity),
            Cell::Bool(p.converged),
            Cell::Num(p.growth_rate),
            Cell::Int(p.bound_states.len()),
            p.isolated.map_or(Cell::Text(String::new()), Cell::Int),
            energies(&p.bound_states),
            Cell::Num(p.final_population),
        ]);
        if critical {
            let s = cfg
                .axes
                .iter()
                .position(|a| a.name == "s")
                .map_or(cfg.s, |i| p.values[i]);
            let value = if cfg.model == Model::Ohmic {
                cfg.eta * cfg.omega_c * quad::gamma(s)
            } else {
                f64::NAN
            };
            row.push(Cell::Num(value));
        }
        t.push(row);
    }
    t
}

/// `sweep`: one row per point along exactly one axis.
pub fn cmd_sweep(cfg: &RunConfig, jobs: usize) -> Result<(PathBuf, Vec<SweepPoint>), CliError> {
    if cfg.axes.len() != 1 {
        return Err(CliError::Config(format!(
            "sweep needs exactly one axis, got {}",
            cfg.axes.len()
        )));
    }
    let points = sweep_points(cfg, jobs)?;
    write_file(&cfg.out_dir, "config.toml", &cfg.to_toml())?;
    let path = write_file(
        &cfg.out_dir,
        &format!("sweep.{}", extension(cfg.format, false)),
        &grid_table(cfg, &points, false).render(cfg.format),
    )?;
    Ok((path, points))
}

/// `phase-diagram`: two axes plus the analytic boundary `ω₀ = η ω_c Γ(s)`.
pub fn cmd_phase_diagram(
    cfg: &RunConfig,
    jobs: usize,
) -> Result<(PathBuf, Vec<SweepPoint>), CliError> {
    if cfg.axes.len() != 2 {
        return Err(CliError::Config(format!(
            "phase-diagram needs exactly two axes, got {}",
            cfg.axes.len()
        )));
    }
    let points = sweep_points(cfg, jobs)?;
    write_file(&cfg.out_dir, "config.toml", &cfg.to_toml())?;
    let path = write_file(
        &cfg.out_dir,
        &format!("phase_diagram.{}", extension(cfg.format, false)),
        &grid_table(cfg, &points, true).render(cfg.format),
    )?;
    Ok((path, points))
}

fn band_edges(env: &Environment) -> (f64, f64) {
    match env {
        Environment::Ohmic(_) => (0.0, f64::INFINITY),
        Environment::Array(a) => a.band_edges(),
        Environment::Discrete(d) => (
            d.mode_freqs()[0],
            *d.mode_freqs().last().expect("non-empty"),
        ),
    }
}

/// `spectrum`: bound states (continuum models or any sweep) or the full
/// eigenvalue list of a discrete bath.
pub fn cmd_spectrum(cfg: &RunConfig, jobs: usize) -> Result<(PathBuf, Table), CliError> {
    let search = BoundStateSearch {
        weight_threshold: cfg.weight_threshold,
    };
    let table = if cfg.model == Model::Ohmic || !cfg.axes.is_empty() {
        if cfg.axes.len() > 1 {
            return Err(CliError::Config(
                "spectrum takes at most one sweep axis".into(),
            ));
        }
        let points = point_configs(cfg);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?;
        let rows: Vec<Result<Vec<Cell>, CliError>> = pool.install(|| {
            points
                .par_iter()
                .map(|(values, c)| {
                    let env = c.environment()?;
                    let states = find_bound_states_with(&env, c.omega0, search)?;
                    let (lo, hi) = band_edges(&env);
                    let isolated = match env.as_discrete() {
                        Some(bath) => Cell::Int(
                            arrowhead_eigensystem(&bath, c.omega0)?
                                .isolated(c.weight_threshold)
                                .len(),
                        ),
                        None => Cell::Text(String::new()),
                    };
                    let critical = if c.model == Model::Ohmic {
                        critical_coupling(c.s, c.omega0, c.omega_c)?
                    } else {
                        f64::NAN
                    };
                    let mut row: Vec<Cell> = values.iter().map(|&v| Cell::Num(v)).collect();
                    row.extend([
                        Cell::Int(states.len()),
                        energies(&states),
                        weights(&states),
                        isolated,
                        Cell::Num(lo),
                        Cell::Num(hi),
                        Cell::Num(critical),
                    ]);
                    Ok(row)
                })
                .collect()
        });
        let mut header: Vec<&str> = cfg.axes.iter().map(|a| a.name.as_str()).collect();
        header.extend([
            "bound_states",
            "bound_state_energies",
            "bound_state_weights",
            "isolated_eigenvalues",
            "band_lower",
            "band_upper",
            "critical_coupling",
        ]);
        let mut t = Table::new(&header);
        for row in rows {
            t.push(row?);
        }
        t
    } else {
        let eig = match cfg.model {
            Model::DiscreteFile => {
                let (freqs, couplings) =
                    super::read_bath_rows(cfg.bath_file.as_ref().expect("validated"))?;
                arrowhead_with_degeneracies(&freqs, &couplings, cfg.omega0)?
            }
            _ => {
                let array = ResonatorArray::new(cfg.g, cfg.xi, cfg.omega_c, cfg.n_modes)?;
                let per_mode = cfg.g / (cfg.n_modes as f64).sqrt();
                arrowhead_with_degeneracies(
                    &array.dispersion(),
                    &vec![per_mode; cfg.n_modes],
                    cfg.omega0,
                )?
            }
        };
        let isolated = eig.isolated(cfg.weight_threshold);
        let mut t = Table::new(&["index", "energy", "weight", "dark", "isolated"]);
        for i in 0..eig.len() {
            t.push(vec![
                Cell::Int(i),
                Cell::Num(eig.energies[i]),
                Cell::Num(eig.system_weights[i]),
                Cell::Bool(eig.dark[i]),
                Cell::Bool(isolated.contains(&i)),
            ]);
        }
        t
    };
    write_file(&cfg.out_dir, "config.toml", &cfg.to_toml())?;
    let path = write_file(
        &cfg.out_dir,
        &format!("spectrum.{}", extension(cfg.format, false)),
        &table.render(cfg.format),
    )?;
    Ok((path, table))
}
