//! Run configuration: a sectioned key-value file (TOML syntax) with
//! `[system]`, `[environment]`, `[solver]`, `[sweep]` and `[output]` tables.
//!
//! Precedence is command-line flags, then the file, then the model defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::spectral::{DiscreteBath, Environment, OhmicFamily, ResonatorArray};
use crate::spectrum::DEFAULT_WEIGHT_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Ohmic,
    Array,
    DiscreteFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Volterra,
    Eigen,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    JsonLines,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Volterra => "volterra",
            Method::Eigen => "eigen",
            Method::Both => "both",
        })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Ohmic => "ohmic",
            Model::Array => "array",
            Model::DiscreteFile => "discrete-file",
        })
    }
}

/// Parameters a sweep axis may scan.
pub const SWEEPABLE: [&str; 6] = ["eta", "s", "omega0", "omega_c", "g", "xi"];

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    environment: RawEnvironment,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    omega0: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    model: Option<Model>,
    eta: Option<f64>,
    s: Option<f64>,
    omega_c: Option<f64>,
    g: Option<f64>,
    xi: Option<f64>,
    n_modes: Option<usize>,
    bath_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tau: Option<f64>,
    dt: Option<f64>,
    method: Option<Method>,
    discretize_modes: Option<usize>,
    discretize_omega_max: Option<f64>,
    weight_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Option<String>,
    min: Option<f64>,
    max: Option<f64>,
    points: Option<usize>,
    axis2: Option<String>,
    min2: Option<f64>,
    max2: Option<f64>,
    points2: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    format: Option<Format>,
    trajectory: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 || self.min == self.max {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub omega0: f64,
    pub eta: f64,
    pub s: f64,
    pub omega_c: f64,
    pub g: f64,
    pub xi: f64,
    pub n_modes: usize,
    pub bath_file: Option<PathBuf>,
    pub tau: f64,
    pub dt: f64,
    pub method: Method,
    pub discretize_modes: usize,
    pub discretize_omega_max: f64,
    pub weight_threshold: f64,
    pub axes: Vec<Axis>,
    pub out_dir: PathBuf,
    pub format: Format,
    pub write_trajectory: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub method: Option<Method>,
    pub format: Option<Format>,
    /// `section.key=value` assignments.
    pub set: Vec<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with(&text, Some(base), overrides)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_str_with(text, None, &Overrides::default())
    }

    pub fn from_str_with(
        text: &str,
        base: Option<&Path>,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        // Parse the text directly first so diagnostics carry line numbers.
        let mut raw: RawFile =
            toml::from_str(text).map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if !overrides.set.is_empty() {
            let mut table: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
            for assignment in &overrides.set {
                apply_assignment(&mut table, assignment)?;
            }
            raw = table.try_into_raw()?;
        }
        if let Some(dir) = &overrides.out_dir {
            raw.output.dir = Some(dir.clone());
        }
        if let Some(m) = overrides.method {
            raw.solver.method = Some(m);
        }
        if let Some(f) = overrides.format {
            raw.output.format = Some(f);
        }
        if let (Some(base), Some(file)) = (base, raw.environment.bath_file.as_mut()) {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Self::resolve(raw)
    }

    fn resolve(raw: RawFile) -> Result<Self, CliError> {
        let model = raw.environment.model.unwrap_or(Model::Ohmic);
        let array = model == Model::Array;
        let cfg = RunConfig {
            model,
            omega0: raw.system.omega0.unwrap_or(if array { 1.08 } else { 0.1 }),
            eta: raw.environment.eta.unwrap_or(0.2),
            s: raw.environment.s.unwrap_or(1.0),
            omega_c: raw.environment.omega_c.unwrap_or(1.0),
            g: raw.environment.g.unwrap_or(0.1),
            xi: raw.environment.xi.unwrap_or(0.05),
            n_modes: raw.environment.n_modes.unwrap_or(800),
            bath_file: raw.environment.bath_file,
            tau: raw.solver.tau.unwrap_or(if array { 2000.0 } else { 800.0 }),
            dt: raw.solver.dt.unwrap_or(if array { 0.05 } else { 0.02 }),
            method: raw.solver.method.unwrap_or(if array {
                Method::Eigen
            } else {
                Method::Volterra
            }),
            discretize_modes: raw.solver.discretize_modes.unwrap_or(4000),
            discretize_omega_max: raw.solver.discretize_omega_max.unwrap_or(20.0),
            weight_threshold: raw
                .solver
                .weight_threshold
                .unwrap_or(DEFAULT_WEIGHT_THRESHOLD),
            axes: resolve_axes(&raw.sweep)?,
            out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
            format: raw.output.format.unwrap_or(Format::Csv),
            write_trajectory: raw.output.trajectory.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("system.omega0", self.omega0)?;
        positive("environment.s", self.s)?;
        positive("environment.omega_c", self.omega_c)?;
        positive("environment.xi", self.xi)?;
        positive("solver.tau", self.tau)?;
        positive("solver.dt", self.dt)?;
        positive("solver.discretize_omega_max", self.discretize_omega_max)?;
        if !(self.eta >= 0.0 && self.g >= 0.0) {
            return Err(CliError::Config(
                "environment.eta and environment.g must be >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.weight_threshold) {
            return Err(CliError::Config(format!(
                "solver.weight_threshold must lie in [0, 1), got {}",
                self.weight_threshold
            )));
        }
        if self.model == Model::DiscreteFile && self.bath_file.is_none() {
            return Err(CliError::Config(
                "environment.bath_file is required for model = \"discrete-file\"".into(),
            ));
        }
        for axis in &self.axes {
            let allowed: &[&str] = match self.model {
                Model::Ohmic => &["eta", "s", "omega0", "omega_c"],
                Model::Array => &["g", "xi", "omega0", "omega_c"],
                Model::DiscreteFile => &["omega0"],
            };
            if !allowed.contains(&axis.name.as_str()) {
                return Err(CliError::Config(format!(
                    "sweep axis '{}' does not apply to model '{}' (allowed: {})",
                    axis.name,
                    self.model,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Copy with one named parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> RunConfig {
        let mut c = self.clone();
        match name {
            "eta" => c.eta = value,
            "s" => c.s = value,
            "omega0" => c.omega0 = value,
            "omega_c" => c.omega_c = value,
            "g" => c.g = value,
            "xi" => c.xi = value,
            other => unreachable!("unvalidated sweep axis {other}"),
        }
        c
    }

    pub fn param(&self, name: &str) -> f64 {
        match name {
            "eta" => self.eta,
            "s" => self.s,
            "omega0" => self.omega0,
            "omega_c" => self.omega_c,
            "g" => self.g,
            "xi" => self.xi,
            other => unreachable!("unvalidated sweep axis {other}"),
        }
    }

    pub fn environment(&self) -> Result<Environment, CliError> {
        Ok(match self.model {
            Model::Ohmic => OhmicFamily::new(self.eta, self.s, self.omega_c)?.into(),
            Model::Array => {
                ResonatorArray::new(self.g, self.xi, self.omega_c, self.n_modes)?.into()
            }
            Model::DiscreteFile => {
                read_bath_file(self.bath_file.as_ref().expect("validated"))?.into()
            }
        })
    }

    /// Serialises the resolved configuration; parsing it back yields an equal value.
    pub fn to_toml(&self) -> String {
        let mut sweep = RawSweep::default();
        if let Some(a) = self.axes.first() {
            sweep.axis = Some(a.name.clone());
            sweep.min = Some(a.min);
            sweep.max = Some(a.max);
            sweep.points = Some(a.points);
        }
        if let Some(a) = self.axes.get(1) {
            sweep.axis2 = Some(a.name.clone());
            sweep.min2 = Some(a.min);
            sweep.max2 = Some(a.max);
            sweep.points2 = Some(a.points);
        }
        let raw = RawFile {
            system: RawSystem {
                omega0: Some(self.omega0),
            },
            environment: RawEnvironment {
                model: Some(self.model),
                eta: Some(self.eta),
                s: Some(self.s),
                omega_c: Some(self.omega_c),
                g: Some(self.g),
                xi: Some(self.xi),
                n_modes: Some(self.n_modes),
                bath_file: self.bath_file.clone(),
            },
            solver: RawSolver {
                tau: Some(self.tau),
                dt: Some(self.dt),
                method: Some(self.method),
                discretize_modes: Some(self.discretize_modes),
                discretize_omega_max: Some(self.discretize_omega_max),
                weight_threshold: Some(self.weight_threshold),
            },
            sweep,
            output: RawOutput {
                dir: Some(self.out_dir.clone()),
                format: Some(self.format),
                trajectory: Some(self.write_trajectory),
            },
        };
        let body = toml::to_string(&raw).expect("config is always serialisable");
        format!("# frequencies in units of omega_c, times in units of 1/omega_c\n{body}")
    }
}

trait IntoRaw {
    fn try_into_raw(self) -> Result<RawFile, CliError>;
}

impl IntoRaw for toml::Table {
    fn try_into_raw(self) -> Result<RawFile, CliError> {
        RawFile::deserialize(toml::Value::Table(self)).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn resolve_axes(sweep: &RawSweep) -> Result<Vec<Axis>, CliError> {
    let mut axes = Vec::new();
    let specs = [
        ("", &sweep.axis, sweep.min, sweep.max, sweep.points),
        ("2", &sweep.axis2, sweep.min2, sweep.max2, sweep.points2),
    ];
    for (suffix, name, min, max, points) in specs {
        let Some(name) = name else {
            if min.is_some() || max.is_some() || points.is_some() {
                return Err(CliError::Config(format!(
                    "sweep.min{suffix}/max{suffix}/points{suffix} given without sweep.axis{suffix}"
                )));
            }
            continue;
        };
        if !SWEEPABLE.contains(&name.as_str()) {
            return Err(CliError::Config(format!(
                "sweep.axis{suffix} = '{name}' is not a parameter (expected one of {})",
                SWEEPABLE.join(", ")
            )));
        }
        let (Some(min), Some(max)) = (min, max) else {
            return Err(CliError::Config(format!(
                "sweep.axis{suffix} needs sweep.min{suffix} and sweep.max{suffix}"
            )));
        };
        let points = points.unwrap_or(if min == max { 1 } else { 11 });
        if points == 0 || (points == 1 && min != max) || max < min {
            return Err(CliError::Config(format!(
                "sweep axis '{name}': need min <= max and points >= 2 unless min = max"
            )));
        }
        if axes.iter().any(|a: &Axis| a.name == *name) {
            return Err(CliError::Config(format!("sweep axis '{name}' given twice")));
        }
        axes.push(Axis {
            name: name.clone(),
            min,
            max,
            points,
        });
    }
    if sweep.axis.is_none() && sweep.axis2.is_some() {
        return Err(CliError::Config(
            "sweep.axis2 given without sweep.axis".into(),
        ));
    }
    Ok(axes)
}

fn apply_assignment(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "--set expects section.key=value, got '{assignment}'"
        ))
    })?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Config(format!("--set key must be section.key, got '{key}'")))?;
    let value = value.trim();
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(inner) = entry else {
        return Err(CliError::Config(format!("'{section}' is not a section")));
    };
    inner.insert(field.to_string(), parsed);
    Ok(())
}

/// Reads `omega,g` rows (header optional, `#` comments allowed); coincident
/// frequencies are merged. An empty file yields an empty list.
pub fn read_bath_rows(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read bath file {}: {e}", path.display())))?;
    let mut freqs = Vec::new();
    let mut couplings = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                freqs.push(v[0]);
                couplings.push(v[1]);
            }
            None if freqs.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(CliError::Config(format!(
                    "{}:{}: expected two numbers 'omega,g', got '{line}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok((freqs, couplings))
}

fn read_bath_file(path: &Path) -> Result<DiscreteBath, CliError> {
    let (freqs, couplings) = read_bath_rows(path)?;
    Ok(DiscreteBath::merged(&freqs, &couplings)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_model() {
        let ohmic = RunConfig::parse("").unwrap();
        assert_eq!(
            (ohmic.omega0, ohmic.eta, ohmic.tau, ohmic.dt),
            (0.1, 0.2, 800.0, 0.02)
        );
        let array = RunConfig::parse("[environment]\nmodel = \"array\"\n").unwrap();
        assert_eq!(
            (array.omega0, array.xi, array.n_modes, array.method),
            (1.08, 0.05, 800, Method::Eigen)
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let cfg = RunConfig::parse(
            "[environment]\neta = 0.123456789\n[sweep]\naxis = \"eta\"\nmin = 0.02\nmax = 0.2\npoints = 19\n",
        )
        .unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_toml(), again.to_toml());
    }

    #[test]
    fn rejects_bad_keys_and_axes() {
        let err = RunConfig::parse("[solver]\nstep = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
        assert!(RunConfig::parse("[sweep]\naxis = \"temperature\"\nmin = 0\nmax = 1\n").is_err());
        assert!(RunConfig::parse("[sweep]\naxis = \"g\"\nmin = 0\nmax = 1\n").is_err());
        assert!(RunConfig::parse("[sweep]\nmin = 0\n").is_err());
        assert!(RunConfig::parse("[system]\nomega0 = -1\n").is_err());
        assert!(RunConfig::parse("[environment]\nmodel = \"discrete-file\"\n").is_err());
        let err = RunConfig::parse("[system]\nomega0 = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides {
            method: Some(Method::Both),
            set: vec![
                "environment.eta=0.05".into(),
                "output.dir=\"elsewhere\"".into(),
            ],
            ..Default::default()
        };
        let cfg = RunConfig::from_str_with(
            "[environment]\neta = 0.3\n[solver]\nmethod = \"eigen\"\n",
            None,
            &ov,
        )
        .unwrap();
        assert_eq!(cfg.eta, 0.05);
        assert_eq!(cfg.method, Method::Both);
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn axis_values() {
        let a = Axis {
            name: "eta".into(),
            min: 0.02,
            max: 0.2,
            points: 19,
        };
        let v = a.values();
        assert_eq!(v.len(), 19);
        assert_eq!(v[18], 0.2);
        assert!((v[8] - 0.1).abs() < 1e-15);
        assert_eq!(
            Axis {
                name: "eta".into(),
                min: 0.1,
                max: 0.1,
                points: 1
            }
            .values(),
            vec![0.1]
        );
    }
}
