//! Flat `key=value` run configuration.
//!
//! Values come from an optional file (`#` starts a comment) and from
//! command-line flags; flags win. Every key is validated and defaults are
//! filled in, so [`RunConfig::summary_lines`] echoes a complete
//! configuration that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use heatsource_core::harness::BUILTIN_CASES;
use heatsource_core::Variant;

use crate::error::CliError;

/// Environment variable consulted when `out_dir` is not set.
pub const OUTDIR_ENV: &str = "HEATSOURCE_OUTDIR";

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "command",
    "case",
    "offset",
    "length",
    "t_final",
    "sensor",
    "n_x",
    "n_t",
    "i_x",
    "i_t",
    "alpha",
    "epsilon",
    "max_iters",
    "restart_period",
    "variant",
    "noise_level",
    "seed",
    "tol",
    "max_terms",
    "phi",
    "theta",
    "init_phi",
    "init_theta",
    "sweep_sizes",
    "sweep_sensors",
    "sweep_alphas",
    "jobs",
    "out_dir",
    "run_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Invert,
    Sweep,
    Sensitivity,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Invert => "invert",
            Command::Sweep => "sweep",
            Command::Sensitivity => "sensitivity",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" => Ok(Command::Forward),
            "invert" => Ok(Command::Invert),
            "sweep" => Ok(Command::Sweep),
            "sensitivity" => Ok(Command::Sensitivity),
            _ => Err(format!(
                "unknown command {s:?} (expected forward, invert, sweep or sensitivity)"
            )),
        }
    }
}

/// Where a raw value came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
    Default,
}

impl Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
            Origin::Default => f.write_str("default"),
        }
    }
}

/// Raw `key -> (value, origin)` pairs before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Parse {
                origin: origin.to_string(),
                message: format!("unknown key {key:?}"),
            });
        }
        self.values
            .insert(key.to_string(), (value.trim().to_string(), origin));
        Ok(())
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse_text(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: idx + 1,
            };
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Parse {
                    origin: origin.to_string(),
                    message: format!("expected key=value, found {line:?}"),
                });
            };
            self.set(key.trim(), value, origin)?;
        }
        Ok(())
    }

    pub fn read_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingFile(path.to_path_buf()),
            _ => CliError::Io(format!("{}: {e}", path.display())),
        })?;
        self.parse_text(&text, path)
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.values.get(key)
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub case: String,
    pub offset: f64,
    pub length: f64,
    pub t_final: f64,
    pub sensor: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub i_x: usize,
    pub i_t: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub restart_period: Option<usize>,
    pub variant: Variant,
    pub noise_level: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_terms: usize,
    pub phi: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub init_phi: Option<Vec<f64>>,
    pub init_theta: Option<Vec<f64>>,
    pub sweep_sizes: Vec<(usize, usize)>,
    pub sweep_sensors: Vec<f64>,
    pub sweep_alphas: Vec<f64>,
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub run_id: String,
}

fn parse_err(origin: &Origin, key: &str, value: &str, what: &str) -> CliError {
    CliError::Parse {
        origin: origin.to_string(),
        message: format!("{key} = {value:?} is not {what}"),
    }
}

fn range_err(key: &str, value: impl Display, range: &str) -> CliError {
    CliError::Range(format!(
        "{key} = {value} is outside its valid range {range}"
    ))
}

fn parse_list<T: FromStr>(value: &str) -> Option<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim().parse().ok())
        .collect::<Option<Vec<T>>>()
        .filter(|v| !v.is_empty())
}

fn parse_size(value: &str) -> Option<(usize, usize)> {
    let (a, b) = value.trim().split_once('x')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn list_string<T: Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_list_string(v: &Option<Vec<f64>>) -> String {
    v.as_deref().map_or_else(|| "none".to_string(), list_string)
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.raw.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse()
                .map(Some)
                .map_err(|_| parse_err(origin, key, v, what)),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.typed::<f64>(key, "a number")?.unwrap_or(default);
        if !v.is_finite() {
            return Err(range_err(key, v, "(finite)"));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, CliError> {
        let v = self
            .typed::<usize>(key, "a non-negative integer")?
            .unwrap_or(default);
        if v < min {
            return Err(range_err(key, v, &format!("[{min}, inf)")));
        }
        Ok(v)
    }

    fn opt_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.raw.get(key) {
            None => Ok(None),
            Some((v, _)) if v == "none" => Ok(None),
            Some((v, origin)) => parse_list(v)
                .map(Some)
                .ok_or_else(|| parse_err(origin, key, v, "a comma-separated list of numbers")),
        }
    }
}

impl RunConfig {
    /// Types, validates and completes `raw`. `env_out_dir` is the value of
    /// [`OUTDIR_ENV`], if set.
    pub fn resolve(raw: &RawConfig, env_out_dir: Option<&str>) -> Result<Self, CliError> {
        let r = Reader { raw };
        let command: Command = match raw.get("command") {
            Some((v, origin)) => v.parse().map_err(|message| CliError::Parse {
                origin: origin.to_string(),
                message,
            })?,
            None => {
                return Err(CliError::Usage(
                    "no command given (forward, invert, sweep or sensitivity)".into(),
                ))
            }
        };
        let case = raw
            .get("case")
            .map_or("sine_decay".to_string(), |(v, _)| v.clone());
        if !BUILTIN_CASES.contains(&case.as_str()) {
            return Err(CliError::Range(format!(
                "case = {case:?} is not one of {}",
                BUILTIN_CASES.join(", ")
            )));
        }

        let base = if command == Command::Sensitivity {
            heatsource_core::harness::sensitivity_geometry()
        } else {
            heatsource_core::harness::builtin_case(&case, None)?.geometry
        };
        let (dx, dt) = if command == Command::Sensitivity {
            (6, 5)
        } else {
            (12, 9)
        };

        let alpha = r.real("alpha", 1e-6)?;
        if alpha < 0.0 {
            return Err(range_err("alpha", alpha, "[0, inf)"));
        }
        let epsilon = r.real("epsilon", 1e-3)?;
        if epsilon <= 0.0 {
            return Err(range_err("epsilon", epsilon, "(0, inf)"));
        }
        let noise_level = r.real("noise_level", 0.0)?;
        if noise_level < 0.0 {
            return Err(range_err("noise_level", noise_level, "[0, inf)"));
        }
        let tol = r.real("tol", 1e-12)?;
        if tol <= 0.0 {
            return Err(range_err("tol", tol, "(0, inf)"));
        }
        let restart_period = match raw.get("restart_period") {
            None => None,
            Some((v, _)) if v == "none" || v == "0" => None,
            Some(_) => Some(r.count("restart_period", 0, 1)?),
        };
        let variant = match raw.get("variant") {
            None => Variant::default(),
            Some((v, origin)) => {
                v.parse()
                    .map_err(|e: heatsource_core::Error| CliError::Parse {
                        origin: origin.to_string(),
                        message: e.to_string(),
                    })?
            }
        };

        let sweep_sizes = match raw.get("sweep_sizes") {
            None => heatsource_core::harness::STUDY_SIZES.to_vec(),
            Some((v, origin)) => v
                .split(',')
                .map(parse_size)
                .collect::<Option<Vec<_>>>()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| parse_err(origin, "sweep_sizes", v, "a list like 6x5,12x9"))?,
        };
        if let Some(&(a, b)) = sweep_sizes.iter().find(|(a, b)| *a == 0 || *b == 0) {
            return Err(range_err(
                "sweep_sizes",
                format!("{a}x{b}"),
                "[1, inf) per entry",
            ));
        }
        let sweep_sensors = r
            .opt_list("sweep_sensors")?
            .unwrap_or_else(|| heatsource_core::harness::STUDY_SENSORS.to_vec());
        let sweep_alphas = r.opt_list("sweep_alphas")?.unwrap_or_else(|| vec![alpha]);
        if let Some(a) = sweep_alphas.iter().find(|a| a.is_nan() || **a < 0.0) {
            return Err(range_err("sweep_alphas", a, "[0, inf) per entry"));
        }

        let out_dir = match raw.get("out_dir") {
            Some((v, _)) => PathBuf::from(v),
            None => PathBuf::from(env_out_dir.unwrap_or("out")),
        };
        let run_id = raw
            .get("run_id")
            .map_or(command.as_str().to_string(), |(v, _)| v.clone());
        if run_id.is_empty() || run_id.contains(['/', '\\']) {
            return Err(CliError::Range(format!(
                "run_id = {run_id:?} must be a non-empty file-name prefix"
            )));
        }

        let cfg = RunConfig {
            command,
            case,
            offset: r.real("offset", base.offset)?,
            length: r.real("length", base.length)?,
            t_final: r.real("t_final", base.t_final)?,
            sensor: r.real("sensor", base.sensor)?,
            n_x: r.count("n_x", dx, 1)?,
            n_t: r.count("n_t", dt, 1)?,
            i_x: r.count("i_x", 100, 1)?,
            i_t: r.count("i_t", 100, 1)?,
            alpha,
            epsilon,
            max_iters: r.count("max_iters", 10_000, 1)?,
            restart_period,
            variant,
            noise_level,
            seed: r.typed("seed", "a non-negative integer")?.unwrap_or(42),
            tol,
            max_terms: r.count("max_terms", 10_000, 1)?,
            phi: r.opt_list("phi")?,
            theta: r.opt_list("theta")?,
            init_phi: r.opt_list("init_phi")?,
            init_theta: r.opt_list("init_theta")?,
            sweep_sizes,
            sweep_sensors,
            sweep_alphas,
            jobs: r.count("jobs", 1, 1)?,
            out_dir,
            run_id,
        };
        cfg.check_lists()?;
        // Geometry ranges are checked by the library.
        heatsource_core::Geometry::new(cfg.offset, cfg.length, cfg.t_final, cfg.sensor)?;
        Ok(cfg)
    }

    fn check_lists(&self) -> Result<(), CliError> {
        let pair = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>, na: &str, nb: &str| {
            if a.is_some() != b.is_some() {
                return Err(CliError::Range(format!(
                    "{na} and {nb} must be given together"
                )));
            }
            Ok(())
        };
        pair(&self.phi, &self.theta, "phi", "theta")?;
        pair(&self.init_phi, &self.init_theta, "init_phi", "init_theta")?;
        if let (Some(p), Some(t)) = (&self.init_phi, &self.init_theta) {
            if p.len() != self.n_t || t.len() != self.n_x {
                return Err(CliError::Range(format!(
                    "init_phi/init_theta have {}/{} entries but n_t/n_x are {}/{}",
                    p.len(),
                    t.len(),
                    self.n_t,
                    self.n_x
                )));
            }
        }
        Ok(())
    }

    /// `key=value` echo of every key, in [`KEYS`] order.
    pub fn summary_lines(&self) -> Vec<String> {
        let restart = self
            .restart_period
            .map_or_else(|| "none".to_string(), |p| p.to_string());
        let sizes = self
            .sweep_sizes
            .iter()
            .map(|(a, b)| format!("{a}x{b}"))
            .collect::<Vec<_>>()
            .join(",");
        let values: Vec<(&str, String)> = vec![
            ("command", self.command.as_str().into()),
            ("case", self.case.clone()),
            ("offset", self.offset.to_string()),
            ("length", self.length.to_string()),
            ("t_final", self.t_final.to_string()),
            ("sensor", self.sensor.to_string()),
            ("n_x", self.n_x.to_string()),
            ("n_t", self.n_t.to_string()),
            ("i_x", self.i_x.to_string()),
            ("i_t", self.i_t.to_string()),
            ("alpha", self.alpha.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("restart_period", restart),
            ("variant", self.variant.as_str().into()),
            ("noise_level", self.noise_level.to_string()),
            ("seed", self.seed.to_string()),
            ("tol", self.tol.to_string()),
            ("max_terms", self.max_terms.to_string()),
            ("phi", opt_list_string(&self.phi)),
            ("theta", opt_list_string(&self.theta)),
            ("init_phi", opt_list_string(&self.init_phi)),
            ("init_theta", opt_list_string(&self.init_theta)),
            ("sweep_sizes", sizes),
            ("sweep_sensors", list_string(&self.sweep_sensors)),
            ("sweep_alphas", list_string(&self.sweep_alphas)),
            ("jobs", self.jobs.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("run_id", self.run_id.clone()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        values
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect()
    }

    /// Re-reads the configuration echoed in a run summary; `result.*`
    /// lines are ignored.
    pub fn from_summary(text: &str, path: &Path) -> Result<Self, CliError> {
        let config: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with("result."))
            .map(|l| format!("{l}\n"))
            .collect();
        let mut raw = RawConfig::default();
        raw.parse_text(&config, path)?;
        RunConfig::resolve(&raw, None)
    }
}
