//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, keys are case-sensitive. Pairs
//! given later (including command-line overrides) replace earlier ones.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::path::PathBuf;

use optoweak_core::analysis::{default_tau_max, ScanGrid};
use optoweak_core::{PointerSpec, PostSelection, C64};

/// Every accepted key, in serialization order.
pub const KEYS: &[&str] = &[
    "pointer",
    "alpha_re",
    "alpha_im",
    "r",
    "phi_sq",
    "z",
    "weights",
    "kappa",
    "kerr",
    "dim",
    "tau_max",
    "tau_points",
    "theta_points",
    "phi_points",
    "tau",
    "theta",
    "phi",
    "seed",
    "output",
    "threads",
];

pub const DEFAULT_KAPPA: f64 = 0.05;
pub const DEFAULT_TAU_POINTS: usize = 600;
pub const DEFAULT_THETA_POINTS: usize = 41;
pub const DEFAULT_PHI_POINTS: usize = 81;
pub const THREADS_ENV: &str = "OPTOWEAK_THREADS";

/// Where a value came from: a line of the config file, or the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    CommandLine,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::CommandLine => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at {origin}, key `{key}`: {message}")]
pub struct ConfigError {
    pub origin: Origin,
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pointer: PointerSpec,
    pub kappa: f64,
    pub kerr: bool,
    /// Fock-space size; sized automatically when absent.
    pub dim: Option<usize>,
    /// Upper end of the τ axis; `max(4π, 3/κ)` when absent.
    pub tau_max: Option<f64>,
    pub tau_points: usize,
    pub theta_points: usize,
    pub phi_points: usize,
    /// Single-point settings for `condition`.
    pub tau: f64,
    pub theta: f64,
    pub phi: f64,
    /// Recorded for provenance; every computation is deterministic.
    pub seed: u64,
    /// CSV destination; standard output when absent.
    pub output: Option<PathBuf>,
    /// Scan worker threads; falls back to `OPTOWEAK_THREADS`, then 1.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pointer: PointerSpec::Ground,
            kappa: DEFAULT_KAPPA,
            kerr: true,
            dim: None,
            tau_max: None,
            tau_points: DEFAULT_TAU_POINTS,
            theta_points: DEFAULT_THETA_POINTS,
            phi_points: DEFAULT_PHI_POINTS,
            tau: PI,
            theta: FRAC_PI_4,
            phi: PI,
            seed: 0,
            output: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn tau_max(&self) -> f64 {
        self.tau_max.unwrap_or_else(|| default_tau_max(self.kappa))
    }

    pub fn tau_values(&self) -> Vec<f64> {
        let n = self.tau_points;
        let hi = self.tau_max();
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
    }

    pub fn grid(&self) -> ScanGrid {
        ScanGrid::with_points(self.kappa, self.tau_max(), self.tau_points, self.theta_points, self.phi_points)
    }

    pub fn resolved_threads(&self) -> usize {
        self.threads
            .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0))
            .unwrap_or(1)
    }
}

/// Raw pairs with their origin, before interpretation.
#[derive(Debug, Clone, Default)]
pub struct Pairs(BTreeMap<String, (Origin, String)>);

impl Pairs {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Pairs::default();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::Line(i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError { origin, key: line.to_string(), message: "expected `key = value`".into() });
            };
            pairs.set(key.trim(), value.trim(), origin)?;
        }
        Ok(pairs)
    }

    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError { origin, key: key.to_string(), message: "unknown key".into() });
        }
        self.0.insert(key.to_string(), (origin, value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&(Origin, String)> {
        self.0.get(key)
    }

    fn value<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((origin, v)) => {
                parse(v).map(Some).map_err(|message| ConfigError { origin: *origin, key: key.to_string(), message })
            }
        }
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let origin = self.get(key).map_or(Origin::CommandLine, |(o, _)| *o);
        ConfigError { origin, key: key.to_string(), message: message.into() }
    }

    pub fn build(&self) -> Result<RunConfig, ConfigError> {
        let d = RunConfig::default();
        let real = |key: &str| self.value(key, parse_real);
        let count = |key: &str| self.value(key, parse_count);

        let kappa = real("kappa")?.unwrap_or(d.kappa);
        if kappa < 0.0 {
            return Err(self.error("kappa", "must be >= 0"));
        }
        let kerr = self.value("kerr", parse_flag)?.unwrap_or(d.kerr);
        let dim = count("dim")?;
        if dim.is_some_and(|n| n < 2) {
            return Err(self.error("dim", "must be >= 2"));
        }
        let tau_max = real("tau_max")?;
        if tau_max.is_some_and(|t| t < 0.0) {
            return Err(self.error("tau_max", "must be >= 0"));
        }
        let tau_points = count("tau_points")?.unwrap_or(d.tau_points);
        let theta_points = count("theta_points")?.unwrap_or(d.theta_points);
        let phi_points = count("phi_points")?.unwrap_or(d.phi_points);
        for (key, n) in [("tau_points", tau_points), ("theta_points", theta_points), ("phi_points", phi_points)] {
            if n == 0 {
                return Err(self.error(key, "must be >= 1"));
            }
        }
        let tau = real("tau")?.unwrap_or(d.tau);
        if tau < 0.0 {
            return Err(self.error("tau", "must be >= 0"));
        }
        let theta = real("theta")?.unwrap_or(d.theta);
        let phi = real("phi")?.unwrap_or(d.phi);
        if let Err(e) = PostSelection::new(theta, d.phi) {
            return Err(self.error("theta", e.to_string()));
        }
        if let Err(e) = PostSelection::new(d.theta, phi) {
            return Err(self.error("phi", e.to_string()));
        }
        let seed = self.value("seed", |v| v.parse::<u64>().map_err(|e| e.to_string()))?.unwrap_or(d.seed);
        let output = self.value("output", |v| Ok(PathBuf::from(v)))?;
        let threads = count("threads")?;
        if threads == Some(0) {
            return Err(self.error("threads", "must be >= 1"));
        }

        Ok(RunConfig {
            pointer: self.pointer()?,
            kappa,
            kerr,
            dim,
            tau_max,
            tau_points,
            theta_points,
            phi_points,
            tau,
            theta,
            phi,
            seed,
            output,
            threads,
        })
    }

    fn pointer(&self) -> Result<PointerSpec, ConfigError> {
        let real = |key: &str| self.value(key, parse_real);
        let alpha = || -> Result<C64, ConfigError> {
            Ok(C64::new(real("alpha_re")?.unwrap_or(0.0), real("alpha_im")?.unwrap_or(0.0)))
        };
        let squeeze = || -> Result<(f64, f64), ConfigError> {
            let r = real("r")?.unwrap_or(0.0);
            if r < 0.0 {
                return Err(self.error("r", "must be >= 0"));
            }
            Ok((r, real("phi_sq")?.unwrap_or(0.0)))
        };
        let kind = self.value("pointer", |v| Ok(v.to_string()))?.unwrap_or_else(|| "ground".into());
        let spec = match kind.as_str() {
            "ground" => PointerSpec::Ground,
            "coherent" => PointerSpec::Coherent { alpha: alpha()? },
            "squeezed" => {
                let (r, phi) = squeeze()?;
                PointerSpec::Squeezed { r, phi }
            }
            "coherent_squeezed" => {
                let (r, phi) = squeeze()?;
                PointerSpec::CoherentSqueezed { alpha: alpha()?, r, phi }
            }
            "thermal" => {
                let z = real("z")?.unwrap_or(0.0);
                if !(0.0..1.0).contains(&z) {
                    return Err(self.error("z", format!("must satisfy 0 <= z < 1, got {z}")));
                }
                PointerSpec::Thermal { z }
            }
            "fock_mixture" => {
                let weights = self.value("weights", parse_list)?.unwrap_or_else(|| vec![1.0]);
                let spec = PointerSpec::FockMixture { weights };
                spec.validate().map_err(|e| self.error("weights", e.to_string()))?;
                spec
            }
            other => return Err(self.error("pointer", format!("unknown pointer `{other}`"))),
        };
        spec.validate().map_err(|e| self.error("pointer", e.to_string()))?;
        Ok(spec)
    }
}

fn parse_real(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn parse_count(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn parse_flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a flag (use true/false or on/off)")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| parse_real(s.trim())).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    Pairs::parse(text)?.build()
}

/// Renders `config` so that [`parse_config`] returns it unchanged.
pub fn serialize(config: &RunConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    put("pointer", config.pointer.kind().to_string());
    match &config.pointer {
        PointerSpec::Ground => {}
        PointerSpec::Coherent { alpha } => {
            put("alpha_re", alpha.re.to_string());
            put("alpha_im", alpha.im.to_string());
        }
        PointerSpec::Squeezed { r, phi } => {
            put("r", r.to_string());
            put("phi_sq", phi.to_string());
        }
        PointerSpec::CoherentSqueezed { alpha, r, phi } => {
            put("alpha_re", alpha.re.to_string());
            put("alpha_im", alpha.im.to_string());
            put("r", r.to_string());
            put("phi_sq", phi.to_string());
        }
        PointerSpec::Thermal { z } => put("z", z.to_string()),
        PointerSpec::FockMixture { weights } => {
            put("weights", weights.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        }
    }
    put("kappa", config.kappa.to_string());
    put("kerr", config.kerr.to_string());
    if let Some(d) = config.dim {
        put("dim", d.to_string());
    }
    if let Some(t) = config.tau_max {
        put("tau_max", t.to_string());
    }
    put("tau_points", config.tau_points.to_string());
    put("theta_points", config.theta_points.to_string());
    put("phi_points", config.phi_points.to_string());
    put("tau", config.tau.to_string());
    put("theta", config.theta.to_string());
    put("phi", config.phi.to_string());
    put("seed", config.seed.to_string());
    if let Some(p) = &config.output {
        put("output", p.display().to_string());
    }
    if let Some(n) = config.threads {
        put("threads", n.to_string());
    }
    out
}
