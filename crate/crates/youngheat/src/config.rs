//! Experiment configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # comment
//! model = affine
//! b = 0.5
//! H = 0.75
//! N = 256
//! M = 1000
//! seed = 7
//! t_grid = geometric:0.05:0.8:8
//! ```
//!
//! The canonical serialization lists every key except `output_dir` in a
//! fixed order; its SHA-256 identifies the experiment in every manifest.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use youngheat_core::malliavin::Bandwidth;
use youngheat_core::HurstParam;

use crate::error::{AppError, AppResult};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "YOUNGHEAT_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeGrid {
    /// `count` points, geometric from `hi` down to `lo`.
    Geometric {
        lo: f64,
        hi: f64,
        count: usize,
    },
    List(Vec<f64>),
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            TimeGrid::Geometric { lo, hi, count } => youngheat_core::asymptotics::geometric_between(*lo, *hi, *count),
            TimeGrid::List(v) => v.clone(),
        }
    }

    pub fn parse(s: &str) -> AppResult<Self> {
        if let Some(rest) = s.strip_prefix("geometric:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(AppError::Config(format!("t_grid `{s}`: expected geometric:lo:hi:count")));
            }
            let lo = parse_f64("t_grid", parts[0])?;
            let hi = parse_f64("t_grid", parts[1])?;
            let count = parse_usize("t_grid", parts[2])?;
            if !(lo > 0.0 && hi >= lo && count > 0) {
                return Err(AppError::Config(format!("t_grid `{s}`: need 0 < lo <= hi and count > 0")));
            }
            return Ok(TimeGrid::Geometric { lo, hi, count });
        }
        let v = parse_list("t_grid", s)?;
        if v.is_empty() || v.iter().any(|t| !(*t > 0.0)) {
            return Err(AppError::Config("t_grid needs positive times".into()));
        }
        Ok(TimeGrid::List(v))
    }

    fn render(&self) -> String {
        match self {
            TimeGrid::Geometric { lo, hi, count } => format!("geometric:{lo:?}:{hi:?}:{count}"),
            TimeGrid::List(v) => render_list(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Built-in model name or `table:<path>`.
    pub model: String,
    /// Drift constant of the one-dimensional built-ins.
    pub b: Option<f64>,
    pub hurst: f64,
    pub steps: usize,
    /// Monte-Carlo sample count; unset means the command's own default.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Driver dimension for `sample`.
    pub dims: usize,
    pub a: Option<Vec<f64>>,
    pub a_prime: Option<Vec<f64>>,
    /// Time horizon of single-time density estimates.
    pub t: f64,
    /// Evaluation points of density estimates; defaults to `a_prime`.
    pub points: Option<Vec<Vec<f64>>>,
    pub t_grid: TimeGrid,
    /// Lattice cutoff; defaults depend on the command.
    pub cutoff: Option<f64>,
    pub kappa_max: f64,
    pub bandwidth: Bandwidth,
    pub nodes: usize,
    pub output_dir: PathBuf,
    /// SHA-256 of a coefficient table, filled in when the model is loaded.
    pub model_digest: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "affine".into(),
            b: None,
            hurst: 0.75,
            steps: 256,
            samples: None,
            seed: 1,
            dims: 1,
            a: None,
            a_prime: None,
            t: 0.5,
            points: None,
            t_grid: TimeGrid::Geometric { lo: 0.05, hi: 0.8, count: 8 },
            cutoff: None,
            kappa_max: 2.0,
            bandwidth: Bandwidth::Silverman,
            nodes: youngheat_core::cameron_martin::DEFAULT_NODES,
            output_dir: PathBuf::from("out"),
            model_digest: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> AppResult<f64> {
    v.trim().parse::<f64>().map_err(|_| AppError::Config(format!("{key}: `{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> AppResult<usize> {
    v.trim().parse::<usize>().map_err(|_| AppError::Config(format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> AppResult<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn render_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn parse_bandwidth(v: &str) -> AppResult<Bandwidth> {
    let v = v.trim();
    if v == "silverman" {
        Ok(Bandwidth::Silverman)
    } else if let Some(f) = v.strip_prefix("scale:") {
        Ok(Bandwidth::Scaled(parse_f64("bandwidth", f)?))
    } else if let Some(f) = v.strip_prefix("fixed:") {
        Ok(Bandwidth::Fixed(parse_f64("bandwidth", f)?))
    } else {
        Err(AppError::Config(format!("bandwidth `{v}`: expected silverman, scale:<f> or fixed:<h>")))
    }
}

fn render_bandwidth(b: &Bandwidth) -> String {
    match b {
        Bandwidth::Silverman => "silverman".into(),
        Bandwidth::Scaled(f) => format!("scale:{f:?}"),
        Bandwidth::Fixed(h) => format!("fixed:{h:?}"),
    }
}

pub fn parse_points(v: &str) -> AppResult<Vec<Vec<f64>>> {
    v.split(';').filter(|s| !s.trim().is_empty()).map(|p| parse_list("points", p)).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(AppError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> AppResult<()> {
        match key {
            "model" => self.model = value.to_string(),
            "b" => self.b = Some(parse_f64(key, value)?),
            "H" => self.hurst = parse_f64(key, value)?,
            "N" => self.steps = parse_usize(key, value)?,
            "M" => self.samples = Some(parse_usize(key, value)?),
            "seed" => {
                self.seed = value.parse().map_err(|_| AppError::Config(format!("seed: `{value}` is not a u64")))?
            }
            "dims" => self.dims = parse_usize(key, value)?,
            "a" => self.a = Some(parse_list(key, value)?),
            "a_prime" => self.a_prime = Some(parse_list(key, value)?),
            "t" => self.t = parse_f64(key, value)?,
            "points" => self.points = Some(parse_points(value)?),
            "t_grid" => self.t_grid = TimeGrid::parse(value)?,
            "cutoff" => self.cutoff = Some(parse_f64(key, value)?),
            "kappa_max" => self.kappa_max = parse_f64(key, value)?,
            "bandwidth" => self.bandwidth = parse_bandwidth(value)?,
            "nodes" => self.nodes = parse_usize(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "model_sha256" => self.model_digest = Some(value.to_string()),
            _ => return Err(AppError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> AppResult<HurstParam> {
        let h = HurstParam::new(self.hurst).map_err(|e| AppError::Config(e.to_string()))?;
        if self.steps == 0 {
            return Err(AppError::Config("N must be at least 1".into()));
        }
        if self.samples == Some(0) {
            return Err(AppError::Config("M must be at least 1".into()));
        }
        if self.dims == 0 {
            return Err(AppError::Config("dims must be at least 1".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(AppError::Config("t must be positive".into()));
        }
        Ok(h)
    }

    /// Every key except `output_dir`, one per line, fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("model", self.model.clone());
        if let Some(d) = &self.model_digest {
            kv("model_sha256", d.clone());
        }
        if let Some(b) = self.b {
            kv("b", format!("{b:?}"));
        }
        kv("H", format!("{:?}", self.hurst));
        kv("N", self.steps.to_string());
        if let Some(m) = self.samples {
            kv("M", m.to_string());
        }
        kv("seed", self.seed.to_string());
        kv("dims", self.dims.to_string());
        if let Some(a) = &self.a {
            kv("a", render_list(a));
        }
        if let Some(a) = &self.a_prime {
            kv("a_prime", render_list(a));
        }
        kv("t", format!("{:?}", self.t));
        if let Some(p) = &self.points {
            kv("points", p.iter().map(|x| render_list(x)).collect::<Vec<_>>().join(";"));
        }
        kv("t_grid", self.t_grid.render());
        if let Some(c) = self.cutoff {
            kv("cutoff", format!("{c:?}"));
        }
        kv("kappa_max", format!("{:?}", self.kappa_max));
        kv("bandwidth", render_bandwidth(&self.bandwidth));
        kv("nodes", self.nodes.to_string());
        s
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    /// `M`, or `default` when unset.
    pub fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
