//! Named coefficient systems and user models read from coefficient tables.
//!
//! A table lists polynomial terms, one per line:
//!
//! ```text
//! dims 1 1              # n d
//! derivatives fd 1e-3 3 # finite-difference step and highest order
//! # field component coefficient exponent_1 ... exponent_n
//! 0 0 0.5 0
//! 1 0 1.0 0
//! 1 0 0.1 2
//! ```
//!
//! Field `0` is the drift, fields `1..=d` the columns of sigma. Derivatives
//! are taken by central differences, not from the polynomial.

use std::path::Path;

use youngheat_core::models::{self, SeparableSystem};
use youngheat_core::VectorFieldSystem;

use crate::config::sha256_hex;
use crate::error::{AppError, AppResult};

pub const BUILTIN_MODELS: &[&str] =
    &["affine", "1d-sin", "2d-commuting-frame", "2d-rank-deficient", "2d-elliptic", "linear", "quadratic-metric"];

#[derive(Debug, Clone)]
pub enum Model {
    Builtin(SeparableSystem),
    Table(TableModel),
}

impl Model {
    pub fn name(&self) -> &str {
        match self {
            Model::Builtin(s) => &s.name,
            Model::Table(_) => "table",
        }
    }

    pub fn digest(&self) -> Option<String> {
        match self {
            Model::Builtin(_) => None,
            Model::Table(t) => Some(t.digest.clone()),
        }
    }
}

/// Looks up a built-in model, or loads `table:<path>`. `b` sets the drift
/// constant of `affine` (default 0.5) and `1d-sin` (default 1).
pub fn resolve(name: &str, b: Option<f64>) -> AppResult<Model> {
    if let Some(path) = name.strip_prefix("table:") {
        return Ok(Model::Table(TableModel::load(Path::new(path))?));
    }
    let sys = match name {
        "affine" => models::affine(b.unwrap_or(0.5)),
        "1d-sin" => models::sin_1d(b.unwrap_or(1.0)),
        "2d-commuting-frame" => models::commuting_frame_2d(),
        "2d-rank-deficient" => models::rank_deficient_2d(),
        "2d-elliptic" => models::elliptic_2d(),
        "linear" => models::linear_scalar(),
        "quadratic-metric" => models::quadratic_metric(),
        _ => {
            return Err(AppError::Config(format!(
                "unknown model `{name}`; built-ins are {} or table:<path>",
                BUILTIN_MODELS.join(", ")
            )))
        }
    };
    if b.is_some() && !matches!(name, "affine" | "1d-sin") {
        log::warn!("`b` is ignored by model {name}");
    }
    Ok(Model::Builtin(sys))
}

impl VectorFieldSystem for Model {
    fn state_dim(&self) -> usize {
        match self {
            Model::Builtin(s) => s.state_dim(),
            Model::Table(t) => t.n,
        }
    }

    fn driver_dim(&self) -> usize {
        match self {
            Model::Builtin(s) => s.driver_dim(),
            Model::Table(t) => t.d,
        }
    }

    fn max_order(&self) -> usize {
        match self {
            Model::Builtin(s) => s.max_order(),
            Model::Table(t) => t.max_order,
        }
    }

    fn eval(&self, i: usize, y: &[f64], out: &mut [f64]) {
        match self {
            Model::Builtin(s) => s.eval(i, y, out),
            Model::Table(t) => t.eval_field(i, y, out),
        }
    }

    fn deriv(&self, i: usize, y: &[f64], dirs: &[&[f64]], out: &mut [f64]) {
        match self {
            Model::Builtin(s) => s.deriv(i, y, dirs, out),
            Model::Table(t) => t.fd_deriv(i, y, dirs, out),
        }
    }

    fn declared_bound(&self) -> Option<f64> {
        match self {
            Model::Builtin(s) => s.declared_bound(),
            Model::Table(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PolyTerm {
    field: usize,
    component: usize,
    coeff: f64,
    exps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    pub n: usize,
    pub d: usize,
    pub step: f64,
    pub max_order: usize,
    terms: Vec<PolyTerm>,
    pub digest: String,
}

impl TableModel {
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text).map_err(|m| AppError::format(path, m))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut dims = None;
        let (mut step, mut max_order) = (1e-3, 3);
        let mut terms = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let err = |m: &str| format!("line {}: {m}", no + 1);
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("`{s}` is not a number")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("`{s}` is not an index")));
            match tok[0] {
                "dims" if tok.len() == 3 => dims = Some((int(tok[1])?, int(tok[2])?)),
                "derivatives" if tok.len() == 4 && tok[1] == "fd" => {
                    step = num(tok[2])?;
                    max_order = int(tok[3])?;
                }
                _ => {
                    let (n, d) = dims.ok_or_else(|| err("`dims n d` must come first"))?;
                    if tok.len() != 3 + n {
                        return Err(err(&format!("expected field, component, coefficient and {n} exponents")));
                    }
                    let (field, component) = (int(tok[0])?, int(tok[1])?);
                    if field > d || component >= n {
                        return Err(err("field or component out of range"));
                    }
                    let exps = tok[3..]
                        .iter()
                        .map(|s| s.parse::<u32>().map_err(|_| err(&format!("`{s}` is not an exponent"))))
                        .collect::<Result<_, _>>()?;
                    terms.push(PolyTerm { field, component, coeff: num(tok[2])?, exps });
                }
            }
        }
        let (n, d) = dims.ok_or("missing `dims n d` line")?;
        if n == 0 || d == 0 {
            return Err("dimensions must be positive".into());
        }
        if !(step > 0.0) {
            return Err("finite-difference step must be positive".into());
        }
        Ok(TableModel { n, d, step, max_order, terms, digest: sha256_hex(text.as_bytes()) })
    }

    fn eval_field(&self, i: usize, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in self.terms.iter().filter(|t| t.field == i) {
            let mono: f64 = t.exps.iter().zip(y).map(|(e, x)| x.powi(*e as i32)).product();
            out[t.component] += t.coeff * mono;
        }
    }

    /// Mixed central difference over the `2^k` sign patterns, with each
    /// direction normalized to unit length first.
    fn fd_deriv(&self, i: usize, y: &[f64], dirs: &[&[f64]], out: &mut [f64]) {
        let k = dirs.len();
        if k == 0 {
            return self.eval_field(i, y, out);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let norms: Vec<f64> = dirs.iter().map(|d| d.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        if norms.contains(&0.0) {
            return;
        }
        let h = self.step;
        let mut pt = vec![0.0; self.n];
        let mut val = vec![0.0; self.n];
        for signs in 0..(1u32 << k) {
            pt.copy_from_slice(y);
            let mut sign = 1.0;
            for (j, d) in dirs.iter().enumerate() {
                let s = if signs >> j & 1 == 1 { -1.0 } else { 1.0 };
                sign *= s;
                for r in 0..self.n {
                    pt[r] += s * h * d[r] / norms[j];
                }
            }
            self.eval_field(i, &pt, &mut val);
            for r in 0..self.n {
                out[r] += sign * val[r];
            }
        }
        let scale: f64 = norms.iter().product::<f64>() / (2.0 * h).powi(k as i32);
        out.iter_mut().for_each(|v| *v *= scale);
    }
}
