//! Flat `key = value` scenario files.
//!
//! Keys are the snake_case field names of [`ScenarioConfig`], with the model
//! parameters and the initial state flattened into the top level. `#` starts
//! a comment; blank lines are ignored. Anything not given takes its default
//! from the published parameter table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::TimeGrid;
use crate::model::{AdjointMode, CostKind, ItnMortalityPolicy, ModelParams, StateVec};
use crate::sweep::SweepConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub x0: StateVec,
    pub t0: f64,
    pub tf: f64,
    pub n: usize,
    pub cost: CostKind,
    pub adjoint_mode: AdjointMode,
    pub sweep_b: Option<Vec<f64>>,
    pub control_enabled: bool,
    pub output_dir: PathBuf,
    /// Seed for the random directions of the gradient check.
    pub seed: u64,
    pub relaxation: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            params: ModelParams::default(),
            x0: StateVec::TABLE_INITIAL,
            t0: 0.0,
            tf: 100.0,
            n: 5000,
            cost: CostKind::J1,
            adjoint_mode: AdjointMode::PaperStated,
            sweep_b: None,
            control_enabled: true,
            output_dir: PathBuf::from("out"),
            seed: 0,
            relaxation: sweep.relaxation,
            tol: sweep.tol,
            max_iters: sweep.max_iters,
        }
    }
}

/// Every accepted key, in the order [`ScenarioConfig::to_config_text`]
/// writes them.
pub const KEYS: [&str; 33] = [
    "lambda_h_rec",
    "lambda_v_rec",
    "mu_h",
    "delta_h",
    "gamma_h",
    "mu_v1",
    "mu_max",
    "b",
    "beta_max",
    "p1",
    "p2",
    "a1",
    "a2",
    "c",
    "itn_mortality_policy",
    "s_h",
    "i_h",
    "s_v",
    "i_v",
    "t0",
    "tf",
    "n",
    "cost",
    "adjoint_mode",
    "sweep_b",
    "control_enabled",
    "output_dir",
    "seed",
    "relaxation",
    "tol",
    "max_iters",
    // accepted aliases for the command line
    "grid",
    "adjoint",
];

impl ScenarioConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t0, self.tf, self.n)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            relaxation: self.relaxation,
            tol: self.tol,
            max_iters: self.max_iters,
            adjoint_mode: self.adjoint_mode,
            cost: self.cost,
            initial_guess: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (key, v) in [("s_h", self.x0.s_h), ("i_h", self.x0.i_h), ("s_v", self.x0.s_v), ("i_v", self.x0.i_v)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invariant(key, format!("{key} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.x0.n_h() > 0.0) {
            return Err(Error::invariant("s_h", "initial host population s_h + i_h must be > 0"));
        }
        self.grid()?;
        if let Some(bs) = &self.sweep_b {
            if bs.is_empty() {
                return Err(Error::invariant("sweep_b", "sweep list must not be empty"));
            }
            if let Some(b) = bs.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                return Err(Error::invariant("sweep_b", format!("sweep values must lie in [0,1], got {b}")));
            }
        }
        self.sweep_config().validate()
    }

    /// Applies one `key = value` assignment. `column` locates the value for
    /// error messages.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_at(key, value, 0, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize, column: usize) -> Result<()> {
        let bad = |what: &str| Error::Parse {
            line,
            column,
            message: format!("`{key}`: expected {what}, got `{value}`"),
        };
        let float = || value.parse::<f64>().map_err(|_| bad("a number"));
        let p = &mut self.params;
        match key {
            "lambda_h_rec" => p.lambda_h_rec = float()?,
            "lambda_v_rec" => p.lambda_v_rec = float()?,
            "mu_h" => p.mu_h = float()?,
            "delta_h" => p.delta_h = float()?,
            "gamma_h" => p.gamma_h = float()?,
            "mu_v1" => p.mu_v1 = float()?,
            "mu_max" => p.mu_max = float()?,
            "b" => p.b = float()?,
            "beta_max" => p.beta_max = float()?,
            "p1" => p.p1 = float()?,
            "p2" => p.p2 = float()?,
            "a1" => p.a1 = float()?,
            "a2" => p.a2 = float()?,
            "c" => p.c = float()?,
            "itn_mortality_policy" => {
                p.itn_mortality_policy = match value {
                    "product" => ItnMortalityPolicy::Product,
                    "fixed_term" => ItnMortalityPolicy::FixedTerm,
                    _ => return Err(bad("`product` or `fixed_term`")),
                }
            }
            "s_h" => self.x0.s_h = float()?,
            "i_h" => self.x0.i_h = float()?,
            "s_v" => self.x0.s_v = float()?,
            "i_v" => self.x0.i_v = float()?,
            "t0" => self.t0 = float()?,
            "tf" => self.tf = float()?,
            "n" | "grid" => self.n = value.parse().map_err(|_| bad("a positive integer"))?,
            "cost" => {
                self.cost = match value.to_ascii_lowercase().as_str() {
                    "j1" => CostKind::J1,
                    "j2" => CostKind::J2,
                    _ => return Err(bad("`j1` or `j2`")),
                }
            }
            "adjoint_mode" | "adjoint" => {
                self.adjoint_mode = match value {
                    "paper_stated" | "paper" => AdjointMode::PaperStated,
                    "exact" => AdjointMode::Exact,
                    _ => return Err(bad("`paper_stated` or `exact`")),
                }
            }
            "sweep_b" => {
                self.sweep_b = if value.is_empty() {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|s| s.trim().parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| bad("a comma-separated list of numbers"))?,
                    )
                }
            }
            "control_enabled" => self.control_enabled = value.parse().map_err(|_| bad("`true` or `false`"))?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "relaxation" => self.relaxation = float()?,
            "tol" => self.tol = float()?,
            "max_iters" => self.max_iters = value.parse().map_err(|_| bad("a positive integer"))?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every assignment in a config text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                let column = raw.len() - raw.trim_start().len() + 1;
                return Err(Error::Parse {
                    line,
                    column,
                    message: "expected `key = value`".into(),
                });
            };
            let key = content[..eq].trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    column: eq + 1,
                    message: "missing key before `=`".into(),
                });
            }
            let after = &content[eq + 1..];
            let value = after.trim();
            let column = eq + 2 + (after.len() - after.trim_start().len());
            self.set_at(key, value, line, column)?;
        }
        Ok(())
    }

    /// Full resolved configuration, one `key = value` per line.
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let mut out = String::from("# resolved scenario configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("lambda_h_rec", p.lambda_h_rec.to_string());
        kv("lambda_v_rec", p.lambda_v_rec.to_string());
        kv("mu_h", p.mu_h.to_string());
        kv("delta_h", p.delta_h.to_string());
        kv("gamma_h", p.gamma_h.to_string());
        kv("mu_v1", p.mu_v1.to_string());
        kv("mu_max", p.mu_max.to_string());
        kv("b", p.b.to_string());
        kv("beta_max", p.beta_max.to_string());
        kv("p1", p.p1.to_string());
        kv("p2", p.p2.to_string());
        kv("a1", p.a1.to_string());
        kv("a2", p.a2.to_string());
        kv("c", p.c.to_string());
        kv(
            "itn_mortality_policy",
            match p.itn_mortality_policy {
                ItnMortalityPolicy::Product => "product",
                ItnMortalityPolicy::FixedTerm => "fixed_term",
            }
            .into(),
        );
        kv("s_h", self.x0.s_h.to_string());
        kv("i_h", self.x0.i_h.to_string());
        kv("s_v", self.x0.s_v.to_string());
        kv("i_v", self.x0.i_v.to_string());
        kv("t0", self.t0.to_string());
        kv("tf", self.tf.to_string());
        kv("n", self.n.to_string());
        kv("cost", match self.cost {
            CostKind::J1 => "j1",
            CostKind::J2 => "j2",
        }
        .into());
        kv("adjoint_mode", match self.adjoint_mode {
            AdjointMode::PaperStated => "paper_stated",
            AdjointMode::Exact => "exact",
        }
        .into());
        kv(
            "sweep_b",
            self.sweep_b
                .as_ref()
                .map(|bs| bs.iter().map(f64::to_string).collect::<Vec<_>>().join(", "))
                .unwrap_or_default(),
        );
        kv("control_enabled", self.control_enabled.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("relaxation", self.relaxation.to_string());
        kv("tol", self.tol.to_string());
        kv("max_iters", self.max_iters.to_string());
        out
    }
}

/// Defaults, then the file at `path` (if any), then each `(key, value)`
/// override in order. The result is validated.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_text(&text)?;
    }
    for (key, value) in overrides {
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses an inline `KEY=VALUE` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Parse {
            line: 0,
            column: 1,
            message: format!("override `{s}` is not KEY=VALUE"),
        }),
    }
}
