//! TOML experiment configuration.
//!
//! ```toml
//! [model]
//! c = 0.5
//! sigma = 0.2
//! kappa = 2.0
//! jumps = "builtin_folded_normal"     # or: jumps = { alpha = [1.0], T = [[-1.0]] }
//!
//! [problem]
//! kind = "dividends"                  # or "bailout"
//! q = 0.05
//! r = 0.1
//! rho = 0.0                           # dividends only
//! # beta = 2.0                        # bailout only
//!
//! [grid]
//! x_max = 6.0                         # omit to use 4·max(barrier, 1)
//! n_points = 200
//!
//! [mc]
//! paths = 100000
//! seed = 42
//! horizon_eps = 1e-6
//! dt_max = 0.01
//! antithetic = false
//! x_list = [0.5, 1.0, 2.0, 4.0]
//!
//! [sweep]
//! r_list = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0]
//! rho_list = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
//! b_list = [0.0, 0.8, 2.4, 3.2]       # alternative barriers; omit for {0, ½, 3/2, 2}×optimum
//! ```
//!
//! Every block and key is optional; omitted values fall back to the Case 1
//! dividend problem. Unknown keys are rejected.

use std::path::Path;

use nalgebra::DMatrix;
use periodic_dividends::simulator::McConfig;
use periodic_dividends::{PeriodicProblem, PhaseTypeLaw, PhaseTypeLevyModel, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub mc: MonteCarloConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    #[serde(rename = "builtin_folded_normal")]
    FoldedNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTypeConfig {
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JumpConfig {
    Builtin(Builtin),
    PhaseType(PhaseTypeConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub c: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub jumps: JumpConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            sigma: 0.2,
            kappa: 2.0,
            jumps: JumpConfig::Builtin(Builtin::FoldedNormal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Dividends,
    Bailout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub kind: Kind,
    pub q: f64,
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: Kind::Dividends,
            q: 0.05,
            r: 0.1,
            rho: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_max: None,
            n_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub paths: usize,
    pub seed: u64,
    pub horizon_eps: f64,
    pub dt_max: f64,
    pub antithetic: bool,
    pub x_list: Vec<f64>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        let base = McConfig::default();
        Self {
            paths: base.paths,
            seed: base.seed,
            horizon_eps: base.horizon_eps,
            dt_max: base.dt_max,
            antithetic: base.antithetic,
            x_list: vec![0.5, 1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub r_list: Vec<f64>,
    pub rho_list: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_list: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            r_list: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            rho_list: (-4..=4).map(|k| 5.0 * k as f64).collect(),
            b_list: None,
        }
    }
}

/// A parsed config together with the objects it describes.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub path: std::path::PathBuf,
    pub config: ExperimentConfig,
    /// SHA-256 of the config file bytes, hex encoded.
    pub hash: String,
    pub model: PhaseTypeLevyModel,
    pub problem: PeriodicProblem,
    pub mc: McConfig,
}

fn invalid(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build_model(&self, path: &Path) -> Result<PhaseTypeLevyModel> {
        let law = match &self.model.jumps {
            JumpConfig::Builtin(Builtin::FoldedNormal) => PhaseTypeLaw::folded_normal(),
            JumpConfig::PhaseType(pt) => {
                let m = pt.alpha.len();
                if pt.t.len() != m || pt.t.iter().any(|row| row.len() != m) {
                    return Err(invalid(
                        path,
                        format!("model.jumps.T must be {m}×{m} to match alpha"),
                    ));
                }
                let flat: Vec<f64> = pt.t.iter().flatten().copied().collect();
                PhaseTypeLaw::new(pt.alpha.clone(), DMatrix::from_row_slice(m, m, &flat))
                    .map_err(|e| invalid(path, e.to_string()))?
            }
        };
        let m = &self.model;
        PhaseTypeLevyModel::new(m.c, m.sigma, m.kappa, law).map_err(|e| invalid(path, e.to_string()))
    }

    pub fn build_spec(&self, path: &Path) -> Result<ProblemSpec> {
        let p = &self.problem;
        let spec = match p.kind {
            Kind::Dividends => {
                if p.beta.is_some() {
                    return Err(invalid(path, "problem.beta applies only to kind = \"bailout\""));
                }
                ProblemSpec::dividends(p.q, p.r, p.rho.unwrap_or(0.0))
            }
            Kind::Bailout => {
                if p.rho.is_some() {
                    return Err(invalid(path, "problem.rho applies only to kind = \"dividends\""));
                }
                ProblemSpec::bailout(p.q, p.r, p.beta.unwrap_or(2.0))
            }
        };
        spec.map_err(|e| invalid(path, e.to_string()))
    }

    pub fn build_mc(&self, path: &Path) -> Result<McConfig> {
        let m = &self.mc;
        if m.x_list.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid(path, "mc.x_list entries must be finite and ≥ 0"));
        }
        McConfig {
            paths: m.paths,
            seed: m.seed,
            horizon_eps: m.horizon_eps,
            dt_max: m.dt_max,
            antithetic: m.antithetic,
        }
        .validated()
        .map_err(|e| invalid(path, e.to_string()))
    }

    fn check_lists(&self, path: &Path) -> Result<()> {
        if self.grid.n_points < 2 {
            return Err(invalid(path, "grid.n_points must be ≥ 2"));
        }
        if let Some(x) = self.grid.x_max {
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid(path, format!("grid.x_max = {x} must be > 0")));
            }
        }
        if self.sweep.r_list.is_empty() || self.sweep.r_list.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid(path, "sweep.r_list must be nonempty with entries > 0"));
        }
        if self.sweep.rho_list.iter().any(|r| !r.is_finite()) {
            return Err(invalid(path, "sweep.rho_list entries must be finite"));
        }
        if let Some(bs) = &self.sweep.b_list {
            if bs.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                return Err(invalid(path, "sweep.b_list entries must be finite and ≥ 0"));
            }
        }
        Ok(())
    }

    /// Validate everything and build the model, problem and simulation settings.
    pub fn load_str(text: &str, path: &Path) -> Result<Loaded> {
        let config = Self::parse(text, path)?;
        config.check_lists(path)?;
        let model = config.build_model(path)?;
        let spec = config.build_spec(path)?;
        let mc = config.build_mc(path)?;
        let problem = PeriodicProblem::new(&model, spec)?;
        Ok(Loaded {
            path: path.to_path_buf(),
            hash: sha256_hex(text.as_bytes()),
            config,
            model,
            problem,
            mc,
        })
    }

    pub fn load(path: &Path) -> Result<Loaded> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        Self::load_str(&text, path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
