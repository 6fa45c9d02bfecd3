use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which set of solver constants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Solver and training hyperparameters.
///
/// Read from a flat `key = value` file whose keys are the field names.
/// Unlisted keys fall back to [`SolverConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub k_skills: usize,
    pub alpha_train: f64,
    pub alpha_eval: f64,
    pub eps_train: f64,
    pub eps_eval: f64,
    pub lambda_frames_train: f64,
    pub lambda_frames_eval: f64,
    pub lambda_actions_train: f64,
    pub lambda_actions_eval: f64,
    pub radius_gw: f64,
    pub rho: f64,
    pub ub_frames: bool,
    pub ub_actions: bool,
    pub std_feats: bool,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub n_epochs: usize,
    pub n_frames: usize,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k_skills: 3,
            alpha_train: 0.3,
            alpha_eval: 0.3,
            eps_train: 0.05,
            eps_eval: 0.01,
            lambda_frames_train: 0.05,
            lambda_frames_eval: 0.05,
            lambda_actions_train: 0.05,
            lambda_actions_eval: 0.05,
            radius_gw: 0.04,
            rho: 0.01,
            ub_frames: false,
            ub_actions: true,
            std_feats: false,
            learning_rate: 1e-2,
            weight_decay: 1e-4,
            n_epochs: 10,
            n_frames: 100,
            n_outer: 10,
            n_inner: 100,
            seed: 0,
        }
    }
}

/// The mode-dependent subset of [`SolverConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub alpha: f64,
    pub eps: f64,
    pub lambda_frames: f64,
    pub lambda_actions: f64,
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if !(lo..=hi).contains(&v) {
        return Err(Error::Config(format!("{name} = {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl SolverConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SolverConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_skills == 0 {
            return Err(Error::Config("k_skills must be positive".into()));
        }
        check_range("alpha_train", self.alpha_train, 0.01, 1.0)?;
        check_range("alpha_eval", self.alpha_eval, 0.01, 1.0)?;
        check_range("eps_train", self.eps_train, 0.001, 0.5)?;
        check_range("eps_eval", self.eps_eval, 0.001, 0.5)?;
        check_range("lambda_frames_train", self.lambda_frames_train, 0.01, 0.1)?;
        check_range("lambda_frames_eval", self.lambda_frames_eval, 0.01, 0.1)?;
        check_range("lambda_actions_train", self.lambda_actions_train, 0.01, 0.1)?;
        check_range("lambda_actions_eval", self.lambda_actions_eval, 0.01, 0.1)?;
        check_range("radius_gw", self.radius_gw, 0.001, 0.1)?;
        check_range("rho", self.rho, 0.001, 0.3)?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        for (name, v) in [
            ("n_epochs", self.n_epochs),
            ("n_frames", self.n_frames),
            ("n_outer", self.n_outer),
            ("n_inner", self.n_inner),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn params(&self, mode: Mode) -> ModeParams {
        match mode {
            Mode::Train => ModeParams {
                alpha: self.alpha_train,
                eps: self.eps_train,
                lambda_frames: self.lambda_frames_train,
                lambda_actions: self.lambda_actions_train,
            },
            Mode::Eval => ModeParams {
                alpha: self.alpha_eval,
                eps: self.eps_eval,
                lambda_frames: self.lambda_frames_eval,
                lambda_actions: self.lambda_actions_eval,
            },
        }
    }
}
