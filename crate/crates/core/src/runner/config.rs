use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ideal_points::PolicyPriors;

/// Which per-draw quantities are stored besides the always-on scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub ideal_points: bool,
    pub bill_params: bool,
    pub bridge_predictors: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            ideal_points: true,
            bill_params: true,
            bridge_predictors: true,
        }
    }
}

/// Anchor file and optional override of its target values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    pub file: Option<PathBuf>,
    pub values: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_chains: usize,
    pub n_burnin: usize,
    pub n_kept: usize,
    pub thin: usize,
    pub seed: u64,
    /// Redraw missing votes every sweep; otherwise they are left out of the likelihood.
    pub impute_missing: bool,
    pub priors: PolicyPriors,
    pub anchors: AnchorConfig,
    pub monitor: MonitorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_burnin: 20_000,
            n_kept: 15_000,
            thin: 20,
            seed: 1,
            impute_missing: true,
            priors: PolicyPriors::default(),
            anchors: AnchorConfig::default(),
            monitor: MonitorConfig::default(),
        }
    }
}

impl RunConfig {
    pub const PRESETS: [&'static str; 4] = ["default", "long", "desk", "smoke"];

    /// Named run lengths: `default` (4 chains, 20000 burn-in, 15000 kept,
    /// thin 20), `long` (8 chains, thin 25), `desk` (4 × 3000 sweeps) and
    /// `smoke` (2 × 1000 sweeps).
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        match name {
            "default" => Some(base),
            "long" => Some(Self {
                n_chains: 8,
                thin: 25,
                ..base
            }),
            "desk" => Some(Self {
                n_chains: 4,
                n_burnin: 1000,
                n_kept: 1000,
                thin: 2,
                ..base
            }),
            "smoke" => Some(Self {
                n_chains: 2,
                n_burnin: 500,
                n_kept: 250,
                thin: 2,
                ..base
            }),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is serializable")
    }

    pub fn total_sweeps(&self) -> usize {
        self.n_burnin + self.n_kept * self.thin
    }

    /// 1-based sweep numbers whose states are stored.
    pub fn kept_sweeps(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n_kept).map(move |k| self.n_burnin + k * self.thin)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_chains", self.n_chains),
            ("n_kept", self.n_kept),
            ("thin", self.thin),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.n_burnin == 0 {
            return Err(Error::InvalidConfig("n_burnin must be at least 1".into()));
        }
        if let Some((a, b)) = self.anchors.values {
            if !a.is_finite() || !b.is_finite() || a == b {
                return Err(Error::InvalidConfig("anchor values must be finite and distinct".into()));
            }
        }
        self.priors.validate()
    }
}
