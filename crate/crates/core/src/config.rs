//! Flat `key=value` run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::decisions::DecisionConfig;
use crate::dynamics::DynamicsParams;
use crate::error::{Error, Result};
use crate::io::DEFAULT_HORIZON;
use crate::packer::PackKind;
use crate::profile::OptionProfile;
use crate::training::{DetectorParams, GaParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub profile: OptionProfile,
    pub depth: usize,
    pub length: usize,
    pub seed: u64,
    pub basis: Option<PathBuf>,
    pub derived_budget: usize,
    pub decision: DecisionConfig,
    pub ga: GaParams,
    pub dynamics: DynamicsParams,
    pub detector: DetectorParams,
    pub horizon: usize,
    pub generator: String,
    pub generator_batch: usize,
    pub discriminator: String,
    pub ngram: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: OptionProfile::default(),
            depth: 6,
            length: 64,
            seed: 0,
            basis: None,
            derived_budget: 32,
            decision: DecisionConfig::default(),
            ga: GaParams::default(),
            dynamics: DynamicsParams::default(),
            detector: DetectorParams::default(),
            horizon: DEFAULT_HORIZON,
            generator: "frequency".into(),
            generator_batch: 16,
            discriminator: "ngram".into(),
            ngram: 2,
        }
    }
}

/// Every key `set` accepts.
pub const KEYS: &[&str] = &[
    "option.context",
    "option.noun",
    "option.verb",
    "option.adjective",
    "gender",
    "stack.layers",
    "stack.length",
    "seed",
    "basis",
    "store.budget",
    "pack.kind",
    "pack.max_depth",
    "pack.max_candidates",
    "pack.max_readers",
    "pack.max_evals",
    "pack.window",
    "decision.tree_depth",
    "decision.max_leaves",
    "decision.ego_depth",
    "ga.population",
    "ga.generations",
    "ga.elitism",
    "dynamics.h",
    "dynamics.s",
    "dynamics.k_d",
    "dynamics.k_g",
    "dynamics.delta",
    "dynamics.window",
    "detector.repeats",
    "detector.min_len",
    "io.horizon",
    "generator",
    "generator.batch",
    "discriminator",
    "discriminator.n",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}` has bad value `{v}`")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "option.context" => self.profile.context = v.parse()?,
            "option.noun" => self.profile.noun = v.parse()?,
            "option.verb" => self.profile.verb = v.parse()?,
            "option.adjective" => self.profile.adjective = v.parse()?,
            "gender" => self.profile.gender = v.parse()?,
            "stack.layers" => self.depth = num(key, v)?,
            "stack.length" => self.length = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "basis" => self.basis = Some(PathBuf::from(v)),
            "store.budget" => self.derived_budget = num(key, v)?,
            "pack.kind" => {
                self.decision.kind = match v {
                    "abstraction" => PackKind::Abstraction,
                    "detalisation" => PackKind::Detalisation,
                    _ => return Err(Error::Config(format!("unknown pack.kind `{v}`"))),
                }
            }
            "pack.max_depth" => self.decision.budget.max_depth = num(key, v)?,
            "pack.max_candidates" => self.decision.budget.max_candidates = num(key, v)?,
            "pack.max_readers" => self.decision.budget.max_readers = num(key, v)?,
            "pack.max_evals" => self.decision.budget.max_evals = num(key, v)?,
            "pack.window" => self.decision.budget.window = num(key, v)?,
            "decision.tree_depth" => self.decision.tree_depth = num(key, v)?,
            "decision.max_leaves" => self.decision.max_leaves = num(key, v)?,
            "decision.ego_depth" => self.decision.ego_depth = num(key, v)?,
            "ga.population" => self.ga.population = num(key, v)?,
            "ga.generations" => self.ga.generations = num(key, v)?,
            "ga.elitism" => self.ga.elitism = num(key, v)?,
            "dynamics.h" => self.dynamics.h = num(key, v)?,
            "dynamics.s" => self.dynamics.s = num(key, v)?,
            "dynamics.k_d" => self.dynamics.k_d = num(key, v)?,
            "dynamics.k_g" => self.dynamics.k_g = num(key, v)?,
            "dynamics.delta" => self.dynamics.delta = num(key, v)?,
            "dynamics.window" => self.dynamics.window = num(key, v)?,
            "detector.repeats" => self.detector.repeats = num(key, v)?,
            "detector.min_len" => self.detector.min_len = num(key, v)?,
            "io.horizon" => self.horizon = num(key, v)?,
            "generator" => match v {
                "frequency" => self.generator = v.into(),
                _ => return Err(Error::Config(format!("unknown generator `{v}`"))),
            },
            "generator.batch" => self.generator_batch = num(key, v)?,
            "discriminator" => match v {
                "ngram" => self.discriminator = v.into(),
                _ => return Err(Error::Config(format!("unknown discriminator `{v}`"))),
            },
            "discriminator.n" => self.ngram = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key=value` tokens. Tokens may share a line; `#` starts a
    /// comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            for tok in line.split_whitespace() {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{tok}`", i + 1)))?;
                self.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Apply overrides from variables named `<prefix><KEY>`, where KEY is the
    /// config key upper-cased with dots turned into underscores.
    pub fn apply_env(&mut self, prefix: &str, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        for key in KEYS {
            let var = format!("{prefix}{}", key.to_uppercase().replace('.', "_"));
            if let Some(v) = get(&var) {
                self.set(key, &v).map_err(|e| Error::Config(format!("{var}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config("stack.layers must be at least 2".into()));
        }
        if self.decision.budget.max_readers == 0 || self.decision.budget.max_depth == 0 {
            return Err(Error::Config("pack.max_readers and pack.max_depth must be positive".into()));
        }
        if self.ga.population == 0 {
            return Err(Error::Config("ga.population must be positive".into()));
        }
        if self.dynamics.window == 0 {
            return Err(Error::Config("dynamics.window must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RunConfig::parse("colour=red"), Err(Error::Config(_))));
        assert!(RunConfig::parse("option.verb=ethics seed=4\nstack.layers=5 # rat").is_ok());
    }

    #[test]
    fn env_override() {
        let mut c = RunConfig::default();
        c.apply_env("LL_", |k| (k == "LL_STACK_LAYERS").then(|| "5".to_string())).unwrap();
        assert_eq!(c.depth, 5);
    }
}
