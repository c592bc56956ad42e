//! Run configuration files and sweeps.
//!
//! A run file is a flat TOML table with the same keys as the `run` flags;
//! flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, trace, Report, RunError};
use crate::algorithms::AlgorithmSpec;
use crate::setfamily::FamilyKind;
use crate::strategies::StrategyConfig;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub strategy: Option<String>,
    pub algorithm: Option<String>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub alpha: Option<usize>,
    pub beta: Option<usize>,
    pub nu: Option<u32>,
    pub family: Option<FamilyKind>,
    pub seed: Option<u64>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub parallel: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("missing parameter {0}")]
    Missing(&'static str),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("bad algorithm: {0}")]
    Algorithm(String),
    #[error("config file: {0}")]
    File(String),
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub strategy: StrategyConfig,
    pub algorithm: AlgorithmSpec,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub parallel: bool,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))
    }

    /// Fields of `self` win over `base`.
    pub fn over(self, base: RunFile) -> RunFile {
        RunFile {
            strategy: self.strategy.or(base.strategy),
            algorithm: self.algorithm.or(base.algorithm),
            d: self.d.or(base.d),
            n: self.n.or(base.n),
            k: self.k.or(base.k),
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            nu: self.nu.or(base.nu),
            family: self.family.or(base.family),
            seed: self.seed.or(base.seed),
            trace: self.trace.or(base.trace),
            report: self.report.or(base.report),
            parallel: self.parallel.or(base.parallel),
        }
    }

    pub fn strategy_config(&self) -> Result<StrategyConfig, ConfigError> {
        let strategy = self.strategy.as_deref().ok_or(ConfigError::Missing("strategy"))?;
        let need = |v: Option<usize>, name| v.ok_or(ConfigError::Missing(name));
        Ok(match strategy {
            "large-d" => StrategyConfig::LargeD {
                d: need(self.d, "d")?,
                n: need(self.n, "n")?,
                nu: self.nu.ok_or(ConfigError::Missing("nu"))?,
                family: self.family.unwrap_or(FamilyKind::Powerset),
                seed: self.seed.unwrap_or(0),
            },
            "medium-d" => StrategyConfig::MediumD {
                d: need(self.d, "d")?,
                n: need(self.n, "n")?,
                alpha: need(self.alpha, "alpha")?,
                beta: need(self.beta, "beta")?,
            },
            "d3" => StrategyConfig::D3 {
                n: need(self.n, "n")?,
                k: self.k.or(self.n).ok_or(ConfigError::Missing("k"))?,
            },
            "d8" => StrategyConfig::D8 {
                n: need(self.n, "n")?,
                k: self.k.or(self.n).ok_or(ConfigError::Missing("k"))?,
            },
            other => return Err(ConfigError::UnknownStrategy(other.into())),
        })
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let algorithm = self
            .algorithm
            .as_deref()
            .unwrap_or("first-fit")
            .parse()
            .map_err(|e: crate::algorithms::AlgorithmFault| ConfigError::Algorithm(e.to_string()))?;
        Ok(RunConfig {
            strategy: self.strategy_config()?,
            algorithm,
            trace: self.trace.clone(),
            report: self.report.clone(),
            parallel: self.parallel.unwrap_or(false),
        })
    }
}

/// Grid of strategies × algorithms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub strategies: Vec<StrategyConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub strategy: StrategyConfig,
    pub algorithm: String,
    pub passed: bool,
    pub error: Option<String>,
    pub exit_code: i32,
    pub certified_ratio: Option<String>,
    pub max_alg_cost: Option<u64>,
    pub max_offline_cost: Option<u64>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))
    }

    /// Runs every grid point in parallel. Traces and reports go to
    /// `output_dir` when set.
    pub fn run(&self) -> Result<Vec<SweepResult>, ConfigError> {
        let algorithms: Vec<AlgorithmSpec> = self
            .algorithms
            .iter()
            .map(|a| a.parse().map_err(|e: crate::algorithms::AlgorithmFault| ConfigError::Algorithm(e.to_string())))
            .collect::<Result<_, _>>()?;
        if let Some(dir) = &self.output_dir {
            std::fs::create_dir_all(dir).map_err(|e| ConfigError::File(format!("{}: {e}", dir.display())))?;
        }
        let grid: Vec<(usize, &StrategyConfig, &AlgorithmSpec)> = self
            .strategies
            .iter()
            .flat_map(|s| algorithms.iter().map(move |a| (s, a)))
            .enumerate()
            .map(|(i, (s, a))| (i, s, a))
            .collect();
        Ok(grid
            .into_par_iter()
            .map(|(i, s, a)| {
                let out = run(s, a, false).and_then(|o| {
                    if let Some(dir) = &self.output_dir {
                        let stem = format!("{i:03}-{}", s.id());
                        trace::write_trace(&dir.join(format!("{stem}.jsonl")), &o.records)?;
                        let report = serde_json::to_string_pretty(&o.report()).map_err(std::io::Error::other)?;
                        std::fs::write(dir.join(format!("{stem}.report.json")), report)?;
                    }
                    Ok::<_, RunError>(o)
                });
                match out {
                    Ok(o) => {
                        let r = Report::new(&o.certificate);
                        SweepResult {
                            strategy: s.clone(),
                            algorithm: a.to_string(),
                            passed: r.passed,
                            error: None,
                            exit_code: if r.passed { 0 } else { 3 },
                            certified_ratio: Some(crate::exactnum::format_ratio(&o.certificate.certified_ratio)),
                            max_alg_cost: Some(o.certificate.max_alg_cost()),
                            max_offline_cost: Some(o.certificate.max_offline_cost()),
                        }
                    }
                    Err(e) => SweepResult {
                        strategy: s.clone(),
                        algorithm: a.to_string(),
                        passed: false,
                        error: Some(e.to_string()),
                        exit_code: e.exit_code(),
                        certified_ratio: None,
                        max_alg_cost: None,
                        max_offline_cost: None,
                    },
                }
            })
            .collect())
    }
}
