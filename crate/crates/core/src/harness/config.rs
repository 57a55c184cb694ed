//! Experiment configuration files.
//!
//! The format is TOML: collection-wide keys at the top level and one
//! `[runs.<name>]` table per run. A run either points at an observation CSV
//! or replays published values:
//!
//! ```toml
//! kernel = 5000
//! step = 5000
//! nu = 4e-5
//! slowdown = 1
//! lookahead = 5
//! tau = 0.001
//! window = "5000:700000"
//! controls = "300000:700000:100000"
//! folds = 10
//!
//! [runs.svmtool]
//! observations = "svmtool.csv"
//! tau = 0.0012
//!
//! [runs.replayed]
//! tau = 2.2
//! plevel = 85012
//! clevel = 145016
//! actual = [92.97, 93.42, 93.76, 94.01, 94.30]
//! estimated = [92.84, 93.22, 93.50, 93.72, 93.89]
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::levels::LevelConfig;
use crate::observation::{read_csv_file, Observation};
use crate::scheme::Corpus;

/// Default convergence threshold for the sup-distance layer.
pub const DEFAULT_TAU: f64 = 1e-3;

/// Raw contents of a config file. Every key is optional; flags can be merged
/// on top with [`ConfigFile::merge`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kernel: Option<u64>,
    pub step: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub nu: Option<f64>,
    pub slowdown: Option<u32>,
    pub lookahead: Option<u32>,
    pub tau: Option<f64>,
    pub window: Option<String>,
    pub window_grid: Option<usize>,
    pub layer_scale: Option<f64>,
    pub controls: Option<String>,
    pub folds: Option<u32>,
    pub format: Option<String>,
    pub output: Option<PathBuf>,
    pub max_iterations: Option<u32>,
    pub residual_tolerance: Option<f64>,
    pub step_tolerance: Option<f64>,
    pub initial_trust_radius: Option<f64>,
    pub parameter_floor: Option<f64>,
    #[serde(default)]
    pub runs: BTreeMap<String, RunEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub observations: Option<PathBuf>,
    pub tau: Option<f64>,
    /// Replay only: prediction level as a word position.
    pub plevel: Option<u64>,
    /// Replay only: convergence level as a word position.
    pub clevel: Option<u64>,
    /// Replay only: Ac per control level.
    pub actual: Option<Vec<f64>>,
    /// Replay only: EAc per control level; absent when the run never
    /// predicted.
    pub estimated: Option<Vec<f64>>,
}

/// Parses `lo:hi`.
pub fn parse_window(s: &str) -> Result<(u64, u64)> {
    let parts = parse_colon_list(s, 2)?;
    Ok((parts[0], parts[1]))
}

/// Parses `lo:hi:step`.
pub fn parse_controls(s: &str) -> Result<ControlSpec> {
    let parts = parse_colon_list(s, 3)?;
    let spec = ControlSpec {
        lo: parts[0],
        hi: parts[1],
        step: parts[2],
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_colon_list(s: &str, n: usize) -> Result<Vec<u64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != n {
        return Err(Error::Config(format!(
            "expected {n} colon-separated integers, got `{s}`"
        )));
    }
    parts
        .iter()
        .map(|p| {
            let p = p.trim().replace('_', "");
            p.parse::<u64>()
                .or_else(|_| p.parse::<f64>().map(|v| v as u64).map_err(|_| ()))
                .map_err(|_| Error::Config(format!("`{p}` is not a word position in `{s}`")))
        })
        .collect()
}

impl ConfigFile {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() as u64 + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Field-wise merge; values set in `overrides` win. Runs are merged by
    /// name.
    pub fn merge(mut self, overrides: ConfigFile) -> ConfigFile {
        macro_rules! take {
            ($($f:ident),*) => { $( if overrides.$f.is_some() { self.$f = overrides.$f; } )* };
        }
        take!(
            kernel,
            step,
            corpus,
            nu,
            slowdown,
            lookahead,
            tau,
            window,
            window_grid,
            layer_scale,
            controls,
            folds,
            format,
            output,
            max_iterations,
            residual_tolerance,
            step_tolerance,
            initial_trust_radius,
            parameter_floor
        );
        self.runs.extend(overrides.runs);
        self
    }

    /// Loads every referenced file and applies defaults. Relative paths are
    /// taken from `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ExperimentConfig> {
        let at = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let defaults = LevelConfig::experiment();
        let window = match &self.window {
            Some(w) => parse_window(w)?,
            None => defaults.window,
        };
        let levels = LevelConfig {
            nu: self.nu.unwrap_or(defaults.nu),
            sigma_slowdown: self.slowdown.unwrap_or(defaults.sigma_slowdown),
            lambda_lookahead: self.lookahead.unwrap_or(defaults.lambda_lookahead),
            tau: self.tau.unwrap_or(DEFAULT_TAU),
            window,
            window_grid: self.window_grid.unwrap_or(defaults.window_grid),
            layer_scale: self.layer_scale.unwrap_or(defaults.layer_scale),
        };
        levels.validate()?;

        let fd = FitConfig::default();
        let fit = FitConfig {
            max_iterations: self.max_iterations.unwrap_or(fd.max_iterations),
            residual_tolerance: self.residual_tolerance.unwrap_or(fd.residual_tolerance),
            step_tolerance: self.step_tolerance.unwrap_or(fd.step_tolerance),
            initial_trust_radius: self.initial_trust_radius.unwrap_or(fd.initial_trust_radius),
            parameter_floor: self.parameter_floor.unwrap_or(fd.parameter_floor),
        };
        fit.validate()?;

        let controls = match &self.controls {
            Some(c) => parse_controls(c)?,
            None => ControlSpec::default(),
        };
        let corpus = self.corpus.as_deref().map(|p| Corpus::read_file(at(p))).transpose()?;

        let mut runs = Vec::with_capacity(self.runs.len());
        for (name, entry) in &self.runs {
            let source = match (&entry.observations, &entry.actual) {
                (Some(path), None) => RunSource::Observations(read_csv_file(at(path))?),
                (None, Some(actual)) => RunSource::Replay(ReplayRow {
                    plevel: entry.plevel,
                    clevel: entry.clevel,
                    actual: actual.clone(),
                    estimated: entry.estimated.clone(),
                }),
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "run `{name}` sets both `observations` and `actual`"
                    )))
                }
                (None, None) => {
                    return Err(Error::Config(format!(
                        "run `{name}` needs either `observations` or `actual`"
                    )))
                }
            };
            runs.push(RunSpec {
                name: name.clone(),
                tau: entry.tau,
                source,
            });
        }

        let config = ExperimentConfig {
            kernel: self.kernel.unwrap_or(5_000),
            step: self.step.unwrap_or(5_000),
            corpus,
            fit,
            levels,
            controls,
            folds: self.folds,
            runs,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Nominal control levels `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub lo: u64,
    pub hi: u64,
    pub step: u64,
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            lo: 300_000,
            hi: 700_000,
            step: 100_000,
        }
    }
}

impl ControlSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lo == 0 || self.lo > self.hi || self.step == 0 {
            return Err(Error::Config(format!(
                "invalid control levels {}:{}:{}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }

    pub fn nominal(&self) -> Vec<u64> {
        (self.lo..=self.hi).step_by(self.step as usize).collect()
    }
}

/// Published Ac/EAc values of a run that is not recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub plevel: Option<u64>,
    pub clevel: Option<u64>,
    pub actual: Vec<f64>,
    pub estimated: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunSource {
    Observations(Vec<Observation>),
    Replay(ReplayRow),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    /// Overrides the collection threshold when set.
    pub tau: Option<f64>,
    pub source: RunSource,
}

/// A fully resolved experiment: every file loaded, every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: u64,
    pub step: u64,
    /// When present, control levels and the sampling window are rounded up
    /// to sentence ends of this corpus.
    pub corpus: Option<Corpus>,
    pub fit: FitConfig,
    pub levels: LevelConfig,
    pub controls: ControlSpec,
    /// Expected number of cross-validation folds per observation file.
    pub folds: Option<u32>,
    pub runs: Vec<RunSpec>,
}

impl ExperimentConfig {
    /// Collection with default settings and no runs.
    pub fn new() -> Self {
        ExperimentConfig {
            kernel: 5_000,
            step: 5_000,
            corpus: None,
            fit: FitConfig::default(),
            levels: LevelConfig {
                tau: DEFAULT_TAU,
                ..LevelConfig::experiment()
            },
            controls: ControlSpec::default(),
            folds: None,
            runs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        self.levels.validate()?;
        self.controls.validate()?;
        if self.kernel == 0 || self.step == 0 {
            return Err(Error::Config("kernel and step must be positive".into()));
        }
        if self.folds == Some(0) {
            return Err(Error::Config("folds must be >= 1".into()));
        }
        if self.controls.hi > self.levels.window.1 {
            return Err(Error::Config(format!(
                "control levels end at {} beyond the sampling window end {}",
                self.controls.hi, self.levels.window.1
            )));
        }
        let n = self.controls.nominal().len();
        for run in &self.runs {
            if let Some(tau) = run.tau {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return Err(Error::Config(format!("run `{}`: tau must be >= 0", run.name)));
                }
            }
            if let RunSource::Replay(r) = &run.source {
                let bad_est = r.estimated.as_ref().is_some_and(|e| e.len() != n);
                if r.actual.len() != n || bad_est {
                    return Err(Error::Config(format!(
                        "run `{}`: replay values must have one entry per control level ({n})",
                        run.name
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new()
    }
}
