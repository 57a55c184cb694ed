//! Working, prediction and convergence levels of a learning trace.
//!
//! * The working level is the first level after which the backbone slope,
//!   normalized by the word distance between consecutive levels, stays under
//!   `nu^(1/slowdown) / (1 - nu)` for `lookahead + 1` consecutive steps.
//! * The prediction level is the first level at or after the working level
//!   whose asymptote does not exceed 100.
//! * The convergence level is the first level at or after the prediction
//!   level whose convergence layer is at most `tau`. Its trend is frozen as
//!   the predictor of the run.
//!
//! The convergence layer of level `l` is the largest distance between the
//! trends of levels `l` and `l - 1` over the sampling window, measured on an
//! evenly spaced grid and multiplied by `layer_scale`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::PowerLawTrend;
use crate::trace::{LearningTrace, FIRST_LEVEL};

/// Lowest level with a convergence layer (it needs a predecessor trend).
pub const FIRST_LAYER_LEVEL: usize = FIRST_LEVEL + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    /// Verticality threshold, in `(0, 1)`.
    pub nu: f64,
    /// Slowdown applied to `nu` as a root index.
    pub sigma_slowdown: u32,
    /// Number of extra consecutive slopes that must stay under the bound.
    pub lambda_lookahead: u32,
    /// Convergence threshold.
    pub tau: f64,
    /// Sampling window `(lo, hi)` in word positions.
    pub window: (u64, u64),
    /// Number of evenly spaced points used to measure convergence layers.
    pub window_grid: usize,
    pub layer_scale: f64,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self::experiment()
    }
}

impl LevelConfig {
    /// Setting used for the tagger collection: `nu = 4e-5`, slowdown 1,
    /// look-ahead 5, window `[5e3, 7e5]`.
    pub fn experiment() -> Self {
        LevelConfig {
            nu: 4e-5,
            sigma_slowdown: 1,
            lambda_lookahead: 5,
            tau: 2.0,
            window: (5_000, 700_000),
            window_grid: 512,
            layer_scale: 1.0,
        }
    }

    /// Same as [`LevelConfig::experiment`] with the tighter `nu = 2e-5` used
    /// to illustrate working and prediction levels on a single tagger.
    pub fn illustration() -> Self {
        LevelConfig {
            nu: 2e-5,
            ..Self::experiment()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {}", self.nu)));
        }
        if self.sigma_slowdown == 0 {
            return Err(Error::Config("slowdown must be >= 1".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        let (lo, hi) = self.window;
        if lo == 0 || lo >= hi {
            return Err(Error::Config(format!("window must satisfy 0 < lo < hi, got {lo}:{hi}")));
        }
        if self.window_grid < 2 {
            return Err(Error::Config("window grid needs at least 2 points".into()));
        }
        if !(self.layer_scale > 0.0 && self.layer_scale.is_finite()) {
            return Err(Error::Config("layer scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Largest admissible normalized backbone slope: `nu^(1/slowdown) / (1 - nu)`.
pub fn slope_bound(nu: f64, sigma_slowdown: u32) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::domain(format!("nu must lie in (0, 1), got {nu}")));
    }
    if sigma_slowdown == 0 {
        return Err(Error::domain("slowdown must be >= 1"));
    }
    Ok(nu.powf(1.0 / f64::from(sigma_slowdown)) / (1.0 - nu))
}

/// `|alpha_{i+1} - alpha_i| / (x_{i+1} - x_i)` for level `i`.
fn normalized_slope(trace: &LearningTrace, i: usize) -> Option<f64> {
    let (a0, a1) = (trace.alpha(i)?, trace.alpha(i + 1)?);
    let (x0, x1) = (trace.x(i)?, trace.x(i + 1)?);
    Some((a1 - a0).abs() / (x1 - x0) as f64)
}

pub fn detect_wlevel(trace: &LearningTrace, config: &LevelConfig) -> Result<Option<usize>> {
    let bound = slope_bound(config.nu, config.sigma_slowdown)?;
    let span = config.lambda_lookahead as usize;
    let last = trace.last_level();
    // The window [w, w + span] needs alpha up to w + span + 1.
    let Some(last_start) = last.checked_sub(span + 1) else {
        return Ok(None);
    };
    let mut run = 0usize;
    for i in FIRST_LEVEL..last {
        let ok = normalized_slope(trace, i).is_some_and(|s| s <= bound);
        run = if ok { run + 1 } else { 0 };
        if run == span + 1 {
            let w = i - span;
            return Ok((w <= last_start).then_some(w));
        }
    }
    Ok(None)
}

pub fn detect_plevel(trace: &LearningTrace, wlevel: usize) -> Option<usize> {
    (wlevel.max(FIRST_LEVEL)..=trace.last_level()).find(|&l| trace.alpha(l).is_some_and(|a| a <= 100.0))
}

/// Convergence layer of `level`: sup distance between its trend and the
/// previous one over the sampling window, times `layer_scale`.
pub fn convergence_layer(trace: &LearningTrace, level: usize, config: &LevelConfig) -> Result<f64> {
    config.validate()?;
    if level < FIRST_LAYER_LEVEL {
        return Err(Error::domain(format!(
            "convergence layers start at level {FIRST_LAYER_LEVEL}, got {level}"
        )));
    }
    let (Some(cur), Some(prev)) = (trace.trend(level), trace.trend(level - 1)) else {
        return Err(Error::domain(format!(
            "trace has no trends for levels {} and {level}",
            level - 1
        )));
    };
    Ok(sup_distance(cur, prev, config) * config.layer_scale)
}

fn sup_distance(a: &PowerLawTrend, b: &PowerLawTrend, config: &LevelConfig) -> f64 {
    let (lo, hi) = (config.window.0 as f64, config.window.1 as f64);
    let n = config.window_grid;
    (0..n)
        .map(|k| {
            let x = if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            };
            (a.params.eval_unchecked(x) - b.params.eval_unchecked(x)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn detect_clevel(trace: &LearningTrace, plevel: usize, config: &LevelConfig) -> Result<Option<usize>> {
    for level in plevel.max(FIRST_LAYER_LEVEL)..=trace.last_level() {
        if convergence_layer(trace, level, config)? <= config.tau {
            return Ok(Some(level));
        }
    }
    Ok(None)
}

/// Same as [`detect_clevel`] but over precomputed layers.
fn clevel_from_layers(layers: &[(usize, f64)], plevel: usize, tau: f64) -> Option<usize> {
    layers.iter().find(|(l, v)| *l >= plevel && *v <= tau).map(|(l, _)| *l)
}

/// A learning trace together with its detected levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub trace: LearningTrace,
    pub wlevel: Option<usize>,
    pub plevel: Option<usize>,
    pub clevel: Option<usize>,
    pub config: LevelConfig,
    /// Convergence layer of every level from 4 to the end of the trace.
    pub layers: Vec<(usize, f64)>,
}

impl Run {
    /// Detects every level of `trace` under `config`.
    pub fn analyze(trace: LearningTrace, config: LevelConfig) -> Result<Self> {
        config.validate()?;
        let layers = (FIRST_LAYER_LEVEL..=trace.last_level())
            .map(|l| convergence_layer(&trace, l, &config).map(|v| (l, v)))
            .collect::<Result<Vec<_>>>()?;
        let wlevel = detect_wlevel(&trace, &config)?;
        let plevel = wlevel.and_then(|w| detect_plevel(&trace, w));
        let clevel = plevel.and_then(|p| clevel_from_layers(&layers, p, config.tau));
        Ok(Run {
            trace,
            wlevel,
            plevel,
            clevel,
            config,
            layers,
        })
    }

    /// The frozen trend of the convergence level.
    pub fn predictor(&self) -> Option<&PowerLawTrend> {
        self.clevel.and_then(|l| self.trace.trend(l))
    }

    /// Estimated accuracy at `x` from the frozen predictor.
    pub fn estimate(&self, x: f64) -> Option<f64> {
        use crate::pattern::AccuracyPattern;
        self.predictor().and_then(|t| t.params.eval(x).ok())
    }

    /// Backbone values over `[wlevel, clevel]`.
    pub fn robustness_backbone(&self) -> Option<&[f64]> {
        let (w, c) = (self.wlevel?, self.clevel?);
        let lo = w - FIRST_LEVEL;
        let hi = c - FIRST_LEVEL;
        self.trace.backbone.get(lo..=hi)
    }

    pub fn word_position(&self, level: Option<usize>) -> Option<u64> {
        level.and_then(|l| self.trace.x(l))
    }
}
