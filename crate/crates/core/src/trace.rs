//! Learning traces: the trend fitted at every level and their asymptotes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_trend, FitConfig, PowerLawTrend, MIN_FIT_POINTS};
use crate::observation::{canonical_stream, Observation};

/// First level with a trend.
pub const FIRST_LEVEL: usize = MIN_FIT_POINTS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    /// Trend of level `FIRST_LEVEL + i` at index `i`.
    pub trends: Vec<PowerLawTrend>,
    /// Asymptote of each trend, aligned with `trends`.
    pub backbone: Vec<f64>,
    /// Word position of every observation; level `i` sits at `xs[i - 1]`.
    pub xs: Vec<u64>,
    /// The fold-averaged stream the trends were fitted on.
    pub observations: Vec<Observation>,
}

impl LearningTrace {
    /// Assembles a trace from already fitted trends. `trends[i]` must have
    /// level `3 + i` and `xs` must cover every level.
    pub fn from_parts(trends: Vec<PowerLawTrend>, xs: Vec<u64>) -> Result<Self> {
        if trends.is_empty() {
            return Err(Error::InsufficientData {
                needed: FIRST_LEVEL,
                got: xs.len(),
            });
        }
        if let Some((i, t)) = trends.iter().enumerate().find(|(i, t)| t.level != FIRST_LEVEL + i) {
            return Err(Error::domain(format!(
                "trend {i} has level {}, expected {}",
                t.level,
                FIRST_LEVEL + i
            )));
        }
        if xs.len() < FIRST_LEVEL + trends.len() - 1 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("word positions must cover every level and increase"));
        }
        Ok(LearningTrace {
            backbone: trends.iter().map(|t| t.asymptote()).collect(),
            trends,
            xs,
            observations: Vec::new(),
        })
    }

    pub fn first_level(&self) -> usize {
        FIRST_LEVEL
    }

    /// Highest level with a trend.
    pub fn last_level(&self) -> usize {
        FIRST_LEVEL + self.trends.len() - 1
    }

    pub fn len(&self) -> usize {
        self.trends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trends.is_empty()
    }

    pub fn trend(&self, level: usize) -> Option<&PowerLawTrend> {
        level.checked_sub(FIRST_LEVEL).and_then(|i| self.trends.get(i))
    }

    /// Asymptote of the trend at `level`.
    pub fn alpha(&self, level: usize) -> Option<f64> {
        level
            .checked_sub(FIRST_LEVEL)
            .and_then(|i| self.backbone.get(i).copied())
    }

    /// Word position of `level`.
    pub fn x(&self, level: usize) -> Option<u64> {
        level.checked_sub(1).and_then(|i| self.xs.get(i).copied())
    }

    /// Level whose word position is `x`.
    pub fn level_at(&self, x: u64) -> Option<usize> {
        self.xs.binary_search(&x).ok().map(|i| i + 1)
    }
}

/// Fits the trends of levels `3..=max_level`, each on its own prefix of the
/// fold-averaged stream.
///
/// Fits are independent of one another, so a trace cut at a lower level is
/// a prefix of a longer one. Non-converged fits are kept.
pub fn build_trace(observations: &[Observation], config: &FitConfig, max_level: usize) -> Result<LearningTrace> {
    let stream = canonical_stream(observations)?;
    if stream.len() < FIRST_LEVEL {
        return Err(Error::InsufficientData {
            needed: FIRST_LEVEL,
            got: stream.len(),
        });
    }
    if max_level < FIRST_LEVEL || max_level > stream.len() {
        return Err(Error::domain(format!(
            "max level {max_level} outside [{FIRST_LEVEL}, {}]",
            stream.len()
        )));
    }
    let trends = (FIRST_LEVEL..=max_level)
        .map(|level| fit_trend(&stream, level, config))
        .collect::<Result<Vec<_>>>()?;
    let backbone = trends.iter().map(|t| t.asymptote()).collect();
    Ok(LearningTrace {
        trends,
        backbone,
        xs: stream.iter().map(|o| o.x).collect(),
        observations: stream,
    })
}

/// [`build_trace`] over every available level.
pub fn build_full_trace(observations: &[Observation], config: &FitConfig) -> Result<LearningTrace> {
    let n = canonical_stream(observations)?.len();
    build_trace(observations, config, n.max(FIRST_LEVEL))
}
