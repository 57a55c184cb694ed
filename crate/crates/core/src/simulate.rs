//! Synthetic learners with known power-law curves and seeded Gaussian noise.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::Observation;
use crate::pattern::PowerLawParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLearner {
    pub truth: PowerLawParams,
    /// Standard deviation of the additive noise, in accuracy points.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Strictly increasing word positions.
    pub x_grid: Vec<u64>,
}

impl SyntheticLearner {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::domain(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.x_grid.first() == Some(&0) || self.x_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("x grid must be positive and strictly increasing"));
        }
        Ok(())
    }
}

/// Samples the learner's curve on its grid, with noise, clamped to
/// `[0, 100]`. The same seed always yields the same stream.
pub fn generate(learner: &SyntheticLearner) -> Result<Vec<Observation>> {
    learner.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(learner.seed);
    sample(learner, &mut rng, None)
}

/// One noisy stream per fold (labelled `1..=k`) drawn from a single seeded
/// generator.
pub fn generate_folds(learner: &SyntheticLearner, k: u32) -> Result<Vec<Observation>> {
    learner.validate()?;
    if k == 0 {
        return Err(Error::domain("fold count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(learner.seed);
    let mut out = Vec::with_capacity(learner.x_grid.len() * k as usize);
    for fold in 1..=k {
        out.extend(sample(learner, &mut rng, Some(fold))?);
    }
    Ok(out)
}

fn sample(learner: &SyntheticLearner, rng: &mut ChaCha8Rng, fold: Option<u32>) -> Result<Vec<Observation>> {
    let noise = Normal::new(0.0, learner.noise_sigma).map_err(|e| Error::domain(e.to_string()))?;
    Ok(learner
        .x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let clean = learner.truth.eval_unchecked(x as f64);
            let jitter = if learner.noise_sigma > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            };
            Observation {
                level: i as u32 + 1,
                x,
                accuracy: (clean + jitter).clamp(0.0, 100.0),
                fold,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLearner {
    pub name: String,
    pub learner: SyntheticLearner,
}

/// Generates every learner of a fleet. Names must be distinct and all
/// learners must share one grid so the streams can be compared on a common
/// control sequence.
pub fn make_fleet(specs: &[NamedLearner]) -> Result<BTreeMap<String, Vec<Observation>>> {
    let mut names = BTreeSet::new();
    for s in specs {
        if !names.insert(s.name.as_str()) {
            return Err(Error::domain(format!("duplicate learner name `{}`", s.name)));
        }
    }
    if let Some(first) = specs.first() {
        if let Some(other) = specs.iter().find(|s| s.learner.x_grid != first.learner.x_grid) {
            return Err(Error::Alignment(format!(
                "learner `{}` does not share the grid of `{}`",
                other.name, first.name
            )));
        }
    }
    specs
        .iter()
        .map(|s| generate(&s.learner).map(|obs| (s.name.clone(), obs)))
        .collect()
}
