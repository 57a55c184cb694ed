//! Evaluation of run collections: fold averaging, level detection,
//! monitoring along a control sequence and the reliability/robustness
//! metrics of every run.

mod config;
mod report;

use serde::{Deserialize, Serialize};

pub use config::{
    parse_controls, parse_window, ConfigFile, ControlSpec, ExperimentConfig, ReplayRow, RunEntry, RunSource, RunSpec,
    DEFAULT_TAU,
};
pub use report::{emit_report, round_half_even, ReportFormat};

use crate::error::{Error, Result};
use crate::levels::{LevelConfig, Run};
use crate::metrics::{self, ControlSequence, CurvePair};
use crate::observation::{average_fold_streams, canonical_stream, Observation};
use crate::pattern::PowerLawParams;
use crate::scheme::Corpus;
use crate::trace::build_full_trace;

/// Averages `k` per-fold streams sharing one word grid.
pub fn kfold_average(samples: &[Vec<Observation>], k: usize) -> Result<Vec<Observation>> {
    if k == 0 {
        return Err(Error::domain("fold count must be >= 1"));
    }
    if samples.len() != k {
        return Err(Error::Alignment(format!(
            "expected {k} fold streams, got {}",
            samples.len()
        )));
    }
    average_fold_streams(samples)
}

/// Ac and EAc of one run at one control level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCell {
    pub position: u64,
    pub ac: Option<f64>,
    pub eac: Option<f64>,
    /// Ac was linearly interpolated between neighbouring observations.
    pub interpolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    /// Word positions of the detected levels.
    pub wlevel: Option<u64>,
    pub plevel: Option<u64>,
    pub clevel: Option<u64>,
    pub tau: f64,
    pub cells: Vec<ControlCell>,
    pub mape: Option<f64>,
    pub dmr: Option<f64>,
    pub rr: Option<f64>,
    /// Frozen trend of the convergence level.
    pub predictor: Option<PowerLawParams>,
    /// `(x, Ac)` for every observation of the run.
    pub actual_series: Vec<(u64, f64)>,
    /// `(x, EAc)` from the frozen trend at the same positions.
    pub estimated_series: Vec<(u64, f64)>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl RunReport {
    fn empty(name: &str, tau: f64, controls: &[u64]) -> Self {
        RunReport {
            name: name.to_string(),
            wlevel: None,
            plevel: None,
            clevel: None,
            tau,
            cells: controls
                .iter()
                .map(|&position| ControlCell {
                    position,
                    ac: None,
                    eac: None,
                    interpolated: false,
                })
                .collect(),
            mape: None,
            dmr: None,
            rr: None,
            predictor: None,
            actual_series: Vec::new(),
            estimated_series: Vec::new(),
            notes: Vec::new(),
            error: None,
        }
    }

    /// Whether the run predicts on the whole control sequence.
    pub fn predicts(&self) -> bool {
        self.plevel.is_some() && self.cells.iter().all(|c| c.ac.is_some() && c.eac.is_some())
    }

    fn curve_pair(&self) -> CurvePair {
        CurvePair::from_points(self.cells.iter().filter_map(|c| Some((c.position, c.ac?, c.eac?))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerEntry {
    pub run: String,
    pub peer: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Resolved control positions.
    pub controls: Vec<u64>,
    /// Rows ordered by run name.
    pub rows: Vec<RunReport>,
    /// Pairwise ratios between predicting runs (both orders).
    pub rer: Vec<RerEntry>,
    /// Number of runs taking part in decision-making reliability.
    pub dmr_pool: usize,
}

impl EvaluationReport {
    pub fn row(&self, name: &str) -> Option<&RunReport> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn rer(&self, run: &str, peer: &str) -> Option<f64> {
        self.rer
            .iter()
            .find(|e| e.run == run && e.peer == peer)
            .map(|e| e.value)
    }
}

/// Rounds nominal word positions to sentence ends.
enum Ceiling<'a> {
    Corpus(&'a Corpus),
    /// Smallest observed position at or beyond the nominal one, or the
    /// nominal one past the end of the grid.
    Grid(&'a [u64]),
    Nominal,
}

impl Ceiling<'_> {
    fn apply(&self, nominal: u64) -> Result<u64> {
        match self {
            Ceiling::Corpus(c) => c.sentence_ceiling(nominal),
            Ceiling::Grid(xs) => Ok(xs.iter().copied().find(|&x| x >= nominal).unwrap_or(nominal)),
            Ceiling::Nominal => Ok(nominal),
        }
    }
}

/// Evaluates every run of the collection and assembles the report.
///
/// A run that fails (bad observations, no prediction level, ...) keeps its
/// row with the failure recorded; it never aborts the collection. Runs
/// without a prediction over the whole control sequence are left out of
/// every other run's decision-making pool.
pub fn evaluate_collection(config: &ExperimentConfig) -> Result<EvaluationReport> {
    config.validate()?;

    let mut specs: Vec<&RunSpec> = config.runs.iter().collect();
    specs.sort_by(|a, b| a.name.cmp(&b.name));

    // Streams are canonicalized once; failures stay attached to their run.
    let streams: Vec<Option<Result<Vec<Observation>>>> = specs
        .iter()
        .map(|s| match &s.source {
            RunSource::Observations(obs) => Some(prepare_stream(obs, config.folds)),
            RunSource::Replay(_) => None,
        })
        .collect();
    let grid: Option<Vec<u64>> = streams
        .iter()
        .flatten()
        .filter_map(|r| r.as_ref().ok())
        .max_by_key(|s| s.last().map(|o| o.x))
        .map(|s| s.iter().map(|o| o.x).collect());
    let ceiling = match (&config.corpus, &grid) {
        (Some(c), _) => Ceiling::Corpus(c),
        (None, Some(g)) => Ceiling::Grid(g),
        (None, None) => Ceiling::Nominal,
    };

    let controls = config
        .controls
        .nominal()
        .into_iter()
        .map(|n| ceiling.apply(n))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = config.levels;
    levels.window = (ceiling.apply(levels.window.0)?, ceiling.apply(levels.window.1)?);

    let mut rows = Vec::with_capacity(specs.len());
    for (spec, stream) in specs.iter().zip(streams) {
        let tau = spec.tau.unwrap_or(levels.tau);
        let mut row = RunReport::empty(&spec.name, tau, &controls);
        let outcome = match (&spec.source, stream) {
            (RunSource::Replay(replay), _) => fill_replay(&mut row, replay),
            (RunSource::Observations(_), Some(Ok(stream))) => {
                fill_live(&mut row, &stream, config, LevelConfig { tau, ..levels })
            }
            (RunSource::Observations(_), Some(Err(e))) => Err(e),
            (RunSource::Observations(_), None) => unreachable!("live runs always have a stream"),
        };
        if let Err(e) = outcome {
            row.error = Some(e.to_string());
            for c in &mut row.cells {
                c.eac = None;
            }
            row.mape = None;
            row.rr = None;
        }
        rows.push(row);
    }

    let seq = ControlSequence::new(controls.clone())?;
    let pool: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].predicts()).collect();
    let pairs: Vec<CurvePair> = pool.iter().map(|&i| rows[i].curve_pair()).collect();
    let mut rer = Vec::new();
    for (a, &ia) in pool.iter().enumerate() {
        for (b, &ib) in pool.iter().enumerate() {
            if a != b {
                rer.push(RerEntry {
                    run: rows[ia].name.clone(),
                    peer: rows[ib].name.clone(),
                    value: metrics::rer(&pairs[a], &pairs[b], &seq)?,
                });
            }
        }
    }
    if pool.len() >= 2 {
        for (a, &ia) in pool.iter().enumerate() {
            let peers: Vec<&CurvePair> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| *b != a)
                .map(|(_, p)| p)
                .collect();
            rows[ia].dmr = Some(metrics::dmr(&pairs[a], &peers, &seq)?);
        }
    }
    for row in &mut rows {
        if row.predicts() {
            row.mape = Some(metrics::mape(&row.curve_pair(), &seq)?);
        }
    }

    Ok(EvaluationReport {
        controls,
        dmr_pool: pool.len(),
        rows,
        rer,
    })
}

fn prepare_stream(obs: &[Observation], folds: Option<u32>) -> Result<Vec<Observation>> {
    if let Some(k) = folds {
        let mut labels: Vec<u32> = obs.iter().filter_map(|o| o.fold).collect();
        labels.sort_unstable();
        labels.dedup();
        let found = if labels.is_empty() { 1 } else { labels.len() as u32 };
        if found != k {
            return Err(Error::Alignment(format!("expected {k} folds, found {found}")));
        }
    }
    crate::observation::check_accuracy_range(obs)?;
    canonical_stream(obs)
}

fn fill_replay(row: &mut RunReport, replay: &ReplayRow) -> Result<()> {
    row.plevel = replay.plevel;
    row.clevel = replay.clevel;
    for (i, cell) in row.cells.iter_mut().enumerate() {
        cell.ac = replay.actual.get(i).copied();
        if replay.plevel.is_some() {
            cell.eac = replay.estimated.as_ref().and_then(|e| e.get(i).copied());
        }
    }
    row.actual_series = row.cells.iter().filter_map(|c| Some((c.position, c.ac?))).collect();
    row.estimated_series = row.cells.iter().filter_map(|c| Some((c.position, c.eac?))).collect();
    row.notes
        .push("replayed values; no trace available for robustness".into());
    Ok(())
}

fn fill_live(
    row: &mut RunReport,
    stream: &[Observation],
    config: &ExperimentConfig,
    levels: LevelConfig,
) -> Result<()> {
    for cell in &mut row.cells {
        match actual_at(stream, cell.position) {
            Some((ac, interpolated)) => {
                cell.ac = Some(ac);
                cell.interpolated = interpolated;
                if interpolated {
                    row.notes.push(format!("Ac at {} interpolated", cell.position));
                }
            }
            None => row.notes.push(format!("no observation covers {}", cell.position)),
        }
    }
    row.actual_series = stream.iter().map(|o| (o.x, o.accuracy)).collect();

    let trace = build_full_trace(stream, &config.fit)?;
    let run = Run::analyze(trace, levels)?;
    row.wlevel = run.word_position(run.wlevel);
    row.plevel = run.word_position(run.plevel);
    row.clevel = run.word_position(run.clevel);
    if row.plevel.is_none() {
        row.notes.push("prediction level not reached".into());
        return Ok(());
    }
    let Some(predictor) = run.predictor().map(|t| t.params) else {
        row.notes.push("convergence level not reached".into());
        return Ok(());
    };
    row.predictor = Some(predictor);
    for cell in &mut row.cells {
        cell.eac = Some(predictor.eval_unchecked(cell.position as f64));
    }
    row.estimated_series = stream
        .iter()
        .map(|o| (o.x, predictor.eval_unchecked(o.x as f64)))
        .collect();
    if let Some(bb) = run.robustness_backbone() {
        row.rr = Some(metrics::rr(bb)?);
    }
    Ok(())
}

/// Ac at `x`: the observation at exactly `x`, else linear interpolation
/// between its neighbours.
fn actual_at(stream: &[Observation], x: u64) -> Option<(f64, bool)> {
    match stream.binary_search_by_key(&x, |o| o.x) {
        Ok(i) => Some((stream[i].accuracy, false)),
        Err(0) => None,
        Err(i) if i == stream.len() => None,
        Err(i) => {
            let (l, r) = (&stream[i - 1], &stream[i]);
            let t = (x - l.x) as f64 / (r.x - l.x) as f64;
            Some((l.accuracy + t * (r.accuracy - l.accuracy), true))
        }
    }
}
