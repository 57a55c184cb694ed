//! Learning-cycle observations and the observation CSV format
//! (`level,x_words,accuracy,fold`, with `fold` optional).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(training size, accuracy)` point produced by a learning cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Cycle index, starting at 1.
    pub level: u32,
    /// Word position reached by the individual of this level.
    pub x: u64,
    /// Accuracy percent in `[0, 100]`.
    pub accuracy: f64,
    /// Cross-validation fold, in `[1, k]`, when the stream is per fold.
    pub fold: Option<u32>,
}

impl Observation {
    pub fn new(level: u32, x: u64, accuracy: f64) -> Self {
        Observation {
            level,
            x,
            accuracy,
            fold: None,
        }
    }
}

/// Checks the structural invariants of a stream: positive levels and sizes,
/// finite accuracies and strictly increasing word positions.
///
/// The `[0, 100]` accuracy range is enforced where observations enter the
/// system ([`read_csv`], [`check_accuracy_range`]), not here, so synthetic
/// curves can be fitted over their whole domain.
pub fn validate_stream(obs: &[Observation]) -> Result<()> {
    for (i, o) in obs.iter().enumerate() {
        if o.level == 0 {
            return Err(Error::domain(format!("observation {i}: level must be >= 1")));
        }
        if o.x == 0 {
            return Err(Error::domain(format!("observation {i}: x must be > 0")));
        }
        if !o.accuracy.is_finite() {
            return Err(Error::domain(format!("observation {i}: accuracy is not finite")));
        }
    }
    for w in obs.windows(2) {
        if w[1].x <= w[0].x {
            return Err(Error::domain(format!(
                "word positions must be strictly increasing ({} then {})",
                w[0].x, w[1].x
            )));
        }
    }
    Ok(())
}

pub fn check_accuracy_range(obs: &[Observation]) -> Result<()> {
    match obs.iter().position(|o| !(0.0..=100.0).contains(&o.accuracy)) {
        Some(i) => Err(Error::domain(format!(
            "observation {i}: accuracy {} outside [0, 100]",
            obs[i].accuracy
        ))),
        None => Ok(()),
    }
}

/// Averages per-fold streams into one canonical stream.
///
/// Every fold must carry exactly the same `(level, x)` grid.
pub fn average_fold_streams(folds: &[Vec<Observation>]) -> Result<Vec<Observation>> {
    let Some(first) = folds.first() else {
        return Ok(Vec::new());
    };
    for (k, fold) in folds.iter().enumerate().skip(1) {
        if fold.len() != first.len() || fold.iter().zip(first).any(|(o, f)| o.x != f.x || o.level != f.level) {
            return Err(Error::Alignment(format!(
                "fold stream {} does not share the word grid of the first fold",
                k + 1
            )));
        }
    }
    let n = folds.len() as f64;
    Ok(first
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let sum: f64 = folds.iter().map(|f| f[i].accuracy).sum();
            Observation {
                level: o.level,
                x: o.x,
                accuracy: sum / n,
                fold: None,
            }
        })
        .collect())
}

/// Turns a possibly fold-labelled observation list into one stream ordered by
/// word position. Unlabelled input is returned sorted; labelled input is split
/// by fold and averaged.
pub fn canonical_stream(obs: &[Observation]) -> Result<Vec<Observation>> {
    let labelled = obs.iter().filter(|o| o.fold.is_some()).count();
    if labelled == 0 {
        let mut out = obs.to_vec();
        out.sort_by_key(|o| o.x);
        validate_stream(&out)?;
        return Ok(out);
    }
    if labelled != obs.len() {
        return Err(Error::Alignment(
            "either every observation carries a fold or none does".into(),
        ));
    }
    let mut by_fold: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
    for o in obs {
        by_fold.entry(o.fold.unwrap_or(0)).or_default().push(*o);
    }
    let mut folds: Vec<Vec<Observation>> = by_fold.into_values().collect();
    for f in &mut folds {
        f.sort_by_key(|o| o.x);
        validate_stream(f)?;
    }
    average_fold_streams(&folds)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    level: u32,
    x_words: u64,
    accuracy: f64,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    fold: Option<u32>,
}

/// Parses observation CSV from a reader. `source` names the input in
/// diagnostics.
pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    for required in ["level", "x_words", "accuracy"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                message: format!("missing column `{required}` in header"),
            });
        }
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(|e| csv_error(source, e))? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: CsvRow = record.deserialize(Some(&headers)).map_err(|e| csv_error(source, e))?;
        if !(0.0..=100.0).contains(&row.accuracy) || row.level == 0 || row.x_words == 0 {
            return Err(Error::Parse {
                path: source.to_string(),
                line,
                message: "level and x_words must be >= 1 and accuracy within [0, 100]".into(),
            });
        }
        out.push(Observation {
            level: row.level,
            x: row.x_words,
            accuracy: row.accuracy,
            fold: row.fold,
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Vec<Observation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string())
}

/// Writes observations as CSV. The `fold` column is emitted only when some
/// observation carries a fold.
pub fn write_csv<W: Write>(writer: W, obs: &[Observation]) -> Result<()> {
    let with_fold = obs.iter().any(|o| o.fold.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["level", "x_words", "accuracy"];
    if with_fold {
        header.push("fold");
    }
    w.write_record(&header).map_err(|e| csv_error("<output>", e))?;
    for o in obs {
        let mut rec = vec![o.level.to_string(), o.x.to_string(), o.accuracy.to_string()];
        if with_fold {
            rec.push(o.fold.map(|f| f.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(|e| csv_error("<output>", e))?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let line = match e.kind() {
        csv::ErrorKind::Deserialize { pos: Some(p), .. } => p.line(),
        _ => e.position().map(|p| p.line()).unwrap_or(0),
    };
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        path: source.to_string(),
        line,
        message,
    }
}
