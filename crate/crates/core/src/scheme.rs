//! Sentence-aligned learning schemes over a tagged corpus.
//!
//! Individuals grow by a step function over raw word counts, and each one is
//! rounded up to the end of the sentence that contains its last word so no
//! sentence is ever truncated during training.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tagged corpus reduced to what the scheme needs: tokens and the word
/// positions at which sentences end.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub tokens: Vec<(String, String)>,
    /// Strictly increasing, 1-based word positions; the last one equals the
    /// token count.
    pub sentence_ends: Vec<u64>,
}

impl Corpus {
    /// Builds an untagged corpus with the given sentence lengths, useful for
    /// tests and for schemes where only boundaries matter.
    pub fn from_sentence_lengths(lengths: &[u64]) -> Result<Self> {
        let mut ends = Vec::with_capacity(lengths.len());
        let mut pos = 0u64;
        for &len in lengths {
            if len == 0 {
                return Err(Error::domain("sentences must contain at least one word"));
            }
            pos += len;
            ends.push(pos);
        }
        Ok(Corpus {
            tokens: (0..pos).map(|_| (String::new(), String::new())).collect(),
            sentence_ends: ends,
        })
    }

    /// Reads the token-per-line format: `word<TAB>tag`, blank line between
    /// sentences.
    pub fn read<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                corpus.close_sentence();
                continue;
            }
            let Some((word, tag)) = line.split_once('\t') else {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: idx as u64 + 1,
                    message: "expected `word<TAB>tag`".into(),
                });
            };
            corpus.tokens.push((word.to_string(), tag.to_string()));
        }
        corpus.close_sentence();
        if corpus.tokens.is_empty() {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 0,
                message: "corpus contains no tokens".into(),
            });
        }
        Ok(corpus)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file), &path.display().to_string())
    }

    fn close_sentence(&mut self) {
        let n = self.tokens.len() as u64;
        if n > 0 && self.sentence_ends.last() != Some(&n) {
            self.sentence_ends.push(n);
        }
    }

    pub fn len(&self) -> u64 {
        self.sentence_ends.last().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_ends.is_empty()
    }

    /// Position of the first sentence end at or beyond word `ell`.
    pub fn sentence_ceiling(&self, ell: u64) -> Result<u64> {
        if ell == 0 {
            return Err(Error::domain("word positions start at 1"));
        }
        let size = self.len();
        if ell > size {
            return Err(Error::OutOfRange { position: ell, size });
        }
        let i = self.sentence_ends.partition_point(|&end| end < ell);
        Ok(self.sentence_ends[i])
    }
}

/// Free-function form of [`Corpus::sentence_ceiling`].
pub fn sentence_ceiling(corpus: &Corpus, ell: u64) -> Result<u64> {
    corpus.sentence_ceiling(ell)
}

/// Number of words added at each level after the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Constant(u64),
    /// Explicit sizes for levels 2, 3, ...; the last entry repeats.
    Schedule(Vec<u64>),
}

impl Step {
    /// Size added at `level` (levels start at 2 for increments).
    pub fn at(&self, level: u32) -> u64 {
        match self {
            Step::Constant(s) => *s,
            Step::Schedule(sizes) => {
                let i = (level.saturating_sub(2) as usize).min(sizes.len().saturating_sub(1));
                sizes.get(i).copied().unwrap_or(0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Step::Constant(s) => *s > 0,
            Step::Schedule(v) => !v.is_empty() && v.iter().all(|&s| s > 0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("step sizes must be positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningScheme {
    pub kernel_size: u64,
    pub step: Step,
    pub corpus_size: u64,
}

impl LearningScheme {
    pub fn new(kernel_size: u64, step: Step, corpus_size: u64) -> Result<Self> {
        let s = LearningScheme {
            kernel_size,
            step,
            corpus_size,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(kernel_size: u64, step: u64, corpus_size: u64) -> Result<Self> {
        Self::new(kernel_size, Step::Constant(step), corpus_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 {
            return Err(Error::domain("kernel must hold at least one word"));
        }
        if self.kernel_size >= self.corpus_size {
            return Err(Error::domain(format!(
                "kernel ({}) must be a proper part of the corpus ({})",
                self.kernel_size, self.corpus_size
            )));
        }
        self.step.validate()
    }

    /// Raw cumulative sizes `|C_1| = kernel`, `|C_i| = |C_{i-1}| + step(i)`,
    /// up to the corpus size.
    pub fn raw_sizes(&self) -> Vec<u64> {
        let mut out = vec![self.kernel_size];
        let mut size = self.kernel_size;
        let mut level = 2u32;
        loop {
            size += self.step.at(level);
            if size > self.corpus_size {
                break;
            }
            out.push(size);
            level += 1;
        }
        out
    }
}

/// Word positions of the sentence-aligned individuals of `scheme` over
/// `corpus`. Raw sizes that round up to an already used sentence end are
/// skipped so positions stay strictly increasing.
pub fn build_individuals(corpus: &Corpus, scheme: &LearningScheme) -> Result<Vec<u64>> {
    scheme.validate()?;
    if scheme.corpus_size != corpus.len() {
        return Err(Error::domain(format!(
            "scheme corpus size {} differs from corpus length {}",
            scheme.corpus_size,
            corpus.len()
        )));
    }
    let mut out: Vec<u64> = Vec::new();
    for raw in scheme.raw_sizes() {
        let x = corpus.sentence_ceiling(raw)?;
        if out.last().is_none_or(|&last| x > last) {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(ends: &[u64]) -> Corpus {
        let mut lens = Vec::new();
        let mut prev = 0;
        for &e in ends {
            lens.push(e - prev);
            prev = e;
        }
        Corpus::from_sentence_lengths(&lens).unwrap()
    }

    #[test]
    fn ceiling_examples() {
        let c = corpus(&[7, 15, 23]);
        assert_eq!(c.sentence_ceiling(7).unwrap(), 7);
        assert_eq!(c.sentence_ceiling(8).unwrap(), 15);
        assert_eq!(c.sentence_ceiling(1).unwrap(), 7);
        assert_eq!(c.sentence_ceiling(23).unwrap(), 23);
        assert!(matches!(
            c.sentence_ceiling(24),
            Err(Error::OutOfRange { position: 24, size: 23 })
        ));
        assert!(c.sentence_ceiling(0).is_err());
    }

    #[test]
    fn reads_token_per_line_format() {
        let text = "O\tDA0MS\ngato\tNCMS000\n.\tFp\n\nOutra\tDI0FS\n.\tFp\n";
        let c = Corpus::read(text.as_bytes(), "mem").unwrap();
        assert_eq!(c.sentence_ends, vec![3, 5]);
        assert_eq!(c.tokens[1], ("gato".to_string(), "NCMS000".to_string()));

        let no_trailing = "a\tX\n\n\nb\tY";
        assert_eq!(
            Corpus::read(no_trailing.as_bytes(), "m").unwrap().sentence_ends,
            vec![1, 2]
        );

        let err = Corpus::read("a\tX\nbroken\n".as_bytes(), "c.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn dense_boundaries_give_exact_multiples() {
        let c = Corpus::from_sentence_lengths(&vec![25; 2000]).unwrap();
        let scheme = LearningScheme::constant(5000, 5000, c.len()).unwrap();
        let xs = build_individuals(&c, &scheme).unwrap();
        assert_eq!(xs.len(), 10);
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(*x, 5000 * (i as u64 + 1));
        }
    }

    #[test]
    fn ragged_boundaries_round_up() {
        let c = Corpus::from_sentence_lengths(&vec![33; 1000]).unwrap();
        let scheme = LearningScheme::constant(5000, 5000, c.len()).unwrap();
        let xs = build_individuals(&c, &scheme).unwrap();
        assert_eq!(xs[0], 5016);
        assert_eq!(xs[1], 10032);
        assert!(xs.iter().all(|x| x % 33 == 0));
    }

    #[test]
    fn single_sentence_corpus() {
        let c = Corpus::from_sentence_lengths(&[100]).unwrap();
        let scheme = LearningScheme::constant(10, 10, 100).unwrap();
        assert_eq!(build_individuals(&c, &scheme).unwrap(), vec![100]);
    }

    #[test]
    fn scheme_validation() {
        assert!(LearningScheme::constant(0, 10, 100).is_err());
        assert!(LearningScheme::constant(100, 10, 100).is_err());
        assert!(LearningScheme::constant(10, 0, 100).is_err());
        let c = Corpus::from_sentence_lengths(&[50]).unwrap();
        let s = LearningScheme::constant(10, 10, 100).unwrap();
        assert!(build_individuals(&c, &s).is_err());
    }

    #[test]
    fn schedule_step_repeats_last() {
        let s = LearningScheme::new(10, Step::Schedule(vec![5, 20]), 100).unwrap();
        assert_eq!(s.raw_sizes(), vec![10, 15, 35, 55, 75, 95]);
    }

    fn lengths() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(1u64..40, 1..120)
    }

    proptest! {
        #[test]
        fn ceiling_matches_linear_scan(lens in lengths(), frac in 0.0f64..1.0) {
            let c = Corpus::from_sentence_lengths(&lens).unwrap();
            let ell = 1 + ((c.len() - 1) as f64 * frac) as u64;
            let got = c.sentence_ceiling(ell).unwrap();
            let oracle = c.sentence_ends.iter().copied().find(|&e| e >= ell).unwrap();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn individuals_are_increasing_sentence_ends(
            lens in lengths(),
            kernel in 1u64..50,
            step in 1u64..60,
        ) {
            let c = Corpus::from_sentence_lengths(&lens).unwrap();
            prop_assume!(kernel < c.len());
            let scheme = LearningScheme::constant(kernel, step, c.len()).unwrap();
            let xs = build_individuals(&c, &scheme).unwrap();
            prop_assert!(!xs.is_empty());
            prop_assert_eq!(xs[0], c.sentence_ceiling(kernel).unwrap());
            for w in xs.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for x in &xs {
                prop_assert!(c.sentence_ends.contains(x));
                prop_assert!(*x <= c.len());
            }
        }
    }
}
