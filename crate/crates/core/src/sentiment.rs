//! AFINN-style polarity scoring.
//!
//! Word polarity is the lexicon score (0 when absent); sentence polarity is
//! the sum over tokens, so it is additive over concatenation.

use std::collections::HashMap;
use std::fs;
use std::iter::Sum;
use std::ops::Add;
use std::path::Path;

use crate::corpus::decode_lossy;
use crate::error::{Error, Result};

const AFINN_111: &str = include_str!("../../../data/afinn-111.tsv");

pub const MIN_SCORE: i32 = -5;
pub const MAX_SCORE: i32 = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Polarity(pub f64);

impl Polarity {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Absolute difference, the quantity both Mod-EDA selections minimize.
    pub fn gap(self, other: Polarity) -> f64 {
        (self.0 - other.0).abs()
    }
}

impl Add for Polarity {
    type Output = Polarity;

    fn add(self, rhs: Polarity) -> Polarity {
        Polarity(self.0 + rhs.0)
    }
}

impl Sum for Polarity {
    fn sum<I: Iterator<Item = Polarity>>(iter: I) -> Polarity {
        iter.fold(Polarity::default(), Add::add)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentimentLexicon {
    scores: HashMap<String, i8>,
}

/// A parsed lexicon plus the number of multi-word entries that were skipped.
#[derive(Debug, Clone)]
pub struct LoadedLexicon {
    pub lexicon: SentimentLexicon,
    pub multiword_skipped: usize,
}

impl SentimentLexicon {
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, i32)>,
        S: AsRef<str>,
    {
        let mut scores = HashMap::new();
        for (word, score) in entries {
            if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
                return Err(Error::invalid(format!(
                    "score {score} for {:?} outside [-5, 5]",
                    word.as_ref()
                )));
            }
            scores.insert(word.as_ref().to_lowercase(), score as i8);
        }
        Ok(SentimentLexicon { scores })
    }

    /// The bundled AFINN-111 word list.
    pub fn afinn_111() -> Self {
        Self::parse(AFINN_111, "afinn-111.tsv")
            .expect("bundled AFINN-111 is valid")
            .lexicon
    }

    /// Parses `word<TAB>score` lines. Later duplicates win; entries whose word
    /// contains a space are counted and skipped.
    pub fn parse(text: &str, source_name: &str) -> Result<LoadedLexicon> {
        let mut scores = HashMap::new();
        let mut multiword_skipped = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let (word, score) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `word<TAB>score`"))?;
            let score: i32 = score
                .trim()
                .parse()
                .map_err(|_| Error::parse(source_name, i + 1, format!("score {score:?} is not an integer")))?;
            if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    format!("score {score} outside [-5, 5]"),
                ));
            }
            let word = word.trim();
            if word.contains(char::is_whitespace) {
                multiword_skipped += 1;
                continue;
            }
            scores.insert(word.to_lowercase(), score as i8);
        }
        Ok(LoadedLexicon {
            lexicon: SentimentLexicon { scores },
            multiword_skipped,
        })
    }

    pub fn load(path: &Path) -> Result<LoadedLexicon> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&decode_lossy(&bytes), &path.display().to_string())
    }

    pub fn score(&self, word: &str) -> Option<i32> {
        self.scores.get(word).map(|&s| i32::from(s))
    }

    pub fn word_polarity(&self, word: &str) -> Polarity {
        Polarity(f64::from(self.score(word).unwrap_or(0)))
    }

    pub fn sentence_polarity<S: AsRef<str>>(&self, tokens: &[S]) -> Polarity {
        tokens.iter().map(|t| self.word_polarity(t.as_ref())).sum()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}
