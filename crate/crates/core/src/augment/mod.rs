//! Label-preserving sentence augmentation.
//!
//! Mod-EDA replaces two of EDA's edits with sentiment-aware versions:
//!
//! - *modified substitution* swaps a word for the embedding neighbour whose
//!   AFINN polarity is closest to the original word's;
//! - *modified insertion* draws seeds from the class's frequent keywords,
//!   expands them through the embedding, and inserts the pool word whose
//!   polarity is closest to the sentence's.
//!
//! Random swap and random deletion are shared with the EDA baseline. Every
//! operation returns an [`Edit`] log that [`replay`] turns back into the
//! output tokens.

mod driver;
mod ops;

pub use driver::{augment_corpus, augment_sentence, AugmentResources, AugmentedCorpus, NeighborIndex};
pub use ops::{
    eda_random_insertion, eda_synonym_replacement, modified_insertion, modified_substitution, random_deletion,
    random_swap, SynonymMap,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    None,
    Eda,
    ModEda,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Eda => "eda",
            Mode::ModEda => "mod_eda",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Mode::None),
            "eda" => Ok(Mode::Eda),
            "mod_eda" | "mod-eda" => Ok(Mode::ModEda),
            other => Err(Error::invalid(format!("unknown augmentation mode {other:?}"))),
        }
    }
}

/// Number of edits an operation makes on one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditCount {
    /// `max(1, round(0.1 * sentence length))`, the EDA convention.
    Auto,
    Fixed(usize),
}

impl EditCount {
    pub fn resolve(self, len: usize) -> usize {
        match self {
            EditCount::Auto => ((0.1 * len as f64).round() as usize).max(1),
            EditCount::Fixed(n) => n,
        }
    }

    fn may_be_positive(self) -> bool {
        self != EditCount::Fixed(0)
    }
}

impl fmt::Display for EditCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditCount::Auto => f.write_str("auto"),
            EditCount::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for EditCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(EditCount::Auto);
        }
        s.parse().map(EditCount::Fixed).map_err(|_| {
            Error::invalid(format!(
                "edit count must be `auto` or a non-negative integer, got {s:?}"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub mode: Mode,
    /// Neighbour count for substitution, and seed count for insertion.
    pub t: usize,
    pub n_sub: EditCount,
    pub n_ins: EditCount,
    pub n_swap: EditCount,
    pub p_del: f64,
    /// Augmented sentences per original.
    pub n_aug: usize,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            mode: Mode::ModEda,
            t: 5,
            n_sub: EditCount::Auto,
            n_ins: EditCount::Auto,
            n_swap: EditCount::Auto,
            p_del: 0.1,
            n_aug: 9,
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::invalid("t must be positive"));
        }
        if !(0.0..1.0).contains(&self.p_del) {
            return Err(Error::invalid(format!("p_del must be in [0, 1), got {}", self.p_del)));
        }
        if self.n_aug == 0 {
            return Err(Error::invalid("n_aug must be positive"));
        }
        Ok(())
    }
}

/// One atomic change. Positions refer to the token sequence as it stands
/// immediately before the edit, so a log replays front to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    /// Modified substitution; `candidates` is the neighbour list it chose from.
    Substitute {
        pos: usize,
        old: String,
        new: String,
        candidates: Vec<String>,
    },
    /// Modified insertion; `pool` is seeds plus expansions, `target` the
    /// sentence polarity the choice was matched against.
    Insert {
        pos: usize,
        word: String,
        pool: Vec<String>,
        target: f64,
    },
    Swap {
        pos: usize,
        other: usize,
    },
    Delete {
        pos: usize,
        word: String,
    },
    /// EDA synonym replacement.
    Synonym {
        pos: usize,
        old: String,
        new: String,
    },
    /// EDA random insertion.
    RandomInsert {
        pos: usize,
        word: String,
    },
}

/// Tokens after an operation, with the edits that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Edited {
    pub tokens: Vec<String>,
    pub edits: Vec<Edit>,
}

impl Edited {
    pub(crate) fn unchanged(tokens: &[String]) -> Self {
        Edited {
            tokens: tokens.to_vec(),
            edits: Vec::new(),
        }
    }
}

/// Applies `edits` to `source`, checking that every recorded word matches.
pub fn replay(source: &[String], edits: &[Edit]) -> Result<Vec<String>> {
    let mut tokens = source.to_vec();
    let mismatch = |what: &str, pos: usize| Error::invalid(format!("edit log does not replay: {what} at {pos}"));
    for edit in edits {
        match edit {
            Edit::Substitute { pos, old, new, .. } | Edit::Synonym { pos, old, new } => match tokens.get_mut(*pos) {
                Some(t) if t == old => *t = new.clone(),
                _ => return Err(mismatch("substitution", *pos)),
            },
            Edit::Insert { pos, word, .. } | Edit::RandomInsert { pos, word } => {
                if *pos > tokens.len() {
                    return Err(mismatch("insertion", *pos));
                }
                tokens.insert(*pos, word.clone());
            }
            Edit::Swap { pos, other } => {
                if *pos >= tokens.len() || *other >= tokens.len() || pos == other {
                    return Err(mismatch("swap", *pos));
                }
                tokens.swap(*pos, *other);
            }
            Edit::Delete { pos, word } => {
                if tokens.get(*pos) != Some(word) {
                    return Err(mismatch("deletion", *pos));
                }
                tokens.remove(*pos);
            }
        }
    }
    Ok(tokens)
}

/// An augmented (or original) sentence with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSentence {
    pub id: String,
    pub source_id: String,
    pub label: Option<String>,
    pub tokens: Vec<String>,
    pub ops: Vec<Edit>,
}

/// The `ops` entries of the JSONL output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub op: String,
    pub pos: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos2: Option<usize>,
    pub old: Option<String>,
    pub new: Option<String>,
}

/// One line of the augmentation output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub id: String,
    pub label: Option<String>,
    pub text: String,
    pub source_id: String,
    pub ops: Vec<OpRecord>,
}

/// Flattens an edit log to `{op, pos, old, new}` records. Swaps carry the
/// second index in `pos2` and the two exchanged words in `old`/`new`.
pub fn op_records(source: &[String], edits: &[Edit]) -> Vec<OpRecord> {
    let mut tokens = source.to_vec();
    let mut out = Vec::with_capacity(edits.len());
    for edit in edits {
        let rec = match edit {
            Edit::Substitute { pos, old, new, .. } => record("substitute", *pos, None, Some(old), Some(new)),
            Edit::Synonym { pos, old, new } => record("synonym", *pos, None, Some(old), Some(new)),
            Edit::Insert { pos, word, .. } => record("insert", *pos, None, None, Some(word)),
            Edit::RandomInsert { pos, word } => record("random_insert", *pos, None, None, Some(word)),
            Edit::Swap { pos, other } => record("swap", *pos, Some(*other), tokens.get(*pos), tokens.get(*other)),
            Edit::Delete { pos, word } => record("delete", *pos, None, Some(word), None),
        };
        out.push(rec);
        if let Ok(next) = replay(&tokens, std::slice::from_ref(edit)) {
            tokens = next;
        }
    }
    out
}

fn record(op: &str, pos: usize, pos2: Option<usize>, old: Option<&String>, new: Option<&String>) -> OpRecord {
    OpRecord {
        op: op.to_owned(),
        pos,
        pos2,
        old: old.cloned(),
        new: new.cloned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn edit_count_auto_follows_eda_rule() {
        assert_eq!(EditCount::Auto.resolve(0), 1);
        assert_eq!(EditCount::Auto.resolve(14), 1);
        assert_eq!(EditCount::Auto.resolve(15), 2);
        assert_eq!(EditCount::Auto.resolve(40), 4);
        assert_eq!(EditCount::Fixed(3).resolve(40), 3);
        assert_eq!("auto".parse::<EditCount>().unwrap(), EditCount::Auto);
        assert_eq!("2".parse::<EditCount>().unwrap(), EditCount::Fixed(2));
        assert!("-1".parse::<EditCount>().is_err());
    }

    #[test]
    fn config_bounds() {
        assert!(AugmentationConfig::default().validate().is_ok());
        for bad in [
            AugmentationConfig {
                t: 0,
                ..Default::default()
            },
            AugmentationConfig {
                p_del: 1.0,
                ..Default::default()
            },
            AugmentationConfig {
                n_aug: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn replay_each_kind() {
        let src = toks("a b c");
        let edits = vec![
            Edit::Substitute {
                pos: 0,
                old: "a".into(),
                new: "x".into(),
                candidates: vec!["x".into()],
            },
            Edit::Insert {
                pos: 3,
                word: "y".into(),
                pool: vec!["y".into()],
                target: 0.0,
            },
            Edit::Swap { pos: 1, other: 3 },
            Edit::Delete {
                pos: 2,
                word: "c".into(),
            },
        ];
        assert_eq!(replay(&src, &edits).unwrap(), toks("x y b"));
        assert!(replay(
            &src,
            &[Edit::Delete {
                pos: 0,
                word: "b".into()
            }]
        )
        .is_err());
        assert!(replay(&src, &[Edit::Swap { pos: 1, other: 1 }]).is_err());
    }

    #[test]
    fn op_records_describe_swaps_with_words() {
        let src = toks("a b c");
        let recs = op_records(
            &src,
            &[
                Edit::Swap { pos: 0, other: 2 },
                Edit::Delete {
                    pos: 1,
                    word: "b".into(),
                },
            ],
        );
        assert_eq!(recs[0].op, "swap");
        assert_eq!(
            (recs[0].pos2, recs[0].old.as_deref(), recs[0].new.as_deref()),
            (Some(2), Some("a"), Some("c"))
        );
        assert_eq!((recs[1].old.as_deref(), recs[1].new.as_deref()), (Some("b"), None));
    }

    #[test]
    fn mode_names() {
        for m in [Mode::None, Mode::Eda, Mode::ModEda] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("bert".parse::<Mode>().is_err());
    }
}
