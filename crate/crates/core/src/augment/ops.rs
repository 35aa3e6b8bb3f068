use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::driver::NeighborIndex;
use super::{Edit, Edited};
use crate::corpus::{decode_lossy, StopwordList};
use crate::error::{Error, Result};
use crate::keywords::ClassKeywordTable;
use crate::sentiment::SentimentLexicon;

/// Resampling budget per requested edit when picking eligible positions.
const ATTEMPTS_PER_EDIT: usize = 10;

/// Up to `n` distinct positions satisfying `eligible`, drawn uniformly with
/// resampling, giving up after `ATTEMPTS_PER_EDIT * n` draws.
fn pick_positions<R: Rng>(len: usize, n: usize, rng: &mut R, eligible: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(n);
    if len == 0 {
        return chosen;
    }
    for _ in 0..ATTEMPTS_PER_EDIT * n {
        if chosen.len() == n {
            break;
        }
        let p = rng.gen_range(0..len);
        if !chosen.contains(&p) && eligible(p) {
            chosen.push(p);
        }
    }
    chosen
}

/// Replaces up to `n_sub` in-vocabulary words with the neighbour (among the
/// `t` nearest) whose polarity is closest to the replaced word's. Ties go to
/// the more similar neighbour, then alphabetically.
pub fn modified_substitution<R: Rng>(
    tokens: &[String],
    n_sub: usize,
    t: usize,
    neighbors: &NeighborIndex<'_>,
    lexicon: &SentimentLexicon,
    rng: &mut R,
) -> Edited {
    let positions = pick_positions(tokens.len(), n_sub, rng, |p| neighbors.contains(&tokens[p]));
    let mut out = Edited::unchanged(tokens);
    for pos in positions {
        let word = &tokens[pos];
        let Ok(list) = neighbors.most_similar(word, t) else {
            continue;
        };
        let target = lexicon.word_polarity(word);
        let best = list.neighbors.iter().min_by(|a, b| {
            target
                .gap(lexicon.word_polarity(&a.word))
                .total_cmp(&target.gap(lexicon.word_polarity(&b.word)))
                .then_with(|| b.similarity.total_cmp(&a.similarity))
                .then_with(|| a.word.cmp(&b.word))
        });
        let Some(best) = best else {
            continue;
        };
        out.tokens[pos] = best.word.clone();
        out.edits.push(Edit::Substitute {
            pos,
            old: word.clone(),
            new: best.word.clone(),
            candidates: list.neighbors.iter().map(|n| n.word.clone()).collect(),
        });
    }
    out
}

/// Insertion pool entry. Seeds outrank expansions on equal polarity gap;
/// seeds compare by keyword frequency, expansions by similarity.
#[derive(Debug)]
enum PoolSource {
    Seed(u64),
    Expansion(f64),
}

fn source_order(a: &PoolSource, b: &PoolSource) -> Ordering {
    match (a, b) {
        (PoolSource::Seed(x), PoolSource::Seed(y)) => y.cmp(x),
        (PoolSource::Expansion(x), PoolSource::Expansion(y)) => y.total_cmp(x),
        (PoolSource::Seed(_), PoolSource::Expansion(_)) => Ordering::Less,
        (PoolSource::Expansion(_), PoolSource::Seed(_)) => Ordering::Greater,
    }
}

/// Inserts `n_ins` words drawn from the label's keyword pool. Each round
/// samples `t` seed keywords, adds the `t` nearest neighbours of every
/// in-vocabulary seed, and inserts the pool word whose polarity is closest
/// to the polarity of the input sentence at a uniformly random index.
#[allow(clippy::too_many_arguments)]
pub fn modified_insertion<R: Rng>(
    tokens: &[String],
    label: &str,
    n_ins: usize,
    t: usize,
    neighbors: &NeighborIndex<'_>,
    lexicon: &SentimentLexicon,
    table: &ClassKeywordTable,
    rng: &mut R,
) -> Result<Edited> {
    let keywords = table
        .keywords(label)
        .ok_or_else(|| Error::invalid(format!("no keyword list for label {label:?}")))?;
    let mut out = Edited::unchanged(tokens);
    if keywords.is_empty() {
        return Ok(out);
    }
    let target = lexicon.sentence_polarity(tokens);

    for _ in 0..n_ins {
        let seeds: Vec<&(String, u64)> = keywords.choose_multiple(rng, t).collect();
        let mut pool: Vec<(String, PoolSource)> = Vec::new();
        let mut at: HashMap<String, usize> = HashMap::new();
        for (word, count) in &seeds {
            if !at.contains_key(word) {
                at.insert(word.clone(), pool.len());
                pool.push((word.clone(), PoolSource::Seed(*count)));
            }
        }
        for (word, _) in &seeds {
            let Ok(list) = neighbors.most_similar(word, t) else {
                continue;
            };
            for n in &list.neighbors {
                match at.get(&n.word) {
                    Some(&i) => {
                        if let PoolSource::Expansion(s) = &mut pool[i].1 {
                            *s = s.max(n.similarity);
                        }
                    }
                    None => {
                        at.insert(n.word.clone(), pool.len());
                        pool.push((n.word.clone(), PoolSource::Expansion(n.similarity)));
                    }
                }
            }
        }

        let (choice, _) = pool
            .iter()
            .min_by(|a, b| {
                target
                    .gap(lexicon.word_polarity(&a.0))
                    .total_cmp(&target.gap(lexicon.word_polarity(&b.0)))
                    .then_with(|| source_order(&a.1, &b.1))
                    .then_with(|| a.0.cmp(&b.0))
            })
            .expect("pool holds at least one seed");
        let pos = rng.gen_range(0..=out.tokens.len());
        out.tokens.insert(pos, choice.clone());
        out.edits.push(Edit::Insert {
            pos,
            word: choice.clone(),
            pool: pool.iter().map(|(w, _)| w.clone()).collect(),
            target: target.value(),
        });
    }
    Ok(out)
}

/// `n_swap` transpositions of two distinct random positions.
pub fn random_swap<R: Rng>(tokens: &[String], n_swap: usize, rng: &mut R) -> Edited {
    let mut out = Edited::unchanged(tokens);
    let len = tokens.len();
    if len < 2 {
        return out;
    }
    for _ in 0..n_swap {
        let pos = rng.gen_range(0..len);
        let mut other = rng.gen_range(0..len - 1);
        if other >= pos {
            other += 1;
        }
        out.tokens.swap(pos, other);
        out.edits.push(Edit::Swap { pos, other });
    }
    out
}

/// Drops each token with probability `p_del`; if that would empty the
/// sentence, one uniformly chosen token survives.
pub fn random_deletion<R: Rng>(tokens: &[String], p_del: f64, rng: &mut R) -> Edited {
    if tokens.is_empty() || p_del <= 0.0 {
        return Edited::unchanged(tokens);
    }
    let mut drop: Vec<bool> = tokens.iter().map(|_| rng.gen::<f64>() < p_del).collect();
    if drop.iter().all(|&d| d) {
        drop[rng.gen_range(0..tokens.len())] = false;
    }
    let mut out = Edited::default();
    for (i, (tok, gone)) in tokens.iter().zip(&drop).enumerate() {
        if *gone {
            out.edits.push(Edit::Delete {
                pos: i - out.edits.len(),
                word: tok.clone(),
            });
        } else {
            out.tokens.push(tok.clone());
        }
    }
    out
}

/// `word -> synonyms` for the EDA baseline.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymMap {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymMap {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: Into<String>,
    {
        SynonymMap {
            entries: entries
                .into_iter()
                .map(|(w, syns)| (w.into(), syns.into_iter().map(Into::into).collect()))
                .collect(),
        }
    }

    /// `word<TAB>syn1,syn2,...` per line.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `word<TAB>syn1,syn2,...`"))?;
            let syns: Vec<String> = syns
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != word)
                .map(str::to_owned)
                .collect();
            entries.insert(word.trim().to_owned(), syns);
        }
        Ok(SynonymMap { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&decode_lossy(&bytes), &path.display().to_string())
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice).filter(|s| !s.is_empty())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// EDA synonym replacement over non-stopword positions that have synonyms.
pub fn eda_synonym_replacement<R: Rng>(
    tokens: &[String],
    n_sub: usize,
    synonyms: &SynonymMap,
    stopwords: &StopwordList,
    rng: &mut R,
) -> Edited {
    let positions = pick_positions(tokens.len(), n_sub, rng, |p| {
        !stopwords.contains(&tokens[p]) && synonyms.get(&tokens[p]).is_some()
    });
    let mut out = Edited::unchanged(tokens);
    for pos in positions {
        let choices = synonyms.get(&tokens[pos]).expect("eligible positions have synonyms");
        let new = choices.choose(rng).expect("non-empty").clone();
        out.tokens[pos] = new.clone();
        out.edits.push(Edit::Synonym {
            pos,
            old: tokens[pos].clone(),
            new,
        });
    }
    out
}

/// EDA random insertion: `n_ins` vocabulary words at random indices.
pub fn eda_random_insertion<R: Rng>(
    tokens: &[String],
    n_ins: usize,
    vocabulary: &[String],
    rng: &mut R,
) -> Result<Edited> {
    if vocabulary.is_empty() {
        return Err(Error::Empty("random insertion vocabulary".into()));
    }
    let mut out = Edited::unchanged(tokens);
    for _ in 0..n_ins {
        let word = vocabulary.choose(rng).expect("non-empty").clone();
        let pos = rng.gen_range(0..=out.tokens.len());
        out.tokens.insert(pos, word.clone());
        out.edits.push(Edit::RandomInsert { pos, word });
    }
    Ok(out)
}
