//! Word vectors and exact cosine nearest-neighbour search.
//!
//! Vectors are stored row-major next to a unit-normalised copy, so a
//! similarity query is one dot product per vocabulary word.

mod glove;

pub use glove::{cooccurrence, train_embeddings, Cooccurrence, EmbedTrainConfig, TrainedEmbeddings};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::corpus::decode_lossy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    unit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborList {
    pub query: String,
    pub neighbors: Vec<Neighbor>,
}

/// A parsed vector file with the number of duplicate rows that overwrote
/// earlier ones.
#[derive(Debug, Clone)]
pub struct LoadedVectors {
    pub store: EmbeddingStore,
    pub duplicates: usize,
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (uu, vv) = (dot(u, u), dot(v, v));
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

#[inline]
fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Heap entry ordered so that the *worst* retained neighbour is the maximum:
/// lower similarity is worse, and on equal similarity the lexicographically
/// larger word is worse.
struct Ranked<'a> {
    similarity: f64,
    word: &'a str,
    row: usize,
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .similarity
            .total_cmp(&self.similarity)
            .then_with(|| self.word.cmp(other.word))
    }
}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

impl EmbeddingStore {
    /// Builds a store from `(word, vector)` pairs. Later duplicates overwrite
    /// earlier ones; the second return value counts them.
    pub fn from_pairs<I, S>(dim: usize, pairs: I) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut store = EmbeddingStore {
            dim,
            vocab: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            unit: Vec::new(),
        };
        let mut duplicates = 0;
        for (word, vector) in pairs {
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("non-finite vector entry"));
            }
            if store.push(word.into(), &vector) {
                duplicates += 1;
            }
        }
        store.renormalize();
        Ok((store, duplicates))
    }

    /// Returns true when `word` was already present.
    fn push(&mut self, word: String, vector: &[f64]) -> bool {
        match self.index.get(&word) {
            Some(&row) => {
                self.vectors[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
                true
            }
            None => {
                self.index.insert(word.clone(), self.vocab.len());
                self.vocab.push(word);
                self.vectors.extend_from_slice(vector);
                false
            }
        }
    }

    fn renormalize(&mut self) {
        self.unit = self.vectors.clone();
        for row in self.unit.chunks_mut(self.dim) {
            let n = norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&row| &self.vectors[row * self.dim..(row + 1) * self.dim])
    }

    /// The `topn` words most cosine-similar to `word`, excluding `word` itself
    /// and zero vectors. Equal similarities are ordered lexicographically.
    pub fn most_similar(&self, word: &str, topn: usize) -> Result<NeighborList> {
        if topn == 0 {
            return Err(Error::invalid("topn must be positive"));
        }
        let &query_row = self
            .index
            .get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))?;
        let query = &self.unit[query_row * self.dim..(query_row + 1) * self.dim];
        if query.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroNorm);
        }

        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(topn + 1);
        for (row, unit) in self.unit.chunks_exact(self.dim).enumerate() {
            if row == query_row {
                continue;
            }
            let s = dot(query, unit);
            if s == 0.0 && unit.iter().all(|&x| x == 0.0) {
                continue;
            }
            let cand = Ranked {
                similarity: s.clamp(-1.0, 1.0),
                word: &self.vocab[row],
                row,
            };
            if heap.len() < topn {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand < *worst {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }

        let neighbors = heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| Neighbor {
                word: self.vocab[r.row].clone(),
                similarity: r.similarity,
            })
            .collect();
        Ok(NeighborList {
            query: word.to_owned(),
            neighbors,
        })
    }

    /// Parses the GloVe text format: `word v1 v2 ... vd` per line.
    pub fn parse(text: &str, source_name: &str) -> Result<LoadedVectors> {
        let mut pairs = Vec::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else {
                continue;
            };
            let vector = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(source_name, i + 1, format!("bad number {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let d = *dim.get_or_insert(vector.len());
            if vector.is_empty() {
                return Err(Error::parse(source_name, i + 1, "row has no vector components"));
            }
            if vector.len() != d {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    format!("dimension {} differs from {d} on earlier rows", vector.len()),
                ));
            }
            pairs.push((word.to_owned(), vector));
        }
        let dim = dim.ok_or_else(|| Error::Empty(format!("{source_name}: no vectors")))?;
        let (store, duplicates) = EmbeddingStore::from_pairs(dim, pairs)?;
        Ok(LoadedVectors { store, duplicates })
    }

    pub fn load(path: &Path) -> Result<LoadedVectors> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&decode_lossy(&bytes), &path.display().to_string())
    }

    /// GloVe text format with six decimals.
    pub fn to_text(&self) -> Result<String> {
        if self.is_empty() {
            return Err(Error::Empty("embedding store has no words".into()));
        }
        let mut out = String::with_capacity(self.len() * (self.dim * 10 + 16));
        for (word, row) in self.vocab.iter().zip(self.vectors.chunks_exact(self.dim)) {
            out.push_str(word);
            for x in row {
                // avoid "-0.000000" so that save is stable under load∘save
                let x = if x.abs() < 5e-7 { 0.0 } else { *x };
                write!(out, " {x:.6}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_text()?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
