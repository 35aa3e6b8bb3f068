//! GloVe training from a tokenized corpus.
//!
//! Co-occurrences are counted in a symmetric window with 1/distance weights.
//! The weighted least-squares objective
//! `sum f(X_ij) (w_i . c_j + b_i + c_j' - log X_ij)^2`, with
//! `f(x) = min(1, (x / x_max)^alpha)`, is minimised by AdaGrad over shuffled
//! non-zero cells. The returned vectors are word + context vectors.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingStore;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainConfig {
    pub dim: usize,
    pub window: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            dim: 50,
            window: 5,
            x_max: 100.0,
            alpha: 0.75,
            epochs: 25,
            learning_rate: 0.05,
            min_count: 2,
            seed: 0,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dim > 0
            && self.window > 0
            && self.x_max > 0.0
            && self.alpha > 0.0
            && self.alpha <= 1.0
            && self.epochs > 0
            && self.learning_rate > 0.0
            && self.min_count > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "embedding training config out of range: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEmbeddings {
    pub store: EmbeddingStore,
    /// Mean weighted squared error per non-zero cell, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Sparse symmetric co-occurrence counts over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Cooccurrence {
    pub vocab: Vec<String>,
    cells: BTreeMap<(u32, u32), f64>,
}

impl Cooccurrence {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells.get(&(i as u32, j as u32)).copied().unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.cells.len()
    }

    /// Non-zero cells in (row, column) order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().map(|(&(i, j), &x)| (i as usize, j as usize, x))
    }
}

/// Words with at least `min_count` occurrences, by descending count then
/// alphabetically.
fn build_vocab(corpus: &Corpus, min_count: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in corpus.documents() {
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    vocab.into_iter().map(|(w, _)| w.to_owned()).collect()
}

/// Counts co-occurrences within `window` tokens, weighting a pair at distance
/// d by 1/d. Out-of-vocabulary tokens are dropped before windowing.
pub fn cooccurrence(corpus: &Corpus, vocab: &[String], window: usize) -> Cooccurrence {
    let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let mut cells = BTreeMap::new();
    for doc in corpus.documents() {
        let ids: Vec<u32> = doc
            .tokens
            .iter()
            .filter_map(|t| index.get(t.as_str()).copied())
            .collect();
        for (i, &a) in ids.iter().enumerate() {
            for (d, &b) in ids[i + 1..].iter().take(window).enumerate() {
                let w = 1.0 / (d + 1) as f64;
                *cells.entry((a, b)).or_insert(0.0) += w;
                *cells.entry((b, a)).or_insert(0.0) += w;
            }
        }
    }
    Cooccurrence {
        vocab: vocab.to_vec(),
        cells,
    }
}

pub fn train_embeddings(corpus: &Corpus, config: &EmbedTrainConfig) -> Result<TrainedEmbeddings> {
    config.validate()?;
    let vocab = build_vocab(corpus, config.min_count);
    if vocab.is_empty() {
        return Err(Error::Empty(format!(
            "no word occurs at least {} times",
            config.min_count
        )));
    }
    let table = cooccurrence(corpus, &vocab, config.window);
    let mut cells: Vec<(usize, usize, f64)> = table.cells().collect();

    let n = vocab.len();
    let d = config.dim;
    let mut rng = seeded(config.seed);
    let mut init = |len: usize| -> Vec<f64> { (0..len).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect() };
    let mut word = init(n * d);
    let mut ctx = init(n * d);
    let mut word_bias = init(n);
    let mut ctx_bias = init(n);
    let mut word_sq = vec![1.0f64; n * d];
    let mut ctx_sq = vec![1.0f64; n * d];
    let mut word_bias_sq = vec![1.0f64; n];
    let mut ctx_bias_sq = vec![1.0f64; n];

    let lr = config.learning_rate;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad_w = vec![0.0; d];
    let mut grad_c = vec![0.0; d];

    for _ in 0..config.epochs {
        cells.shuffle(&mut rng);
        let mut total = 0.0;
        for &(i, j, x) in &cells {
            let wi = &word[i * d..(i + 1) * d];
            let cj = &ctx[j * d..(j + 1) * d];
            let diff = wi.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>() + word_bias[i] + ctx_bias[j] - x.ln();
            let weight = if x < config.x_max {
                (x / config.x_max).powf(config.alpha)
            } else {
                1.0
            };
            let fdiff = weight * diff;
            total += 0.5 * fdiff * diff;

            for k in 0..d {
                grad_w[k] = fdiff * cj[k];
                grad_c[k] = fdiff * wi[k];
            }
            for k in 0..d {
                let (wk, ck) = (i * d + k, j * d + k);
                word[wk] -= lr * grad_w[k] / word_sq[wk].sqrt();
                ctx[ck] -= lr * grad_c[k] / ctx_sq[ck].sqrt();
                word_sq[wk] += grad_w[k] * grad_w[k];
                ctx_sq[ck] += grad_c[k] * grad_c[k];
            }
            word_bias[i] -= lr * fdiff / word_bias_sq[i].sqrt();
            ctx_bias[j] -= lr * fdiff / ctx_bias_sq[j].sqrt();
            word_bias_sq[i] += fdiff * fdiff;
            ctx_bias_sq[j] += fdiff * fdiff;
        }
        epoch_losses.push(total / cells.len().max(1) as f64);
    }

    let pairs = vocab.into_iter().enumerate().map(|(i, w)| {
        let v: Vec<f64> = (0..d).map(|k| word[i * d + k] + ctx[i * d + k]).collect();
        (w, v)
    });
    let (store, _) = EmbeddingStore::from_pairs(d, pairs)?;
    Ok(TrainedEmbeddings { store, epoch_losses })
}
