//! Multinomial logistic regression over averaged word vectors or bag-of-words
//! counts, trained by mini-batch gradient descent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    AvgEmbedding,
    Bow,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg_embedding" => Ok(FeatureMode::AvgEmbedding),
            "bow" => Ok(FeatureMode::Bow),
            other => Err(Error::invalid(format!("unknown feature mode {other:?}"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::AvgEmbedding => "avg_embedding",
            FeatureMode::Bow => "bow",
        })
    }
}

/// How documents become vectors; stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    AvgEmbedding { dim: usize },
    Bow { vocabulary: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureSpec {
    /// Freezes a featurization from training data. Bag-of-words takes the
    /// sorted training vocabulary.
    pub fn fit(mode: FeatureMode, train: &Corpus, store: Option<&EmbeddingStore>) -> Result<Self> {
        match mode {
            FeatureMode::AvgEmbedding => {
                let store = store.ok_or_else(|| Error::invalid("avg_embedding features need word vectors"))?;
                Ok(FeatureSpec::AvgEmbedding { dim: store.dim() })
            }
            FeatureMode::Bow => Ok(FeatureSpec::Bow {
                vocabulary: train.vocabulary(),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureSpec::AvgEmbedding { dim } => *dim,
            FeatureSpec::Bow { vocabulary } => vocabulary.len(),
        }
    }

    pub fn featurizer<'a>(&'a self, store: Option<&'a EmbeddingStore>) -> Result<Featurizer<'a>> {
        match self {
            FeatureSpec::AvgEmbedding { dim } => {
                let store = store.ok_or_else(|| Error::invalid("avg_embedding features need word vectors"))?;
                if store.dim() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        actual: store.dim(),
                    });
                }
                Ok(Featurizer::AvgEmbedding(store))
            }
            FeatureSpec::Bow { vocabulary } => Ok(Featurizer::Bow(
                vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect(),
            )),
        }
    }
}

pub enum Featurizer<'a> {
    AvgEmbedding(&'a EmbeddingStore),
    Bow(HashMap<&'a str, usize>),
}

impl Featurizer<'_> {
    /// Mean of the in-vocabulary token vectors (zero when none), or token
    /// counts over the frozen vocabulary.
    pub fn featurize(&self, tokens: &[String]) -> FeatureVector {
        match self {
            Featurizer::AvgEmbedding(store) => {
                let mut sum = vec![0.0; store.dim()];
                let mut n = 0usize;
                for v in tokens.iter().filter_map(|t| store.vector(t)) {
                    sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                    n += 1;
                }
                if n > 0 {
                    sum.iter_mut().for_each(|s| *s /= n as f64);
                }
                FeatureVector(sum)
            }
            Featurizer::Bow(index) => {
                let mut counts = vec![0.0; index.len()];
                for i in tokens.iter().filter_map(|t| index.get(t.as_str())) {
                    counts[*i] += 1.0;
                }
                FeatureVector(counts)
            }
        }
    }
}

/// One-shot featurization of a single document.
pub fn featurize(doc: &Document, spec: &FeatureSpec, store: Option<&EmbeddingStore>) -> Result<FeatureVector> {
    Ok(spec.featurizer(store)?.featurize(&doc.tokens))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate > 0.0 && self.epochs > 0 && self.l2 >= 0.0 && self.batch_size > 0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("classifier config out of range: {self:?}")))
        }
    }
}

/// `C x d` weights (row-major) and `C` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub feature_spec: FeatureSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a [f64],
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: LinearModel,
    /// Full-data objective after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl LinearModel {
    pub fn zeros(classes: Vec<String>, feature_spec: FeatureSpec) -> Self {
        let d = feature_spec.dim();
        LinearModel {
            weights: vec![0.0; classes.len() * d],
            bias: vec![0.0; classes.len()],
            classes,
            feature_spec,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_spec.dim()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.weights
            .chunks_exact(d.max(1))
            .take(self.classes.len())
            .zip(&self.bias)
            .map(|(row, b)| {
                if d == 0 {
                    *b
                } else {
                    row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b
                }
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let probabilities = softmax(&self.logits(x));
        let best = probabilities
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if *p > probabilities[best] { i } else { best });
        Ok(Prediction {
            label: self.classes[best].clone(),
            probabilities,
        })
    }

    /// Predicted labels for every document, in corpus order.
    pub fn predict_corpus(&self, corpus: &Corpus, store: Option<&EmbeddingStore>) -> Result<Vec<String>> {
        let f = self.feature_spec.featurizer(store)?;
        corpus
            .documents()
            .iter()
            .map(|d| self.predict(&f.featurize(&d.tokens).0).map(|p| p.label))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: LinearModel = serde_json::from_str(text)?;
        let c = m.classes.len();
        if m.weights.len() != c * m.dim() || m.bias.len() != c {
            return Err(Error::invalid(
                "model parameter shapes do not match classes and features",
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Mean cross-entropy over `batch` plus `l2/2 * |W|^2` (bias unpenalised),
/// with its analytic gradient.
pub fn loss_and_gradient(model: &LinearModel, batch: &[Example<'_>], l2: f64) -> Result<(f64, Gradient)> {
    let d = model.dim();
    let rows = batch
        .iter()
        .map(|ex| {
            if ex.features.len() == d {
                Ok(SparseRow::new(ex.features, ex.class))
            } else {
                Err(Error::DimensionMismatch {
                    expected: d,
                    actual: ex.features.len(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SparseRow> = rows.iter().collect();
    let (loss, grad) = objective(model, &refs, l2, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

/// Non-zero entries of one example; bag-of-words rows are mostly zeros.
struct SparseRow {
    entries: Vec<(usize, f64)>,
    class: usize,
}

impl SparseRow {
    fn new(features: &[f64], class: usize) -> Self {
        SparseRow {
            entries: features
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, x)| (i, *x))
                .collect(),
            class,
        }
    }
}

fn objective(model: &LinearModel, batch: &[&SparseRow], l2: f64, with_grad: bool) -> Result<(f64, Option<Gradient>)> {
    if batch.is_empty() {
        return Err(Error::Empty("gradient batch".into()));
    }
    let d = model.dim();
    let c = model.classes.len();
    let mut grad = with_grad.then(|| Gradient {
        weights: vec![0.0; c * d],
        bias: vec![0.0; c],
    });
    let mut loss = 0.0;
    let mut logits = vec![0.0; c];
    for ex in batch {
        for (k, l) in logits.iter_mut().enumerate() {
            let row = &model.weights[k * d..(k + 1) * d];
            *l = ex.entries.iter().map(|&(i, x)| row[i] * x).sum::<f64>() + model.bias[k];
        }
        let p = softmax(&logits);
        loss -= p[ex.class].max(f64::MIN_POSITIVE).ln();
        if let Some(grad) = grad.as_mut() {
            for (k, pk) in p.iter().enumerate() {
                let delta = pk - if k == ex.class { 1.0 } else { 0.0 };
                grad.bias[k] += delta;
                let row = &mut grad.weights[k * d..(k + 1) * d];
                for &(i, x) in &ex.entries {
                    row[i] += delta * x;
                }
            }
        }
    }
    let n = batch.len() as f64;
    loss = loss / n + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    if let Some(grad) = grad.as_mut() {
        grad.bias.iter_mut().for_each(|g| *g /= n);
        for (g, w) in grad.weights.iter_mut().zip(&model.weights) {
            *g = *g / n + l2 * w;
        }
    }
    Ok((loss, grad))
}

/// Trains on every document of `corpus`, which must all be labeled with at
/// least two distinct labels. Classes are ordered alphabetically.
pub fn train(
    corpus: &Corpus,
    store: Option<&EmbeddingStore>,
    mode: FeatureMode,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let classes: Vec<String> = corpus.label_set().iter().cloned().collect();
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "training needs at least two classes, found {}",
            classes.len()
        )));
    }
    let class_of: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let spec = FeatureSpec::fit(mode, corpus, store)?;
    let featurizer = spec.featurizer(store)?;
    let mut xs = Vec::with_capacity(corpus.len());
    let mut ys = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        let label = doc
            .label
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("document {:?} has no label", doc.id)))?;
        xs.push(featurizer.featurize(&doc.tokens).0);
        ys.push(class_of[label]);
    }
    drop(featurizer);

    let mut model = LinearModel::zeros(classes, spec);
    let rows: Vec<SparseRow> = xs.iter().zip(&ys).map(|(x, &class)| SparseRow::new(x, class)).collect();
    let all: Vec<&SparseRow> = rows.iter().collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    let mut rng = seeded(config.seed);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| all[i]));
            let g = objective(&model, &batch, config.l2, true)?
                .1
                .expect("gradient requested");
            for (w, gw) in model.weights.iter_mut().zip(&g.weights) {
                *w -= config.learning_rate * gw;
            }
            for (b, gb) in model.bias.iter_mut().zip(&g.bias) {
                *b -= config.learning_rate * gb;
            }
        }
        epoch_losses.push(objective(&model, &all, config.l2, false)?.0);
    }
    Ok(TrainedModel { model, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Preprocessor, StopwordList};
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn store(pairs: &[(&str, &[f64])]) -> EmbeddingStore {
        EmbeddingStore::from_pairs(pairs[0].1.len(), pairs.iter().map(|(w, v)| (*w, v.to_vec())))
            .unwrap()
            .0
    }

    fn corpus(rows: &[(&str, &str)]) -> Corpus {
        let pre = Preprocessor {
            stopwords: StopwordList::empty(),
            drop_stopwords: false,
        };
        Corpus::new(
            rows.iter()
                .enumerate()
                .map(|(i, (l, t))| pre.document(i.to_string(), *t, Some(l.to_string())))
                .collect(),
        )
        .unwrap()
    }

    fn vec_of(tokens: &str, s: &EmbeddingStore) -> Vec<f64> {
        let spec = FeatureSpec::AvgEmbedding { dim: s.dim() };
        let t: Vec<String> = tokens.split_whitespace().map(str::to_owned).collect();
        spec.featurizer(Some(s)).unwrap().featurize(&t).0
    }

    #[test]
    fn average_embedding_examples() {
        let s = store(&[("a", &[2.0, 4.0]), ("b", &[2.0, 0.0]), ("c", &[0.0, 2.0])]);
        assert_eq!(vec_of("a", &s), [2.0, 4.0]);
        assert_eq!(vec_of("zz yy", &s), [0.0, 0.0]);
        assert_eq!(vec_of("c b", &s), [1.0, 1.0]);
        assert_eq!(vec_of("c b oov", &s), [1.0, 1.0]);
    }

    #[test]
    fn bow_counts() {
        let c = corpus(&[("x", "b a b"), ("y", "c")]);
        let spec = FeatureSpec::fit(FeatureMode::Bow, &c, None).unwrap();
        let f = featurize(&c.documents()[0], &spec, None).unwrap();
        assert_eq!(f.0, [1.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LinearModel::zeros(
            ["a", "b", "c", "d"].map(String::from).to_vec(),
            FeatureSpec::AvgEmbedding { dim: 3 },
        );
        let p = m.predict(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(p.probabilities, [0.25; 4]);
        assert_eq!(p.label, "a");
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn bias_gradient_of_zero_model() {
        // p is uniform, so dL/db = mean(p - onehot)
        let m = LinearModel::zeros(
            ["a", "b", "c"].map(String::from).to_vec(),
            FeatureSpec::AvgEmbedding { dim: 2 },
        );
        let xs = [[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]];
        let batch: Vec<Example> = xs
            .iter()
            .zip([0, 1, 2])
            .map(|(x, class)| Example { features: x, class })
            .collect();
        let (loss, g) = loss_and_gradient(&m, &batch, 0.0).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        for gb in &g.bias {
            assert!((gb - 0.0).abs() < 1e-12);
        }
        let (_, g) = loss_and_gradient(&m, &batch[..1], 0.0).unwrap();
        let want = [1.0 / 3.0 - 1.0, 1.0 / 3.0, 1.0 / 3.0];
        for (a, b) in g.bias.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let mut m = LinearModel::zeros(
            ["a", "b"].map(String::from).to_vec(),
            FeatureSpec::AvgEmbedding { dim: 2 },
        );
        m.weights = vec![0.3, -0.2, 0.1, 0.7];
        m.bias = vec![0.05, -0.1];
        let x = [[1.0, 2.0], [-1.0, 0.5]];
        let single: Vec<Example> = vec![
            Example {
                features: &x[0],
                class: 0,
            },
            Example {
                features: &x[1],
                class: 1,
            },
        ];
        let doubled: Vec<Example> = single.iter().chain(&single).copied().collect();
        let (l1, g1) = loss_and_gradient(&m, &single, 0.0).unwrap();
        let (l2, g2) = loss_and_gradient(&m, &doubled, 0.0).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.weights.iter().zip(&g2.weights).chain(g1.bias.iter().zip(&g2.bias)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn separable() -> (Corpus, EmbeddingStore) {
        let s = store(&[
            ("up", &[1.0, 0.2]),
            ("hi", &[0.8, -0.1]),
            ("down", &[-1.0, 0.1]),
            ("lo", &[-0.7, -0.3]),
        ]);
        let c = corpus(&[
            ("p", "up"),
            ("p", "hi"),
            ("p", "up hi"),
            ("n", "down"),
            ("n", "lo"),
            ("n", "down lo"),
        ]);
        (c, s)
    }

    #[test]
    fn separable_data_reaches_full_accuracy() {
        let (c, s) = separable();
        let cfg = TrainConfig {
            epochs: 100,
            ..Default::default()
        };
        let t = train(&c, Some(&s), FeatureMode::AvgEmbedding, &cfg).unwrap();
        let preds = t.model.predict_corpus(&c, Some(&s)).unwrap();
        let gold: Vec<String> = c.documents().iter().map(|d| d.label.clone().unwrap()).collect();
        assert_eq!(preds, gold);
    }

    #[test]
    fn small_step_loss_is_non_increasing() {
        let (c, s) = separable();
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 50,
            ..Default::default()
        };
        let t = train(&c, Some(&s), FeatureMode::AvgEmbedding, &cfg).unwrap();
        assert!(t.epoch_losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn training_is_deterministic_and_rejects_one_class() {
        let (c, s) = separable();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 2,
            seed: 3,
            ..Default::default()
        };
        let a = train(&c, Some(&s), FeatureMode::AvgEmbedding, &cfg).unwrap();
        let b = train(&c, Some(&s), FeatureMode::AvgEmbedding, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        let one = corpus(&[("p", "up"), ("p", "hi")]);
        assert!(train(&one, Some(&s), FeatureMode::AvgEmbedding, &cfg).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (c, s) = separable();
        let t = train(
            &c,
            None,
            FeatureMode::Bow,
            &TrainConfig {
                epochs: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(LinearModel::from_json(&t.model.to_json().unwrap()).unwrap(), t.model);
        let t = train(
            &c,
            Some(&s),
            FeatureMode::AvgEmbedding,
            &TrainConfig {
                epochs: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(LinearModel::from_json(&t.model.to_json().unwrap()).unwrap(), t.model);
    }

    proptest! {
        #[test]
        fn probabilities_form_a_simplex(logits in proptest::collection::vec(-50.0f64..50.0, 1..6), shift in -100.0f64..100.0) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn class_offset_leaves_prediction_unchanged(seed: u64, offset in -5.0f64..5.0) {
            let mut rng = seeded(seed);
            let mut m = LinearModel::zeros(["a", "b", "c"].map(String::from).to_vec(), FeatureSpec::AvgEmbedding { dim: 4 });
            m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let before = m.predict(&x).unwrap();
            m.bias.iter_mut().for_each(|b| *b += offset);
            let after = m.predict(&x).unwrap();
            prop_assert_eq!(before.label, after.label);
            for (a, b) in before.probabilities.iter().zip(&after.probabilities) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
