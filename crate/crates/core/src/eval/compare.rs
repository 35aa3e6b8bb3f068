use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion_and_metrics_with, paper_protocol_split, train_validation_split, MetricsReport, TRAIN_FRACTION};
use crate::augment::{augment_corpus, AugmentResources, AugmentationConfig, Mode, NeighborIndex, SynonymMap};
use crate::classify::{train, FeatureMode, TrainConfig};
use crate::corpus::{Corpus, StopwordList};
use crate::error::{Error, Result};
use crate::keywords::ClassKeywordTable;
use crate::rng::{seeded, substream};
use crate::sentiment::SentimentLexicon;

/// Where augmentation happens relative to the train/validation cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Augment train and validation together, then cut 80/20 at random, so
    /// copies of one sentence can land on both sides.
    Paper,
    /// Cut first and augment only the training side.
    Strict,
}

impl FromStr for SplitPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SplitPolicy::Paper),
            "strict" => Ok(SplitPolicy::Strict),
            _ => Err(Error::invalid(format!(
                "unknown split policy {s:?} (expected paper or strict)"
            ))),
        }
    }
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitPolicy::Paper => "paper",
            SplitPolicy::Strict => "strict",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CompareSettings {
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    /// Template; `mode` and `seed` are set per run.
    pub augmentation: AugmentationConfig,
    /// Template; `seed` is set per run.
    pub classifier: TrainConfig,
    pub features: FeatureMode,
    pub split: SplitPolicy,
    pub top_m: usize,
    pub workers: usize,
}

#[derive(Clone, Copy)]
pub struct CompareInputs<'a> {
    pub corpus: &'a Corpus,
    /// Separate test set. Without one, 10% of `corpus` is held out per seed.
    pub heldout: Option<&'a Corpus>,
    pub neighbors: Option<&'a NeighborIndex<'a>>,
    pub lexicon: &'a SentimentLexicon,
    pub synonyms: Option<&'a SynonymMap>,
    pub stopwords: &'a StopwordList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mode: Mode,
    pub seed: u64,
    pub train_size: usize,
    pub validation_size: usize,
    pub heldout_size: usize,
    pub validation: MetricsReport,
    pub heldout: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub macro_precision_mean: f64,
    pub macro_recall_mean: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    pub accuracy_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub validation: MetricSummary,
    pub heldout: MetricSummary,
}

/// `to` minus `from`, in mean macro-F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    pub from: Mode,
    pub to: Mode,
    pub validation_macro_f1: f64,
    pub heldout_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub split: SplitPolicy,
    pub features: FeatureMode,
    pub seeds: Vec<u64>,
    pub augmentation: AugmentationConfig,
    pub classifier: TrainConfig,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<ModeSummary>,
    pub deltas: Vec<PairDelta>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for a single value.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn summarize(reports: &[&MetricsReport]) -> MetricSummary {
    let col = |f: fn(&MetricsReport) -> f64| reports.iter().map(|r| f(r)).collect::<Vec<_>>();
    let f1 = col(|r| r.macro_f1);
    MetricSummary {
        macro_precision_mean: mean(&col(|r| r.macro_precision)),
        macro_recall_mean: mean(&col(|r| r.macro_recall)),
        macro_f1_mean: mean(&f1),
        macro_f1_std: std_dev(&f1),
        accuracy_mean: mean(&col(|r| r.accuracy)),
    }
}

fn score(model: &crate::classify::LinearModel, corpus: &Corpus, inputs: &CompareInputs<'_>) -> Result<MetricsReport> {
    let store = inputs.neighbors.map(NeighborIndex::store);
    let preds = model.predict_corpus(corpus, store)?;
    let golds: Vec<String> = corpus
        .documents()
        .iter()
        .map(|d| {
            d.label
                .clone()
                .ok_or_else(|| Error::invalid(format!("evaluation document {:?} has no label", d.id)))
        })
        .collect::<Result<_>>()?;
    let mut classes: Vec<String> = model.classes.clone();
    classes.extend(golds.iter().cloned());
    classes.sort();
    classes.dedup();
    Ok(confusion_and_metrics_with(&classes, &golds, &preds)?.1)
}

fn augment_block(
    block: &Corpus,
    mode: Mode,
    seed: u64,
    settings: &CompareSettings,
    inputs: &CompareInputs<'_>,
) -> Result<Corpus> {
    if mode == Mode::None {
        return Ok(block.clone());
    }
    let keywords = match mode {
        Mode::ModEda => Some(ClassKeywordTable::build(block, inputs.stopwords, settings.top_m)?),
        _ => None,
    };
    let vocabulary = block.vocabulary();
    let resources = AugmentResources {
        neighbors: inputs.neighbors,
        lexicon: inputs.lexicon,
        keywords: keywords.as_ref(),
        synonyms: inputs.synonyms,
        stopwords: inputs.stopwords,
        vocabulary: &vocabulary,
    };
    let config = AugmentationConfig {
        mode,
        seed: substream(seed, "augment"),
        ..settings.augmentation.clone()
    };
    Ok(augment_corpus(block, &config, &resources, 1)?.corpus)
}

fn run_one(mode: Mode, seed: u64, settings: &CompareSettings, inputs: &CompareInputs<'_>) -> Result<RunResult> {
    let ids = inputs.corpus.ids();
    let split_seed = substream(seed, "split");
    let plan = match inputs.heldout {
        Some(_) => train_validation_split(&ids, split_seed)?,
        None => paper_protocol_split(&ids, split_seed)?,
    };
    let (train_set, validation_set) = match settings.split {
        SplitPolicy::Strict => {
            let train_set = augment_block(&inputs.corpus.subset(&plan.train), mode, seed, settings, inputs)?;
            (train_set, inputs.corpus.subset(&plan.validation))
        }
        SplitPolicy::Paper => {
            let block_ids: Vec<String> = plan.train.iter().chain(&plan.validation).cloned().collect();
            let block = augment_block(&inputs.corpus.subset(&block_ids), mode, seed, settings, inputs)?;
            let mut docs = block.into_documents();
            docs.shuffle(&mut seeded(substream(seed, "paper-split")));
            let n_train = ((docs.len() as f64) * TRAIN_FRACTION).round() as usize;
            let validation = docs.split_off(n_train.clamp(1, docs.len().saturating_sub(1)));
            (Corpus::new(docs)?, Corpus::new(validation)?)
        }
    };
    let heldout_set = match inputs.heldout {
        Some(h) => h.clone(),
        None => inputs.corpus.subset(&plan.heldout),
    };
    let classifier = TrainConfig {
        seed: substream(seed, "classifier"),
        ..settings.classifier.clone()
    };
    let store = inputs.neighbors.map(NeighborIndex::store);
    let model = train(&train_set, store, settings.features, &classifier)?.model;
    Ok(RunResult {
        mode,
        seed,
        train_size: train_set.len(),
        validation_size: validation_set.len(),
        heldout_size: heldout_set.len(),
        validation: score(&model, &validation_set, inputs)?,
        heldout: score(&model, &heldout_set, inputs)?,
    })
}

/// Runs every (mode, seed) pair and summarizes per mode. Runs are spread over
/// `settings.workers` threads; the report does not depend on that number.
pub fn compare_augmenters(settings: &CompareSettings, inputs: &CompareInputs<'_>) -> Result<ComparisonReport> {
    if settings.modes.is_empty() || settings.seeds.is_empty() {
        return Err(Error::invalid("compare needs at least one mode and one seed"));
    }
    settings.classifier.validate()?;
    let jobs: Vec<(Mode, u64)> = settings
        .modes
        .iter()
        .flat_map(|&m| settings.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mode, seed)| run_one(mode, seed, settings, inputs))
            .collect::<Result<_>>()
    })?;

    let mut modes = settings.modes.clone();
    modes.dedup();
    let summaries: Vec<ModeSummary> = modes
        .iter()
        .map(|&mode| {
            let of_mode: Vec<&RunResult> = runs.iter().filter(|r| r.mode == mode).collect();
            ModeSummary {
                mode,
                validation: summarize(&of_mode.iter().map(|r| &r.validation).collect::<Vec<_>>()),
                heldout: summarize(&of_mode.iter().map(|r| &r.heldout).collect::<Vec<_>>()),
            }
        })
        .collect();
    let mut deltas = Vec::new();
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            deltas.push(PairDelta {
                from: a.mode,
                to: b.mode,
                validation_macro_f1: b.validation.macro_f1_mean - a.validation.macro_f1_mean,
                heldout_macro_f1: b.heldout.macro_f1_mean - a.heldout.macro_f1_mean,
            });
        }
    }
    Ok(ComparisonReport {
        split: settings.split,
        features: settings.features,
        seeds: settings.seeds.clone(),
        augmentation: settings.augmentation.clone(),
        classifier: settings.classifier.clone(),
        runs,
        summaries,
        deltas,
    })
}

impl ComparisonReport {
    pub fn summary(&self, mode: Mode) -> Option<&ModeSummary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Mean macro scores per mode, validation then testing.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} | {:>7} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7} {:>7}",
            "mode", "val P", "val R", "val F1", "±", "test P", "test R", "test F1", "±"
        );
        let _ = writeln!(s, "{}", "-".repeat(80));
        for m in &self.summaries {
            let (v, h) = (&m.validation, &m.heldout);
            let _ = writeln!(
                s,
                "{:<8} | {:>7.4} {:>7.4} {:>7.4} {:>7.4} | {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                m.mode.as_str(),
                v.macro_precision_mean,
                v.macro_recall_mean,
                v.macro_f1_mean,
                v.macro_f1_std,
                h.macro_precision_mean,
                h.macro_recall_mean,
                h.macro_f1_mean,
                h.macro_f1_std
            );
        }
        for d in &self.deltas {
            let _ = writeln!(
                s,
                "{} - {}: validation F1 {:+.4}, testing F1 {:+.4}",
                d.to.as_str(),
                d.from.as_str(),
                d.validation_macro_f1,
                d.heldout_macro_f1
            );
        }
        s
    }

    /// One row per run.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "mode,seed,train_size,validation_size,heldout_size,val_macro_p,val_macro_r,val_macro_f1,val_accuracy,test_macro_p,test_macro_r,test_macro_f1,test_accuracy\n",
        );
        for r in &self.runs {
            let (v, h) = (&r.validation, &r.heldout);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.mode.as_str(),
                r.seed,
                r.train_size,
                r.validation_size,
                r.heldout_size,
                v.macro_precision,
                v.macro_recall,
                v.macro_f1,
                v.accuracy,
                h.macro_precision,
                h.macro_recall,
                h.macro_f1,
                h.accuracy
            );
        }
        s
    }
}
