//! Classification metrics, split protocols and the augmentation comparison.

mod compare;

pub use compare::{
    compare_augmenters, CompareInputs, CompareSettings, ComparisonReport, MetricSummary, ModeSummary, PairDelta,
    RunResult, SplitPolicy,
};

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn build<S: AsRef<str>>(classes: &[String], golds: &[S], preds: &[S]) -> Result<Self> {
        if golds.len() != preds.len() {
            return Err(Error::invalid(format!(
                "{} gold labels but {} predictions",
                golds.len(),
                preds.len()
            )));
        }
        let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let lookup = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| Error::invalid(format!("label {l:?} not among the classes")))
        };
        let mut counts = vec![vec![0; classes.len()]; classes.len()];
        for (g, p) in golds.iter().zip(preds) {
            counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: u64,
    pub predicted: u64,
}

/// Macro averages are the headline numbers; micro averages are reported too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    /// Classes with neither gold nor predicted instances; their metrics are 0
    /// by convention.
    pub degenerate: Vec<String>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let c = cm.classes.len();
        let mut per_class = Vec::with_capacity(c);
        let mut degenerate = Vec::new();
        let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
        for i in 0..c {
            let tp = cm.counts[i][i];
            let support: u64 = cm.counts[i].iter().sum();
            let predicted: u64 = (0..c).map(|g| cm.counts[g][i]).sum();
            tp_all += tp;
            fp_all += predicted - tp;
            fn_all += support - tp;
            if support == 0 && predicted == 0 {
                degenerate.push(cm.classes[i].clone());
            }
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            per_class.push(ClassMetrics {
                class: cm.classes[i].clone(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
                predicted,
            });
        }
        let mean = |f: fn(&ClassMetrics) -> f64| {
            if c == 0 {
                0.0
            } else {
                per_class.iter().map(f).sum::<f64>() / c as f64
            }
        };
        let micro_precision = ratio(tp_all, tp_all + fp_all);
        let micro_recall = ratio(tp_all, tp_all + fn_all);
        MetricsReport {
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            micro_precision,
            micro_recall,
            micro_f1: f1_score(micro_precision, micro_recall),
            accuracy: ratio(cm.trace(), cm.total()),
            per_class,
            degenerate,
        }
    }
}

/// Confusion matrix and metrics over the sorted union of observed labels.
pub fn confusion_and_metrics<S: AsRef<str>>(golds: &[S], preds: &[S]) -> Result<(ConfusionMatrix, MetricsReport)> {
    let classes: Vec<String> = golds
        .iter()
        .chain(preds)
        .map(|s| s.as_ref().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    confusion_and_metrics_with(&classes, golds, preds)
}

/// As [`confusion_and_metrics`], over a fixed class list.
pub fn confusion_and_metrics_with<S: AsRef<str>>(
    classes: &[String],
    golds: &[S],
    preds: &[S],
) -> Result<(ConfusionMatrix, MetricsReport)> {
    if golds.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let cm = ConfusionMatrix::build(classes, golds, preds)?;
    let report = MetricsReport::from_confusion(&cm);
    Ok((cm, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffles `ids` by `seed` and cuts `k` contiguous test folds whose sizes
/// differ by at most one.
pub fn kfold(ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k == 0 || k > ids.len() {
        return Err(Error::invalid(format!(
            "cannot cut {k} folds from {} documents",
            ids.len()
        )));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut seeded(seed));
    let base = order.len() / k;
    let extra = order.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let end = start + base + usize::from(f < extra);
        let test = order[start..end].to_vec();
        let train = order[..start].iter().chain(&order[end..]).cloned().collect();
        folds.push(Fold { train, test });
        start = end;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub heldout: Vec<String>,
    pub seed: u64,
}

pub const HELDOUT_FRACTION: f64 = 0.1;
pub const TRAIN_FRACTION: f64 = 0.8;

fn cut(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Holds out a random 10%, then splits the remaining 90% 80/20 into train and
/// validation.
pub fn paper_protocol_split(ids: &[String], seed: u64) -> Result<SplitPlan> {
    if ids.len() < 10 {
        return Err(Error::invalid(format!(
            "the 90/10 then 80/20 protocol needs at least 10 documents, got {}",
            ids.len()
        )));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut seeded(seed));
    let n_heldout = cut(order.len(), HELDOUT_FRACTION);
    let heldout = order.split_off(order.len() - n_heldout);
    let n_train = cut(order.len(), TRAIN_FRACTION);
    let validation = order.split_off(n_train);
    Ok(SplitPlan {
        train: order,
        validation,
        heldout,
        seed,
    })
}

/// 80/20 train/validation split for when the heldout set is supplied
/// separately; `heldout` is left empty.
pub fn train_validation_split(ids: &[String], seed: u64) -> Result<SplitPlan> {
    if ids.len() < 2 {
        return Err(Error::invalid("need at least two documents to split"));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut seeded(seed));
    let n_train = cut(order.len(), TRAIN_FRACTION).clamp(1, order.len() - 1);
    let validation = order.split_off(n_train);
    Ok(SplitPlan {
        train: order,
        validation,
        heldout: Vec::new(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i}")).collect()
    }

    fn labels(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn perfect_predictions() {
        let g = labels("a b c a");
        let (cm, r) = confusion_and_metrics(&g, &g).unwrap();
        assert_eq!(cm.trace(), 4);
        assert_eq!((r.macro_f1, r.accuracy, r.micro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_thirds_example() {
        // class A: TP=2, FP=1, FN=1
        let g = labels("A A A B B");
        let p = labels("A A B A B");
        let (_, r) = confusion_and_metrics(&g, &p).unwrap();
        let a = &r.per_class[0];
        assert_eq!(a.class, "A");
        for v in [a.precision, a.recall, a.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_class_is_flagged() {
        let classes = labels("A B C");
        let (_, r) = confusion_and_metrics_with(&classes, &labels("A B"), &labels("A B")).unwrap();
        assert_eq!(r.degenerate, ["C"]);
        let c = &r.per_class[2];
        assert_eq!((c.precision, c.recall, c.f1), (0.0, 0.0, 0.0));
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert!(confusion_and_metrics(&labels("a b"), &labels("a")).is_err());
        assert!(confusion_and_metrics::<String>(&[], &[]).is_err());
    }

    #[test]
    fn leave_one_out_boundary() {
        let folds = kfold(&ids(10), 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 1 && f.train.len() == 9));
        assert!(kfold(&ids(3), 4, 1).is_err());
        assert_eq!(kfold(&ids(25), 10, 5).unwrap(), kfold(&ids(25), 10, 5).unwrap());
    }

    #[test]
    fn protocol_split_sizes() {
        let p = paper_protocol_split(&ids(100), 7).unwrap();
        assert_eq!((p.heldout.len(), p.train.len(), p.validation.len()), (10, 72, 18));
        assert_eq!(p, paper_protocol_split(&ids(100), 7).unwrap());
        assert!(paper_protocol_split(&ids(9), 7).is_err());
    }

    /// Metrics straight from (gold, pred) pairs, without a matrix.
    fn pairwise_macro_f1(golds: &[String], preds: &[String]) -> (f64, f64) {
        let classes: BTreeSet<&String> = golds.iter().chain(preds).collect();
        let mut f1s = Vec::new();
        for c in &classes {
            let tp = golds.iter().zip(preds).filter(|(g, p)| g == c && p == c).count() as f64;
            let fp = golds.iter().zip(preds).filter(|(g, p)| g != c && p == c).count() as f64;
            let fneg = golds.iter().zip(preds).filter(|(g, p)| g == c && p != c).count() as f64;
            let pr = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rc = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
            f1s.push(if pr + rc > 0.0 { 2.0 * pr * rc / (pr + rc) } else { 0.0 });
        }
        let acc = golds.iter().zip(preds).filter(|(g, p)| g == p).count() as f64 / golds.len() as f64;
        (f1s.iter().sum::<f64>() / f1s.len() as f64, acc)
    }

    proptest! {
        #[test]
        fn matrix_and_pair_paths_agree(pairs in proptest::collection::vec(("[a-d]", "[a-d]"), 1..60)) {
            let (g, p): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
            let (cm, r) = confusion_and_metrics(&g, &p).unwrap();
            let (f1, acc) = pairwise_macro_f1(&g, &p);
            prop_assert!((r.macro_f1 - f1).abs() < 1e-12);
            prop_assert!((r.accuracy - acc).abs() < 1e-12);
            prop_assert_eq!(cm.total(), g.len() as u64);
            prop_assert!((r.accuracy - cm.trace() as f64 / cm.total() as f64).abs() < 1e-15);
            for m in &r.per_class {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!((m.f1 - f1_score(m.precision, m.recall)).abs() < 1e-15);
            }
        }

        #[test]
        fn folds_partition_ids(n in 1usize..80, k in 1usize..12, seed: u64) {
            prop_assume!(k <= n);
            let all = ids(n);
            let folds = kfold(&all, k, seed).unwrap();
            let mut seen: Vec<String> = folds.iter().flat_map(|f| f.test.clone()).collect();
            seen.sort();
            let mut want = all.clone();
            want.sort();
            prop_assert_eq!(seen, want);
            let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in &folds {
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                prop_assert!(f.test.iter().all(|t| !f.train.contains(t)));
            }
        }

        #[test]
        fn split_plans_partition(n in 10usize..300, seed: u64) {
            let all = ids(n);
            let p = paper_protocol_split(&all, seed).unwrap();
            let mut seen: Vec<&String> = p.train.iter().chain(&p.validation).chain(&p.heldout).collect();
            prop_assert_eq!(seen.len(), n);
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
        }
    }
}
