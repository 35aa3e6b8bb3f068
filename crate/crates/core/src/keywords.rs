//! Per-class frequent keyword tables, the seed pool for modified insertion.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StopwordList};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_M: usize = 100;

/// Label → `(keyword, count)` list, descending by count, ties alphabetical.
/// Serializes as `{label: [[keyword, count], ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassKeywordTable {
    tables: BTreeMap<String, Vec<(String, u64)>>,
}

impl ClassKeywordTable {
    /// Counts raw token frequency per label, skipping stopwords, and keeps the
    /// `top_m` most frequent tokens of each label.
    pub fn build(corpus: &Corpus, stopwords: &StopwordList, top_m: usize) -> Result<Self> {
        if top_m == 0 {
            return Err(Error::invalid("top_m must be positive"));
        }
        let mut counts: BTreeMap<&str, HashMap<&str, u64>> = BTreeMap::new();
        for doc in corpus.documents() {
            let Some(label) = doc.label.as_deref() else {
                continue;
            };
            let per_label = counts.entry(label).or_default();
            for t in doc.tokens.iter().filter(|t| !stopwords.contains(t)) {
                *per_label.entry(t.as_str()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::invalid("no labeled documents to build keywords from"));
        }
        let tables = counts
            .into_iter()
            .map(|(label, c)| {
                let mut ranked: Vec<(String, u64)> = c.into_iter().map(|(w, n)| (w.to_owned(), n)).collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                ranked.truncate(top_m);
                (label.to_owned(), ranked)
            })
            .collect();
        Ok(ClassKeywordTable { tables })
    }

    pub fn keywords(&self, label: &str) -> Option<&[(String, u64)]> {
        self.tables.get(label).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Preprocessor};
    use proptest::prelude::*;

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

    fn kw(t: &ClassKeywordTable, label: &str) -> Vec<(String, u64)> {
        t.keywords(label).unwrap().to_vec()
    }

    #[test]
    fn counting_and_truncation() {
        let c = corpus(&[("A", "x x y")]);
        let none = StopwordList::empty();
        let t = ClassKeywordTable::build(&c, &none, 1).unwrap();
        assert_eq!(kw(&t, "A"), [("x".to_owned(), 2)]);
        let t = ClassKeywordTable::build(&c, &none, 10).unwrap();
        assert_eq!(kw(&t, "A"), [("x".to_owned(), 2), ("y".to_owned(), 1)]);
    }

    #[test]
    fn labels_counted_independently() {
        let c = corpus(&[("A", "x a"), ("B", "x x b"), ("A", "x")]);
        let t = ClassKeywordTable::build(&c, &StopwordList::empty(), 5).unwrap();
        assert_eq!(kw(&t, "A"), [("x".to_owned(), 2), ("a".to_owned(), 1)]);
        assert_eq!(kw(&t, "B"), [("x".to_owned(), 2), ("b".to_owned(), 1)]);
    }

    #[test]
    fn stopwords_excluded() {
        let c = corpus(&[("A", "the the the cat")]);
        let t = ClassKeywordTable::build(&c, &StopwordList::new(["the"]).unwrap(), 5).unwrap();
        assert_eq!(kw(&t, "A"), [("cat".to_owned(), 1)]);
    }

    #[test]
    fn unlabeled_corpus_rejected() {
        let doc = Document {
            id: "1".into(),
            raw_text: "x".into(),
            clean_text: "x".into(),
            tokens: vec!["x".into()],
            label: None,
        };
        let c = Corpus::new(vec![doc]).unwrap();
        assert!(ClassKeywordTable::build(&c, &StopwordList::empty(), 3).is_err());
    }

    #[test]
    fn json_shape() {
        let c = corpus(&[("A", "x x y")]);
        let t = ClassKeywordTable::build(&c, &StopwordList::empty(), 5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v, serde_json::json!({"A": [["x", 2], ["y", 1]]}));
    }

    proptest! {
        #[test]
        fn table_invariants(rows in proptest::collection::vec(("[AB]", "[a-e ]{1,20}"), 1..12), extra in "[a-e ]{1,20}") {
            let rows: Vec<(&str, &str)> = rows.iter().map(|(l, t)| (l.as_str(), t.as_str())).collect();
            let sw = StopwordList::new(["e"]).unwrap();
            let c = corpus(&rows);
            let t = ClassKeywordTable::build(&c, &sw, 3).unwrap();
            for label in t.labels() {
                let list = t.keywords(label).unwrap();
                prop_assert!(list.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
                prop_assert!(list.iter().all(|(w, n)| *n > 0 && !sw.contains(w)));
                let total: usize = c.documents().iter().filter(|d| d.label.as_deref() == Some(label)).map(|d| d.tokens.len()).sum();
                prop_assert!(list.iter().map(|x| x.1 as usize).sum::<usize>() <= total);
            }

            // adding an A document never lowers A counts and leaves B alone
            let mut more = rows.clone();
            more.push(("A", extra.as_str()));
            let t2 = ClassKeywordTable::build(&corpus(&more), &sw, usize::MAX).unwrap();
            let t1 = ClassKeywordTable::build(&c, &sw, usize::MAX).unwrap();
            if let Some(before) = t1.keywords("A") {
                let after: HashMap<&str, u64> = t2.keywords("A").unwrap().iter().map(|(w, n)| (w.as_str(), *n)).collect();
                for (w, n) in before {
                    prop_assert!(after[w.as_str()] >= *n);
                }
            }
            prop_assert_eq!(t1.keywords("B"), t2.keywords("B"));
        }
    }
}
