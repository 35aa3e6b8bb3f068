use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rayon::prelude::*;

use super::ops::{
    eda_random_insertion, eda_synonym_replacement, modified_insertion, modified_substitution, random_deletion,
    random_swap, SynonymMap,
};
use super::{op_records, AugmentationConfig, AugmentedSentence, Edit, Mode, OutputRecord};
use crate::corpus::{Corpus, Document, StopwordList};
use crate::embeddings::{EmbeddingStore, NeighborList};
use crate::error::{Error, Result};
use crate::keywords::ClassKeywordTable;
use crate::rng::{document_seed, seeded};
use crate::sentiment::SentimentLexicon;

/// Memoising front end to [`EmbeddingStore::most_similar`]. Results are pure
/// functions of `(word, topn)`, so sharing one cache across threads and runs
/// does not affect output.
#[derive(Debug)]
pub struct NeighborIndex<'a> {
    store: &'a EmbeddingStore,
    cache: RwLock<HashMap<(String, usize), Arc<NeighborList>>>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(store: &'a EmbeddingStore) -> Self {
        NeighborIndex {
            store,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &'a EmbeddingStore {
        self.store
    }

    pub fn contains(&self, word: &str) -> bool {
        self.store.contains(word)
    }

    pub fn most_similar(&self, word: &str, topn: usize) -> Result<Arc<NeighborList>> {
        let key = (word.to_owned(), topn);
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let list = Arc::new(self.store.most_similar(word, topn)?);
        self.cache.write().unwrap().insert(key, Arc::clone(&list));
        Ok(list)
    }
}

/// Everything the operations read besides the sentence itself. Mod-EDA needs
/// `neighbors` and `keywords`; EDA needs `synonyms` and `vocabulary`.
#[derive(Clone, Copy)]
pub struct AugmentResources<'a> {
    pub neighbors: Option<&'a NeighborIndex<'a>>,
    pub lexicon: &'a SentimentLexicon,
    pub keywords: Option<&'a ClassKeywordTable>,
    pub synonyms: Option<&'a SynonymMap>,
    pub stopwords: &'a StopwordList,
    /// Candidate words for EDA random insertion.
    pub vocabulary: &'a [String],
}

impl AugmentResources<'_> {
    fn check(&self, config: &AugmentationConfig) -> Result<()> {
        let missing = |what: &str| Err(Error::invalid(format!("{} augmentation needs {what}", config.mode)));
        match config.mode {
            Mode::None => {}
            Mode::ModEda => {
                if config.n_sub.may_be_positive() && self.neighbors.is_none() {
                    return missing("word vectors");
                }
                if config.n_ins.may_be_positive() && (self.neighbors.is_none() || self.keywords.is_none()) {
                    return missing("word vectors and a keyword table");
                }
            }
            Mode::Eda => {
                if config.n_sub.may_be_positive() && self.synonyms.is_none() {
                    return missing("a synonym map");
                }
                if config.n_ins.may_be_positive() && self.vocabulary.is_empty() {
                    return missing("a non-empty insertion vocabulary");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Substitute,
    Insert,
    Swap,
    Delete,
}

/// Produces `config.n_aug` augmented copies of `doc` (or just the original for
/// mode `none`). Each copy applies a uniformly random non-empty subset of the
/// enabled operations in the order substitution, insertion, swap, deletion.
pub fn augment_sentence<R: Rng>(
    doc: &Document,
    config: &AugmentationConfig,
    resources: &AugmentResources<'_>,
    rng: &mut R,
) -> Result<Vec<AugmentedSentence>> {
    config.validate()?;
    resources.check(config)?;
    if config.mode == Mode::None {
        return Ok(vec![AugmentedSentence {
            id: doc.id.clone(),
            source_id: doc.id.clone(),
            label: doc.label.clone(),
            tokens: doc.tokens.clone(),
            ops: Vec::new(),
        }]);
    }

    let len = doc.tokens.len();
    let n_sub = config.n_sub.resolve(len);
    let n_ins = config.n_ins.resolve(len);
    let n_swap = config.n_swap.resolve(len);
    let enabled: Vec<Op> = [
        (Op::Substitute, n_sub > 0),
        (Op::Insert, n_ins > 0),
        (Op::Swap, n_swap > 0),
        (Op::Delete, config.p_del > 0.0),
    ]
    .into_iter()
    .filter_map(|(op, on)| on.then_some(op))
    .collect();

    if config.mode == Mode::ModEda && n_ins > 0 && doc.label.is_none() && !doc.tokens.is_empty() {
        return Err(Error::invalid(format!(
            "document {:?} has no label; modified insertion needs one",
            doc.id
        )));
    }

    let mut out = Vec::with_capacity(config.n_aug);
    for k in 1..=config.n_aug {
        let mut tokens = doc.tokens.clone();
        let mut ops: Vec<Edit> = Vec::new();
        if !tokens.is_empty() && !enabled.is_empty() {
            let mask = rng.gen_range(1u32..(1 << enabled.len()));
            for (bit, op) in enabled.iter().enumerate() {
                if mask & (1 << bit) == 0 {
                    continue;
                }
                let step = apply(*op, &tokens, doc, config, resources, (n_sub, n_ins, n_swap), rng)?;
                tokens = step.tokens;
                ops.extend(step.edits);
            }
        }
        out.push(AugmentedSentence {
            id: format!("{}-aug{k}", doc.id),
            source_id: doc.id.clone(),
            label: doc.label.clone(),
            tokens,
            ops,
        });
    }
    Ok(out)
}

fn apply<R: Rng>(
    op: Op,
    tokens: &[String],
    doc: &Document,
    config: &AugmentationConfig,
    res: &AugmentResources<'_>,
    (n_sub, n_ins, n_swap): (usize, usize, usize),
    rng: &mut R,
) -> Result<super::Edited> {
    let modified = config.mode == Mode::ModEda;
    Ok(match op {
        Op::Substitute if modified => {
            let nb = res.neighbors.expect("checked");
            modified_substitution(tokens, n_sub, config.t, nb, res.lexicon, rng)
        }
        Op::Substitute => {
            let syn = res.synonyms.expect("checked");
            eda_synonym_replacement(tokens, n_sub, syn, res.stopwords, rng)
        }
        Op::Insert if modified => {
            let label = doc.label.as_deref().expect("checked");
            let nb = res.neighbors.expect("checked");
            let table = res.keywords.expect("checked");
            modified_insertion(tokens, label, n_ins, config.t, nb, res.lexicon, table, rng)?
        }
        Op::Insert => eda_random_insertion(tokens, n_ins, res.vocabulary, rng)?,
        Op::Swap => random_swap(tokens, n_swap, rng),
        Op::Delete => random_deletion(tokens, config.p_del, rng),
    })
}

/// Originals plus their augmentations. Each original is followed by its
/// `-augN` copies.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCorpus {
    pub corpus: Corpus,
    /// Augmented sentences only, in output order.
    pub audit: Vec<AugmentedSentence>,
}

impl AugmentedCorpus {
    /// JSONL lines: originals with empty `ops`, augmentations with their edit
    /// records.
    pub fn output_records(&self, originals: &Corpus) -> Vec<OutputRecord> {
        let by_id: HashMap<&str, &Document> = originals.documents().iter().map(|d| (d.id.as_str(), d)).collect();
        let audit: HashMap<&str, &AugmentedSentence> = self.audit.iter().map(|a| (a.id.as_str(), a)).collect();
        self.corpus
            .documents()
            .iter()
            .map(|doc| match audit.get(doc.id.as_str()) {
                Some(a) => {
                    let source = by_id
                        .get(a.source_id.as_str())
                        .map(|d| d.tokens.as_slice())
                        .unwrap_or(&[]);
                    OutputRecord {
                        id: a.id.clone(),
                        label: a.label.clone(),
                        text: a.tokens.join(" "),
                        source_id: a.source_id.clone(),
                        ops: op_records(source, &a.ops),
                    }
                }
                None => OutputRecord {
                    id: doc.id.clone(),
                    label: doc.label.clone(),
                    text: doc.raw_text.clone(),
                    source_id: doc.id.clone(),
                    ops: Vec::new(),
                },
            })
            .collect()
    }

    pub fn to_jsonl(&self, originals: &Corpus) -> Result<String> {
        let mut out = String::new();
        for rec in self.output_records(originals) {
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn as_document(a: &AugmentedSentence) -> Document {
    let text = a.tokens.join(" ");
    Document {
        id: a.id.clone(),
        raw_text: text.clone(),
        clean_text: text,
        tokens: a.tokens.clone(),
        label: a.label.clone(),
    }
}

/// Augments every document on `workers` threads. Each document draws from its
/// own generator seeded by `seed ^ hash(id)`, so the result does not depend on
/// document order or thread count.
pub fn augment_corpus(
    corpus: &Corpus,
    config: &AugmentationConfig,
    resources: &AugmentResources<'_>,
    workers: usize,
) -> Result<AugmentedCorpus> {
    config.validate()?;
    resources.check(config)?;
    if config.mode == Mode::None {
        return Ok(AugmentedCorpus {
            corpus: corpus.clone(),
            audit: Vec::new(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let per_doc: Vec<Vec<AugmentedSentence>> = pool.install(|| {
        corpus
            .documents()
            .par_iter()
            .map(|doc| {
                let mut rng = seeded(document_seed(config.seed, &doc.id));
                augment_sentence(doc, config, resources, &mut rng)
            })
            .collect::<Result<_>>()
    })?;

    let mut docs = Vec::with_capacity(corpus.len() * (1 + config.n_aug));
    let mut audit = Vec::with_capacity(corpus.len() * config.n_aug);
    for (doc, augs) in corpus.documents().iter().zip(per_doc) {
        docs.push(doc.clone());
        docs.extend(augs.iter().map(as_document));
        audit.extend(augs);
    }
    Ok(AugmentedCorpus {
        corpus: Corpus::new(docs)?,
        audit,
    })
}
