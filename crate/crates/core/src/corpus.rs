//! Corpus loading, text cleaning and tokenization.
//!
//! Cleaning follows the tweet-preprocessing recipe: lowercase, drop URLs and
//! @-mentions, keep hashtag words without the `#`, drop every character that
//! is not a letter, digit, whitespace or apostrophe, and cap repeated
//! characters at three. Stopwords are removed at tokenization time.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../../data/stopwords-en.txt");

/// Longest run of one repeated character that survives cleaning.
pub const MAX_CHAR_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub clean_text: String,
    pub tokens: Vec<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    label_set: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate document ids.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::invalid(format!("duplicate document id {:?}", doc.id)));
            }
        }
        let label_set = documents
            .iter()
            .filter_map(|d| d.label.clone())
            .filter(|l| !l.is_empty())
            .collect();
        Ok(Corpus { documents, label_set })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn label_set(&self) -> &BTreeSet<String> {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    /// Documents whose id is in `ids`, in corpus order.
    pub fn subset(&self, ids: &[String]) -> Corpus {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        let docs = self
            .documents
            .iter()
            .filter(|d| wanted.contains(d.id.as_str()))
            .cloned()
            .collect();
        Corpus::new(docs).expect("subset of a valid corpus has unique ids")
    }

    /// Sorted distinct tokens over all documents.
    pub fn vocabulary(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .documents
            .iter()
            .flat_map(|d| d.tokens.iter().map(String::as_str))
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = HashSet::new();
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("bad stopword {w:?}")));
            }
            set.insert(w.to_lowercase());
        }
        Ok(StopwordList { words: set })
    }

    pub fn empty() -> Self {
        StopwordList { words: HashSet::new() }
    }

    /// The bundled English list (179 words).
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS, "stopwords-en.txt").expect("bundled stopword list is valid")
    }

    /// One word per line; blank lines are ignored.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut set = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let w = line.trim();
            if w.is_empty() {
                continue;
            }
            if w.chars().any(char::is_whitespace) {
                return Err(Error::parse(source_name, i + 1, "stopword contains whitespace"));
            }
            set.insert(w.to_lowercase());
        }
        Ok(StopwordList { words: set })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:https?://|www\.)\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());

/// Normalizes raw text. Idempotent: `clean_text(&clean_text(x)) == clean_text(x)`.
pub fn clean_text(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let no_urls = URL.replace_all(&lower, " ");
    let no_mentions = MENTION.replace_all(&no_urls, " ");

    // `#` goes with the other symbols here, which keeps the hashtag word.
    let kept: String = no_mentions
        .chars()
        .filter(|&c| c.is_alphanumeric() || c.is_whitespace() || c == '\'')
        .collect();

    let mut collapsed = String::with_capacity(kept.len());
    let mut prev = None;
    let mut run = 0;
    for c in kept.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= MAX_CHAR_RUN {
            collapsed.push(c);
        }
    }

    collapsed.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str, stopwords: &StopwordList, drop_stopwords: bool) -> Vec<String> {
    text.split_whitespace()
        .filter(|t| !(drop_stopwords && stopwords.contains(t)))
        .map(str::to_owned)
        .collect()
}

/// Strict-majority vote over annotator labels. `None` when no label wins more
/// than half of the votes.
pub fn merge_annotations<S: AsRef<str>>(labels: &[S]) -> Result<Option<String>> {
    if labels.is_empty() {
        return Err(Error::Empty("no annotator labels".into()));
    }
    if labels.len() < 2 {
        return Err(Error::invalid("majority vote needs at least two annotators"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l.as_ref()).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .find(|&(_, n)| 2 * n > labels.len())
        .map(|(l, _)| l.to_owned()))
}

/// Cleaning and tokenization policy applied to every loaded document.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub stopwords: StopwordList,
    pub drop_stopwords: bool,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            stopwords: StopwordList::english(),
            drop_stopwords: true,
        }
    }
}

impl Preprocessor {
    pub fn document(&self, id: impl Into<String>, raw_text: impl Into<String>, label: Option<String>) -> Document {
        let raw_text = raw_text.into();
        let clean = clean_text(&raw_text);
        let tokens = tokenize(&clean, &self.stopwords, self.drop_stopwords);
        Document {
            id: id.into(),
            raw_text,
            clean_text: clean,
            tokens,
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Tsv => "tsv",
            CorpusFormat::Jsonl => "jsonl",
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    text: String,
}

fn synthesized_id(line: usize) -> String {
    format!("{line:06}")
}

/// Decodes bytes as UTF-8, dropping anything undecodable.
pub fn decode_lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).replace('\u{FFFD}', "")
}

pub fn load_corpus(path: &Path, format: CorpusFormat, pre: &Preprocessor) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&decode_lossy(&bytes), format, pre, &path.display().to_string())
}

/// Parses corpus text. Missing ids become the zero-padded 1-based line number.
pub fn parse_corpus(text: &str, format: CorpusFormat, pre: &Preprocessor, source_name: &str) -> Result<Corpus> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let (id, label, raw) = match format {
            CorpusFormat::Tsv => {
                let (label, raw) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(source_name, lineno, "expected `label<TAB>text`"))?;
                let label = (!label.is_empty()).then(|| label.to_owned());
                (None, label, raw.to_owned())
            }
            CorpusFormat::Jsonl => {
                let rec: JsonRecord =
                    serde_json::from_str(line).map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
                (rec.id, rec.label.filter(|l| !l.is_empty()), rec.text)
            }
        };
        if raw.trim().is_empty() {
            return Err(Error::parse(source_name, lineno, "blank text"));
        }
        let id = id.unwrap_or_else(|| synthesized_id(lineno));
        docs.push(pre.document(id, raw, label));
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!("{source_name}: no records")));
    }
    Corpus::new(docs)
}

/// Serializes a corpus to TSV or JSONL. TSV cannot carry ids, so it only
/// round-trips corpora whose ids were synthesized from line numbers.
pub fn format_corpus(corpus: &Corpus, format: CorpusFormat) -> Result<String> {
    let mut out = String::new();
    for doc in corpus.documents() {
        match format {
            CorpusFormat::Tsv => {
                if doc.raw_text.contains(['\t', '\n', '\r']) {
                    return Err(Error::invalid(format!(
                        "document {:?}: text with tabs or newlines cannot be written as TSV",
                        doc.id
                    )));
                }
                out.push_str(doc.label.as_deref().unwrap_or(""));
                out.push('\t');
                out.push_str(&doc.raw_text);
            }
            CorpusFormat::Jsonl => {
                let rec = JsonRecord {
                    id: Some(doc.id.clone()),
                    label: doc.label.clone(),
                    text: doc.raw_text.clone(),
                };
                out.push_str(&serde_json::to_string(&rec)?);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let text = format_corpus(corpus, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stop(words: &[&str]) -> StopwordList {
        StopwordList::new(words).unwrap()
    }

    #[test]
    fn clean_text_examples() {
        assert_eq!(
            clean_text("Goooood!!! https://t.co/x #NHPIndia @user"),
            "goood nhpindia"
        );
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("abc"), "abc");
        assert_eq!(clean_text("see www.example.com now"), "see now");
        assert_eq!(clean_text("don't\tstop\u{7}"), "don't stop");
        assert_eq!(clean_text("aaaa!aa"), "aaa");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("the great scheme", &stop(&["the"]), true), ["great", "scheme"]);
        assert_eq!(tokenize("a b", &StopwordList::empty(), true), ["a", "b"]);
        assert!(tokenize("the the", &stop(&["the"]), true).is_empty());
        assert_eq!(tokenize("the the", &stop(&["the"]), false), ["the", "the"]);
    }

    #[test]
    fn majority_vote() {
        assert_eq!(merge_annotations(&["A", "A", "B"]).unwrap().as_deref(), Some("A"));
        assert_eq!(merge_annotations(&["A", "A", "A"]).unwrap().as_deref(), Some("A"));
        assert_eq!(merge_annotations(&["A", "B", "C"]).unwrap(), None);
        assert_eq!(merge_annotations(&["A", "B"]).unwrap(), None);
        assert!(merge_annotations::<&str>(&[]).is_err());
    }

    #[test]
    fn english_stopwords_bundled() {
        let s = StopwordList::english();
        assert_eq!(s.len(), 179);
        assert!(s.contains("the") && s.contains("don't"));
        assert!(!s.contains("great"));
    }

    #[test]
    fn parse_tsv() {
        let pre = Preprocessor::default();
        let c = parse_corpus("pos\tgood day\n", CorpusFormat::Tsv, &pre, "t").unwrap();
        assert_eq!(c.len(), 1);
        let d = &c.documents()[0];
        assert_eq!(d.label.as_deref(), Some("pos"));
        assert_eq!(d.tokens, ["good", "day"]);
        assert_eq!(d.id, "000001");
    }

    #[test]
    fn parse_jsonl() {
        let pre = Preprocessor::default();
        let c = parse_corpus("{\"text\":\"a\",\"label\":\"x\"}\n", CorpusFormat::Jsonl, &pre, "j").unwrap();
        assert_eq!(c.documents()[0].label.as_deref(), Some("x"));
        assert_eq!(c.label_set().iter().collect::<Vec<_>>(), ["x"]);
    }

    #[test]
    fn blank_text_reports_line() {
        let pre = Preprocessor::default();
        let err = parse_corpus("a\tone\nb\t \nc\tthree\n", CorpusFormat::Tsv, &pre, "f.tsv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn malformed_rows_and_empty_file() {
        let pre = Preprocessor::default();
        assert!(matches!(
            parse_corpus("no tab here\n", CorpusFormat::Tsv, &pre, "f"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_corpus("{\"label\":\"x\"}\n", CorpusFormat::Jsonl, &pre, "f"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_corpus("", CorpusFormat::Tsv, &pre, "f"),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let pre = Preprocessor::default();
        let text = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        assert!(parse_corpus(text, CorpusFormat::Jsonl, &pre, "f").is_err());
    }

    #[test]
    fn undecodable_bytes_dropped() {
        assert_eq!(decode_lossy(b"ok\xff\xfe day"), "ok day");
    }

    fn arb_text() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                Just("http://x.co/a".to_owned()),
                Just("www.a.b".to_owned()),
                Just("@who".to_owned()),
                Just("#Tag".to_owned()),
                "[a-zA-Z0-9'!?.,:/@#\\t \u{e9}\u{130}\u{1F600}]{0,12}",
            ],
            0..8,
        )
        .prop_map(|parts| parts.join(" "))
    }

    proptest! {
        #[test]
        fn clean_text_is_idempotent(s in arb_text()) {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn clean_text_has_no_long_runs(s in arb_text()) {
            let c: Vec<char> = clean_text(&s).chars().collect();
            prop_assert!(c.windows(MAX_CHAR_RUN + 1).all(|w| w.iter().any(|&x| x != w[0])));
        }

        #[test]
        fn stopword_drop_is_subsequence(s in "[a-c ]{0,30}") {
            let sw = stop(&["a", "bb"]);
            let full = tokenize(&s, &sw, false);
            let kept = tokenize(&s, &sw, true);
            let mut it = full.iter();
            prop_assert!(kept.iter().all(|k| it.any(|f| f == k)));
        }

        #[test]
        fn corpus_round_trips(rows in proptest::collection::vec(("[a-z]{0,3}", "[a-zA-Z !#@]{0,10}[a-z]"), 1..10)) {
            let pre = Preprocessor::default();
            let text: String = rows.iter().map(|(l, t)| format!("{l}\t{t}\n")).collect();
            let tsv = parse_corpus(&text, CorpusFormat::Tsv, &pre, "p").unwrap();
            for format in [CorpusFormat::Tsv, CorpusFormat::Jsonl] {
                let again = parse_corpus(&format_corpus(&tsv, format).unwrap(), format, &pre, "p").unwrap();
                prop_assert_eq!(&again, &tsv);
            }
        }
    }
}
