//! Command-line front end.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags, invalid
//! settings) and 2 for data errors (unreadable or malformed inputs).
//!
//! A `--config FILE` of `key = value` lines supplies defaults for any flag of
//! the chosen subcommand; flags given on the command line take precedence.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::augment::{
    augment_corpus, AugmentResources, AugmentationConfig, EditCount, Mode, NeighborIndex, SynonymMap,
};
use crate::classify::{train, FeatureMode, LinearModel, TrainConfig};
use crate::corpus::{clean_text, load_corpus, tokenize, Corpus, CorpusFormat, Preprocessor, StopwordList};
use crate::embeddings::{train_embeddings, EmbedTrainConfig, EmbeddingStore};
use crate::error::{Error, Result};
use crate::eval::{compare_augmenters, confusion_and_metrics_with, CompareInputs, CompareSettings, SplitPolicy};
use crate::keywords::{ClassKeywordTable, DEFAULT_TOP_M};
use crate::sentiment::SentimentLexicon;

#[derive(Parser, Debug)]
#[command(
    name = "modeda",
    version,
    about = "Sentiment-aware text augmentation",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augment a labeled corpus and write JSONL records.
    Augment {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        #[command(flatten)]
        aug: AugmentArgs,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Train GloVe-style word vectors on a corpus.
    TrainEmbeddings {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Print the nearest neighbors of a word.
    Neighbors {
        word: String,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long, default_value_t = 10)]
        topn: usize,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Print the summed lexicon polarity of a text.
    Sentiment {
        text: String,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Build the per-class keyword table as JSON.
    Keywords {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        top_m: Option<usize>,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Train a linear classifier and write it as JSON.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Score a trained model on a labeled corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[command(flatten)]
        io: OutputArgs,
    },
    /// Compare augmentation modes over several seeds.
    Compare {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Separate test corpus; without it 10% of --corpus is held out.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[command(flatten)]
        resources: ResourceArgs,
        #[command(flatten)]
        aug: AugmentArgs,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long, value_delimiter = ',', default_value = "none,eda,mod_eda")]
        modes: Vec<Mode>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "strict")]
        split: SplitPolicy,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "tsv")]
    format: CorpusFormat,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    drop_stopwords: bool,
}

#[derive(Args, Debug)]
struct ResourceArgs {
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    synonyms: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    n_aug: Option<usize>,
    #[arg(long)]
    n_sub: Option<EditCount>,
    #[arg(long)]
    n_ins: Option<EditCount>,
    #[arg(long)]
    n_swap: Option<EditCount>,
    #[arg(long)]
    p_del: Option<f64>,
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ClassifierArgs {
    #[arg(long, default_value = "avg_embedding")]
    features: FeatureMode,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path, for runs that print to stdout.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl AugmentArgs {
    fn resolve(&self) -> AugmentationConfig {
        let d = AugmentationConfig::default();
        AugmentationConfig {
            mode: self.mode.unwrap_or(d.mode),
            t: self.t.unwrap_or(d.t),
            n_sub: self.n_sub.unwrap_or(d.n_sub),
            n_ins: self.n_ins.unwrap_or(d.n_ins),
            n_swap: self.n_swap.unwrap_or(d.n_swap),
            p_del: self.p_del.unwrap_or(d.p_del),
            n_aug: self.n_aug.unwrap_or(d.n_aug),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

impl ClassifierArgs {
    fn resolve(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            l2: self.l2.unwrap_or(d.l2),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            seed,
        }
    }
}

/// Written next to every output so a run can be repeated.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    /// sha256 of every input file, by path.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    pub seed: Option<u64>,
    pub created_unix: u64,
}

/// Collects what a manifest needs while a subcommand runs.
struct Run<'a> {
    command: &'static str,
    args: &'a [String],
    inputs: BTreeMap<String, String>,
}

impl Run<'_> {
    fn read(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    fn corpus(&mut self, args: &CorpusArgs) -> Result<Corpus> {
        self.read(&args.corpus)?;
        load_corpus(&args.corpus, args.format, &self.preprocessor(args)?)
    }

    fn preprocessor(&mut self, args: &CorpusArgs) -> Result<Preprocessor> {
        Ok(Preprocessor {
            stopwords: self.stopwords(args)?,
            drop_stopwords: args.drop_stopwords,
        })
    }

    fn stopwords(&mut self, args: &CorpusArgs) -> Result<StopwordList> {
        match &args.stopwords {
            Some(p) => {
                self.read(p)?;
                StopwordList::load(p)
            }
            None => Ok(StopwordList::english()),
        }
    }

    fn vectors(&mut self, path: &Path) -> Result<EmbeddingStore> {
        self.read(path)?;
        Ok(EmbeddingStore::load(path)?.store)
    }

    fn lexicon(&mut self, path: Option<&Path>) -> Result<SentimentLexicon> {
        match path {
            Some(p) => {
                self.read(p)?;
                Ok(SentimentLexicon::load(p)?.lexicon)
            }
            None => Ok(SentimentLexicon::afinn_111()),
        }
    }

    fn synonyms(&mut self, path: Option<&Path>) -> Result<Option<SynonymMap>> {
        path.map(|p| {
            self.read(p)?;
            SynonymMap::load(p)
        })
        .transpose()
    }

    fn manifest(self, config: impl Serialize, seed: Option<u64>) -> Result<RunManifest> {
        Ok(RunManifest {
            command: self.command.to_owned(),
            args: self.args.to_vec(),
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(manifest)? + "\n"))
}

/// `<out>.manifest.json` next to a file output, or the explicit `--manifest`.
fn manifest_path(io: &OutputArgs) -> Option<PathBuf> {
    io.manifest.clone().or_else(|| {
        io.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

/// A closed pipe (`| head`) is not an error.
fn write_stdout(out: &mut dyn Write, text: &str) -> Result<()> {
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

/// Writes `text` to `--out` or stdout, then the manifest.
fn emit(io: &OutputArgs, text: &str, out: &mut dyn Write, manifest: RunManifest) -> Result<()> {
    match &io.out {
        Some(p) => write_file(p, text)?,
        None => write_stdout(out, text)?,
    }
    if let Some(p) = manifest_path(io) {
        write_manifest(&p, &manifest)?;
    }
    Ok(())
}

fn neighbors_index<'a>(store: Option<&'a EmbeddingStore>) -> Option<NeighborIndex<'a>> {
    store.map(NeighborIndex::new)
}

fn dispatch(command: Command, args: &[String], out: &mut dyn Write) -> Result<()> {
    let name = command_name(&command);
    let mut run = Run {
        command: name,
        args,
        inputs: BTreeMap::new(),
    };
    match command {
        Command::Augment {
            corpus,
            resources,
            aug,
            workers,
            io,
        } => {
            let config = aug.resolve();
            config.validate()?;
            let docs = run.corpus(&corpus)?;
            let stopwords = run.stopwords(&corpus)?;
            let lexicon = run.lexicon(resources.lexicon.as_deref())?;
            let synonyms = run.synonyms(resources.synonyms.as_deref())?;
            let store = resources.vectors.as_deref().map(|p| run.vectors(p)).transpose()?;
            let index = neighbors_index(store.as_ref());
            let top_m = aug.top_m.unwrap_or(DEFAULT_TOP_M);
            let keywords = match config.mode {
                Mode::ModEda => Some(ClassKeywordTable::build(&docs, &stopwords, top_m)?),
                _ => None,
            };
            let vocabulary = docs.vocabulary();
            let res = AugmentResources {
                neighbors: index.as_ref(),
                lexicon: &lexicon,
                keywords: keywords.as_ref(),
                synonyms: synonyms.as_ref(),
                stopwords: &stopwords,
                vocabulary: &vocabulary,
            };
            let augmented = augment_corpus(&docs, &config, &res, workers.unwrap_or(1))?;
            let text = augmented.to_jsonl(&docs)?;
            let manifest = run.manifest(
                serde_json::json!({ "augmentation": config, "top_m": top_m, "format": corpus.format.to_string() }),
                Some(config.seed),
            )?;
            emit(&io, &text, out, manifest)
        }
        Command::TrainEmbeddings {
            corpus,
            dim,
            window,
            x_max,
            alpha,
            epochs,
            learning_rate,
            min_count,
            seed,
            io,
        } => {
            let d = EmbedTrainConfig::default();
            let config = EmbedTrainConfig {
                dim: dim.unwrap_or(d.dim),
                window: window.unwrap_or(d.window),
                x_max: x_max.unwrap_or(d.x_max),
                alpha: alpha.unwrap_or(d.alpha),
                epochs: epochs.unwrap_or(d.epochs),
                learning_rate: learning_rate.unwrap_or(d.learning_rate),
                min_count: min_count.unwrap_or(d.min_count),
                seed: seed.unwrap_or(d.seed),
            };
            config.validate()?;
            let docs = run.corpus(&corpus)?;
            let trained = train_embeddings(&docs, &config)?;
            let manifest = run.manifest(
                serde_json::json!({ "embedding": config, "epoch_losses": trained.epoch_losses }),
                Some(config.seed),
            )?;
            emit(&io, &trained.store.to_text()?, out, manifest)
        }
        Command::Neighbors {
            word,
            vectors,
            topn,
            io,
        } => {
            let store = run.vectors(&vectors)?;
            let list = store.most_similar(&word, topn)?;
            let text: String = list
                .neighbors
                .iter()
                .map(|n| format!("{}\t{:.6}\n", n.word, n.similarity))
                .collect();
            let manifest = run.manifest(serde_json::json!({ "word": word, "topn": topn }), None)?;
            emit(&io, &text, out, manifest)
        }
        Command::Sentiment { text, lexicon, io } => {
            let lex = run.lexicon(lexicon.as_deref())?;
            let tokens = tokenize(&clean_text(&text), &StopwordList::empty(), false);
            let polarity = lex.sentence_polarity(&tokens).value();
            let manifest = run.manifest(serde_json::json!({ "text": text }), None)?;
            emit(&io, &format!("{polarity}\n"), out, manifest)
        }
        Command::Keywords { corpus, top_m, io } => {
            let docs = run.corpus(&corpus)?;
            let stopwords = run.stopwords(&corpus)?;
            let top_m = top_m.unwrap_or(DEFAULT_TOP_M);
            let table = ClassKeywordTable::build(&docs, &stopwords, top_m)?;
            let manifest = run.manifest(serde_json::json!({ "top_m": top_m }), None)?;
            emit(&io, &(table.to_json()? + "\n"), out, manifest)
        }
        Command::Train {
            corpus,
            vectors,
            classifier,
            seed,
            io,
        } => {
            let config = classifier.resolve(seed.unwrap_or(0));
            config.validate()?;
            let docs = run.corpus(&corpus)?;
            let store = vectors.as_deref().map(|p| run.vectors(p)).transpose()?;
            let trained = train(&docs, store.as_ref(), classifier.features, &config)?;
            let manifest = run.manifest(
                serde_json::json!({ "classifier": config, "features": classifier.features, "epoch_losses": trained.epoch_losses }),
                Some(config.seed),
            )?;
            emit(&io, &(trained.model.to_json()? + "\n"), out, manifest)
        }
        Command::Evaluate {
            model,
            corpus,
            vectors,
            io,
        } => {
            run.read(&model)?;
            let model = LinearModel::load(&model)?;
            let docs = run.corpus(&corpus)?;
            let store = vectors.as_deref().map(|p| run.vectors(p)).transpose()?;
            let preds = model.predict_corpus(&docs, store.as_ref())?;
            let golds: Vec<String> = docs
                .documents()
                .iter()
                .map(|d| {
                    d.label
                        .clone()
                        .ok_or_else(|| Error::invalid(format!("document {:?} has no label", d.id)))
                })
                .collect::<Result<_>>()?;
            let mut classes = model.classes.clone();
            classes.extend(golds.iter().cloned());
            classes.sort();
            classes.dedup();
            let (confusion, metrics) = confusion_and_metrics_with(&classes, &golds, &preds)?;
            let text = serde_json::to_string_pretty(&serde_json::json!({
                "confusion": confusion,
                "metrics": metrics,
            }))? + "\n";
            let manifest = run.manifest(serde_json::json!({}), None)?;
            emit(&io, &text, out, manifest)
        }
        Command::Compare {
            corpus,
            heldout,
            resources,
            aug,
            classifier,
            modes,
            seeds,
            split,
            workers,
            out: dir,
        } => {
            let augmentation = aug.resolve();
            augmentation.validate()?;
            let docs = run.corpus(&corpus)?;
            let heldout_docs = match &heldout {
                Some(p) => {
                    run.read(p)?;
                    Some(load_corpus(p, corpus.format, &run.preprocessor(&corpus)?)?)
                }
                None => None,
            };
            let stopwords = run.stopwords(&corpus)?;
            let lexicon = run.lexicon(resources.lexicon.as_deref())?;
            let synonyms = run.synonyms(resources.synonyms.as_deref())?;
            let store = resources.vectors.as_deref().map(|p| run.vectors(p)).transpose()?;
            let index = neighbors_index(store.as_ref());
            let settings = CompareSettings {
                modes,
                seeds,
                augmentation,
                classifier: classifier.resolve(0),
                features: classifier.features,
                split,
                top_m: aug.top_m.unwrap_or(DEFAULT_TOP_M),
                workers: workers.unwrap_or(1),
            };
            let inputs = CompareInputs {
                corpus: &docs,
                heldout: heldout_docs.as_ref(),
                neighbors: index.as_ref(),
                lexicon: &lexicon,
                synonyms: synonyms.as_ref(),
                stopwords: &stopwords,
            };
            let report = compare_augmenters(&settings, &inputs)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_file(&dir.join("report.json"), &report.to_json()?)?;
            write_file(&dir.join("report.txt"), &report.to_table())?;
            write_file(&dir.join("runs.csv"), &report.to_csv())?;
            write_stdout(out, &report.to_table())?;
            let manifest = run.manifest(
                serde_json::json!({
                    "modes": settings.modes,
                    "seeds": settings.seeds,
                    "split": settings.split,
                    "features": settings.features,
                    "augmentation": settings.augmentation,
                    "classifier": settings.classifier,
                    "top_m": settings.top_m,
                }),
                settings.seeds.first().copied(),
            )?;
            write_manifest(&dir.join("manifest.json"), &manifest)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Augment { .. } => "augment",
        Command::TrainEmbeddings { .. } => "train-embeddings",
        Command::Neighbors { .. } => "neighbors",
        Command::Sentiment { .. } => "sentiment",
        Command::Keywords { .. } => "keywords",
        Command::Train { .. } => "train",
        Command::Evaluate { .. } => "evaluate",
        Command::Compare { .. } => "compare",
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, source_name: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(source_name, i + 1, "expected `key = value`"))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::parse(source_name, i + 1, "empty key"));
        }
        pairs.push((key, v.trim().trim_matches('"').to_owned()));
    }
    Ok(pairs)
}

/// Removes `--config FILE` from `args` and splices the file's settings in
/// right after the subcommand, so later command-line flags override them.
fn expand_config(args: &[String]) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(
                it.next()
                    .ok_or_else(|| Error::invalid("--config needs a file"))?
                    .clone(),
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_owned());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let Some(sub) = rest.first().cloned() else {
        return Ok(rest);
    };
    let cmd = Cli::command();
    let Some(sc) = cmd.find_subcommand(&sub) else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text, &path)? {
        // keys meant for other subcommands are skipped
        if sc.get_arguments().any(|a| a.get_long() == Some(key.as_str())) {
            injected.push(format!("--{key}"));
            injected.push(value);
        }
    }
    rest.splice(1..1, injected);
    Ok(rest)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Runs the program on `args` (including the program name) and returns the
/// exit status.
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let program = args.first().cloned().unwrap_or_else(|| "modeda".into());
    let user_args: Vec<String> = args.into_iter().skip(1).collect();
    let expanded = match expand_config(&user_args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(std::iter::once(program).chain(expanded)) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command, &user_args, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let pairs = parse_config("# c\nn_aug = 4\n\nmode=eda\n", "cfg").unwrap();
        assert_eq!(pairs, [("n-aug".into(), "4".into()), ("mode".into(), "eda".into())]);
        assert!(parse_config("oops\n", "cfg").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
