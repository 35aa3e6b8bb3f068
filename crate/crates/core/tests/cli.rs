use std::path::{Path, PathBuf};

use modeda::cli::run;
use modeda::embeddings::{cosine_similarity, EmbeddingStore};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn modeda(args: &[&str]) -> (u8, String, String) {
    let argv = std::iter::once("modeda")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// First `n` lines of the vendored training reviews.
fn small_corpus(dir: &Path, n: usize) -> PathBuf {
    let text = std::fs::read_to_string(data("reviews-train.tsv")).unwrap();
    let head: String = text.lines().take(n).map(|l| format!("{l}\n")).collect();
    let path = dir.join("small.tsv");
    std::fs::write(&path, head).unwrap();
    path
}

#[test]
fn sentiment_sums_lexicon_scores() {
    assert_eq!(modeda(&["sentiment", "good bad"]), (0, "0\n".into(), String::new()));
    assert_eq!(modeda(&["sentiment", "Good, GOOD!"]).1, "6\n");
}

#[test]
fn neighbors_match_brute_force() {
    let vectors = data("glove-6b-100d-subset.txt");
    let (code, out, _) = modeda(&["neighbors", "great", "--topn", "4", "--vectors", p(&vectors)]);
    assert_eq!(code, 0);
    let store = EmbeddingStore::load(&vectors).unwrap().store;
    let q = store.vector("great").unwrap();
    let mut scan: Vec<(f64, &String)> = store
        .vocab()
        .iter()
        .filter(|w| *w != "great")
        .map(|w| (cosine_similarity(q, store.vector(w).unwrap()).unwrap(), w))
        .collect();
    scan.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let want: Vec<String> = scan[..4].iter().map(|(s, w)| format!("{w}\t{s:.6}")).collect();
    assert_eq!(out.lines().collect::<Vec<_>>(), want);
}

#[test]
fn augment_writes_ten_records_per_document_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 100);
    let out = dir.path().join("aug.jsonl");
    let vectors = data("glove-6b-100d-subset.txt");
    let args = [
        "augment",
        "--corpus",
        p(&corpus),
        "--vectors",
        p(&vectors),
        "--mode",
        "mod_eda",
        "--n-aug",
        "9",
    ];
    let (code, _, err) = modeda(&[&args[..], &["--out", p(&out)]].concat());
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1000);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["label"].is_string() && v["source_id"].is_string() && v["ops"].is_array());
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("aug.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "augment");
    assert_eq!(manifest["config"]["augmentation"]["n_aug"], 9);
    let digest = manifest["inputs"][p(&corpus)].as_str().unwrap();
    assert_eq!(digest.len(), 64);

    // replaying the manifest's arguments gives the same bytes, for any worker count
    let replay: Vec<String> = manifest["args"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_owned())
        .collect();
    let again = dir.path().join("again.jsonl");
    let mut replay: Vec<&str> = replay.iter().map(String::as_str).collect();
    let at = replay.iter().position(|a| *a == "--out").unwrap();
    replay[at + 1] = p(&again);
    replay.extend(["--workers", "4"]);
    assert_eq!(modeda(&replay).0, 0);
    assert_eq!(std::fs::read(&again).unwrap(), text.as_bytes());
}

#[test]
fn mode_none_passes_documents_through() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 7);
    let (code, out, _) = modeda(&["augment", "--corpus", p(&corpus), "--mode", "none"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 7);
}

#[test]
fn config_file_sits_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 10);
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# defaults\nmode = none\nn_aug = 3\ntopn = 99\n").unwrap();
    let (code, out, err) = modeda(&["augment", "--config", p(&cfg), "--corpus", p(&corpus)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 10);

    let syn = data("synonyms-wordnet.tsv");
    let args = [
        "augment",
        "--config",
        p(&cfg),
        "--corpus",
        p(&corpus),
        "--mode",
        "eda",
        "--synonyms",
        p(&syn),
    ];
    let (code, out, err) = modeda(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 40);
}

#[test]
fn exit_codes() {
    assert_eq!(modeda(&["frobnicate"]).0, 1);
    assert_eq!(modeda(&["sentiment", "x", "--no-such-flag"]).0, 1);
    assert_eq!(modeda(&["augment"]).0, 1);
    let (code, out, _) = modeda(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("compare"));

    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 10);
    // mod_eda without vectors is a usage problem
    assert_eq!(modeda(&["augment", "--corpus", p(&corpus)]).0, 1);
    assert_eq!(
        modeda(&["augment", "--corpus", "/no/such/file.tsv", "--mode", "none"]).0,
        2
    );
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "pos\t\n").unwrap();
    assert_eq!(modeda(&["keywords", "--corpus", p(&bad)]).0, 2);
    let vectors = data("glove-6b-100d-subset.txt");
    assert_eq!(modeda(&["neighbors", "qqqzzz", "--vectors", p(&vectors)]).0, 2);
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let train = data("reviews-train.tsv");
    let model = dir.path().join("model.json");
    let args = [
        "train",
        "--corpus",
        p(&train),
        "--features",
        "bow",
        "--epochs",
        "30",
        "--out",
        p(&model),
    ];
    let (code, _, err) = modeda(&args);
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("model.json.manifest.json").exists());
    let (code, out, err) = modeda(&[
        "evaluate",
        "--model",
        p(&model),
        "--corpus",
        p(&data("reviews-heldout.tsv")),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let f1 = v["metrics"]["macro_f1"].as_f64().unwrap();
    assert!(f1 > 0.6, "macro F1 {f1}");
    assert_eq!(v["confusion"]["classes"], serde_json::json!(["neg", "pos"]));
}

#[test]
fn keywords_and_embeddings_commands() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data("reviews-train.tsv");
    let (code, out, _) = modeda(&["keywords", "--corpus", p(&corpus), "--top-m", "3"]);
    assert_eq!(code, 0);
    let table: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(table["pos"].as_array().unwrap().len(), 3);

    let vectors = dir.path().join("trained.txt");
    let args = [
        "train-embeddings",
        "--corpus",
        p(&corpus),
        "--dim",
        "10",
        "--epochs",
        "3",
        "--out",
        p(&vectors),
    ];
    assert_eq!(modeda(&args).0, 0);
    let store = EmbeddingStore::load(&vectors).unwrap().store;
    assert_eq!(store.dim(), 10);
    assert!(store.contains("good"));
}

#[test]
fn compare_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 120);
    let out = dir.path().join("cmp");
    let syn = data("synonyms-wordnet.tsv");
    let args = [
        "compare",
        "--corpus",
        p(&corpus),
        "--modes",
        "none,eda",
        "--seeds",
        "1,2",
        "--features",
        "bow",
        "--synonyms",
        p(&syn),
        "--n-aug",
        "2",
        "--epochs",
        "20",
        "--out",
        p(&out),
    ];
    let (code, stdout, err) = modeda(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("eda - none"));
    for f in ["report.json", "report.txt", "runs.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(!report.contains("workers") && !report.contains("created_unix"));
}
