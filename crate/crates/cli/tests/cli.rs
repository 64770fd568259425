//! End-to-end runs of the `songattn` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use songattn::ingest::{save_corpus, AudioRecord, Corpus, LabelSet, Record};
use songattn::synthetic::{planted_corpus, PlantedConfig};
use songattn::Tensor2;
use tempfile::TempDir;

fn songattn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_songattn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lyric_corpus(dir: &Path) -> PathBuf {
    let cfg = PlantedConfig {
        per_class: 4,
        text_padding: 70,
        filler_vocab: 5,
        ..Default::default()
    };
    let path = dir.join("lyrics.jsonl");
    save_corpus(&planted_corpus(&cfg).unwrap(), &path).unwrap();
    path
}

const TINY: [&str; 12] = [
    "--epochs=2",
    "--seq-len=90",
    "--hidden=3",
    "--attention-dim=4",
    "--hops=2",
    "--batch-size=4",
    "--embeddings",
    "hash:6:1",
    "--learning-rate",
    "0.01",
    "--validation-fraction",
    "0.25",
];

fn train_tiny(dir: &Path, corpus: &Path, name: &str, seed: &str) -> (Output, PathBuf) {
    let ckpt = dir.join(name);
    let mut args = vec![
        "--seed",
        seed,
        "--quiet",
        "train",
        "--corpus",
        p(corpus),
        "--checkpoint",
        p(&ckpt),
    ];
    args.extend(TINY);
    (songattn(&args), ckpt)
}

#[test]
fn valid_tiny_run_writes_checkpoint_and_metrics() {
    let dir = TempDir::new().unwrap();
    let corpus = lyric_corpus(dir.path());
    let (out, ckpt) = train_tiny(dir.path(), &corpus, "m.ckpt", "3");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(ckpt.is_file());
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["epoch"], 1);
    assert!(lines[0]["train_loss"].as_f64().unwrap() > 0.0);
    assert!(lines[0]["val_acc"].is_number());
}

#[test]
fn identical_seeds_give_identical_checkpoints() {
    let dir = TempDir::new().unwrap();
    let corpus = lyric_corpus(dir.path());
    let (a, ckpt_a) = train_tiny(dir.path(), &corpus, "a.ckpt", "11");
    let (b, ckpt_b) = train_tiny(dir.path(), &corpus, "b.ckpt", "11");
    let (c, ckpt_c) = train_tiny(dir.path(), &corpus, "c.ckpt", "12");
    for o in [&a, &b, &c] {
        assert_eq!(o.status.code(), Some(0), "{}", stderr(o));
    }
    assert_eq!(fs::read(&ckpt_a).unwrap(), fs::read(&ckpt_b).unwrap());
    assert_ne!(fs::read(&ckpt_a).unwrap(), fs::read(ckpt_c).unwrap());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_corpus_is_config_error_naming_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.jsonl");
    let (out, ckpt) = train_tiny(dir.path(), &missing, "m.ckpt", "0");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere.jsonl"), "{}", stderr(&out));
    assert!(!ckpt.exists());
}

#[test]
fn corrupt_corpus_line_is_data_error_with_line_number() {
    let dir = TempDir::new().unwrap();
    let corpus = lyric_corpus(dir.path());
    let mut lines: Vec<String> = fs::read_to_string(&corpus)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[3] = "{\"id\": \"broken\", ".into();
    fs::write(&corpus, lines.join("\n")).unwrap();
    let (out, ckpt) = train_tiny(dir.path(), &corpus, "m.ckpt", "0");
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
    assert!(!ckpt.exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let corpus = lyric_corpus(dir.path());
    let ckpt = dir.path().join("cfg.ckpt");
    let config = dir.path().join("run.json");
    let settings = serde_json::json!({
        "corpus": corpus, "checkpoint": ckpt, "embeddings": "hash:6:1",
        "epochs": 5, "seq_len": 90, "hidden": 2, "attention_dim": 3, "hops": 1,
    });
    fs::write(&config, settings.to_string()).unwrap();
    let out = songattn(&["--config", p(&config), "--quiet", "train", "--epochs=1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1);
    assert!(ckpt.is_file());

    fs::write(&config, r#"{"epochz": 1}"#).unwrap();
    let out = songattn(&["--config", p(&config), "train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_hyperparameter_is_config_error() {
    let dir = TempDir::new().unwrap();
    let corpus = lyric_corpus(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let out = songattn(&[
        "train",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--batch-size=0",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

struct Trained {
    dir: TempDir,
    corpus: PathBuf,
    ckpt: PathBuf,
}

fn trained_lyric_model() -> Trained {
    let dir = TempDir::new().unwrap();
    let corpus = lyric_corpus(dir.path());
    let (out, ckpt) = train_tiny(dir.path(), &corpus, "m.ckpt", "5");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    Trained { dir, corpus, ckpt }
}

#[test]
fn classify_by_id_and_by_record_file() {
    let t = trained_lyric_model();
    let args = [
        "classify",
        "--checkpoint",
        p(&t.ckpt),
        "--corpus",
        p(&t.corpus),
        "--id",
        "c1-002",
    ];
    let out = songattn(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let probs = v["probabilities"].as_array().unwrap();
    assert_eq!(probs.len(), 3);
    let total: f64 = probs
        .iter()
        .map(|p| p["probability"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-6);
    assert_eq!(v["id"], "c1-002");
    assert_eq!(songattn(&args).stdout, out.stdout);

    let corpus = Corpus::parse(&fs::read_to_string(&t.corpus).unwrap()).unwrap();
    let record = t.dir.path().join("one.json");
    fs::write(&record, corpus.get("c1-002").unwrap().to_json_line()).unwrap();
    let by_file = songattn(&[
        "classify",
        "--checkpoint",
        p(&t.ckpt),
        "--record",
        p(&record),
    ]);
    assert_eq!(by_file.stdout, out.stdout);

    let short = t.dir.path().join("short.json");
    let line = r#"{"id":"s","artist":"a","title":"t","genre":"genre0","text":"too few words"}"#;
    fs::write(&short, line).unwrap();
    let out = songattn(&[
        "classify",
        "--checkpoint",
        p(&t.ckpt),
        "--record",
        p(&short),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("too_short"), "{}", stderr(&out));

    let out = songattn(&[
        "classify",
        "--checkpoint",
        p(&t.ckpt),
        "--corpus",
        p(&t.corpus),
        "--id",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupted_checkpoint_is_data_error() {
    let t = trained_lyric_model();
    let mut bytes = fs::read(&t.ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&t.ckpt, bytes).unwrap();
    let out = songattn(&[
        "classify",
        "--checkpoint",
        p(&t.ckpt),
        "--corpus",
        p(&t.corpus),
        "--id",
        "c0-000",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("integrity"), "{}", stderr(&out));
}

#[test]
fn explain_formats() {
    let t = trained_lyric_model();
    let html = t.dir.path().join("e.html");
    let base = [
        "explain",
        "--checkpoint",
        p(&t.ckpt),
        "--corpus",
        p(&t.corpus),
        "--id",
        "c2-001",
    ];

    let mut args = base.to_vec();
    args.extend(["--format", "html", "--out", p(&html)]);
    let out = songattn(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let page = fs::read_to_string(&html).unwrap();
    assert!(page.starts_with("<!DOCTYPE html>") && page.contains("rgba("));
    assert!(!page.contains("<script") && !page.contains("<link"));

    let text = t.dir.path().join("e.txt");
    let mut args = base.to_vec();
    args.extend(["--format", "text", "--out", p(&text)]);
    let out = songattn(&args);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(&text).unwrap(), out.stdout);
    assert!(stdout(&out).starts_with("c2-001 (lyric) predicted: genre"));

    let csv = t.dir.path().join("e.csv");
    let mut args = base.to_vec();
    args.extend(["--format", "csv", "--out", p(&csv)]);
    let out = songattn(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(!csv.exists());
}

fn audio_corpus(dir: &Path) -> PathBuf {
    let labels = LabelSet::new(vec!["a".into(), "b".into()]).unwrap();
    let records = (0..6)
        .map(|i| {
            let data = (0..30 * 4)
                .map(|j| ((i * 7 + j) % 11) as f64 / 11.0 - 0.5 * (i % 2) as f64)
                .collect();
            Record::Audio(AudioRecord {
                id: format!("t{i}"),
                artist: format!("artist {i}"),
                title: format!("title {i}"),
                genre: if i % 2 == 0 { "a" } else { "b" }.into(),
                frames: Tensor2::from_vec(30, 4, data).unwrap(),
            })
        })
        .collect();
    let path = dir.join("audio.jsonl");
    save_corpus(&Corpus::new(labels, records).unwrap(), &path).unwrap();
    path
}

#[test]
fn audio_explain_csv_has_31_lines() {
    let dir = TempDir::new().unwrap();
    let corpus = audio_corpus(dir.path());
    let ckpt = dir.path().join("audio.ckpt");
    let out = songattn(&[
        "--quiet",
        "train",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--epochs=1",
        "--hidden=3",
        "--attention-dim=4",
        "--hops=2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = dir.path().join("t0.csv");
    let out = songattn(&[
        "explain",
        "--checkpoint",
        p(&ckpt),
        "--corpus",
        p(&corpus),
        "--id",
        "t0",
        "--format",
        "csv",
        "--out",
        p(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.split("\r\n").filter(|l| !l.is_empty()).count(), 31);
    assert!(text.starts_with("second,weight\r\n0,"));

    let lyrics = lyric_corpus(dir.path());
    let out = songattn(&[
        "explain",
        "--checkpoint",
        p(&ckpt),
        "--corpus",
        p(&lyrics),
        "--id",
        "c0-000",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn embed_then_similar() {
    let t = trained_lyric_model();
    let store = t.dir.path().join("songs.store");
    let out = songattn(&[
        "embed",
        "--checkpoint",
        p(&t.ckpt),
        "--corpus",
        p(&t.corpus),
        "--out",
        p(&store),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(summary["entries"], 12);
    assert_eq!(summary["dimension"], 12);

    let out = songattn(&["similar", "--store", p(&store), "--id", "c0-001"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let hits: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(hits.len(), 4);
    for (i, h) in hits.iter().enumerate() {
        assert_eq!(h["rank"], i + 1);
        assert_ne!(h["id"], "c0-001");
        for key in ["artist", "title", "genre", "similarity"] {
            assert!(h.get(key).is_some());
        }
    }
    let sims: Vec<f64> = hits
        .iter()
        .map(|h| h["similarity"].as_f64().unwrap())
        .collect();
    assert!(sims.windows(2).all(|w| w[0] >= w[1]));

    let out = songattn(&["similar", "--store", p(&store), "--id", "c0-001", "-k", "2"]);
    assert_eq!(stdout(&out).lines().count(), 2);

    let corpus = Corpus::parse(&fs::read_to_string(&t.corpus).unwrap()).unwrap();
    let record = t.dir.path().join("q.json");
    fs::write(&record, corpus.get("c0-001").unwrap().to_json_line()).unwrap();
    let out = songattn(&[
        "similar",
        "--store",
        p(&store),
        "--record",
        p(&record),
        "--checkpoint",
        p(&t.ckpt),
        "-k",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let top: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(top["id"], "c0-001");
    assert!((top["similarity"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let out = songattn(&["similar", "--store", p(&store), "--id", "missing"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ingest_check_reports_admission() {
    let dir = TempDir::new().unwrap();
    let labels = LabelSet::new(vec!["rock".into()]).unwrap();
    let lyric = |id: &str, n: usize| {
        Record::Lyric(songattn::ingest::LyricRecord {
            id: id.into(),
            artist: "a".into(),
            title: "t".into(),
            genre: "rock".into(),
            text: vec!["la"; n].join(" "),
        })
    };
    let corpus = Corpus::new(labels, vec![lyric("short", 69), lyric("ok", 70)]).unwrap();
    let path = dir.path().join("c.jsonl");
    save_corpus(&corpus, &path).unwrap();
    let out = songattn(&["ingest-check", "--corpus", p(&path)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(
        (
            v["total"].as_u64(),
            v["admitted"].as_u64(),
            v["rejected"].as_u64()
        ),
        (Some(2), Some(1), Some(1))
    );
    assert_eq!(v["rejections"][0]["id"], "short");
    assert_eq!(v["admitted_per_genre"]["rock"], 1);
}
