use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::json;
use songattn::explain::{explain, render_audio_csv, render_html, render_text_heatmap};
use songattn::ingest::{
    load_corpus, prepare_record, Admission, Corpus, EmbeddingProvider, Record, SequenceShape,
};
use songattn::persist::write_atomic;
use songattn::retrieve::{build_store, load_store, save_store, DEFAULT_K};
use songattn::train::{load_checkpoint, save_checkpoint, train, Checkpoint};
use songattn::{Modality, ModelConfig, TrainConfig};

use crate::config::{EmbeddingSource, FileConfig, DEFAULT_EMBEDDING_DIM};
use crate::failure::{at_path, require_file, CmdResult, Failure};
use crate::{
    Cli, Command, EmbedArgs, ExplainArgs, Format, IngestCheckArgs, RecordArgs, SimilarArgs,
    TrainArgs,
};

pub fn run(cli: Cli) -> CmdResult {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed);
    match cli.command {
        Command::Train(args) => cmd_train(args, &file, seed),
        Command::Classify(args) => cmd_classify(args, &file),
        Command::Explain(args) => cmd_explain(args, &file),
        Command::Embed(args) => cmd_embed(args, &file),
        Command::Similar(args) => cmd_similar(args, &file),
        Command::IngestCheck(args) => cmd_ingest_check(args, &file),
    }
}

fn required(what: &str, flag: Option<PathBuf>, file: &Option<PathBuf>) -> CmdResult<PathBuf> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| Failure::config(format!("missing --{what} (flag or config key)")))
}

fn open_corpus(path: &Path) -> CmdResult<Corpus> {
    require_file("corpus", path)?;
    load_corpus(path).map_err(at_path(path))
}

fn open_checkpoint(path: &Path) -> CmdResult<Checkpoint> {
    require_file("checkpoint", path)?;
    load_checkpoint(path).map_err(at_path(path))
}

fn print_json(value: &impl Serialize) -> CmdResult {
    let line = serde_json::to_string(value).expect("output serializes");
    writeln!(io::stdout().lock(), "{line}")
        .map_err(|e| Failure::data(format!("writing output: {e}")))
}

/// Embedding source for records scored under `checkpoint`: the flag, then
/// the config file, then whatever the checkpoint was trained with.
fn checkpoint_provider(
    flag: Option<String>,
    file: &FileConfig,
    checkpoint: &Checkpoint,
) -> CmdResult<Box<dyn EmbeddingProvider>> {
    let spec = flag
        .or_else(|| file.embeddings.clone())
        .or_else(|| checkpoint.meta.embedding_source.clone())
        .unwrap_or_else(|| "hash".into());
    EmbeddingSource::parse(&spec, checkpoint.config.input_dim)?.load()
}

fn cmd_train(args: TrainArgs, file: &FileConfig, seed: Option<u64>) -> CmdResult {
    let corpus_path = required("corpus", args.corpus, &file.corpus)?;
    let checkpoint_path = required("checkpoint", args.checkpoint, &file.checkpoint)?;
    let input_dim = args.input_dim.or(file.input_dim);
    let source = EmbeddingSource::parse(
        &args
            .embeddings
            .or_else(|| file.embeddings.clone())
            .unwrap_or_else(|| "hash".into()),
        input_dim.unwrap_or(DEFAULT_EMBEDDING_DIM),
    )?;
    source.check_exists()?;
    require_file("corpus", &corpus_path)?;
    if let Some(parent) = checkpoint_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
    {
        if !parent.is_dir() {
            return Err(Failure::config(format!(
                "checkpoint directory not found: {}",
                parent.display()
            )));
        }
    }

    let defaults = TrainConfig::default();
    let train_config = TrainConfig {
        learning_rate: args
            .learning_rate
            .or(file.learning_rate)
            .unwrap_or(defaults.learning_rate),
        batch_size: args
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        seed: seed.unwrap_or(defaults.seed),
        beta1: args.beta1.or(file.beta1).unwrap_or(defaults.beta1),
        beta2: args.beta2.or(file.beta2).unwrap_or(defaults.beta2),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        grad_clip_norm: args
            .grad_clip_norm
            .or(file.grad_clip_norm)
            .unwrap_or(defaults.grad_clip_norm),
        validation_fraction: args
            .validation_fraction
            .or(file.validation_fraction)
            .unwrap_or(defaults.validation_fraction),
    };
    train_config.validate()?;

    let corpus = load_corpus(&corpus_path).map_err(at_path(&corpus_path))?;
    let modality = corpus.modality().ok_or_else(|| {
        Failure::data(format!("{}: corpus has no records", corpus_path.display()))
    })?;
    let provider = source.load()?;
    let base = ModelConfig::for_modality(modality, corpus.labels().len());
    let natural_dim = match modality {
        Modality::Lyric => provider.dimension(),
        Modality::Audio => corpus
            .records()
            .iter()
            .find_map(|r| match r {
                Record::Audio(a) => Some(a.frames.cols()),
                Record::Lyric(_) => None,
            })
            .unwrap_or(SequenceShape::AUDIO.dim),
    };
    let model_config = ModelConfig {
        seq_len: args.seq_len.or(file.seq_len).unwrap_or(base.seq_len),
        input_dim: input_dim.unwrap_or(natural_dim),
        hidden: args.hidden.or(file.hidden).unwrap_or(base.hidden),
        attention_dim: args
            .attention_dim
            .or(file.attention_dim)
            .unwrap_or(base.attention_dim),
        hops: args.hops.or(file.hops).unwrap_or(base.hops),
        n_classes: base.n_classes,
    };
    model_config.validate()?;
    info!(
        "training on {} ({} records, {} admitted) for {} epochs",
        corpus_path.display(),
        corpus.len(),
        corpus.admitted().count(),
        train_config.epochs
    );

    let mut write_error = None;
    let (mut checkpoint, _) = train(
        &corpus,
        provider.as_ref(),
        &model_config,
        &train_config,
        |m| {
            if let Err(e) = print_json(m) {
                write_error.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = write_error {
        return Err(e);
    }
    checkpoint.meta.embedding_source = Some(source.to_string());
    save_checkpoint(&checkpoint, &checkpoint_path).map_err(at_path(&checkpoint_path))?;
    info!("checkpoint written to {}", checkpoint_path.display());
    Ok(())
}

/// Resolves `--corpus/--id` or `--record` to one record.
fn select_record(args: &RecordArgs, file: &FileConfig) -> CmdResult<Record> {
    if let Some(path) = &args.record {
        require_file("record file", path)?;
        let text = fs::read_to_string(path).map_err(|e| at_path(path)(e.into()))?;
        let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        return Record::from_json_line(line)
            .map_err(|e| Failure::data(format!("{}: unreadable record: {e}", path.display())));
    }
    let id = args
        .id
        .as_deref()
        .ok_or_else(|| Failure::config("give --record PATH or --corpus PATH --id ID"))?;
    let corpus_path = required("corpus", args.corpus.clone(), &file.corpus)?;
    let corpus = open_corpus(&corpus_path)?;
    corpus.get(id).cloned().ok_or_else(|| {
        Failure::data(format!(
            "{}: no record with id {id:?}",
            corpus_path.display()
        ))
    })
}

fn cmd_classify(args: RecordArgs, file: &FileConfig) -> CmdResult {
    let checkpoint_path = required("checkpoint", args.checkpoint.clone(), &file.checkpoint)?;
    let checkpoint = open_checkpoint(&checkpoint_path)?;
    let record = select_record(&args, file)?;
    if record.modality() != checkpoint.modality {
        return Err(Failure::config(format!(
            "record {:?} is {} but the checkpoint expects {}",
            record.id(),
            record.modality(),
            checkpoint.modality
        )));
    }
    let provider = checkpoint_provider(args.embeddings, file, &checkpoint)?;
    let input = prepare_record(&record, provider.as_ref(), checkpoint.config.input_shape())?;
    let out = checkpoint.model().forward(&input)?;
    let probabilities: Vec<_> = out
        .probabilities()
        .data()
        .iter()
        .zip(checkpoint.labels.labels())
        .map(|(p, genre)| json!({ "genre": genre, "probability": p }))
        .collect();
    let genre = checkpoint
        .labels
        .label(out.predicted_class())
        .unwrap_or_default();
    print_json(&json!({
        "id": record.id(),
        "genre": genre,
        "probabilities": probabilities,
    }))
}

fn cmd_explain(args: ExplainArgs, file: &FileConfig) -> CmdResult {
    let checkpoint_path = required(
        "checkpoint",
        args.record.checkpoint.clone(),
        &file.checkpoint,
    )?;
    let checkpoint = open_checkpoint(&checkpoint_path)?;
    let record = select_record(&args.record, file)?;
    if args.format == Format::Csv && record.modality() != Modality::Audio {
        return Err(Failure::config(format!(
            "csv output is only available for audio records, {:?} is {}",
            record.id(),
            record.modality()
        )));
    }
    let provider = checkpoint_provider(args.record.embeddings.clone(), file, &checkpoint)?;
    let report = explain(&checkpoint, &record, provider.as_ref())?;
    let rendered = match args.format {
        Format::Text => render_text_heatmap(&report),
        Format::Html => render_html(&report),
        Format::Csv => render_audio_csv(&report)?,
    };
    match &args.out {
        Some(path) => {
            write_atomic(path, rendered.as_bytes()).map_err(at_path(path))?;
            info!("explanation written to {}", path.display());
            if args.format == Format::Text {
                write_stdout(&rendered)?;
            }
        }
        None => write_stdout(&rendered)?,
    }
    Ok(())
}

fn write_stdout(text: &str) -> CmdResult {
    io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| Failure::data(format!("writing output: {e}")))
}

fn cmd_embed(args: EmbedArgs, file: &FileConfig) -> CmdResult {
    let checkpoint_path = required("checkpoint", args.checkpoint, &file.checkpoint)?;
    let corpus_path = required("corpus", args.corpus, &file.corpus)?;
    let out = required("out", args.out, &file.store)?;
    let checkpoint = open_checkpoint(&checkpoint_path)?;
    let corpus = open_corpus(&corpus_path)?;
    let provider = checkpoint_provider(args.embeddings, file, &checkpoint)?;
    let store = build_store(&checkpoint, &corpus, provider.as_ref())?;
    save_store(&store, &out).map_err(at_path(&out))?;
    info!(
        "store with {} entries written to {}",
        store.len(),
        out.display()
    );
    print_json(&json!({ "entries": store.len(), "dimension": store.dimension() }))
}

fn cmd_similar(args: SimilarArgs, file: &FileConfig) -> CmdResult {
    let store_path = required("store", args.store, &file.store)?;
    require_file("store", &store_path)?;
    let store = load_store(&store_path).map_err(at_path(&store_path))?;
    let k = args.k.or(file.k).unwrap_or(DEFAULT_K);
    let (query, exclude) = match (&args.id, &args.record) {
        (Some(id), _) => {
            let entry = store.get(id).ok_or_else(|| {
                Failure::data(format!("{}: no entry with id {id:?}", store_path.display()))
            })?;
            (entry.vector.clone(), Some(id.as_str()))
        }
        (None, Some(record_path)) => {
            let checkpoint_path =
                required("checkpoint", args.checkpoint.clone(), &file.checkpoint)?;
            let checkpoint = open_checkpoint(&checkpoint_path)?;
            let record_args = RecordArgs {
                checkpoint: None,
                corpus: None,
                id: None,
                record: Some(record_path.clone()),
                embeddings: None,
            };
            let record = select_record(&record_args, file)?;
            let provider = checkpoint_provider(args.embeddings.clone(), file, &checkpoint)?;
            let input =
                prepare_record(&record, provider.as_ref(), checkpoint.config.input_shape())?;
            (checkpoint.model().forward(&input)?.content.into_vec(), None)
        }
        (None, None) => return Err(Failure::config("give --id ID or --record PATH")),
    };
    let result = store.top_k(&query, k, exclude)?;
    for (i, hit) in result.hits.iter().enumerate() {
        print_json(&json!({
            "rank": i + 1,
            "id": hit.id,
            "artist": hit.artist,
            "title": hit.title,
            "genre": hit.genre,
            "similarity": hit.similarity,
        }))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Rejection {
    id: String,
    reason: String,
}

#[derive(Serialize)]
struct IngestReport {
    modality: Option<Modality>,
    labels: Vec<String>,
    total: usize,
    admitted: usize,
    rejected: usize,
    admitted_per_genre: BTreeMap<String, usize>,
    rejections: Vec<Rejection>,
}

fn cmd_ingest_check(args: IngestCheckArgs, file: &FileConfig) -> CmdResult {
    let corpus_path = required("corpus", args.corpus, &file.corpus)?;
    let corpus = open_corpus(&corpus_path)?;
    let mut admitted_per_genre: BTreeMap<String, usize> = corpus
        .labels()
        .labels()
        .iter()
        .map(|l| (l.clone(), 0))
        .collect();
    let mut rejections = Vec::new();
    for record in corpus.records() {
        match record.admit() {
            Admission::Accepted => {
                *admitted_per_genre
                    .entry(record.genre().to_string())
                    .or_default() += 1
            }
            Admission::Rejected(reason) => rejections.push(Rejection {
                id: record.id().to_string(),
                reason: reason.to_string(),
            }),
        }
    }
    let total = corpus.len();
    info!("{} of {total} records admitted", total - rejections.len());
    print_json(&IngestReport {
        modality: corpus.modality(),
        labels: corpus.labels().labels().to_vec(),
        total,
        admitted: total - rejections.len(),
        rejected: rejections.len(),
        admitted_per_genre,
        rejections,
    })
}
