use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{prepare_record, Corpus, EmbeddedSequence, EmbeddingProvider};
use crate::model::{argmax, loss_and_grads, Model, ModelConfig, ModelParams};
use crate::numcore::{Scalar, Tensor2};
use crate::train::{adam_step, AdamState, Checkpoint, TrainConfig, TrainingMeta};

/// A model input with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence<T: Scalar = f64> {
    pub id: String,
    pub input: EmbeddedSequence<T>,
    pub label: usize,
}

/// One line of the per-epoch metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// `None` when no validation split was requested.
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar = f64> {
    pub model: Model<T>,
    pub metrics: Vec<EpochMetrics>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

/// Seeded shuffle of `0..n`, the first `floor(n · fraction)` indices
/// becoming the validation split. Returns `(train, validation)`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64) * fraction).floor() as usize;
    let train = idx.split_off(n_val);
    (train, idx)
}

/// Loss, logits and parameter gradients of one sample.
type SampleGradient<T> = (T, Tensor2<T>, ModelParams<T>);

/// Per-sample gradients, in input order.
fn batch_gradients<T: Scalar>(
    model: &Model<T>,
    batch: &[&LabeledSequence<T>],
) -> Result<Vec<SampleGradient<T>>> {
    batch
        .par_iter()
        .map(|s| loss_and_grads(&s.input, s.label, model))
        .collect()
}

/// Sums per-sample gradients in a fixed order and divides by the count.
fn mean_gradients<T: Scalar>(grads: &[ModelParams<T>]) -> ModelParams<T> {
    let mut total = grads[0].clone();
    for g in &grads[1..] {
        for (acc, x) in total.tensors_mut().into_iter().zip(g.tensors()) {
            for (a, b) in acc.data_mut().iter_mut().zip(x.data()) {
                *a += *b;
            }
        }
    }
    let scale = T::one() / T::of(grads.len() as f64);
    for t in total.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v *= scale);
    }
    total
}

/// Fraction of samples whose highest logit is their label.
pub fn accuracy<T: Scalar>(model: &Model<T>, samples: &[&LabeledSequence<T>]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let correct = samples
        .par_iter()
        .map(|s| {
            Ok(usize::from(
                model.forward(&s.input)?.predicted_class() == s.label,
            ))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / samples.len() as f64)
}

/// Mini-batch Adam on per-sample cross-entropy.
///
/// Deterministic for fixed inputs: initialization, split and shuffling all
/// derive from `train_config.seed`, and batch gradients are reduced in
/// sample order. `on_epoch` sees each epoch's metrics as they are produced.
pub fn train_samples<T: Scalar>(
    samples: &[LabeledSequence<T>],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome<T>> {
    train_config.validate()?;
    model_config.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    for s in samples {
        if s.label >= model_config.n_classes {
            return Err(Error::Config(format!(
                "sample {} has label {} but the model has {} classes",
                s.id, s.label, model_config.n_classes
            )));
        }
    }
    let (train_idx, val_idx) = split_indices(
        samples.len(),
        train_config.validation_fraction,
        train_config.seed,
    );
    if train_idx.is_empty() {
        return Err(Error::Config(
            "validation split leaves no training samples".into(),
        ));
    }
    let validation: Vec<&LabeledSequence<T>> = val_idx.iter().map(|&i| &samples[i]).collect();

    let mut model = Model::init(*model_config, train_config.seed)?;
    let mut adam = AdamState::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    rng.set_stream(2);
    let mut order = train_idx.clone();
    let mut metrics = Vec::with_capacity(train_config.epochs);

    for epoch in 0..train_config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(train_config.batch_size) {
            let batch: Vec<&LabeledSequence<T>> = chunk.iter().map(|&i| &samples[i]).collect();
            let results = batch_gradients(&model, &batch)?;
            let mut grads = Vec::with_capacity(results.len());
            for ((loss, logits, g), s) in results.into_iter().zip(&batch) {
                let loss = loss.to_f64_lossy();
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss on sample {} in epoch {epoch}",
                        s.id
                    )));
                }
                loss_sum += loss;
                correct += usize::from(argmax(logits.data()) == s.label);
                grads.push(g);
            }
            let mean = mean_gradients(&grads);
            adam_step(&mut model.params, &mean, &mut adam, train_config)?;
        }
        let val_acc = if validation.is_empty() {
            None
        } else {
            Some(accuracy(&model, &validation)?)
        };
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            train_acc: correct as f64 / order.len() as f64,
            val_acc,
        };
        on_epoch(&m);
        metrics.push(m);
    }

    Ok(TrainOutcome {
        model,
        metrics,
        train_ids: train_idx.iter().map(|&i| samples[i].id.clone()).collect(),
        validation_ids: val_idx.iter().map(|&i| samples[i].id.clone()).collect(),
    })
}

/// Admits and embeds every corpus record, pairing it with its class index.
/// Rejected records are skipped.
pub fn corpus_samples(
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
    model_config: &ModelConfig,
) -> Result<Vec<LabeledSequence>> {
    let shape = model_config.input_shape();
    corpus
        .admitted()
        .map(|r| {
            let label = corpus.labels().index_of(r.genre()).ok_or_else(|| {
                Error::Corpus(format!(
                    "record {:?} has unknown genre {:?}",
                    r.id(),
                    r.genre()
                ))
            })?;
            Ok(LabeledSequence {
                id: r.id().to_string(),
                input: prepare_record(r, provider, shape)?,
                label,
            })
        })
        .collect()
}

/// Trains on the admitted records of `corpus` and packages a checkpoint.
pub fn train(
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Checkpoint, Vec<EpochMetrics>)> {
    let modality = corpus
        .modality()
        .ok_or_else(|| Error::Config("corpus is empty".into()))?;
    if model_config.n_classes != corpus.labels().len() {
        return Err(Error::Config(format!(
            "model has {} classes but the corpus declares {} labels",
            model_config.n_classes,
            corpus.labels().len()
        )));
    }
    let samples = corpus_samples(corpus, provider, model_config)?;
    if samples.is_empty() {
        return Err(Error::Config(
            "no records pass the admission filters".into(),
        ));
    }
    let outcome = train_samples(&samples, model_config, train_config, on_epoch)?;
    let last = outcome.metrics.last();
    let checkpoint = Checkpoint {
        config: *model_config,
        params: outcome.model.params,
        labels: corpus.labels().clone(),
        modality,
        meta: TrainingMeta {
            epochs: train_config.epochs,
            seed: train_config.seed,
            final_train_loss: last.map(|m| m.train_loss),
            final_train_acc: last.map(|m| m.train_acc),
            final_val_acc: last.and_then(|m| m.val_acc),
            embedding_source: None,
        },
    };
    Ok((checkpoint, outcome.metrics))
}
