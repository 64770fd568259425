use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{prepare_record, Corpus, EmbeddingProvider};
use crate::model::Model;
use crate::numcore::Scalar;
use crate::train::{Checkpoint, LabeledSequence};

/// Classification quality over a labelled set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub total: usize,
    pub accuracy: f64,
    /// Per class; 0 when the class was never predicted.
    pub precision: Vec<f64>,
    /// Per class; 0 when the class has no samples.
    pub recall: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    /// Builds the report from `(true, predicted)` class pairs.
    pub fn from_pairs(n_classes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for &(t, p) in pairs {
            confusion[t][p] += 1;
        }
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = (0..n_classes)
            .map(|c| {
                ratio(
                    confusion[c][c],
                    (0..n_classes).map(|t| confusion[t][c]).sum(),
                )
            })
            .collect();
        let recall = (0..n_classes)
            .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
            .collect();
        Self {
            total: pairs.len(),
            accuracy: ratio(correct, pairs.len()),
            precision,
            recall,
            confusion,
        }
    }
}

pub fn evaluate_samples<T: Scalar>(
    model: &Model<T>,
    samples: &[LabeledSequence<T>],
) -> Result<Evaluation> {
    let pairs = samples
        .par_iter()
        .map(|s| Ok((s.label, model.forward(&s.input)?.predicted_class())))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_pairs(model.config.n_classes, &pairs))
}

/// Scores a checkpoint on the admitted records of `corpus`. Genres are
/// resolved against the checkpoint's labels.
pub fn evaluate(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<Evaluation> {
    let shape = checkpoint.config.input_shape();
    let samples = corpus
        .admitted()
        .map(|r| {
            let label = checkpoint.labels.index_of(r.genre()).ok_or_else(|| {
                Error::Evaluation(format!(
                    "record {:?} has genre {:?} unknown to the checkpoint",
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
        .collect::<Result<Vec<_>>>()?;
    evaluate_samples(&checkpoint.model(), &samples)
}
