//! Per-token attributions from the attention matrix.
//!
//! Hops are summed and renormalized into one weight per valid position,
//! then weights not above 15% of the largest weight are zeroed. Survivors
//! keep their aggregated value.

mod render;

pub use render::{render_audio_csv, render_html, render_text_heatmap, weight_level};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{
    prepare_record, tokenize, EmbeddedSequence, EmbeddingProvider, Modality, Record,
};
use crate::model::Model;
use crate::numcore::{Scalar, Tensor2};
use crate::train::Checkpoint;

/// Weights at or below this fraction of the maximum are zeroed.
pub const THRESHOLD_RATIO: f64 = 0.15;

/// What a sequence position stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Word(String),
    Second(usize),
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Unit::Word(w) => f.write_str(w),
            Unit::Second(s) => write!(f, "{s}s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenAttribution {
    pub position: usize,
    pub unit: Unit,
    /// Hop-aggregated weight before thresholding.
    pub aggregated: f64,
    /// `aggregated` if it survived the threshold, else 0.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationReport {
    pub id: String,
    pub modality: Modality,
    pub attributions: Vec<TokenAttribution>,
    pub predicted_genre: String,
    /// `(label, probability)` in class order.
    pub probabilities: Vec<(String, f64)>,
}

impl ExplanationReport {
    pub fn max_weight(&self) -> f64 {
        self.attributions
            .iter()
            .map(|a| a.weight)
            .fold(0.0, f64::max)
    }

    /// Positions whose weight survived the threshold.
    pub fn survivors(&self) -> Vec<usize> {
        self.attributions
            .iter()
            .filter(|a| a.weight > 0.0)
            .map(|a| a.position)
            .collect()
    }
}

/// One weight per valid position: the sum over hops, renormalized to 1.
pub fn aggregate_attention<T: Scalar>(a: &Tensor2<T>, valid_len: usize) -> Result<Vec<f64>> {
    if valid_len == 0 {
        return Err(Error::Contract(
            "cannot aggregate attention over zero positions".into(),
        ));
    }
    if valid_len > a.cols() {
        return Err(Error::Contract(format!(
            "valid_len {valid_len} exceeds attention width {}",
            a.cols()
        )));
    }
    let mut w = vec![0.0f64; valid_len];
    for r in 0..a.rows() {
        for (acc, v) in w.iter_mut().zip(a.row(r)) {
            *acc += v.to_f64_lossy();
        }
    }
    let total: f64 = w.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Contract(
            "attention has no mass on valid positions".into(),
        ));
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Keeps `w[i]` iff `w[i] > 0.15 · max(w)`; others become 0.
pub fn threshold_attention(w: &[f64]) -> Result<Vec<f64>> {
    if w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Contract(
            "attention weights must be finite and non-negative".into(),
        ));
    }
    let max = w.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::Contract("attention weights are all zero".into()));
    }
    let cutoff = THRESHOLD_RATIO * max;
    Ok(w.iter()
        .map(|&v| if v > cutoff { v } else { 0.0 })
        .collect())
}

/// Runs the model on `input` and pairs each valid position with `units`.
pub fn explain_sequence<T: Scalar>(
    id: &str,
    model: &Model<T>,
    input: &EmbeddedSequence<T>,
    units: Vec<Unit>,
    labels: &[String],
) -> Result<ExplanationReport> {
    if units.len() < input.valid_len {
        return Err(Error::Contract(format!(
            "{} units for {} valid positions",
            units.len(),
            input.valid_len
        )));
    }
    let out = model.forward(input)?;
    let aggregated = aggregate_attention(&out.a, input.valid_len)?;
    let kept = threshold_attention(&aggregated)?;
    let attributions = units
        .into_iter()
        .take(input.valid_len)
        .enumerate()
        .map(|(position, unit)| TokenAttribution {
            position,
            unit,
            aggregated: aggregated[position],
            weight: kept[position],
        })
        .collect();
    let probs = out.probabilities();
    let predicted = out.predicted_class();
    let label = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
    Ok(ExplanationReport {
        id: id.to_string(),
        modality: input.modality,
        attributions,
        predicted_genre: label(predicted),
        probabilities: probs
            .data()
            .iter()
            .enumerate()
            .map(|(i, p)| (label(i), p.to_f64_lossy()))
            .collect(),
    })
}

/// Explains one admitted record under a trained checkpoint.
pub fn explain(
    checkpoint: &Checkpoint,
    record: &Record,
    provider: &dyn EmbeddingProvider,
) -> Result<ExplanationReport> {
    if record.modality() != checkpoint.modality {
        return Err(Error::Contract(format!(
            "record {:?} is {} but the checkpoint was trained on {}",
            record.id(),
            record.modality(),
            checkpoint.modality
        )));
    }
    let input = prepare_record(record, provider, checkpoint.config.input_shape())?;
    let units = match record {
        Record::Lyric(r) => tokenize(&r.text).into_iter().map(Unit::Word).collect(),
        Record::Audio(_) => (0..input.valid_len).map(Unit::Second).collect(),
    };
    explain_sequence(
        record.id(),
        &checkpoint.model(),
        &input,
        units,
        checkpoint.labels.labels(),
    )
}
