//! Synthetic corpora with planted class-indicative tokens.
//!
//! Each sequence is neutral filler with a few cue words drawn from its
//! class's own cue vocabulary, so a working classifier must find the cues
//! and a working explanation should point at them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ingest::{
    embed_lyric_with, Corpus, EmbeddingProvider, LabelSet, LyricRecord, Record, SequenceShape,
};
use crate::train::LabeledSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_classes: usize,
    pub per_class: usize,
    /// Inclusive range of sequence lengths.
    pub min_len: usize,
    pub max_len: usize,
    pub cues_per_class: usize,
    pub cues_per_sequence: usize,
    pub filler_vocab: usize,
    /// Extra filler appended after the sequence when rendered as lyric
    /// text, so records clear the minimum-length filter.
    pub text_padding: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_classes: 3,
            per_class: 20,
            min_len: 8,
            max_len: 12,
            cues_per_class: 3,
            cues_per_sequence: 2,
            filler_vocab: 40,
            text_padding: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSample {
    pub id: String,
    pub label: usize,
    pub tokens: Vec<String>,
    /// Positions holding cue words, ascending.
    pub planted: Vec<usize>,
}

pub fn class_label(c: usize) -> String {
    format!("genre{c}")
}

pub fn cue_word(class: usize, k: usize) -> String {
    format!("cue{class}x{k}")
}

pub fn filler_word(k: usize) -> String {
    format!("filler{k:02}")
}

/// Samples in class-interleaved order (class 0, 1, 2, 0, 1, ...).
pub fn planted_samples(cfg: &PlantedConfig) -> Vec<PlantedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for i in 0..cfg.per_class {
        for class in 0..cfg.n_classes {
            let len = rng.gen_range(cfg.min_len..=cfg.max_len);
            let mut tokens: Vec<String> = (0..len)
                .map(|_| filler_word(rng.gen_range(0..cfg.filler_vocab)))
                .collect();
            let mut positions: Vec<usize> = (0..len).collect();
            positions.shuffle(&mut rng);
            let mut planted: Vec<usize> = positions
                .into_iter()
                .take(cfg.cues_per_sequence.min(len))
                .collect();
            planted.sort_unstable();
            for &p in &planted {
                tokens[p] = cue_word(class, rng.gen_range(0..cfg.cues_per_class));
            }
            out.push(PlantedSample {
                id: format!("c{class}-{i:03}"),
                label: class,
                tokens,
                planted,
            });
        }
    }
    out
}

/// Embeds planted samples as model inputs of the given shape.
pub fn planted_sequences(
    samples: &[PlantedSample],
    provider: &dyn EmbeddingProvider,
    shape: SequenceShape,
) -> Result<Vec<LabeledSequence>> {
    samples
        .iter()
        .map(|s| {
            Ok(LabeledSequence {
                id: s.id.clone(),
                input: embed_lyric_with(&s.tokens, provider, shape)?,
                label: s.label,
            })
        })
        .collect()
}

/// Renders planted samples as a lyric corpus.
pub fn planted_corpus(cfg: &PlantedConfig) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let labels = LabelSet::new((0..cfg.n_classes).map(class_label).collect())?;
    let records = planted_samples(cfg)
        .into_iter()
        .map(|s| {
            let mut words = s.tokens;
            words.extend(
                (0..cfg.text_padding).map(|_| filler_word(rng.gen_range(0..cfg.filler_vocab))),
            );
            Record::Lyric(LyricRecord {
                title: format!("Track {}", s.id),
                artist: format!("Artist {}", s.label),
                genre: class_label(s.label),
                id: s.id,
                text: words.join(" "),
            })
        })
        .collect();
    Corpus::new(labels, records)
}
