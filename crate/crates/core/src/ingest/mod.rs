//! Record loading, length filters, tokenization and fixed-shape embedding.

mod corpus;
mod embedding;
mod sequence;
mod tokenize;

pub use corpus::{
    admit_audio, admit_lyric, admit_token_count, load_corpus, save_corpus, Admission, AudioRecord,
    Corpus, LabelSet, LyricRecord, Modality, Record, RejectReason, MIN_AUDIO_SECONDS,
    MIN_LYRIC_WORDS,
};
pub use embedding::{
    hash_embedder, load_embedding_table, EmbeddingProvider, EmbeddingTable, HashEmbedder,
};
pub use sequence::{
    embed_audio, embed_audio_with, embed_lyric, embed_lyric_with, EmbeddedSequence, SequenceShape,
};
pub use tokenize::tokenize;

use crate::error::{Error, Result};

/// Admits and embeds one record. Rejected records become [`Error::Rejected`].
pub fn prepare_record(
    record: &Record,
    provider: &dyn EmbeddingProvider,
    shape: SequenceShape,
) -> Result<EmbeddedSequence> {
    if let Admission::Rejected(reason) = record.admit() {
        return Err(Error::Rejected {
            id: record.id().to_string(),
            reason: reason.to_string(),
        });
    }
    match record {
        Record::Lyric(r) => embed_lyric_with(&tokenize(&r.text), provider, shape),
        Record::Audio(r) => embed_audio_with(r, shape),
    }
}
