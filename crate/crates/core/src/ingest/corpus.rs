use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::tokenize;
use crate::numcore::Tensor2;
use crate::persist::write_atomic;

/// Minimum lyric length in words for a record to be admitted.
pub const MIN_LYRIC_WORDS: usize = 70;
/// Minimum audio length in one-second frames for a record to be admitted.
pub const MIN_AUDIO_SECONDS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Lyric,
    Audio,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Lyric => "lyric",
            Modality::Audio => "audio",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyricRecord {
    pub id: String,
    pub artist: String,
    pub title: String,
    pub genre: String,
    pub text: String,
}

/// One row of `frames` per second of audio, each a pre-computed embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioRecord {
    pub id: String,
    pub artist: String,
    pub title: String,
    pub genre: String,
    pub frames: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Lyric(LyricRecord),
    Audio(AudioRecord),
}

impl Record {
    pub fn id(&self) -> &str {
        match self {
            Record::Lyric(r) => &r.id,
            Record::Audio(r) => &r.id,
        }
    }

    pub fn artist(&self) -> &str {
        match self {
            Record::Lyric(r) => &r.artist,
            Record::Audio(r) => &r.artist,
        }
    }

    pub fn title(&self) -> &str {
        match self {
            Record::Lyric(r) => &r.title,
            Record::Audio(r) => &r.title,
        }
    }

    pub fn genre(&self) -> &str {
        match self {
            Record::Lyric(r) => &r.genre,
            Record::Audio(r) => &r.genre,
        }
    }

    pub fn modality(&self) -> Modality {
        match self {
            Record::Lyric(_) => Modality::Lyric,
            Record::Audio(_) => Modality::Audio,
        }
    }

    pub fn admit(&self) -> Admission {
        match self {
            Record::Lyric(r) => admit_lyric(r),
            Record::Audio(r) => admit_audio(r),
        }
    }

    /// Parses a single corpus line (without the label header).
    pub fn from_json_line(line: &str) -> std::result::Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        raw.into_record()
    }

    pub fn to_json_line(&self) -> String {
        let raw = match self {
            Record::Lyric(r) => RawRecord {
                id: r.id.clone(),
                artist: r.artist.clone(),
                title: r.title.clone(),
                genre: r.genre.clone(),
                text: Some(r.text.clone()),
                frames: None,
            },
            Record::Audio(r) => RawRecord {
                id: r.id.clone(),
                artist: r.artist.clone(),
                title: r.title.clone(),
                genre: r.genre.clone(),
                text: None,
                frames: Some(
                    (0..r.frames.rows())
                        .map(|i| r.frames.row(i).to_vec())
                        .collect(),
                ),
            },
        };
        serde_json::to_string(&raw).expect("record serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    TooShort { found: usize, required: usize },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::TooShort { found, required } => {
                write!(f, "too_short ({found} < {required})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    Rejected(RejectReason),
}

impl Admission {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Admission::Accepted)
    }
}

pub fn admit_lyric(record: &LyricRecord) -> Admission {
    admit_token_count(tokenize(&record.text).len())
}

/// The lyric filter depends only on the token count.
pub fn admit_token_count(count: usize) -> Admission {
    if count < MIN_LYRIC_WORDS {
        Admission::Rejected(RejectReason::TooShort {
            found: count,
            required: MIN_LYRIC_WORDS,
        })
    } else {
        Admission::Accepted
    }
}

pub fn admit_audio(record: &AudioRecord) -> Admission {
    let seconds = record.frames.rows();
    if seconds < MIN_AUDIO_SECONDS {
        Admission::Rejected(RejectReason::TooShort {
            found: seconds,
            required: MIN_AUDIO_SECONDS,
        })
    } else {
        Admission::Accepted
    }
}

/// Ordered genre labels; a label's class index is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Corpus("label set is empty".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Corpus(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        LabelSet::new(v)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(l: LabelSet) -> Self {
        l.labels
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    artist: String,
    title: String,
    genre: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<Vec<f64>>>,
}

impl RawRecord {
    fn into_record(self) -> std::result::Result<Record, String> {
        if self.id.is_empty() {
            return Err("record id is empty".into());
        }
        match (self.text, self.frames) {
            (Some(text), None) => Ok(Record::Lyric(LyricRecord {
                id: self.id,
                artist: self.artist,
                title: self.title,
                genre: self.genre,
                text,
            })),
            (None, Some(frames)) => {
                let frames = Tensor2::from_rows(&frames)
                    .map_err(|e| format!("invalid frames matrix: {e}"))?;
                Ok(Record::Audio(AudioRecord {
                    id: self.id,
                    artist: self.artist,
                    title: self.title,
                    genre: self.genre,
                    frames,
                }))
            }
            (Some(_), Some(_)) => Err("record has both \"text\" and \"frames\"".into()),
            (None, None) => Err("record has neither \"text\" nor \"frames\"".into()),
        }
    }
}

/// A labelled collection of records of a single modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    labels: LabelSet,
    records: Vec<Record>,
}

impl Corpus {
    /// Validates unique ids, a single modality and genres drawn from `labels`.
    pub fn new(labels: LabelSet, records: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut modality = None;
        for r in &records {
            if r.id().is_empty() {
                return Err(Error::Corpus("record id is empty".into()));
            }
            if !seen.insert(r.id().to_string()) {
                return Err(Error::Corpus(format!("duplicate record id {:?}", r.id())));
            }
            if labels.index_of(r.genre()).is_none() {
                return Err(Error::Corpus(format!(
                    "record {:?} has genre {:?} outside the declared labels",
                    r.id(),
                    r.genre()
                )));
            }
            match modality {
                None => modality = Some(r.modality()),
                Some(m) if m != r.modality() => {
                    return Err(Error::Corpus(format!(
                        "record {:?} is {} but the corpus is {m}",
                        r.id(),
                        r.modality()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Self { labels, records })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `None` for an empty corpus.
    pub fn modality(&self) -> Option<Modality> {
        self.records.first().map(Record::modality)
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.id() == id)
    }

    /// Records that pass the length filters, in corpus order.
    pub fn admitted(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.admit().is_accepted())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (header_no, header_line) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing {\"labels\":[...]} header".into(),
        })?;
        let header: Header = serde_json::from_str(header_line).map_err(|e| Error::Parse {
            line: header_no + 1,
            message: format!("invalid label header: {e}"),
        })?;
        let labels = LabelSet::new(header.labels)?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let record = Record::from_json_line(line).map_err(|message| Error::Parse {
                line: i + 1,
                message,
            })?;
            records.push(record);
        }
        Corpus::new(labels, records)
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            labels: self.labels.labels().to_vec(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_json_line());
            out.push('\n');
        }
        out
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let text = fs::read_to_string(path.as_ref())?;
    Corpus::parse(&text)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, corpus.to_jsonl().as_bytes())
}
