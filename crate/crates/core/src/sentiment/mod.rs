//! Three-way sentiment labels and the classifiers that produce them.

mod lexicon;
mod remote;

use std::fmt;

use async_trait::async_trait;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use lexicon::{lexicon_score, score_to_label, LexiconClassifier, ValenceLexicon};
pub use remote::RemoteClassifier;

use crate::transport::TransportError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl SentimentLabel {
    pub fn value(self) -> i8 {
        match self {
            SentimentLabel::Negative => -1,
            SentimentLabel::Neutral => 0,
            SentimentLabel::Positive => 1,
        }
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            -1 => Some(SentimentLabel::Negative),
            0 => Some(SentimentLabel::Neutral),
            1 => Some(SentimentLabel::Positive),
            _ => None,
        }
    }

    /// Accepts the class names a three-way sentiment model emits.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" => Some(SentimentLabel::Negative),
            "neutral" | "neu" => Some(SentimentLabel::Neutral),
            "positive" | "pos" => Some(SentimentLabel::Positive),
            _ => None,
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for SentimentLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for SentimentLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Int(i64),
            Name(String),
        }
        match Wire::deserialize(d)? {
            Wire::Int(v) => SentimentLabel::from_value(v)
                .ok_or_else(|| serde::de::Error::custom(format!("sentiment label {v} not in -1..=1"))),
            Wire::Name(n) => SentimentLabel::from_name(&n)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown sentiment label {n:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Remote,
    Lexicon,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SentimentError {
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("classifier returned {got} labels for {expected} texts")]
    Shape { expected: usize, got: usize },
    #[error("lexicon: {0}")]
    Lexicon(String),
}

#[async_trait]
pub trait ClassifierBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn kind(&self) -> ClassifierKind;
    /// Labels for non-empty texts, one per input in order.
    async fn classify_texts(&self, texts: &[String]) -> Result<Vec<SentimentLabel>, SentimentError>;
}

/// Labels every text, order preserved. Blank texts are neutral and never
/// reach the backend.
pub async fn classify(
    backend: &dyn ClassifierBackend,
    texts: &[String],
) -> Result<Vec<SentimentLabel>, SentimentError> {
    let mut labels = vec![SentimentLabel::Neutral; texts.len()];
    let (slots, pending): (Vec<usize>, Vec<String>) = texts
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.trim().is_empty())
        .map(|(i, t)| (i, t.clone()))
        .unzip();
    if pending.is_empty() {
        return Ok(labels);
    }
    let got = backend.classify_texts(&pending).await?;
    if got.len() != pending.len() {
        return Err(SentimentError::Shape { expected: pending.len(), got: got.len() });
    }
    for (slot, label) in slots.into_iter().zip(got) {
        labels[slot] = label;
    }
    Ok(labels)
}
