//! Prompt rendering and response generation.

mod remote;
mod scripted;

use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use async_trait::async_trait;
use futures::stream::{self, StreamExt, TryStreamExt};
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use remote::RemoteGenerator;
pub use scripted::{scripted_generate, Fixture, FixtureEntry, ScriptedBackend, WeightedText};

use crate::community::Community;
use crate::rng::rng_for;
use crate::survey::{GrammaticalNumber, SurveyItem};
use crate::transport::TransportError;

/// The four surface forms a subject is probed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptTemplate {
    /// `X`
    #[serde(rename = "name")]
    Name,
    /// `X is` / `X are`
    #[serde(rename = "is")]
    Copula,
    /// `X is a` / `X are a`
    #[serde(rename = "is-a")]
    CopulaA,
    /// `X is the` / `X are the`
    #[serde(rename = "is-the")]
    CopulaThe,
}

impl PromptTemplate {
    pub const ALL: [PromptTemplate; 4] =
        [PromptTemplate::Name, PromptTemplate::Copula, PromptTemplate::CopulaA, PromptTemplate::CopulaThe];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptTemplate::Name => "name",
            PromptTemplate::Copula => "is",
            PromptTemplate::CopulaA => "is-a",
            PromptTemplate::CopulaThe => "is-the",
        }
    }

    /// Human-readable form, as used in result tables.
    pub fn pattern(self) -> &'static str {
        match self {
            PromptTemplate::Name => "X",
            PromptTemplate::Copula => "X is/are",
            PromptTemplate::CopulaA => "X is/are a",
            PromptTemplate::CopulaThe => "X is/are the",
        }
    }
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown prompt template {0:?} (expected name|is|is-a|is-the)")]
pub struct ParseTemplateError(pub String);

impl FromStr for PromptTemplate {
    type Err = ParseTemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "name" | "x" => Ok(Self::Name),
            "is" | "are" | "copula" => Ok(Self::Copula),
            "is-a" | "are-a" | "copula-a" => Ok(Self::CopulaA),
            "is-the" | "are-the" | "copula-the" => Ok(Self::CopulaThe),
            _ => Err(ParseTemplateError(s.to_string())),
        }
    }
}

/// What a prompt talks about: a catalog item or caller-supplied text.
#[derive(Debug, Clone, Copy)]
pub enum PromptSubject<'a> {
    Item(&'a SurveyItem),
    FreeText { text: &'a str, number: GrammaticalNumber },
}

impl PromptSubject<'_> {
    fn name_and_number(&self) -> (&str, GrammaticalNumber) {
        match self {
            PromptSubject::Item(item) => (item.prompt_name.as_str(), item.grammatical_number),
            PromptSubject::FreeText { text, number } => (text.trim(), *number),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("subject text is empty")]
    EmptySubject,
}

pub fn render_prompt(
    subject: PromptSubject<'_>,
    template: PromptTemplate,
    context: Option<Community>,
) -> Result<String, PromptError> {
    let (name, number) = subject.name_and_number();
    let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
    if name.is_empty() {
        return Err(PromptError::EmptySubject);
    }
    let copula = number.copula();
    let body = match template {
        PromptTemplate::Name => name,
        PromptTemplate::Copula => format!("{name} {copula}"),
        PromptTemplate::CopulaA => format!("{name} {copula} a"),
        PromptTemplate::CopulaThe => format!("{name} {copula} the"),
    };
    Ok(match context {
        Some(c) => format!("{} {body}", c.context_clause()),
        None => body,
    })
}

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_NEW_TOKENS: u32 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n_samples: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub context_party: Option<Community>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            temperature: DEFAULT_TEMPERATURE,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            seed: None,
            context_party: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.n_samples == 0 {
            return Err(GenerationError::InvalidConfig("n_samples must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(GenerationError::InvalidConfig("temperature must be positive".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(GenerationError::InvalidConfig("max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    RemoteCompletion,
    Scripted,
}

/// `n` post-processed continuations of one prompt from one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub prompt: String,
    pub community: Option<Community>,
    pub backend_id: String,
    pub responses: Vec<String>,
    /// Responses that were empty after post-processing; kept in `responses`.
    pub empty_responses: usize,
    pub config: GenerationConfig,
    /// Unix seconds; absent for scripted backends, whose output is a pure
    /// function of their inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<u64>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GenerationError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("backend returned {} of {requested} responses after retries", obtained.len())]
    ShortBatch { requested: usize, obtained: Vec<String> },
    #[error("no fixture entry for community {community} matches prompt {prompt:?}")]
    FixtureMiss { community: String, prompt: String },
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
}

/// One request to a backend for `n` raw continuations.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRequest<'a> {
    pub prompt: &'a str,
    pub n: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub seed: Option<u64>,
    pub batch_index: usize,
    pub attempt: u32,
}

#[async_trait]
pub trait GeneratorBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    /// Model served by the backend; part of every cache key.
    fn model_id(&self) -> &str;
    fn capability(&self) -> Capability;
    /// Community the backend speaks for, if it is community-specific.
    fn community(&self) -> Option<Community>;
    /// Raw continuations; may return fewer than requested.
    async fn complete(&self, request: &BatchRequest<'_>) -> Result<Vec<String>, GenerationError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub batch_size: usize,
    pub parallelism: usize,
    /// Extra requests allowed per batch to top up a short answer.
    pub short_retries: u32,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { batch_size: 100, parallelism: 4, short_retries: 3 }
    }
}

/// Keeps the first line of a continuation, trimmed.
pub fn postprocess_response(raw: &str) -> String {
    raw.split(['\n', '\r']).next().unwrap_or("").trim().to_string()
}

fn strip_prompt<'a>(raw: &'a str, prompt: &str) -> &'a str {
    raw.strip_prefix(prompt).unwrap_or(raw)
}

/// Draws exactly `config.n_samples` responses for `prompt`, in batches.
///
/// Batches run concurrently up to `options.parallelism` and are reassembled
/// in batch order, so scripted backends yield identical sets on every call.
pub async fn generate(
    backend: &dyn GeneratorBackend,
    prompt: &str,
    config: &GenerationConfig,
    options: GenerateOptions,
) -> Result<ResponseSet, GenerationError> {
    config.validate()?;
    let batch_size = options.batch_size.max(1);
    let n = config.n_samples;
    let batches: Vec<(usize, usize)> = (0..n.div_ceil(batch_size))
        .map(|i| (i, batch_size.min(n - i * batch_size)))
        .collect();

    let results: Vec<(usize, Result<Vec<String>, GenerationError>)> = stream::iter(batches)
        .map(|(index, size)| async move {
            (index, run_batch(backend, prompt, config, options, index, size).await)
        })
        .buffer_unordered(options.parallelism.max(1))
        .collect()
        .await;

    let mut ordered = results;
    ordered.sort_by_key(|(i, _)| *i);
    let mut raw = Vec::with_capacity(n);
    let mut short = false;
    for (_, r) in ordered {
        match r {
            Ok(batch) => raw.extend(batch),
            Err(GenerationError::ShortBatch { obtained, .. }) => {
                raw.extend(obtained);
                short = true;
            }
            Err(e) => return Err(e),
        }
    }
    let responses: Vec<String> =
        raw.iter().map(|r| postprocess_response(strip_prompt(r, prompt))).collect();
    if short {
        return Err(GenerationError::ShortBatch { requested: n, obtained: responses });
    }
    let empty_responses = responses.iter().filter(|r| r.is_empty()).count();
    if empty_responses > 0 {
        log::debug!("{empty_responses} of {n} responses to {prompt:?} were empty");
    }
    let created_at = match backend.capability() {
        Capability::Scripted => None,
        Capability::RemoteCompletion => SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
    };
    Ok(ResponseSet {
        prompt: prompt.to_string(),
        community: backend.community(),
        backend_id: backend.backend_id().to_string(),
        responses,
        empty_responses,
        config: config.clone(),
        created_at,
    })
}

async fn run_batch(
    backend: &dyn GeneratorBackend,
    prompt: &str,
    config: &GenerationConfig,
    options: GenerateOptions,
    batch_index: usize,
    size: usize,
) -> Result<Vec<String>, GenerationError> {
    let mut got: Vec<String> = Vec::with_capacity(size);
    for attempt in 0..=options.short_retries {
        let request = BatchRequest {
            prompt,
            n: size - got.len(),
            temperature: config.temperature,
            max_new_tokens: config.max_new_tokens,
            seed: config
                .seed
                .map(|s| rng_for(s, &format!("batch/{batch_index}/{attempt}")).next_u64()),
            batch_index,
            attempt,
        };
        let mut more = backend.complete(&request).await?;
        more.truncate(request.n);
        got.extend(more);
        if got.len() == size {
            return Ok(got);
        }
        log::warn!(
            "batch {batch_index}: {} of {size} responses after attempt {}",
            got.len(),
            attempt + 1
        );
    }
    Err(GenerationError::ShortBatch { requested: size, obtained: got })
}

/// Drives `generate` over a set of prompts with stream-level concurrency.
pub async fn generate_many<'a>(
    backend: &'a dyn GeneratorBackend,
    prompts: impl IntoIterator<Item = &'a str>,
    config: &'a GenerationConfig,
    options: GenerateOptions,
) -> Result<Vec<ResponseSet>, GenerationError> {
    stream::iter(prompts)
        .map(|p| generate(backend, p, config, options))
        .buffered(options.parallelism.max(1))
        .try_collect()
        .await
}
