//! Side-by-side community probes, full-catalog evaluation runs and person
//! rankings, all served through the response cache when one is configured.

use std::fmt;
use std::str::FromStr;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::cache::{generation_key, label_key, CacheError};
use super::Engine;
use crate::community::{Community, CommunityLabel};
use crate::eval::{
    aggregate_runs, evaluate_run, write_json_atomic, write_report, EvalError, EvalReport, MethodDescriptor,
    Prediction, RunAggregate,
};
use crate::promptgen::{generate, render_prompt, GenerationConfig, GenerationError, PromptSubject, PromptTemplate, ResponseSet};
use crate::rng::sha256_hex;
use crate::sentiment::{classify, SentimentError, SentimentLabel};
use crate::stance::{
    aggregate_stance, decide, rank_people, top_words, Ranking, SentimentCounts, StanceError, StanceRecord, WordShare,
};
use crate::survey::{GrammaticalNumber, SurveyItem};

/// Responses shown per community in a probe result.
pub const SAMPLE_SHOWN: usize = 20;
pub const TOP_WORDS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("{community} generation failed: {source}")]
    Generation { community: Community, source: GenerationError },
    #[error("{community} classification failed: {source}")]
    Classification { community: Community, source: SentimentError },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Stance(#[from] StanceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("run {run_id}: {failed} item(s) failed, first: {first}")]
    RunFailed { run_id: String, failed: usize, first: String },
}

impl ProbeError {
    pub fn is_validation(&self) -> bool {
        matches!(self, ProbeError::Validation(_))
    }
}

/// Which partisan context clause, if any, prefixes the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    #[default]
    None,
    /// The same clause for both communities.
    Both(Community),
    /// Each community gets its own clause.
    Own,
}

impl ContextMode {
    fn clause_for(self, community: Community) -> Option<Community> {
        match self {
            ContextMode::None => None,
            ContextMode::Both(c) => Some(c),
            ContextMode::Own => Some(community),
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextMode::None => f.write_str("none"),
            ContextMode::Both(c) => write!(f, "{}", c.label().to_string().to_lowercase()),
            ContextMode::Own => f.write_str("own"),
        }
    }
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "none" => Ok(ContextMode::None),
            "own" | "paired" => Ok(ContextMode::Own),
            other => other
                .parse::<Community>()
                .map(ContextMode::Both)
                .map_err(|_| format!("unknown context party {s:?} (expected d|r|own|none)")),
        }
    }
}

/// A fully resolved probe request.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    /// Catalog question id, display or prompt name, or free text.
    pub subject: String,
    /// Required for free text.
    pub number: Option<GrammaticalNumber>,
    pub template: PromptTemplate,
    pub n: usize,
    pub seed: u64,
    pub context: ContextMode,
}

impl ProbeSpec {
    pub fn new(subject: impl Into<String>, template: PromptTemplate, n: usize, seed: u64) -> Self {
        Self { subject: subject.into(), number: None, template, n, seed, context: ContextMode::None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityPanel {
    pub community: Community,
    pub prompt: String,
    /// The first responses of the persisted set.
    pub sample: Vec<String>,
    pub counts: SentimentCounts,
    pub stance: f64,
    pub n: usize,
    pub empty_responses: usize,
    pub top_words: Vec<WordShare>,
    /// Both the responses and their labels came from the cache.
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub subject: String,
    pub question_id: Option<String>,
    pub template: PromptTemplate,
    /// The prompt without any context clause.
    pub prompt: String,
    pub n: usize,
    pub seed: u64,
    pub context: ContextMode,
    pub democrat: CommunityPanel,
    pub republican: CommunityPanel,
    pub predicted: CommunityLabel,
    pub tie: bool,
}

impl ProbeResult {
    pub fn panel(&self, c: Community) -> &CommunityPanel {
        match c {
            Community::Democrat => &self.democrat,
            Community::Republican => &self.republican,
        }
    }
}

/// One community's responses and labels for one prompt.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub responses: ResponseSet,
    pub labels: Vec<SentimentLabel>,
    pub cache_hit: bool,
}

fn generation_config(engine: &Engine, n: usize, seed: u64, context: Option<Community>) -> GenerationConfig {
    GenerationConfig {
        n_samples: n,
        temperature: engine.defaults.temperature,
        max_new_tokens: engine.defaults.max_new_tokens,
        seed: Some(seed),
        context_party: context,
    }
}

/// Generates (or loads) and classifies one community's responses.
pub async fn community_outcome(
    engine: &Engine,
    community: Community,
    prompt: &str,
    config: &GenerationConfig,
) -> Result<Outcome, ProbeError> {
    let backend = engine.generators.get(community).as_ref();
    let key = generation_key(backend.backend_id(), backend.model_id(), prompt, config);
    let cache = engine.cache.as_ref();
    let (responses, responses_hit) = match cache.map(|c| c.get_responses(&key)).transpose()?.flatten() {
        Some(set) => (set, true),
        None => {
            let set = generate(backend, prompt, config, engine.options)
                .await
                .map_err(|source| ProbeError::Generation { community, source })?;
            if let Some(c) = cache {
                c.put_responses(&key, &set)?;
                // a concurrent writer may have won; serve what is persisted
                (c.get_responses(&key)?.unwrap_or(set), false)
            } else {
                (set, false)
            }
        }
    };
    let lkey = label_key(&key, engine.classifier.backend_id());
    let (labels, labels_hit) = match cache.map(|c| c.get_labels(&lkey)).transpose()?.flatten() {
        Some(l) if l.len() == responses.responses.len() => (l, true),
        _ => {
            let l = classify(engine.classifier.as_ref(), &responses.responses)
                .await
                .map_err(|source| ProbeError::Classification { community, source })?;
            if let Some(c) = cache {
                c.put_labels(&lkey, &l)?;
            }
            (l, false)
        }
    };
    Ok(Outcome { responses, labels, cache_hit: responses_hit && labels_hit })
}

enum Resolved<'a> {
    Item(&'a SurveyItem),
    Free(String, GrammaticalNumber),
}

fn resolve<'a>(engine: &'a Engine, spec: &ProbeSpec) -> Result<Resolved<'a>, ProbeError> {
    let subject = spec.subject.trim();
    if subject.is_empty() {
        return Err(ProbeError::Validation("subject is empty".into()));
    }
    if spec.n == 0 {
        return Err(ProbeError::Validation("n must be at least 1".into()));
    }
    if let Ok(item) = engine.catalog.item_by_subject(subject) {
        return Ok(Resolved::Item(item));
    }
    match spec.number {
        Some(number) => Ok(Resolved::Free(subject.to_string(), number)),
        None => Err(ProbeError::Validation(format!(
            "{subject:?} is not a catalog item; free text needs number = singular|plural"
        ))),
    }
}

fn panel(community: Community, prompt: String, out: &Outcome, record: &StanceRecord) -> Result<CommunityPanel, ProbeError> {
    Ok(CommunityPanel {
        community,
        prompt,
        sample: out.responses.responses.iter().take(SAMPLE_SHOWN).cloned().collect(),
        counts: record.counts,
        stance: record.stance,
        n: record.n,
        empty_responses: out.responses.empty_responses,
        top_words: top_words(&out.responses.responses, TOP_WORDS)?,
        cache_hit: out.cache_hit,
    })
}

fn render(subject: PromptSubject<'_>, template: PromptTemplate, context: Option<Community>) -> Result<String, ProbeError> {
    render_prompt(subject, template, context).map_err(|e| ProbeError::Validation(e.to_string()))
}

async fn probe_side(
    engine: &Engine,
    spec: &ProbeSpec,
    subject: PromptSubject<'_>,
    record_subject: &str,
    community: Community,
) -> Result<(StanceRecord, CommunityPanel), ProbeError> {
    let context = spec.context.clause_for(community);
    let prompt = render(subject, spec.template, context)?;
    let config = generation_config(engine, spec.n, spec.seed, context);
    let out = community_outcome(engine, community, &prompt, &config).await?;
    let record = aggregate_stance(record_subject, community, &out.labels)?;
    let panel = panel(community, prompt, &out, &record)?;
    Ok((record, panel))
}

/// Checks that `spec` names a catalog item, or is free text with a
/// grammatical number, without generating anything.
pub fn validate_spec(engine: &Engine, spec: &ProbeSpec) -> Result<(), ProbeError> {
    resolve(engine, spec).map(|_| ())
}

/// Probes both communities with the same subject and template.
pub async fn probe(engine: &Engine, spec: &ProbeSpec) -> Result<ProbeResult, ProbeError> {
    let resolved = resolve(engine, spec)?;
    let (subject, question_id) = match &resolved {
        Resolved::Item(item) => (PromptSubject::Item(item), Some(item.question_id.clone())),
        Resolved::Free(text, number) => (PromptSubject::FreeText { text, number: *number }, None),
    };
    let base_prompt = render(subject, spec.template, None)?;
    let record_subject = question_id.clone().unwrap_or_else(|| base_prompt.clone());

    let (dem, rep) = futures::join!(
        probe_side(engine, spec, subject, &record_subject, Community::Democrat),
        probe_side(engine, spec, subject, &record_subject, Community::Republican)
    );
    let ((dem_record, democrat), (rep_record, republican)) = (dem?, rep?);
    let (predicted, tie) = decide(dem_record.stance, rep_record.stance, engine.tie_policy);
    Ok(ProbeResult {
        subject: spec.subject.trim().to_string(),
        question_id,
        template: spec.template,
        prompt: base_prompt,
        n: spec.n,
        seed: spec.seed,
        context: spec.context,
        democrat,
        republican,
        predicted,
        tie,
    })
}

/// Settings for one or more evaluation runs over the whole catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub template: PromptTemplate,
    pub n: usize,
    /// Run `i` uses `seed + i`.
    pub seed: u64,
    pub runs: usize,
}

impl EvalOptions {
    pub fn from_defaults(engine: &Engine) -> Self {
        Self { template: engine.defaults.template, n: engine.defaults.n_samples, seed: engine.defaults.seed, runs: 1 }
    }
}

pub fn method_descriptor(engine: &Engine, template: PromptTemplate) -> MethodDescriptor {
    let d = &engine.generators.democrat;
    let r = &engine.generators.republican;
    let model = if d.model_id() == r.model_id() {
        d.model_id().to_string()
    } else {
        format!("{}/{}", d.model_id(), r.model_id())
    };
    MethodDescriptor {
        model,
        template: Some(template.pattern().to_string()),
        backend: format!("{}+{}|{}", d.backend_id(), r.backend_id(), engine.classifier.backend_id()),
    }
}

/// Deterministic id for one run: same method, decoding settings and seed
/// give the same id.
pub fn run_id(engine: &Engine, template: PromptTemplate, n: usize, seed: u64) -> String {
    let method = method_descriptor(engine, template);
    let digest = sha256_hex(format!(
        "{}|{n}|{seed}|{}|{}",
        method.key(),
        engine.defaults.temperature.to_bits(),
        engine.defaults.max_new_tokens
    ));
    format!("{}-n{n}-s{seed}-{}", template.as_str(), &digest[..10])
}

async fn probe_item(engine: &Engine, spec: &ProbeSpec) -> (String, Result<ProbeResult, ProbeError>) {
    (spec.subject.clone(), probe(engine, spec).await)
}

#[derive(Serialize)]
struct PartialRun<'a> {
    run_id: &'a str,
    completed: &'a [Prediction],
    failures: Vec<(String, String)>,
}

/// Probes every catalog item, scores the predictions and persists the
/// report under `runs_dir/<run_id>/report.json`. If any item fails, what
/// was completed is kept in `partial.json` and the run errors.
pub async fn run_eval(engine: &Engine, template: PromptTemplate, n: usize, seed: u64) -> Result<EvalReport, ProbeError> {
    let id = run_id(engine, template, n, seed);
    log::info!("eval run {id}: {} items, n={n}", engine.catalog.items().len());
    let items: Vec<&SurveyItem> = engine.catalog.items().iter().collect();
    let specs: Vec<ProbeSpec> =
        items.iter().map(|item| ProbeSpec::new(item.question_id.clone(), template, n, seed)).collect();
    let futs: Vec<_> = specs.iter().map(|spec| probe_item(engine, spec)).collect();
    let results: Vec<(String, Result<ProbeResult, ProbeError>)> = stream::iter(futs)
        .buffered(engine.options.parallelism.max(1))
        .collect()
        .await;

    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    for (qid, r) in results {
        match r {
            Ok(p) => predictions.push(Prediction {
                question_id: qid,
                predicted: Some(p.predicted),
                tie: p.tie,
                stance_d: Some(p.democrat.stance),
                stance_r: Some(p.republican.stance),
            }),
            Err(e) => failures.push((qid, e.to_string())),
        }
    }
    if !failures.is_empty() {
        let path = engine.runs_dir.join(&id).join("partial.json");
        let first = format!("{}: {}", failures[0].0, failures[0].1);
        let failed = failures.len();
        write_json_atomic(&path, &PartialRun { run_id: &id, completed: &predictions, failures })?;
        return Err(ProbeError::RunFailed { run_id: id, failed, first });
    }
    let report = evaluate_run(id, method_descriptor(engine, template), &predictions, &engine.catalog)?;
    write_report(&engine.runs_dir, &report)?;
    Ok(report)
}

/// `options.runs` evaluation runs with consecutive seeds, plus their
/// aggregate.
pub async fn run_evals(engine: &Engine, options: &EvalOptions) -> Result<(Vec<EvalReport>, RunAggregate), ProbeError> {
    if options.runs == 0 {
        return Err(ProbeError::Validation("runs must be at least 1".into()));
    }
    if options.n == 0 {
        return Err(ProbeError::Validation("n must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(options.runs);
    for i in 0..options.runs as u64 {
        reports.push(run_eval(engine, options.template, options.n, options.seed + i).await?);
    }
    let aggregate = aggregate_runs(&reports)?;
    Ok((reports, aggregate))
}

/// One community's ranking of the catalog's persons.
pub async fn rank(
    engine: &Engine,
    community: Community,
    template: PromptTemplate,
    n: usize,
    seed: u64,
) -> Result<Ranking, ProbeError> {
    let persons: Vec<&SurveyItem> = engine.catalog.persons().collect();
    let config = generation_config(engine, n, seed, None);
    let futs: Vec<_> = persons.into_iter().map(|item| person_record(engine, community, item, template, &config)).collect();
    let records: Vec<Result<StanceRecord, ProbeError>> = stream::iter(futs)
        .buffered(engine.options.parallelism.max(1))
        .collect()
        .await;
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(rank_people(&records, community)?)
}

async fn person_record(
    engine: &Engine,
    community: Community,
    item: &SurveyItem,
    template: PromptTemplate,
    config: &GenerationConfig,
) -> Result<StanceRecord, ProbeError> {
    let prompt = render(PromptSubject::Item(item), template, None)?;
    let out = community_outcome(engine, community, &prompt, config).await?;
    Ok(aggregate_stance(item.question_id.clone(), community, &out.labels)?)
}
