//! Orchestration: configured backends, the response cache, probes,
//! full-catalog evaluation, the job queue and the HTTP service.

pub mod cache;
pub mod config;
pub mod jobs;
pub mod probe;
pub mod service;

use std::path::PathBuf;
use std::sync::Arc;

use crate::community::{Community, PerCommunity};
use crate::promptgen::{
    Fixture, GenerateOptions, GenerationConfig, GenerationError, GeneratorBackend, PromptTemplate,
    RemoteGenerator, ScriptedBackend,
};
use crate::sentiment::{ClassifierBackend, LexiconClassifier, RemoteClassifier, SentimentError, ValenceLexicon};
use crate::stance::TiePolicy;
use crate::survey::{SurveyCatalog, SurveyError};

pub use cache::ResponseCache;
pub use config::{ConfigError, Settings};
pub use jobs::{JobQueue, JobRecord, JobState};
pub use probe::{probe, rank, run_eval, run_evals, ContextMode, EvalOptions, ProbeError, ProbeResult, ProbeSpec};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Fixture(#[from] GenerationError),
    #[error(transparent)]
    Lexicon(#[from] SentimentError),
}

/// Decoding defaults applied when a request leaves them out.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDefaults {
    pub template: PromptTemplate,
    pub n_samples: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub seed: u64,
}

impl Default for ProbeDefaults {
    fn default() -> Self {
        let g = GenerationConfig::default();
        Self {
            template: PromptTemplate::CopulaThe,
            n_samples: g.n_samples,
            temperature: g.temperature,
            max_new_tokens: g.max_new_tokens,
            seed: 0,
        }
    }
}

/// Everything a probe or evaluation needs; cheap to share behind an `Arc`.
pub struct Engine {
    pub catalog: Arc<SurveyCatalog>,
    pub generators: PerCommunity<Arc<dyn GeneratorBackend>>,
    pub classifier: Arc<dyn ClassifierBackend>,
    pub cache: Option<ResponseCache>,
    pub options: GenerateOptions,
    pub defaults: ProbeDefaults,
    pub tie_policy: TiePolicy,
    pub runs_dir: PathBuf,
}

impl Engine {
    /// Scripted generators over `fixture`, the packaged catalog and lexicon,
    /// no cache.
    pub fn scripted(fixture: Fixture) -> Self {
        let fixture = Arc::new(fixture);
        Self {
            catalog: Arc::new(SurveyCatalog::packaged()),
            generators: PerCommunity::new(
                Arc::new(ScriptedBackend::new(fixture.clone(), Community::Democrat)) as Arc<dyn GeneratorBackend>,
                Arc::new(ScriptedBackend::new(fixture, Community::Republican)) as Arc<dyn GeneratorBackend>,
            ),
            classifier: Arc::new(LexiconClassifier::new(ValenceLexicon::packaged())),
            cache: None,
            options: GenerateOptions::default(),
            defaults: ProbeDefaults::default(),
            tie_policy: TiePolicy::default(),
            runs_dir: PathBuf::from("runs"),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_runs_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.runs_dir = dir.into();
        self
    }

    pub fn from_settings(s: &Settings) -> Result<Self, EngineError> {
        use config::{ClassifierSettingsKind, GeneratorKind};
        s.validate()?;
        let catalog = match &s.paths.catalog {
            Some(p) => SurveyCatalog::load(p)?,
            None => SurveyCatalog::packaged(),
        };
        let missing = |key: &str| ConfigError::Invalid(format!("{key} must be set"));
        let generators: PerCommunity<Arc<dyn GeneratorBackend>> = match s.generator.kind {
            GeneratorKind::Scripted => {
                let path = s.generator.fixture.as_ref().ok_or_else(|| missing("generator.fixture (e.g. fixtures/demo.json)"))?;
                let fixture = Arc::new(Fixture::load(path)?);
                PerCommunity::new(
                    Arc::new(ScriptedBackend::new(fixture.clone(), Community::Democrat)),
                    Arc::new(ScriptedBackend::new(fixture, Community::Republican)),
                )
            }
            GeneratorKind::Remote => {
                let d = s.generator.democrat_url.as_ref().ok_or_else(|| missing("generator.democrat_url"))?;
                let r = s.generator.republican_url.as_ref().ok_or_else(|| missing("generator.republican_url"))?;
                PerCommunity::new(
                    Arc::new(RemoteGenerator::new(d, s.generator.democrat_model.clone(), Some(Community::Democrat))),
                    Arc::new(RemoteGenerator::new(
                        r,
                        s.generator.republican_model.clone(),
                        Some(Community::Republican),
                    )),
                )
            }
        };
        let classifier: Arc<dyn ClassifierBackend> = match s.classifier.kind {
            ClassifierSettingsKind::Lexicon => {
                let lexicon = match &s.classifier.lexicon {
                    Some(p) => ValenceLexicon::load(p, s.classifier.negators.as_deref())?,
                    None => ValenceLexicon::packaged(),
                };
                Arc::new(LexiconClassifier::new(lexicon))
            }
            ClassifierSettingsKind::Remote => {
                let url = s.classifier.url.as_ref().ok_or_else(|| missing("classifier.url"))?;
                Arc::new(RemoteClassifier::new(url))
            }
        };
        Ok(Self {
            catalog: Arc::new(catalog),
            generators,
            classifier,
            cache: s.paths.cache_dir.as_ref().map(ResponseCache::new),
            options: GenerateOptions {
                batch_size: s.generator.batch_size,
                parallelism: s.run.parallelism,
                ..GenerateOptions::default()
            },
            defaults: ProbeDefaults {
                template: s.run.template.parse().map_err(|e: crate::promptgen::ParseTemplateError| {
                    ConfigError::Invalid(e.to_string())
                })?,
                n_samples: s.run.n_samples,
                temperature: s.run.temperature,
                max_new_tokens: s.run.max_new_tokens,
                seed: s.run.seed,
            },
            tie_policy: TiePolicy::default(),
            runs_dir: s.paths.runs_dir.clone(),
        })
    }
}
