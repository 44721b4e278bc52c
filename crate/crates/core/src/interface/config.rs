//! Settings file (TOML with sections) plus `COMMUNITYLM_*` environment
//! overrides, e.g. `COMMUNITYLM_RUN__SEED=7` overrides `[run] seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::promptgen::{DEFAULT_MAX_NEW_TOKENS, DEFAULT_SAMPLES, DEFAULT_TEMPERATURE};

pub const ENV_PREFIX: &str = "COMMUNITYLM";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Load(#[from] config::ConfigError),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSettings {
    pub kind: GeneratorKind,
    /// Fixture JSON for the scripted generator.
    pub fixture: Option<PathBuf>,
    pub democrat_url: Option<String>,
    pub republican_url: Option<String>,
    pub democrat_model: String,
    pub republican_model: String,
    pub batch_size: usize,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Scripted,
            fixture: None,
            democrat_url: None,
            republican_url: None,
            democrat_model: "democrat".into(),
            republican_model: "republican".into(),
            batch_size: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierSettingsKind {
    #[default]
    Lexicon,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ClassifierSettings {
    pub kind: ClassifierSettingsKind,
    /// Lexicon TSV; the packaged lexicon when unset.
    pub lexicon: Option<PathBuf>,
    pub negators: Option<PathBuf>,
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub template: String,
    pub n_samples: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub seed: u64,
    pub parallelism: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            template: "is-the".into(),
            n_samples: DEFAULT_SAMPLES,
            temperature: DEFAULT_TEMPERATURE,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            seed: 0,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSettings {
    /// Survey catalog TSV; the packaged catalog when unset.
    pub catalog: Option<PathBuf>,
    /// Response cache; caching is off when unset.
    pub cache_dir: Option<PathBuf>,
    pub runs_dir: PathBuf,
    pub corpus_dir: PathBuf,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self {
            catalog: None,
            cache_dir: Some(PathBuf::from(".communitylm/cache")),
            runs_dir: PathBuf::from("runs"),
            corpus_dir: PathBuf::from("corpora"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSettings {
    pub host: String,
    pub port: u16,
    /// Probes with more samples than this go through the job queue.
    pub sync_probe_limit: usize,
    pub workers: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080, sync_probe_limit: 200, workers: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Settings {
    pub generator: GeneratorSettings,
    pub classifier: ClassifierSettings,
    pub run: RunSettings,
    pub paths: PathSettings,
    pub service: ServiceSettings,
}

impl Settings {
    /// Defaults, then the file (if any), then the environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(file, None)
    }

    /// Like `load`, with an explicit environment map instead of the process
    /// environment.
    pub fn load_with_env(
        file: Option<&Path>,
        env: Option<std::collections::HashMap<String, String>>,
    ) -> Result<Self, ConfigError> {
        let mut builder = config::Config::builder();
        if let Some(path) = file {
            builder = builder.add_source(config::File::from(path).format(config::FileFormat::Toml));
        }
        let mut environment = config::Environment::with_prefix(ENV_PREFIX)
            .prefix_separator("_")
            .separator("__")
            .try_parsing(true);
        if let Some(map) = env {
            environment = environment.source(Some(map));
        }
        let settings: Settings = builder.add_source(environment).build()?.try_deserialize()?;
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.run.parallelism < 1 {
            return bad("run.parallelism must be at least 1");
        }
        if self.service.workers < 1 {
            return bad("service.workers must be at least 1");
        }
        if self.generator.batch_size < 1 {
            return bad("generator.batch_size must be at least 1");
        }
        self.run
            .template
            .parse::<crate::promptgen::PromptTemplate>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
