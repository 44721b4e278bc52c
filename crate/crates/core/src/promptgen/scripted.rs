//! Fixture-driven generator: a seeded, deterministic stand-in for a
//! community language model.

use std::path::Path;
use std::sync::Arc;

use async_trait::async_trait;
use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::{
    generate, BatchRequest, Capability, GenerateOptions, GenerationConfig, GenerationError,
    GeneratorBackend, ResponseSet,
};
use crate::community::Community;
use crate::rng::{rng_for, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedText {
    pub text: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub community: Community,
    pub prompt_prefix: String,
    pub templates: Vec<WeightedText>,
}

/// `{entries:[{community, prompt_prefix, templates:[{text, weight}]}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub entries: Vec<FixtureEntry>,
}

impl Fixture {
    pub fn from_json(json: &str) -> Result<Self, GenerationError> {
        let f: Fixture =
            serde_json::from_str(json).map_err(|e| GenerationError::InvalidFixture(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| GenerationError::InvalidFixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        for e in &self.entries {
            if e.templates.is_empty() {
                return Err(GenerationError::InvalidFixture(format!(
                    "entry {:?} has no templates",
                    e.prompt_prefix
                )));
            }
            if let Some(t) = e.templates.iter().find(|t| !(t.weight.is_finite() && t.weight > 0.0)) {
                return Err(GenerationError::InvalidFixture(format!(
                    "template {:?} has non-positive weight {}",
                    t.text, t.weight
                )));
            }
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_vec(self).expect("fixture serializes"))
    }

    /// Longest `prompt_prefix` of `community` that starts `prompt`.
    pub fn lookup(&self, community: Community, prompt: &str) -> Option<&FixtureEntry> {
        self.entries
            .iter()
            .filter(|e| e.community == community && prompt.starts_with(&e.prompt_prefix))
            .max_by_key(|e| e.prompt_prefix.len())
    }
}

/// Samples continuations from a fixture for one community.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    fixture: Arc<Fixture>,
    community: Community,
    id: String,
}

impl ScriptedBackend {
    pub fn new(fixture: Arc<Fixture>, community: Community) -> Self {
        let id = format!("scripted:{community}:{}", &fixture.digest()[..16]);
        Self { fixture, community, id }
    }
}

#[async_trait]
impl GeneratorBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn model_id(&self) -> &str {
        "fixture"
    }

    fn capability(&self) -> Capability {
        Capability::Scripted
    }

    fn community(&self) -> Option<Community> {
        Some(self.community)
    }

    async fn complete(&self, req: &BatchRequest<'_>) -> Result<Vec<String>, GenerationError> {
        let entry = self.fixture.lookup(self.community, req.prompt).ok_or_else(|| {
            GenerationError::FixtureMiss {
                community: self.community.to_string(),
                prompt: req.prompt.to_string(),
            }
        })?;
        let dist = WeightedIndex::new(entry.templates.iter().map(|t| t.weight))
            .map_err(|e| GenerationError::InvalidFixture(e.to_string()))?;
        let purpose = format!(
            "scripted/{}/{}/{}/{}",
            self.community, req.prompt, req.batch_index, req.attempt
        );
        let mut rng = rng_for(req.seed.unwrap_or(0), &purpose);
        Ok((0..req.n).map(|_| entry.templates[dist.sample(&mut rng)].text.clone()).collect())
    }
}

/// One-shot scripted generation with default batching.
pub async fn scripted_generate(
    fixture: Arc<Fixture>,
    community: Community,
    prompt: &str,
    config: &GenerationConfig,
) -> Result<ResponseSet, GenerationError> {
    let backend = ScriptedBackend::new(fixture, community);
    generate(&backend, prompt, config, GenerateOptions::default()).await
}
