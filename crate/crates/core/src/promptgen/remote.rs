//! Client for a remote completion service speaking `POST /v1/generate`.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BatchRequest, Capability, GenerationError, GeneratorBackend};
use crate::community::Community;
use crate::transport::{endpoint, post_json, RetryPolicy};

#[derive(Debug, Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    n: usize,
    temperature: f64,
    max_new_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    text: String,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    client: reqwest::Client,
    url: String,
    model: String,
    community: Option<Community>,
    retry: RetryPolicy,
    id: String,
}

impl RemoteGenerator {
    pub fn new(base_url: &str, model: impl Into<String>, community: Option<Community>) -> Self {
        let model = model.into();
        let url = endpoint(base_url, "/v1/generate");
        let id = format!("remote:{url}");
        Self { client: reqwest::Client::new(), url, model, community, retry: RetryPolicy::default(), id }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

#[async_trait]
impl GeneratorBackend for RemoteGenerator {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn capability(&self) -> Capability {
        Capability::RemoteCompletion
    }

    fn community(&self) -> Option<Community> {
        self.community
    }

    async fn complete(&self, req: &BatchRequest<'_>) -> Result<Vec<String>, GenerationError> {
        // decoding parameters are always sent; server defaults are never relied on
        let body = GenerateRequest {
            model: &self.model,
            prompt: req.prompt,
            n: req.n,
            temperature: req.temperature,
            max_new_tokens: req.max_new_tokens,
            seed: req.seed,
        };
        let resp: GenerateResponse = post_json(&self.client, &self.url, &body, self.retry).await?;
        Ok(resp.choices.into_iter().map(|c| c.text).collect())
    }
}
