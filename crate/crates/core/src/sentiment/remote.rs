//! Client for a remote three-way classifier speaking `POST /v1/classify`.

use async_trait::async_trait;
use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use super::{ClassifierBackend, ClassifierKind, SentimentError, SentimentLabel};
use crate::transport::{endpoint, post_json, RetryPolicy};

pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct ClassifyResponse {
    labels: Vec<SentimentLabel>,
}

#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    client: reqwest::Client,
    url: String,
    id: String,
    pub batch_size: usize,
    pub parallelism: usize,
    pub retry: RetryPolicy,
}

impl RemoteClassifier {
    pub fn new(base_url: &str) -> Self {
        let url = endpoint(base_url, "/v1/classify");
        Self {
            client: reqwest::Client::new(),
            id: format!("remote:{url}"),
            url,
            batch_size: DEFAULT_BATCH_SIZE,
            parallelism: 4,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    async fn classify_batch(&self, texts: &[String]) -> Result<Vec<SentimentLabel>, SentimentError> {
        let resp: ClassifyResponse =
            post_json(&self.client, &self.url, &ClassifyRequest { texts }, self.retry).await?;
        if resp.labels.len() != texts.len() {
            return Err(SentimentError::Shape { expected: texts.len(), got: resp.labels.len() });
        }
        Ok(resp.labels)
    }
}

#[async_trait]
impl ClassifierBackend for RemoteClassifier {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Remote
    }

    async fn classify_texts(&self, texts: &[String]) -> Result<Vec<SentimentLabel>, SentimentError> {
        let futs: Vec<_> = texts.chunks(self.batch_size.max(1)).map(|chunk| self.classify_batch(chunk)).collect();
        let batches: Vec<Vec<SentimentLabel>> = stream::iter(futs)
            .buffered(self.parallelism.max(1))
            .try_collect()
            .await?;
        Ok(batches.into_iter().flatten().collect())
    }
}
