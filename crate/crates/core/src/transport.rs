//! JSON-over-HTTP calls with exponential backoff, shared by the remote
//! generation and classification clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total tries, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; the first retry waits base_delay
        self.base_delay.saturating_mul(1u32 << attempt.saturating_sub(2).min(16))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("{url}: gave up after {attempts} attempt(s): {message}")]
    Exhausted { url: String, attempts: u32, message: String },
    #[error("{url}: HTTP {status}: {body}")]
    Rejected { url: String, status: u16, body: String },
    #[error("{url}: malformed response: {message}")]
    Decode { url: String, message: String },
}

impl TransportError {
    pub fn attempts(&self) -> u32 {
        match self {
            TransportError::Exhausted { attempts, .. } => *attempts,
            _ => 1,
        }
    }
}

fn retryable(status: reqwest::StatusCode) -> bool {
    status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

pub async fn post_json<B, R>(
    client: &reqwest::Client,
    url: &str,
    body: &B,
    policy: RetryPolicy,
) -> Result<R, TransportError>
where
    B: Serialize + ?Sized,
    R: DeserializeOwned,
{
    let max = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=max {
        if attempt > 1 {
            tokio::time::sleep(policy.delay_before(attempt)).await;
        }
        match client.post(url).json(body).send().await {
            Ok(resp) if resp.status().is_success() => {
                let bytes = resp.bytes().await.map_err(|e| TransportError::Decode {
                    url: url.to_string(),
                    message: e.to_string(),
                })?;
                return serde_json::from_slice(&bytes).map_err(|e| TransportError::Decode {
                    url: url.to_string(),
                    message: e.to_string(),
                });
            }
            Ok(resp) if retryable(resp.status()) => {
                last = format!("HTTP {}", resp.status().as_u16());
                log::warn!("{url}: {last} (attempt {attempt}/{max})");
            }
            Ok(resp) => {
                let status = resp.status().as_u16();
                let body = resp.text().await.unwrap_or_default();
                return Err(TransportError::Rejected { url: url.to_string(), status, body });
            }
            Err(e) => {
                last = e.to_string();
                log::warn!("{url}: {last} (attempt {attempt}/{max})");
            }
        }
    }
    Err(TransportError::Exhausted { url: url.to_string(), attempts: max, message: last })
}

pub fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_from_base() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_before(2), Duration::from_secs(1));
        assert_eq!(p.delay_before(3), Duration::from_secs(2));
        assert_eq!(p.delay_before(5), Duration::from_secs(8));
    }

    #[test]
    fn endpoint_joins_cleanly() {
        assert_eq!(endpoint("http://h:1/", "/v1/generate"), "http://h:1/v1/generate");
        assert_eq!(endpoint("http://h:1", "v1/classify"), "http://h:1/v1/classify");
    }
}
