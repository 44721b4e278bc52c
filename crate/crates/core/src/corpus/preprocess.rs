//! Tweet normalization: mention masking, URL removal, terminal punctuation
//! splitting and the minimum-length filter.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Placeholder every user mention is rewritten to.
pub const USER_TOKEN: &str = "@USER";

/// Tweets with fewer tokens than this are dropped.
pub const MIN_TOKENS: usize = 10;

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)https?://|^[^\w]*www\.").unwrap());

const TERMINAL_PUNCT: &[char] = &['.', ',', '!', '?', '…'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Empty,
    TooShort,
}

pub fn is_url_token(token: &str) -> bool {
    URL.is_match(token)
}

/// True when every `@word` occurrence in `token` is the `@USER` placeholder.
pub fn mentions_masked(token: &str) -> bool {
    MENTION.find_iter(token).all(|m| m.as_str() == USER_TOKEN)
}

/// Normalizes `raw` into tokens without applying the length filter.
pub fn normalize_tokens(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for token in raw.split_whitespace() {
        if is_url_token(token) {
            continue;
        }
        let masked = MENTION.replace_all(token, USER_TOKEN);
        split_terminal(&masked, &mut out);
    }
    out
}

fn split_terminal(token: &str, out: &mut Vec<String>) {
    let body = token.trim_end_matches(TERMINAL_PUNCT);
    if body.is_empty() || body.len() == token.len() {
        out.push(token.to_string());
    } else {
        out.push(body.to_string());
        out.push(token[body.len()..].to_string());
    }
}

/// Normalizes a raw tweet and applies the length filter.
///
/// Mentions become `@USER`, URL tokens are dropped, a trailing run of
/// sentence punctuation is split into its own token, and case is preserved.
pub fn preprocess_tweet(raw: &str) -> Result<Vec<String>, RejectReason> {
    let tokens = normalize_tokens(raw);
    if tokens.is_empty() {
        Err(RejectReason::Empty)
    } else if tokens.len() < MIN_TOKENS {
        Err(RejectReason::TooShort)
    } else {
        Ok(tokens)
    }
}
