//! Community stance: mean response sentiment, pairwise prediction, person
//! rankings and first-word frequencies.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::community::{Community, CommunityLabel};
use crate::sentiment::SentimentLabel;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StanceError {
    #[error("no labels to aggregate for {0}")]
    EmptySet(String),
    #[error("records disagree on subject: {0:?} vs {1:?}")]
    SubjectMismatch(String, String),
    #[error("expected a {expected} record, got {got}")]
    CommunityMismatch { expected: Community, got: Community },
    #[error("duplicate record for {0}")]
    Duplicate(String),
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentCounts {
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

impl SentimentCounts {
    pub fn tally(labels: &[SentimentLabel]) -> Self {
        let mut c = Self::default();
        for l in labels {
            match l {
                SentimentLabel::Positive => c.positive += 1,
                SentimentLabel::Neutral => c.neutral += 1,
                SentimentLabel::Negative => c.negative += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.positive + self.neutral + self.negative
    }
}

/// Mean sentiment of one community toward one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceRecord {
    /// Catalog question id, or the free text that was probed.
    pub subject: String,
    pub community: Community,
    pub stance: f64,
    pub counts: SentimentCounts,
    pub n: usize,
}

pub fn aggregate_stance(
    subject: impl Into<String>,
    community: Community,
    labels: &[SentimentLabel],
) -> Result<StanceRecord, StanceError> {
    let subject = subject.into();
    if labels.is_empty() {
        return Err(StanceError::EmptySet(subject));
    }
    let counts = SentimentCounts::tally(labels);
    let n = counts.total();
    let stance = (counts.positive as f64 - counts.negative as f64) / n as f64;
    Ok(StanceRecord { subject, community, stance, counts, n })
}

/// What to predict when both communities score exactly the same.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    Favor(CommunityLabel),
}

impl Default for TiePolicy {
    /// The majority class of the survey task.
    fn default() -> Self {
        TiePolicy::Favor(CommunityLabel::D)
    }
}

/// Picks the community with the larger score; equal scores go to the policy
/// and report `tie = true`.
pub fn decide<T: PartialOrd>(dem: T, rep: T, policy: TiePolicy) -> (CommunityLabel, bool) {
    if rep > dem {
        (CommunityLabel::R, false)
    } else if dem > rep {
        (CommunityLabel::D, false)
    } else {
        let TiePolicy::Favor(label) = policy;
        (label, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StancePrediction {
    pub question_id: String,
    pub stance_d: f64,
    pub stance_r: f64,
    pub predicted: CommunityLabel,
    pub tie: bool,
}

pub fn predict_item(
    dem: &StanceRecord,
    rep: &StanceRecord,
    policy: TiePolicy,
) -> Result<StancePrediction, StanceError> {
    if dem.subject != rep.subject {
        return Err(StanceError::SubjectMismatch(dem.subject.clone(), rep.subject.clone()));
    }
    for (record, expected) in [(dem, Community::Democrat), (rep, Community::Republican)] {
        if record.community != expected {
            return Err(StanceError::CommunityMismatch { expected, got: record.community });
        }
    }
    let (predicted, tie) = decide(dem.stance, rep.stance, policy);
    Ok(StancePrediction {
        question_id: dem.subject.clone(),
        stance_d: dem.stance,
        stance_r: rep.stance,
        predicted,
        tie,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub subject: String,
    pub stance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub community: Community,
    pub entries: Vec<RankedEntry>,
}

/// Orders one community's records by descending stance; equal stances are
/// ordered by subject id.
pub fn rank_people(records: &[StanceRecord], community: Community) -> Result<Ranking, StanceError> {
    let mut seen = HashSet::new();
    for r in records {
        if r.community != community {
            return Err(StanceError::CommunityMismatch { expected: community, got: r.community });
        }
        if !seen.insert(r.subject.as_str()) {
            return Err(StanceError::Duplicate(r.subject.clone()));
        }
    }
    let mut entries: Vec<RankedEntry> =
        records.iter().map(|r| RankedEntry { subject: r.subject.clone(), stance: r.stance }).collect();
    entries.sort_by(|a, b| b.stance.total_cmp(&a.stance).then_with(|| a.subject.cmp(&b.subject)));
    Ok(Ranking { community, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordShare {
    pub word: String,
    pub percent: f64,
}

fn first_word(response: &str) -> Option<String> {
    let token = response.split_whitespace().next()?;
    let word = token.trim_matches(|c: char| c.is_ascii_punctuation() || c == '…' || c == '“' || c == '”').to_lowercase();
    (!word.is_empty()).then_some(word)
}

/// The `k` most frequent first words of the responses, as a percentage of
/// all responses. Equal counts are ordered alphabetically.
pub fn top_words(responses: &[String], k: usize) -> Result<Vec<WordShare>, StanceError> {
    if k == 0 {
        return Err(StanceError::InvalidK);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for word in responses.iter().filter_map(|r| first_word(r)) {
        *counts.entry(word).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total = responses.len() as f64;
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(word, c)| WordShare { word, percent: c as f64 / total * 100.0 })
        .collect())
}
