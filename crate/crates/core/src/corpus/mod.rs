//! Balanced per-community tweet corpora.
//!
//! Users are labeled from the politicians they follow, their tweets are
//! normalized and length-filtered, and the two communities are finally
//! subsampled to the same size.

mod party;
mod preprocess;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use party::{
    assign_party, PoliticianList, UserFollowRecord, DEFAULT_DEM_MIN, DEFAULT_REP_MIN,
};
pub use preprocess::{
    is_url_token, mentions_masked, normalize_tokens, preprocess_tweet, RejectReason, MIN_TOKENS,
    USER_TOKEN,
};

use crate::community::{Community, PartyLabel};
use crate::rng::rng_for;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("bad record: {0}")]
    Record(String),
    #[error("invalid tweet: {0}")]
    InvalidTweet(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

/// A normalized tweet that passed the length filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    pub user_id: String,
    tokens: Vec<String>,
    /// Text as authored; keyword baselines match against this.
    raw: String,
    pub timestamp: Option<String>,
}

impl Tweet {
    pub fn from_raw(
        user_id: impl Into<String>,
        raw: impl Into<String>,
        timestamp: Option<String>,
    ) -> Result<Self, RejectReason> {
        let raw = raw.into();
        let tokens = preprocess_tweet(&raw)?;
        Ok(Self { user_id: user_id.into(), tokens, raw, timestamp })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    fn sort_key(&self) -> (&str, &str, [u8; 32]) {
        (
            &self.user_id,
            self.timestamp.as_deref().unwrap_or(""),
            Sha256::digest(self.raw.as_bytes()).into(),
        )
    }
}

/// On-disk line format of a corpus file.
#[derive(Debug, Serialize, Deserialize)]
struct TweetRecord {
    user_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<String>,
}

impl From<&Tweet> for TweetRecord {
    fn from(t: &Tweet) -> Self {
        TweetRecord {
            user_id: t.user_id.clone(),
            text: t.text(),
            timestamp: t.timestamp.clone(),
            raw: Some(t.raw.clone()),
        }
    }
}

impl TryFrom<TweetRecord> for Tweet {
    type Error = CorpusError;

    fn try_from(rec: TweetRecord) -> Result<Self, CorpusError> {
        if rec.user_id.is_empty() {
            return Err(CorpusError::InvalidTweet("empty user_id".into()));
        }
        let tokens: Vec<String> = rec.text.split_whitespace().map(str::to_string).collect();
        if tokens.len() < MIN_TOKENS {
            return Err(CorpusError::InvalidTweet(format!("only {} tokens", tokens.len())));
        }
        if let Some(t) = tokens.iter().find(|t| is_url_token(t) || !mentions_masked(t)) {
            return Err(CorpusError::InvalidTweet(format!("unnormalized token {t:?}")));
        }
        Ok(Tweet {
            user_id: rec.user_id,
            raw: rec.raw.unwrap_or(rec.text),
            tokens,
            timestamp: rec.timestamp,
        })
    }
}

/// All tweets of one community, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityCorpus {
    pub community: Community,
    tweets: Vec<Tweet>,
    source_digest: String,
}

impl CommunityCorpus {
    pub fn new(community: Community, mut tweets: Vec<Tweet>) -> Self {
        tweets.par_sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Self::from_sorted(community, tweets)
    }

    fn from_sorted(community: Community, tweets: Vec<Tweet>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(community.as_str().as_bytes());
        hasher.update(b"\n");
        for t in &tweets {
            let line = serde_json::to_string(&TweetRecord::from(t)).expect("record serializes");
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        let source_digest = hex::encode(hasher.finalize());
        Self { community, tweets, source_digest }
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    /// Writes `<dir>/<community>.jsonl`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf, CorpusError> {
        std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        let path = corpus_path(dir, self.community);
        let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CorpusError::io(dir, e))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            for t in &self.tweets {
                serde_json::to_writer(&mut w, &TweetRecord::from(t))
                    .map_err(|e| CorpusError::Record(e.to_string()))?;
                w.write_all(b"\n").map_err(|e| CorpusError::io(&path, e))?;
            }
            w.flush().map_err(|e| CorpusError::io(&path, e))?;
        }
        tmp.persist(&path).map_err(|e| CorpusError::io(&path, e.error))?;
        Ok(path)
    }

    pub fn read_from_dir(dir: &Path, community: Community) -> Result<Self, CorpusError> {
        Self::read_file(&corpus_path(dir, community), community)
    }

    pub fn read_file(path: &Path, community: Community) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let mut tweets = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CorpusError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TweetRecord = serde_json::from_str(&line).map_err(|e| {
                CorpusError::Record(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            tweets.push(Tweet::try_from(rec)?);
        }
        Ok(Self::new(community, tweets))
    }
}

pub fn corpus_path(dir: &Path, community: Community) -> PathBuf {
    dir.join(format!("{community}.jsonl"))
}

/// One raw tweet line: `{user_id, text, timestamp?}`.
#[derive(Debug, Clone, Deserialize)]
pub struct RawTweet {
    pub user_id: String,
    pub text: String,
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityCounts {
    pub accepted: u64,
    pub rejected_too_short: u64,
    pub rejected_empty: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub democrat: CommunityCounts,
    pub republican: CommunityCounts,
    pub skipped_unlabeled: u64,
    pub unreadable: u64,
}

impl BuildStats {
    fn counts_mut(&mut self, c: Community) -> &mut CommunityCounts {
        match c {
            Community::Democrat => &mut self.democrat,
            Community::Republican => &mut self.republican,
        }
    }

    fn merge(mut self, other: BuildStats) -> BuildStats {
        for c in Community::BOTH {
            let o = other.counts(c).clone();
            let s = self.counts_mut(c);
            s.accepted += o.accepted;
            s.rejected_too_short += o.rejected_too_short;
            s.rejected_empty += o.rejected_empty;
        }
        self.skipped_unlabeled += other.skipped_unlabeled;
        self.unreadable += other.unreadable;
        self
    }

    pub fn counts(&self, c: Community) -> &CommunityCounts {
        match c {
            Community::Democrat => &self.democrat,
            Community::Republican => &self.republican,
        }
    }
}

pub struct BuiltCorpora {
    pub democrat: CommunityCorpus,
    pub republican: CommunityCorpus,
    pub stats: BuildStats,
}

#[derive(Default)]
struct Partial {
    dem: Vec<Tweet>,
    rep: Vec<Tweet>,
    stats: BuildStats,
}

impl Partial {
    fn add(&mut self, raw: RawTweet, labels: &HashMap<String, PartyLabel>) {
        let Some(community) = labels.get(&raw.user_id).and_then(|l| l.community()) else {
            self.stats.skipped_unlabeled += 1;
            return;
        };
        let counts = self.stats.counts_mut(community);
        match Tweet::from_raw(raw.user_id, raw.text, raw.timestamp) {
            Ok(t) => {
                counts.accepted += 1;
                match community {
                    Community::Democrat => self.dem.push(t),
                    Community::Republican => self.rep.push(t),
                }
            }
            Err(RejectReason::TooShort) => counts.rejected_too_short += 1,
            Err(RejectReason::Empty) => counts.rejected_empty += 1,
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.dem.extend(other.dem);
        self.rep.extend(other.rep);
        self.stats = self.stats.merge(other.stats);
        self
    }
}

const CHUNK_LINES: usize = 16_384;

/// Streams raw tweet lines, routing each accepted tweet to its author's
/// community. Unparseable lines are logged and counted.
pub fn build_corpora(
    input: impl BufRead,
    labels: &HashMap<String, PartyLabel>,
) -> Result<BuiltCorpora, CorpusError> {
    let mut acc = Partial::default();
    let mut chunk = Vec::with_capacity(CHUNK_LINES);
    let mut lines = input.lines();
    loop {
        chunk.clear();
        for line in lines.by_ref().take(CHUNK_LINES) {
            chunk.push(line.map_err(|e| CorpusError::io(Path::new("<tweets>"), e))?);
        }
        if chunk.is_empty() {
            break;
        }
        let part = chunk
            .par_iter()
            .fold(Partial::default, |mut p, line| {
                if line.trim().is_empty() {
                    return p;
                }
                match serde_json::from_str::<RawTweet>(line) {
                    Ok(raw) => p.add(raw, labels),
                    Err(e) => {
                        log::warn!("skipping unreadable tweet record: {e}");
                        p.stats.unreadable += 1;
                    }
                }
                p
            })
            .reduce(Partial::default, Partial::merge);
        acc = acc.merge(part);
    }
    Ok(BuiltCorpora {
        democrat: CommunityCorpus::new(Community::Democrat, acc.dem),
        republican: CommunityCorpus::new(Community::Republican, acc.rep),
        stats: acc.stats,
    })
}

/// Labels every user in a follow-record stream. Bad lines are logged and skipped.
pub fn label_users(
    follows: impl BufRead,
    list: &PoliticianList,
    dem_min: usize,
    rep_min: usize,
) -> Result<HashMap<String, PartyLabel>, CorpusError> {
    let mut labels = HashMap::new();
    for (i, line) in follows.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(Path::new("<follows>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        match UserFollowRecord::from_json_line(&line) {
            Ok(rec) => {
                let label = assign_party(&rec, list, dem_min, rep_min)?;
                labels.insert(rec.user_id, label);
            }
            Err(e) => log::warn!("follow record {}: {e}", i + 1),
        }
    }
    Ok(labels)
}

/// Subsamples the larger corpus, without replacement, down to the size of
/// the smaller one. The smaller corpus is returned unchanged.
pub fn balance_corpora(
    a: CommunityCorpus,
    b: CommunityCorpus,
    seed: u64,
) -> (CommunityCorpus, CommunityCorpus) {
    let target = a.len().min(b.len());
    let shrink = |c: CommunityCorpus| -> CommunityCorpus {
        if c.len() == target {
            return c;
        }
        let mut rng = rng_for(seed, &format!("balance/{}", c.community));
        let mut picked = index::sample(&mut rng, c.len(), target).into_vec();
        picked.sort_unstable();
        let mut keep = vec![false; c.len()];
        for i in picked {
            keep[i] = true;
        }
        let community = c.community;
        let tweets = c.tweets.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect();
        CommunityCorpus::from_sorted(community, tweets)
    };
    (shrink(a), shrink(b))
}
