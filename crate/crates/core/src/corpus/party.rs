//! Partisan assignment from followed politician accounts.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use serde::Deserialize;

use super::CorpusError;
use crate::community::{Community, PartyLabel};

pub const DEFAULT_DEM_MIN: usize = 6;
pub const DEFAULT_REP_MIN: usize = 2;

fn fold_handle(handle: &str) -> String {
    handle.trim().trim_start_matches('@').to_lowercase()
}

/// Politician accounts and their party, keyed by case-folded handle.
#[derive(Debug, Clone)]
pub struct PoliticianList {
    parties: HashMap<String, Community>,
}

impl PoliticianList {
    pub fn new<I, S>(entries: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, Community)>,
        S: AsRef<str>,
    {
        let mut parties = HashMap::new();
        for (handle, party) in entries {
            let key = fold_handle(handle.as_ref());
            if key.is_empty() {
                return Err(CorpusError::Config("empty politician handle".into()));
            }
            if parties.insert(key.clone(), party).is_some() {
                return Err(CorpusError::Config(format!("duplicate politician handle {key:?}")));
            }
        }
        if parties.is_empty() {
            return Err(CorpusError::Config("politician list is empty".into()));
        }
        let list = Self { parties };
        for c in Community::BOTH {
            if list.count(c) == 0 {
                return Err(CorpusError::Config(format!("politician list has no {c} handles")));
            }
        }
        Ok(list)
    }

    /// Reads a CSV with header `handle,party`.
    pub fn from_csv(reader: impl Read) -> Result<Self, CorpusError> {
        #[derive(Deserialize)]
        struct Row {
            handle: String,
            party: String,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| CorpusError::Config(format!("politician row {}: {e}", i + 2)))?;
            let party = row
                .party
                .parse::<Community>()
                .map_err(|e| CorpusError::Config(format!("politician row {}: {e}", i + 2)))?;
            entries.push((row.handle, party));
        }
        let list = Self::new(entries)?;
        log::info!(
            "loaded {} Democratic and {} Republican politician handles",
            list.count(Community::Democrat),
            list.count(Community::Republican)
        );
        Ok(list)
    }

    pub fn count(&self, party: Community) -> usize {
        self.parties.values().filter(|p| **p == party).count()
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn party_of(&self, handle: &str) -> Option<Community> {
        self.parties.get(&fold_handle(handle)).copied()
    }
}

/// A user and the accounts they follow.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct UserFollowRecord {
    pub user_id: String,
    #[serde(rename = "follows")]
    followed: Vec<String>,
}

impl UserFollowRecord {
    pub fn new<I, S>(user_id: impl Into<String>, follows: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let user_id = user_id.into();
        if user_id.is_empty() {
            return Err(CorpusError::Record("empty user_id".into()));
        }
        let mut seen = HashSet::new();
        let followed = follows
            .into_iter()
            .map(Into::into)
            .filter(|h: &String| seen.insert(fold_handle(h)))
            .collect();
        Ok(Self { user_id, followed })
    }

    /// Parses one `{user_id, follows:[...]}` line.
    pub fn from_json_line(line: &str) -> Result<Self, CorpusError> {
        let rec: Self =
            serde_json::from_str(line).map_err(|e| CorpusError::Record(e.to_string()))?;
        Self::new(rec.user_id, rec.followed)
    }

    pub fn followed_handles(&self) -> &[String] {
        &self.followed
    }
}

/// Labels a user Democrat/Republican only when they follow enough politicians
/// of one party and none of the other.
pub fn assign_party(
    record: &UserFollowRecord,
    list: &PoliticianList,
    dem_min: usize,
    rep_min: usize,
) -> Result<PartyLabel, CorpusError> {
    if dem_min == 0 || rep_min == 0 {
        return Err(CorpusError::Config("party thresholds must be at least 1".into()));
    }
    if list.is_empty() {
        return Err(CorpusError::Config("politician list is empty".into()));
    }
    let (mut dem, mut rep) = (0usize, 0usize);
    for handle in &record.followed {
        match list.party_of(handle) {
            Some(Community::Democrat) => dem += 1,
            Some(Community::Republican) => rep += 1,
            None => {}
        }
    }
    Ok(if dem >= dem_min && rep == 0 {
        PartyLabel::Democrat
    } else if rep >= rep_min && dem == 0 {
        PartyLabel::Republican
    } else {
        PartyLabel::Unknown
    })
}
