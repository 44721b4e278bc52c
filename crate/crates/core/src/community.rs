//! Community identities shared across the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the two partisan communities being probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Community {
    #[serde(alias = "d", alias = "D", alias = "Democrat", alias = "dem")]
    Democrat,
    #[serde(alias = "r", alias = "R", alias = "Republican", alias = "rep")]
    Republican,
}

impl Community {
    pub const BOTH: [Community; 2] = [Community::Democrat, Community::Republican];

    pub fn label(self) -> CommunityLabel {
        match self {
            Community::Democrat => CommunityLabel::D,
            Community::Republican => CommunityLabel::R,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Community::Democrat => "democrat",
            Community::Republican => "republican",
        }
    }

    /// Context clause used to steer a shared, non-partisan generator.
    pub fn context_clause(self) -> &'static str {
        match self {
            Community::Democrat => "As a Democrat, I think",
            Community::Republican => "As a Republican, I think",
        }
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown community {0:?} (expected d|r|democrat|republican)")]
pub struct ParseCommunityError(pub String);

impl FromStr for Community {
    type Err = ParseCommunityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d" | "dem" | "democrat" | "democratic" => Ok(Community::Democrat),
            "r" | "rep" | "republican" => Ok(Community::Republican),
            _ => Err(ParseCommunityError(s.to_string())),
        }
    }
}

/// Party assignment of a user; `Unknown` users are excluded from corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartyLabel {
    Democrat,
    Republican,
    Unknown,
}

impl PartyLabel {
    pub fn community(self) -> Option<Community> {
        match self {
            PartyLabel::Democrat => Some(Community::Democrat),
            PartyLabel::Republican => Some(Community::Republican),
            PartyLabel::Unknown => None,
        }
    }
}

impl From<Community> for PartyLabel {
    fn from(c: Community) -> Self {
        match c {
            Community::Democrat => PartyLabel::Democrat,
            Community::Republican => PartyLabel::Republican,
        }
    }
}

/// Binary task label: which community is more favorable toward an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommunityLabel {
    D,
    R,
}

impl CommunityLabel {
    pub fn flipped(self) -> Self {
        match self {
            CommunityLabel::D => CommunityLabel::R,
            CommunityLabel::R => CommunityLabel::D,
        }
    }

    pub fn community(self) -> Community {
        match self {
            CommunityLabel::D => Community::Democrat,
            CommunityLabel::R => Community::Republican,
        }
    }
}

impl fmt::Display for CommunityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommunityLabel::D => "D",
            CommunityLabel::R => "R",
        })
    }
}

/// A value held once per community.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerCommunity<T> {
    pub democrat: T,
    pub republican: T,
}

impl<T> PerCommunity<T> {
    pub fn new(democrat: T, republican: T) -> Self {
        Self { democrat, republican }
    }

    pub fn get(&self, c: Community) -> &T {
        match c {
            Community::Democrat => &self.democrat,
            Community::Republican => &self.republican,
        }
    }

    pub fn get_mut(&mut self, c: Community) -> &mut T {
        match c {
            Community::Democrat => &mut self.democrat,
            Community::Republican => &mut self.republican,
        }
    }

    pub fn map<U>(self, mut f: impl FnMut(Community, T) -> U) -> PerCommunity<U> {
        PerCommunity {
            democrat: f(Community::Democrat, self.democrat),
            republican: f(Community::Republican, self.republican),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_short_and_long_forms() {
        assert_eq!("d".parse::<Community>().unwrap(), Community::Democrat);
        assert_eq!("Republican".parse::<Community>().unwrap(), Community::Republican);
        assert!("green".parse::<Community>().is_err());
    }

    #[test]
    fn serde_accepts_aliases() {
        let c: Community = serde_json::from_str("\"R\"").unwrap();
        assert_eq!(c, Community::Republican);
        assert_eq!(serde_json::to_string(&Community::Democrat).unwrap(), "\"democrat\"");
    }
}
