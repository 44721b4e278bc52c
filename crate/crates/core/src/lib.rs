//! Community language model probing.
//!
//! Builds balanced partisan tweet corpora, probes community-conditioned text
//! generators with survey-derived prompts, turns response sentiment into
//! stance scores and evaluates the predicted favorability against ANES
//! survey ratings.

pub mod baselines;
pub mod community;
pub mod corpus;
pub mod eval;
pub mod interface;
pub mod promptgen;
pub mod rng;
pub mod sentiment;
pub mod stance;
pub mod survey;
pub mod transport;

pub use community::{Community, CommunityLabel, PartyLabel, PerCommunity};
