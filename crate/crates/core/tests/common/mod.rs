#![allow(dead_code)]

pub mod props;

use communitylm::community::Community;
use communitylm::interface::Engine;
use communitylm::promptgen::{Fixture, FixtureEntry, WeightedText};
use communitylm::survey::SurveyCatalog;

pub const POSITIVE: [&str; 3] = ["hero of our time", "great leader for the country", "good choice for America"];
pub const NEGATIVE: [&str; 3] = ["liar and a fraud", "terrible disaster for everyone", "joke and a failure"];
pub const NEUTRAL: [&str; 2] = ["topic of the day", "name in the news"];

fn mix(favored: bool) -> Vec<WeightedText> {
    let (p, n) = if favored { (0.2, 0.05) } else { (0.05, 0.2) };
    let w = |texts: &[&str], weight: f64| -> Vec<WeightedText> {
        texts.iter().map(|t| WeightedText { text: t.to_string(), weight }).collect()
    };
    [w(&POSITIVE, p), w(&NEUTRAL, 0.125), w(&NEGATIVE, n)].concat()
}

/// Each community favors the items its side rated higher in the survey,
/// except the `flipped` ones, which favor the other side.
pub fn planted_fixture(flipped: &[&str]) -> Fixture {
    let catalog = SurveyCatalog::packaged();
    // catch-all for free text: an even mix on both sides
    let mut entries: Vec<FixtureEntry> = Community::BOTH
        .iter()
        .map(|&c| FixtureEntry {
            community: c,
            prompt_prefix: String::new(),
            templates: [&POSITIVE[..], &NEUTRAL[..], &NEGATIVE[..]]
                .concat()
                .iter()
                .map(|t| WeightedText { text: t.to_string(), weight: 1.0 })
                .collect(),
        })
        .collect();
    for item in catalog.items() {
        let mut favored = item.gold_label().unwrap();
        if flipped.contains(&item.question_id.as_str()) {
            favored = favored.flipped();
        }
        for c in Community::BOTH {
            for ctx in ["", "As a Democrat, I think ", "As a Republican, I think "] {
                entries.push(FixtureEntry {
                    community: c,
                    prompt_prefix: format!("{ctx}{}", item.prompt_name),
                    templates: mix(c.label() == favored),
                });
            }
        }
    }
    Fixture { entries }
}

pub fn gold_engine() -> Engine {
    Engine::scripted(planted_fixture(&[]))
}
