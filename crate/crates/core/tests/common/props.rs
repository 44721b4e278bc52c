//! Property checks shared by the property suite and the acceptance runner.

use std::sync::LazyLock;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use communitylm::community::{Community, CommunityLabel};
use communitylm::corpus::{is_url_token, mentions_masked, preprocess_tweet};
use communitylm::eval::weighted_f1_of;
use communitylm::sentiment::{lexicon_score, SentimentLabel, ValenceLexicon};
use communitylm::stance::{aggregate_stance, predict_item, rank_people, top_words, StanceRecord, TiePolicy};
use communitylm::survey::SurveyCatalog;

pub const CASES: u32 = 10_000;

pub fn label() -> impl Strategy<Value = SentimentLabel> {
    prop_oneof![Just(SentimentLabel::Negative), Just(SentimentLabel::Neutral), Just(SentimentLabel::Positive)]
}

pub fn labels(max: usize) -> impl Strategy<Value = Vec<SentimentLabel>> {
    prop::collection::vec(label(), 1..max)
}

pub fn community_label() -> impl Strategy<Value = CommunityLabel> {
    prop_oneof![Just(CommunityLabel::D), Just(CommunityLabel::R)]
}

fn stance(labels: &[SentimentLabel]) -> f64 {
    aggregate_stance("q", Community::Democrat, labels).unwrap().stance
}

fn record(community: Community, stance: f64) -> StanceRecord {
    StanceRecord { subject: "q".into(), community, stance, counts: Default::default(), n: 1 }
}

fn predict(d: f64, r: f64) -> (CommunityLabel, bool) {
    let p = predict_item(&record(Community::Democrat, d), &record(Community::Republican, r), TiePolicy::default())
        .unwrap();
    (p.predicted, p.tie)
}

pub fn stance_bounds(labels: Vec<SentimentLabel>) -> Result<(), TestCaseError> {
    let r = aggregate_stance("q", Community::Republican, &labels).unwrap();
    prop_assert!((-1.0..=1.0).contains(&r.stance));
    prop_assert_eq!(r.n, labels.len());
    prop_assert_eq!(r.counts.total(), labels.len());
    Ok(())
}

pub fn stance_permutation(labels: Vec<SentimentLabel>, shuffled: Vec<SentimentLabel>) -> Result<(), TestCaseError> {
    prop_assert_eq!(stance(&labels), stance(&shuffled));
    Ok(())
}

pub fn stance_concatenation(a: Vec<SentimentLabel>, b: Vec<SentimentLabel>) -> Result<(), TestCaseError> {
    let joined: Vec<_> = a.iter().chain(&b).copied().collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let expected = (na * stance(&a) + nb * stance(&b)) / (na + nb);
    prop_assert!((stance(&joined) - expected).abs() < 1e-12);
    Ok(())
}

/// Stances on a 1/1000 grid so shifts cannot collapse distinct values.
pub fn grid_stance() -> impl Strategy<Value = f64> {
    (-1000i32..=1000).prop_map(|i| i as f64 / 1000.0)
}

pub fn predict_shift(d: f64, r: f64, c: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(predict(d, r), predict(d + c, r + c));
    Ok(())
}

pub fn predict_rescale(d: f64, r: f64, a: f64, b: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(predict(d, r), predict(a * d + b, a * r + b));
    prop_assert_eq!(predict(d, r), predict(d.powi(3), r.powi(3)));
    prop_assert_eq!(predict(d, r), predict(d.exp(), r.exp()));
    Ok(())
}

pub fn predict_swap(d: f64, r: f64) -> Result<(), TestCaseError> {
    let (fwd, tie) = predict(d, r);
    let (back, tie_back) = predict(r, d);
    prop_assert_eq!(tie, tie_back);
    if tie {
        prop_assert_eq!(fwd, back);
    } else {
        prop_assert_eq!(fwd, back.flipped());
    }
    Ok(())
}

pub fn f1_pairs() -> impl Strategy<Value = Vec<(Option<CommunityLabel>, CommunityLabel)>> {
    prop::collection::vec((prop::option::weighted(0.9, community_label()), community_label()), 1..60)
}

pub fn f1_range(pairs: Vec<(Option<CommunityLabel>, CommunityLabel)>) -> Result<(), TestCaseError> {
    let f1 = weighted_f1_of(&pairs);
    prop_assert!((0.0..=1.0).contains(&f1), "{}", f1);
    let perfect: Vec<_> = pairs.iter().map(|(_, g)| (Some(*g), *g)).collect();
    prop_assert_eq!(weighted_f1_of(&perfect), 1.0);
    Ok(())
}

pub fn f1_relabeling(pairs: Vec<(Option<CommunityLabel>, CommunityLabel)>) -> Result<(), TestCaseError> {
    let swapped: Vec<_> = pairs.iter().map(|(p, g)| (p.map(CommunityLabel::flipped), g.flipped())).collect();
    prop_assert!((weighted_f1_of(&pairs) - weighted_f1_of(&swapped)).abs() < 1e-12);
    Ok(())
}

/// Gold labels of the packaged catalog, in catalog order.
pub fn catalog_gold() -> Vec<CommunityLabel> {
    SurveyCatalog::packaged().gold_labels().unwrap().into_iter().map(|(_, g)| g).collect()
}

pub fn f1_all_d(gold: Vec<CommunityLabel>) -> Result<(), TestCaseError> {
    let pairs: Vec<_> = gold.iter().map(|g| (Some(CommunityLabel::D), *g)).collect();
    let f1 = weighted_f1_of(&pairs);
    prop_assert!((f1 - 0.5765).abs() < 1e-4, "{}", f1);
    prop_assert!((f1 - 49.0 / 85.0).abs() < 1e-12);
    Ok(())
}

pub fn tweet_token() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[A-Za-z]{1,8}",
        1 => "[A-Za-z]{1,6}[.,!?…]{1,3}",
        1 => "@[A-Za-z0-9_]{1,10}[.,:]?",
        1 => "[a-z]{0,3}@[A-Za-z0-9_]{1,6}",
        1 => "(https?://|HTTP://|www\\.|\\(www\\.)[a-z0-9./]{1,12}",
        1 => "[.,!?…]{1,3}",
        1 => Just("@USER".to_string()),
        1 => "[#$%()\"'-]{1,2}[a-zé]{0,4}",
        1 => "[\u{1F600}-\u{1F64F}]",
    ]
}

pub fn raw_tweet() -> impl Strategy<Value = String> {
    (prop::collection::vec(tweet_token(), 0..24), prop::collection::vec(prop_oneof![Just(" "), Just("  "), Just("\t"), Just("\n")], 24))
        .prop_map(|(tokens, seps)| tokens.iter().zip(seps).map(|(t, s)| format!("{t}{s}")).collect())
}

pub fn preprocess_idempotent(raw: String) -> Result<(), TestCaseError> {
    if let Ok(tokens) = preprocess_tweet(&raw) {
        let again = preprocess_tweet(&tokens.join(" "));
        prop_assert_eq!(again, Ok(tokens));
    }
    Ok(())
}

pub fn preprocess_no_leak(raw: String) -> Result<(), TestCaseError> {
    if let Ok(tokens) = preprocess_tweet(&raw) {
        for t in &tokens {
            prop_assert!(!is_url_token(t), "url token {:?}", t);
            prop_assert!(mentions_masked(t), "unmasked mention {:?}", t);
            prop_assert!(!t.is_empty() && !t.contains(char::is_whitespace));
        }
    }
    Ok(())
}

pub fn lexicon_words() -> Vec<String> {
    ["good", "great", "hero", "liar", "terrible", "fraud", "not", "never", "the", "very", "joke", "failure"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

pub fn lexicon_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(lexicon_words()), 0..15).prop_map(|w| w.join(" "))
}

static LEXICONS: LazyLock<(ValenceLexicon, ValenceLexicon)> = LazyLock::new(|| {
    let lex = ValenceLexicon::packaged();
    let negated = lex.negated();
    (lex, negated)
});

pub fn lexicon_antisymmetry(text: String) -> Result<(), TestCaseError> {
    let (lex, negated) = &*LEXICONS;
    let s = lexicon_score(&text, lex);
    prop_assert!(s > -1.0 && s < 1.0);
    prop_assert!((lexicon_score(&text, negated) + s).abs() < 1e-12, "{:?}", text);
    Ok(())
}

pub fn top_words_sums(responses: Vec<String>, k: usize) -> Result<(), TestCaseError> {
    let all = top_words(&responses, usize::MAX).unwrap();
    let nonempty = responses
        .iter()
        .filter(|r| {
            r.split_whitespace().next().is_some_and(|t| {
                !t.trim_matches(|c: char| c.is_ascii_punctuation() || c == '…' || c == '“' || c == '”').is_empty()
            })
        })
        .count();
    let total: f64 = all.iter().map(|w| w.percent).sum();
    prop_assert!((total - 100.0 * nonempty as f64 / responses.len() as f64).abs() < 1e-9);
    let shorter = top_words(&responses, k).unwrap();
    let longer = top_words(&responses, k + 1).unwrap();
    prop_assert_eq!(&longer[..shorter.len()], &shorter[..]);
    Ok(())
}

pub fn ranking_order_invariant(stances: Vec<f64>, rotate: usize) -> Result<(), TestCaseError> {
    let records: Vec<StanceRecord> = stances
        .iter()
        .enumerate()
        .map(|(i, s)| StanceRecord { subject: format!("p{i:02}"), ..record(Community::Democrat, *s) })
        .collect();
    let mut rotated = records.clone();
    if !rotated.is_empty() {
        let by = rotate % rotated.len();
        rotated.rotate_left(by);
    }
    rotated.reverse();
    prop_assert_eq!(
        rank_people(&records, Community::Democrat).unwrap(),
        rank_people(&rotated, Community::Democrat).unwrap()
    );
    Ok(())
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = proptest::test_runner::Config { cases: CASES, failure_persistence: None, ..Default::default() };
    proptest::test_runner::TestRunner::new(config).run(&strategy, test).map_err(|e| e.to_string())
}

pub type Property = (&'static str, fn() -> Result<(), String>);

pub const PROPERTIES: &[Property] = &[
    ("stance stays in [-1, 1]", || run(labels(200), stance_bounds)),
    ("stance ignores response order", || {
        run(labels(200).prop_flat_map(|l| (Just(l.clone()), Just(l).prop_shuffle())), |(a, b)| stance_permutation(a, b))
    }),
    ("stance of a concatenation is the size-weighted mean", || {
        run((labels(100), labels(100)), |(a, b)| stance_concatenation(a, b))
    }),
    ("prediction is invariant to a common shift", || {
        run((grid_stance(), grid_stance(), -100.0..100.0f64), |(d, r, c)| predict_shift(d, r, c))
    }),
    ("prediction is invariant to increasing affine maps", || {
        run((grid_stance(), grid_stance(), 0.1..10.0f64, -10.0..10.0f64), |(d, r, a, b)| predict_rescale(d, r, a, b))
    }),
    ("swapping communities flips non-tied predictions", || {
        run((grid_stance(), prop_oneof![grid_stance(), Just(0.0)]), |(d, r)| predict_swap(d, r))
    }),
    ("weighted F1 lies in [0, 1]", || run(f1_pairs(), f1_range)),
    ("weighted F1 is symmetric under relabeling", || run(f1_pairs(), f1_relabeling)),
    ("all-D predictor scores 0.5765 in any gold order", || run(Just(catalog_gold()).prop_shuffle(), f1_all_d)),
    ("preprocessing is idempotent", || run(raw_tweet(), preprocess_idempotent)),
    ("preprocessing leaks no URL or raw mention", || run(raw_tweet(), preprocess_no_leak)),
    ("negating the lexicon negates every score", || run(lexicon_text(), lexicon_antisymmetry)),
    ("top words: prefix-stable and sum to the non-empty share", || {
        let first: &'static [&str] = &["the", "The", "liar", "hero,", "\"joke\"", "…", "!!", "", "  ", "great.", "a", "A"];
        let response = (prop::sample::select(first), prop::sample::select(&[" ", " and more", " x"][..]))
            .prop_map(|(w, rest)| format!("{w}{rest}"));
        run((prop::collection::vec(response, 1..80), 1usize..8), |(r, k)| top_words_sums(r, k))
    }),
    ("rankings ignore input order", || {
        run((prop::collection::vec(prop_oneof![grid_stance(), Just(0.5)], 0..30), any::<usize>()), |(s, k)| {
            ranking_order_invariant(s, k)
        })
    }),
];
