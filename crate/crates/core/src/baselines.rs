//! Corpus baselines: keyword frequency and keyword-retrieval stance.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::Community;
use crate::corpus::CommunityCorpus;
use crate::eval::{evaluate_run, EvalError, EvalReport, MethodDescriptor, Prediction};
use crate::sentiment::{classify, ClassifierBackend, SentimentError};
use crate::stance::{aggregate_stance, decide, StanceError, StanceRecord, TiePolicy};
use crate::survey::{SurveyCatalog, SurveyItem};

pub const PACKAGED_FULL_COUNTS: &str = include_str!("../data/keyword_counts_full.tsv");
pub const PACKAGED_SURNAME_COUNTS: &str = include_str!("../data/keyword_counts_surname.tsv");

/// Published frequency-model scores that tweet-level keyword counts do not
/// reproduce; attached to frequency reports as a note.
pub const FREQUENCY_REFERENCE_NOTE: &str = "reference frequency-model scores (accuracy 53.33, weighted F1 54.50) \
     are not reproduced by tweet-level keyword counts: both packaged count tables give 14/30";

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("keyword is empty")]
    EmptyKeyword,
    #[error("no {community} tweet mentions {keyword:?}")]
    NoMatches { community: Community, keyword: String },
    #[error("keyword counts line {line}: {message}")]
    Counts { line: usize, message: String },
    #[error("no keyword counts for {0}")]
    MissingCounts(String),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Stance(#[from] StanceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeywordVariant {
    Full,
    Surname,
}

impl KeywordVariant {
    pub fn keyword(self, item: &SurveyItem) -> &str {
        match self {
            KeywordVariant::Full => &item.full_keyword,
            KeywordVariant::Surname => &item.surname_keyword,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KeywordVariant::Full => "full",
            KeywordVariant::Surname => "surname",
        }
    }

    pub fn packaged_counts(self) -> Vec<KeywordCount> {
        let tsv = match self {
            KeywordVariant::Full => PACKAGED_FULL_COUNTS,
            KeywordVariant::Surname => PACKAGED_SURNAME_COUNTS,
        };
        parse_counts(tsv).expect("packaged keyword counts are valid")
    }
}

impl fmt::Display for KeywordVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeywordVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(KeywordVariant::Full),
            "surname" => Ok(KeywordVariant::Surname),
            other => Err(format!("unknown keyword variant {other:?} (expected full|surname)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCount {
    pub question_id: String,
    pub variant: KeywordVariant,
    pub dem_count: u64,
    pub rep_count: u64,
}

/// Parses `question_id<TAB>variant<TAB>dem_count<TAB>rep_count` with a header.
pub fn parse_counts(tsv: &str) -> Result<Vec<KeywordCount>, BaselineError> {
    let mut out = Vec::new();
    for (i, line) in tsv.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| BaselineError::Counts { line: i + 1, message };
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [qid, variant, dem, rep] = f[..] else {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        };
        let count = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
        out.push(KeywordCount {
            question_id: qid.to_string(),
            variant: variant.parse().map_err(err)?,
            dem_count: count(dem)?,
            rep_count: count(rep)?,
        });
    }
    Ok(out)
}

/// Tweets whose raw text contains `keyword`, case-insensitively; a tweet
/// counts at most once.
pub fn count_keyword(corpus: &CommunityCorpus, keyword: &str) -> Result<u64, BaselineError> {
    let needle = keyword.trim().to_lowercase();
    if needle.is_empty() {
        return Err(BaselineError::EmptyKeyword);
    }
    Ok(corpus.tweets().par_iter().filter(|t| t.raw().to_lowercase().contains(&needle)).count() as u64)
}

pub fn keyword_counts(
    dem: &CommunityCorpus,
    rep: &CommunityCorpus,
    catalog: &SurveyCatalog,
    variant: KeywordVariant,
) -> Result<Vec<KeywordCount>, BaselineError> {
    catalog
        .items()
        .iter()
        .map(|item| {
            let kw = variant.keyword(item);
            Ok(KeywordCount {
                question_id: item.question_id.clone(),
                variant,
                dem_count: count_keyword(dem, kw)?,
                rep_count: count_keyword(rep, kw)?,
            })
        })
        .collect()
}

/// The community that mentions the item more often.
pub fn frequency_predict(counts: &KeywordCount, policy: TiePolicy) -> Prediction {
    let (label, tie) = decide(counts.dem_count, counts.rep_count, policy);
    Prediction {
        question_id: counts.question_id.clone(),
        predicted: Some(label),
        tie,
        stance_d: Some(counts.dem_count as f64),
        stance_r: Some(counts.rep_count as f64),
    }
}

/// Frequency predictions for every catalog item, in catalog order.
pub fn frequency_run(
    counts: &[KeywordCount],
    catalog: &SurveyCatalog,
    policy: TiePolicy,
) -> Result<Vec<Prediction>, BaselineError> {
    catalog
        .items()
        .iter()
        .map(|item| {
            counts
                .iter()
                .find(|c| c.question_id == item.question_id)
                .map(|c| frequency_predict(c, policy))
                .ok_or_else(|| BaselineError::MissingCounts(item.question_id.clone()))
        })
        .collect()
}

/// Mean sentiment of the community's tweets that mention `keyword`.
pub async fn retrieval_stance(
    corpus: &CommunityCorpus,
    subject: &str,
    keyword: &str,
    classifier: &dyn ClassifierBackend,
) -> Result<StanceRecord, BaselineError> {
    let needle = keyword.trim().to_lowercase();
    if needle.is_empty() {
        return Err(BaselineError::EmptyKeyword);
    }
    let texts: Vec<String> = corpus
        .tweets()
        .par_iter()
        .filter(|t| t.raw().to_lowercase().contains(&needle))
        .map(|t| t.text())
        .collect();
    if texts.is_empty() {
        return Err(BaselineError::NoMatches { community: corpus.community, keyword: keyword.to_string() });
    }
    let labels = classify(classifier, &texts).await?;
    Ok(aggregate_stance(subject, corpus.community, &labels)?)
}

/// Retrieval predictions for every catalog item. An item with no matching
/// tweet in either community is an abstention.
pub async fn retrieval_run(
    dem: &CommunityCorpus,
    rep: &CommunityCorpus,
    catalog: &SurveyCatalog,
    variant: KeywordVariant,
    classifier: &dyn ClassifierBackend,
    policy: TiePolicy,
) -> Result<Vec<Prediction>, BaselineError> {
    let mut out = Vec::with_capacity(catalog.items().len());
    for item in catalog.items() {
        let kw = variant.keyword(item);
        let d = abstain_on_empty(retrieval_stance(dem, &item.question_id, kw, classifier).await)?;
        let r = abstain_on_empty(retrieval_stance(rep, &item.question_id, kw, classifier).await)?;
        out.push(match (d, r) {
            (Some(d), Some(r)) => {
                let (label, tie) = decide(d.stance, r.stance, policy);
                Prediction {
                    question_id: item.question_id.clone(),
                    predicted: Some(label),
                    tie,
                    stance_d: Some(d.stance),
                    stance_r: Some(r.stance),
                }
            }
            (d, r) => {
                log::warn!("{}: no {kw:?} tweets in at least one community, abstaining", item.question_id);
                Prediction {
                    question_id: item.question_id.clone(),
                    predicted: None,
                    tie: false,
                    stance_d: d.map(|s| s.stance),
                    stance_r: r.map(|s| s.stance),
                }
            }
        });
    }
    Ok(out)
}

/// Scores frequency predictions; the report carries a note on the
/// published scores this model does not reproduce.
pub fn frequency_report(
    counts: &[KeywordCount],
    catalog: &SurveyCatalog,
    variant: KeywordVariant,
    source: &str,
    policy: TiePolicy,
) -> Result<EvalReport, BaselineError> {
    let preds = frequency_run(counts, catalog, policy)?;
    let method = MethodDescriptor { model: format!("frequency-{variant}"), template: None, backend: source.to_string() };
    let mut report = evaluate_run(format!("baseline-frequency-{variant}"), method, &preds, catalog)?;
    report.notes.push(FREQUENCY_REFERENCE_NOTE.to_string());
    let ties = preds.iter().filter(|p| p.tie).count();
    if ties > 0 {
        report.notes.push(format!("{ties} tied count(s) resolved by the tie policy"));
    }
    Ok(report)
}

pub async fn retrieval_report(
    dem: &CommunityCorpus,
    rep: &CommunityCorpus,
    catalog: &SurveyCatalog,
    variant: KeywordVariant,
    classifier: &dyn ClassifierBackend,
    policy: TiePolicy,
) -> Result<EvalReport, BaselineError> {
    let preds = retrieval_run(dem, rep, catalog, variant, classifier, policy).await?;
    let method = MethodDescriptor {
        model: format!("retrieval-{variant}"),
        template: None,
        backend: format!("{}+{}|{}", &dem.source_digest()[..12], &rep.source_digest()[..12], classifier.backend_id()),
    };
    let mut report = evaluate_run(format!("baseline-retrieval-{variant}"), method, &preds, catalog)?;
    let abstained = report.confusion.abstained;
    if abstained > 0 {
        report.notes.push(format!("{abstained} item(s) abstained for lack of matching tweets; scored as errors"));
    }
    Ok(report)
}

fn abstain_on_empty(r: Result<StanceRecord, BaselineError>) -> Result<Option<StanceRecord>, BaselineError> {
    match r {
        Ok(s) => Ok(Some(s)),
        Err(BaselineError::NoMatches { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::CommunityLabel;
    use crate::corpus::Tweet;
    use crate::sentiment::{LexiconClassifier, ValenceLexicon};

    const PAD: &str = "and then some more words to pass the length filter";

    fn corpus(c: Community, texts: &[&str]) -> CommunityCorpus {
        let tweets = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Tweet::from_raw(format!("u{i}"), format!("{t} {PAD}"), None).unwrap())
            .collect();
        CommunityCorpus::new(c, tweets)
    }

    fn kc(d: u64, r: u64) -> KeywordCount {
        KeywordCount { question_id: "q".into(), variant: KeywordVariant::Full, dem_count: d, rep_count: r }
    }

    #[test]
    fn counts_tweets_not_occurrences() {
        let c = corpus(Community::Democrat, &["Fauci said", "fauci FAUCI again", "nothing here"]);
        assert_eq!(count_keyword(&c, "Fauci").unwrap(), 2);
        assert_eq!(count_keyword(&c, "Pelosi").unwrap(), 0);
        assert!(matches!(count_keyword(&c, " "), Err(BaselineError::EmptyKeyword)));
    }

    #[test]
    fn mentions_match_on_raw_text() {
        let c = corpus(Community::Democrat, &["@JoeBiden thanks"]);
        assert_eq!(count_keyword(&c, "biden").unwrap(), 1);
    }

    #[test]
    fn frequency_comparisons() {
        assert_eq!(frequency_predict(&kc(4177, 5377), TiePolicy::default()).predicted, Some(CommunityLabel::R));
        assert_eq!(frequency_predict(&kc(165, 38), TiePolicy::default()).predicted, Some(CommunityLabel::D));
        let tie = frequency_predict(&kc(5, 5), TiePolicy::default());
        assert_eq!((tie.predicted, tie.tie), (Some(CommunityLabel::D), true));
    }

    #[test]
    fn packaged_counts_cover_catalog() {
        let cat = SurveyCatalog::packaged();
        for v in [KeywordVariant::Full, KeywordVariant::Surname] {
            let counts = v.packaged_counts();
            assert_eq!(counts.len(), 30);
            assert!(counts.iter().all(|c| c.variant == v));
            assert_eq!(frequency_run(&counts, &cat, TiePolicy::default()).unwrap().len(), 30);
        }
        let yang = KeywordVariant::Full.packaged_counts().into_iter().find(|c| c.question_id == "ftyang1").unwrap();
        assert_eq!((yang.dem_count, yang.rep_count), (585, 249));
    }

    #[test]
    fn frequency_reports_carry_the_note() {
        let cat = SurveyCatalog::packaged();
        for v in [KeywordVariant::Full, KeywordVariant::Surname] {
            let r = frequency_report(&v.packaged_counts(), &cat, v, "packaged", TiePolicy::default()).unwrap();
            assert_eq!(r.errors.len(), 16);
            assert!((r.accuracy - 14.0 / 30.0).abs() < 1e-12);
            assert_eq!(r.notes[0], FREQUENCY_REFERENCE_NOTE);
        }
    }

    #[test]
    fn count_file_errors() {
        assert!(parse_counts("h\nq\tfull\t1\n").is_err());
        assert!(parse_counts("h\nq\tfirst\t1\t2\n").is_err());
        assert!(parse_counts("h\nq\tfull\t-1\t2\n").is_err());
    }

    #[tokio::test]
    async fn retrieval_averages_matching_tweets() {
        let lex = ValenceLexicon::new(
            [("great".to_string(), 3.0), ("awful".to_string(), -3.0)],
            Vec::<String>::new(),
        )
        .unwrap();
        let clf = LexiconClassifier::new(lex);
        let c = corpus(
            Community::Democrat,
            &["Yang is great", "great Yang", "Yang great", "awful Yang", "great weather"],
        );
        let s = retrieval_stance(&c, "ftyang1", "yang", &clf).await.unwrap();
        assert_eq!(s.n, 4);
        assert_eq!(s.stance, 0.5);
        assert!(matches!(
            retrieval_stance(&c, "x", "Pelosi", &clf).await,
            Err(BaselineError::NoMatches { .. })
        ));
        let neutral = corpus(Community::Republican, &["Yang spoke", "Yang again"]);
        assert_eq!(retrieval_stance(&neutral, "ftyang1", "Yang", &clf).await.unwrap().stance, 0.0);
    }
}
