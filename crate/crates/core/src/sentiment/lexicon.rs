//! Valence-lexicon scorer: summed token valences with negation flipping,
//! squashed into (-1, 1).

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use async_trait::async_trait;

use super::{ClassifierBackend, ClassifierKind, SentimentError, SentimentLabel};
use crate::rng::sha256_hex;

pub const PACKAGED_LEXICON: &str = include_str!("../../data/valence_lexicon.tsv");
pub const PACKAGED_NEGATORS: &str = include_str!("../../data/negators.txt");

pub const DEFAULT_ALPHA: f64 = 15.0;
pub const DEFAULT_POS_THRESHOLD: f64 = 0.05;
pub const DEFAULT_NEG_THRESHOLD: f64 = -0.05;
pub const MAX_VALENCE: f64 = 4.0;
/// How many preceding tokens a negator reaches.
pub const NEGATION_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLexicon {
    entries: HashMap<String, f64>,
    negators: HashSet<String>,
    pub normalization_alpha: f64,
    pub pos_threshold: f64,
    pub neg_threshold: f64,
}

impl ValenceLexicon {
    pub fn new(
        entries: impl IntoIterator<Item = (String, f64)>,
        negators: impl IntoIterator<Item = String>,
    ) -> Result<Self, SentimentError> {
        let mut map = HashMap::new();
        for (token, valence) in entries {
            if !(valence.is_finite() && valence.abs() <= MAX_VALENCE) {
                return Err(SentimentError::Lexicon(format!(
                    "valence {valence} for {token:?} outside [-4, 4]"
                )));
            }
            map.insert(token.to_lowercase(), valence);
        }
        Ok(Self {
            entries: map,
            negators: negators.into_iter().map(|n| n.to_lowercase()).collect(),
            normalization_alpha: DEFAULT_ALPHA,
            pos_threshold: DEFAULT_POS_THRESHOLD,
            neg_threshold: DEFAULT_NEG_THRESHOLD,
        })
    }

    pub fn packaged() -> Self {
        Self::parse(PACKAGED_LEXICON, PACKAGED_NEGATORS).expect("packaged lexicon is valid")
    }

    /// Lexicon TSV (`token<TAB>valence`, extra columns ignored) and a
    /// one-token-per-line negator list.
    pub fn parse(lexicon_tsv: &str, negators: &str) -> Result<Self, SentimentError> {
        let mut entries = Vec::new();
        for (i, line) in lexicon_tsv.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(token), Some(valence)) = (cols.next(), cols.next()) else {
                return Err(SentimentError::Lexicon(format!("line {}: expected token<TAB>valence", i + 1)));
            };
            let valence: f64 = valence
                .trim()
                .parse()
                .map_err(|e| SentimentError::Lexicon(format!("line {}: {e}", i + 1)))?;
            entries.push((token.trim().to_string(), valence));
        }
        let negators = negators
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string);
        Self::new(entries, negators)
    }

    pub fn load(lexicon: &Path, negators: Option<&Path>) -> Result<Self, SentimentError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| SentimentError::Lexicon(format!("{}: {e}", p.display())))
        };
        let negs = match negators {
            Some(p) => read(p)?,
            None => PACKAGED_NEGATORS.to_string(),
        };
        Self::parse(&read(lexicon)?, &negs)
    }

    pub fn with_thresholds(mut self, alpha: f64, pos: f64, neg: f64) -> Result<Self, SentimentError> {
        if !(alpha > 0.0 && neg < 0.0 && 0.0 < pos) {
            return Err(SentimentError::Lexicon(
                "need alpha > 0 and neg_threshold < 0 < pos_threshold".into(),
            ));
        }
        self.normalization_alpha = alpha;
        self.pos_threshold = pos;
        self.neg_threshold = neg;
        Ok(self)
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    /// Same lexicon with every valence negated.
    pub fn negated(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            ..self.clone()
        }
    }

    pub fn digest(&self) -> String {
        let mut entries: Vec<_> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut negs: Vec<_> = self.negators.iter().collect();
        negs.sort();
        sha256_hex(format!(
            "{entries:?}|{negs:?}|{}|{}|{}",
            self.normalization_alpha, self.pos_threshold, self.neg_threshold
        ))
    }
}

fn scoring_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Compound score in (-1, 1); 0 for text with no lexicon hits.
pub fn lexicon_score(text: &str, lexicon: &ValenceLexicon) -> f64 {
    let tokens = scoring_tokens(text);
    let mut sum = 0.0;
    for (i, token) in tokens.iter().enumerate() {
        let Some(v) = lexicon.valence(token) else { continue };
        let negated = tokens[i.saturating_sub(NEGATION_WINDOW)..i].iter().any(|t| lexicon.is_negator(t));
        sum += if negated { -v } else { v };
    }
    if sum == 0.0 {
        return 0.0;
    }
    sum / (sum * sum + lexicon.normalization_alpha).sqrt()
}

pub fn score_to_label(compound: f64, lexicon: &ValenceLexicon) -> SentimentLabel {
    if compound >= lexicon.pos_threshold {
        SentimentLabel::Positive
    } else if compound <= lexicon.neg_threshold {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    }
}

#[derive(Debug, Clone)]
pub struct LexiconClassifier {
    lexicon: Arc<ValenceLexicon>,
    id: String,
}

impl LexiconClassifier {
    pub fn new(lexicon: ValenceLexicon) -> Self {
        let id = format!("lexicon:{}", &lexicon.digest()[..16]);
        Self { lexicon: Arc::new(lexicon), id }
    }

    pub fn lexicon(&self) -> &ValenceLexicon {
        &self.lexicon
    }

    pub fn label(&self, text: &str) -> SentimentLabel {
        score_to_label(lexicon_score(text, &self.lexicon), &self.lexicon)
    }
}

#[async_trait]
impl ClassifierBackend for LexiconClassifier {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Lexicon
    }

    async fn classify_texts(&self, texts: &[String]) -> Result<Vec<SentimentLabel>, SentimentError> {
        Ok(texts.iter().map(|t| self.label(t)).collect())
    }
}
