//! ANES 2020 feeling-thermometer items, partisan mean ratings and the gold
//! labels derived from them.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::community::CommunityLabel;

/// Packaged catalog: 30 thermometer items with ratings and keywords.
pub const PACKAGED_CATALOG: &str = include_str!("../data/anes_2020_thermometers.tsv");

pub const CATALOG_SIZE: usize = 30;

/// Items that must be present in any catalog file.
pub const REQUIRED_IDS: [&str; CATALOG_SIZE] = [
    "fttrump1", "ftobama1", "ftbiden1", "ftwarren1", "ftsanders1", "ftbuttigieg1", "ftharris1",
    "ftklobuchar1", "ftpence1", "ftyang1", "ftpelosi1", "ftrubio1", "ftocasioc1", "fthaley1",
    "ftthomas1", "ftfauci1", "ftblack", "ftwhite", "fthisp", "ftasian", "ftillegal",
    "ftfeminists", "ftmetoo", "fttransppl", "ftsocialists", "ftcapitalists", "ftbigbusiness",
    "ftlaborunions", "ftrepublicanparty", "ftdemocraticparty",
];

const HEADER: [&str; 9] = [
    "question_id",
    "display_name",
    "prompt_name",
    "category",
    "number",
    "full_keyword",
    "surname_keyword",
    "dem_rating",
    "rep_rating",
];

#[derive(Debug, thiserror::Error)]
pub enum SurveyError {
    #[error("catalog line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("{0}: ratings are tied, no gold label")]
    Tie(String),
    #[error("no catalog item matches {0:?}")]
    NotFound(String),
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Person,
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrammaticalNumber {
    Singular,
    Plural,
}

impl GrammaticalNumber {
    pub fn copula(self) -> &'static str {
        match self {
            GrammaticalNumber::Singular => "is",
            GrammaticalNumber::Plural => "are",
        }
    }
}

impl std::str::FromStr for GrammaticalNumber {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "singular" | "sg" | "is" => Ok(Self::Singular),
            "plural" | "pl" | "are" => Ok(Self::Plural),
            other => Err(format!("unknown grammatical number {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub question_id: String,
    pub display_name: String,
    pub prompt_name: String,
    pub category: Category,
    pub grammatical_number: GrammaticalNumber,
    pub full_keyword: String,
    pub surname_keyword: String,
    pub dem_rating: f64,
    pub rep_rating: f64,
}

impl SurveyItem {
    /// R when Republican respondents rated the item higher, otherwise D.
    pub fn gold_label(&self) -> Result<CommunityLabel, SurveyError> {
        gold_label(self)
    }

    pub fn rating_gap(&self) -> f64 {
        (self.dem_rating - self.rep_rating).abs()
    }

    fn validate(&self) -> Result<(), String> {
        for (name, v) in [("dem_rating", self.dem_rating), ("rep_rating", self.rep_rating)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(format!("{name} {v} outside [0, 100]"));
            }
        }
        for (name, v) in [
            ("question_id", &self.question_id),
            ("display_name", &self.display_name),
            ("prompt_name", &self.prompt_name),
            ("full_keyword", &self.full_keyword),
            ("surname_keyword", &self.surname_keyword),
        ] {
            if v.trim().is_empty() {
                return Err(format!("{name} is empty"));
            }
        }
        if self.category == Category::Person && self.grammatical_number != GrammaticalNumber::Singular {
            return Err("persons must be singular".into());
        }
        Ok(())
    }
}

pub fn gold_label(item: &SurveyItem) -> Result<CommunityLabel, SurveyError> {
    if item.rep_rating > item.dem_rating {
        Ok(CommunityLabel::R)
    } else if item.dem_rating > item.rep_rating {
        Ok(CommunityLabel::D)
    } else {
        Err(SurveyError::Tie(item.question_id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyCatalog {
    items: Vec<SurveyItem>,
}

impl SurveyCatalog {
    pub fn packaged() -> Self {
        Self::parse(PACKAGED_CATALOG).expect("packaged catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(tsv: &str) -> Result<Self, SurveyError> {
        let mut lines = tsv.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| SurveyError::Catalog("empty file".into()))?;
        let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
        if cols != HEADER {
            return Err(SurveyError::Row { line: 1, message: format!("unexpected header {cols:?}") });
        }
        let mut items = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let row_err = |message: String| SurveyError::Row { line: line_no, message };
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != HEADER.len() {
                return Err(row_err(format!("expected {} fields, found {}", HEADER.len(), f.len())));
            }
            let category = match f[3] {
                "person" => Category::Person,
                "group" => Category::Group,
                other => return Err(row_err(format!("unknown category {other:?}"))),
            };
            let rating = |s: &str| s.parse::<f64>().map_err(|e| row_err(format!("rating {s:?}: {e}")));
            let item = SurveyItem {
                question_id: f[0].to_string(),
                display_name: f[1].to_string(),
                prompt_name: f[2].to_string(),
                category,
                grammatical_number: f[4].parse().map_err(row_err)?,
                full_keyword: f[5].to_string(),
                surname_keyword: f[6].to_string(),
                dem_rating: rating(f[7])?,
                rep_rating: rating(f[8])?,
            };
            item.validate().map_err(|m| row_err(format!("{}: {m}", item.question_id)))?;
            if !seen.insert(item.question_id.clone()) {
                return Err(row_err(format!("duplicate question_id {}", item.question_id)));
            }
            items.push(item);
        }
        Self::from_items(items)
    }

    pub fn from_items(items: Vec<SurveyItem>) -> Result<Self, SurveyError> {
        let ids: HashSet<&str> = items.iter().map(|i| i.question_id.as_str()).collect();
        if ids.len() != items.len() {
            return Err(SurveyError::Catalog("duplicate question_id".into()));
        }
        if let Some(missing) = REQUIRED_IDS.iter().find(|id| !ids.contains(**id)) {
            return Err(SurveyError::Catalog(format!("missing item {missing}")));
        }
        if items.len() != CATALOG_SIZE {
            return Err(SurveyError::Catalog(format!(
                "expected {CATALOG_SIZE} items, found {}",
                items.len()
            )));
        }
        let persons = items.iter().filter(|i| i.category == Category::Person).count();
        if persons != 16 {
            return Err(SurveyError::Catalog(format!("expected 16 persons, found {persons}")));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[SurveyItem] {
        &self.items
    }

    pub fn persons(&self) -> impl Iterator<Item = &SurveyItem> {
        self.items.iter().filter(|i| i.category == Category::Person)
    }

    pub fn get(&self, question_id: &str) -> Option<&SurveyItem> {
        self.items.iter().find(|i| i.question_id == question_id)
    }

    /// Case-insensitive lookup by question id, surveyed name or prompt name.
    pub fn item_by_subject(&self, subject: &str) -> Result<&SurveyItem, SurveyError> {
        let needle = subject.trim().to_lowercase();
        self.items
            .iter()
            .find(|i| {
                [&i.question_id, &i.display_name, &i.prompt_name]
                    .iter()
                    .any(|s| s.to_lowercase() == needle)
            })
            .ok_or_else(|| SurveyError::NotFound(subject.to_string()))
    }

    /// The `k` items whose partisan ratings are closest, ascending by gap.
    pub fn top_gaps(&self, k: usize) -> Vec<&SurveyItem> {
        let mut sorted: Vec<&SurveyItem> = self.items.iter().collect();
        sorted.sort_by(|a, b| {
            a.rating_gap()
                .total_cmp(&b.rating_gap())
                .then_with(|| a.question_id.cmp(&b.question_id))
        });
        sorted.truncate(k.min(CATALOG_SIZE));
        sorted
    }

    pub fn gold_labels(&self) -> Result<Vec<(String, CommunityLabel)>, SurveyError> {
        self.items.iter().map(|i| Ok((i.question_id.clone(), gold_label(i)?))).collect()
    }
}
