//! External knowledge the schema lacks: region boxes, calendar windows,
//! category synonyms, label discovery scoring and dayparts.

mod calendar;
mod daypart;
mod geo;
mod labels;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use calendar::{Calendar, DateWindow, HourWindow, WindowRule};
pub use daypart::{daypart, Daypart};
pub use geo::{BoundingBox, RegionKind};
pub use labels::{normalized_similarity, rank_labels, term_tokens, LabelMatch, MIN_SIMILARITY, MIN_TOKEN_CHARS};

pub const GEOGRAPHY_JSON: &str = include_str!("../../../../data/knowledge/geography.json");
pub const HOLIDAYS_JSON: &str = include_str!("../../../../data/knowledge/holidays.json");
pub const SYNONYMS_JSON: &str = include_str!("../../../../data/knowledge/synonyms.json");

#[derive(Debug, Clone, PartialEq)]
pub enum KnowledgeError {
    UnknownRegion(String),
    UnknownWindow(String),
    YearOutOfRange { year: i32, min: i32, max: i32 },
    HourOutOfRange(i64),
    Invalid(String),
}

impl fmt::Display for KnowledgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnowledgeError::UnknownRegion(n) => write!(f, "no bounds known for '{n}'"),
            KnowledgeError::UnknownWindow(n) => write!(f, "no calendar window named '{n}'"),
            KnowledgeError::YearOutOfRange { year, min, max } => {
                write!(f, "year {year} outside configured range {min}..={max}")
            }
            KnowledgeError::HourOutOfRange(h) => write!(f, "hour {h} is outside 0..=23"),
            KnowledgeError::Invalid(msg) => write!(f, "invalid knowledge file: {msg}"),
        }
    }
}

/// Lowercase, straighten apostrophes and collapse whitespace.
pub fn normalize_term(term: &str) -> String {
    let mut out = String::with_capacity(term.len());
    for word in term.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for ch in word.chars() {
            match ch {
                '\u{2019}' | '\u{2018}' | '`' => out.push('\''),
                c => out.extend(c.to_lowercase()),
            }
        }
    }
    out
}

/// Term → ordered schema labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymTable {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymTable {
    pub fn from_json(json: &str) -> Result<Self, KnowledgeError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(json).map_err(|e| KnowledgeError::Invalid(alloc::format!("synonyms: {e}")))?;
        let mut entries = BTreeMap::new();
        for (term, labels) in raw {
            if labels.is_empty() {
                return Err(KnowledgeError::Invalid(alloc::format!("synonyms: '{term}' has no labels")));
            }
            entries.insert(normalize_term(&term), labels);
        }
        Ok(Self { entries })
    }

    /// Labels for `term`, or empty when the term is unknown. A trailing plural
    /// `s` is dropped if the plural form itself is not listed.
    pub fn expand(&self, term: &str) -> Vec<String> {
        let key = normalize_term(term);
        if let Some(v) = self.entries.get(&key) {
            return v.clone();
        }
        key.strip_suffix('s')
            .and_then(|k| self.entries.get(k))
            .cloned()
            .unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// All knowledge tables loaded together.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub regions: Vec<BoundingBox>,
    pub calendar: Calendar,
    pub synonyms: SynonymTable,
}

impl KnowledgeBase {
    pub fn from_json(geography: &str, holidays: &str, synonyms: &str) -> Result<Self, KnowledgeError> {
        Ok(Self {
            regions: geo::parse_regions(geography)?,
            calendar: Calendar::from_json(holidays)?,
            synonyms: SynonymTable::from_json(synonyms)?,
        })
    }

    /// The tables shipped in `data/knowledge`.
    pub fn builtin() -> Self {
        Self::from_json(GEOGRAPHY_JSON, HOLIDAYS_JSON, SYNONYMS_JSON).expect("shipped knowledge files are valid")
    }

    /// Case-insensitive exact lookup by name or alias.
    pub fn lookup_bounds(&self, name: &str) -> Result<&BoundingBox, KnowledgeError> {
        let key = normalize_term(name);
        self.regions
            .iter()
            .find(|r| r.matches(&key))
            .ok_or_else(|| KnowledgeError::UnknownRegion(name.into()))
    }

    pub fn lookup_window(&self, name: &str, year: i32) -> Result<DateWindow, KnowledgeError> {
        self.calendar.window(name, year)
    }

    pub fn expand_term(&self, term: &str) -> Vec<String> {
        self.synonyms.expand(term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn published_borough_boxes_are_exact() {
        let kb = KnowledgeBase::builtin();
        let b = kb.lookup_bounds("Brooklyn").unwrap();
        assert_eq!((b.lat_min, b.lat_max, b.lon_min, b.lon_max), (40.5707, 40.7395, -74.0423, -73.8334));
        let q = kb.lookup_bounds("queens").unwrap();
        assert_eq!((q.lat_min, q.lat_max, q.lon_min, q.lon_max), (40.5091, 40.8007, -73.9642, -73.7004));
        assert_eq!(kb.lookup_bounds("  BROOKLYN ").unwrap().name, "Brooklyn");
    }

    #[test]
    fn unknown_region() {
        let kb = KnowledgeBase::builtin();
        assert_eq!(
            kb.lookup_bounds("Atlantis").unwrap_err(),
            KnowledgeError::UnknownRegion("Atlantis".into())
        );
    }

    #[test]
    fn borough_boxes_overlap() {
        let kb = KnowledgeBase::builtin();
        let b = kb.lookup_bounds("Brooklyn").unwrap();
        let q = kb.lookup_bounds("Queens").unwrap();
        assert!(b.intersects(q));
    }

    #[test]
    fn config_boxes_are_marked() {
        let kb = KnowledgeBase::builtin();
        assert_eq!(kb.lookup_bounds("Central Park").unwrap().source, "config");
        assert_eq!(kb.lookup_bounds("jfk").unwrap().name, "JFK Airport");
        let published: Vec<&str> = kb
            .regions
            .iter()
            .filter(|r| r.source == "published")
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(published, ["Brooklyn", "Queens"]);
    }

    #[test]
    fn synonyms() {
        let kb = KnowledgeBase::builtin();
        assert_eq!(kb.expand_term("nightlife"), vec!["Bar", "Nightclub", "Music Venue"]);
        assert_eq!(kb.expand_term("laundromat"), vec!["Laundry Service"]);
        assert_eq!(kb.expand_term("Laundromats"), vec!["Laundry Service"]);
        assert!(kb.expand_term("zzz-unknown").is_empty());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_term("  New   Year\u{2019}s  EVE "), "new year's eve");
    }

    #[test]
    fn empty_synonym_list_rejected() {
        assert!(SynonymTable::from_json(r#"{"x": []}"#).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;
    use std::string::ToString;

    proptest! {
        #[test]
        fn expand_is_case_and_whitespace_insensitive(
            idx in 0usize..9,
            upper in proptest::collection::vec(any::<bool>(), 0..32),
            pad_left in 0usize..3,
            pad_right in 0usize..3,
        ) {
            let kb = KnowledgeBase::builtin();
            let terms: Vec<&str> = kb.synonyms.terms().collect();
            let term = terms[idx % terms.len()];
            let mut mangled: String = term
                .chars()
                .enumerate()
                .map(|(i, c)| if upper.get(i).copied().unwrap_or(false) { c.to_ascii_uppercase() } else { c })
                .collect::<String>()
                .replace(' ', "  ");
            mangled = " ".repeat(pad_left) + &mangled + &" ".repeat(pad_right);
            prop_assert_eq!(kb.expand_term(&mangled), kb.expand_term(term));
            prop_assert_eq!(normalize_term(&normalize_term(&mangled)), normalize_term(&mangled));
            prop_assert!(!kb.expand_term(&mangled.to_string()).is_empty());
        }
    }
}
