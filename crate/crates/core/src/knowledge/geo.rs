use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{normalize_term, KnowledgeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Borough,
    Neighborhood,
    Landmark,
    Park,
}

/// Axis-aligned latitude/longitude rectangle, inclusive on all edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub name: String,
    pub kind: RegionKind,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// `"published"` for bounds taken from published work, `"config"` for values chosen here.
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

fn default_source() -> String {
    String::from("config")
}

impl BoundingBox {
    pub fn validate(&self) -> Result<(), KnowledgeError> {
        let ok = self.lat_min < self.lat_max
            && self.lon_min < self.lon_max
            && (-90.0..=90.0).contains(&self.lat_min)
            && (-90.0..=90.0).contains(&self.lat_max)
            && (-180.0..=180.0).contains(&self.lon_min)
            && (-180.0..=180.0).contains(&self.lon_max);
        if ok {
            Ok(())
        } else {
            Err(KnowledgeError::Invalid(format!("box '{}' has invalid bounds", self.name)))
        }
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.lat_min <= other.lat_max
            && other.lat_min <= self.lat_max
            && self.lon_min <= other.lon_max
            && other.lon_min <= self.lon_max
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.lat_min + self.lat_max) / 2.0, (self.lon_min + self.lon_max) / 2.0)
    }

    pub(super) fn matches(&self, normalized: &str) -> bool {
        normalize_term(&self.name) == normalized || self.aliases.iter().any(|a| normalize_term(a) == normalized)
    }

    /// `latitude BETWEEN .. AND .. AND longitude BETWEEN .. AND ..`
    pub fn predicate(&self) -> String {
        format!(
            "latitude BETWEEN {} AND {} AND longitude BETWEEN {} AND {}",
            self.lat_min, self.lat_max, self.lon_min, self.lon_max
        )
    }
}

pub(super) fn parse_regions(json: &str) -> Result<Vec<BoundingBox>, KnowledgeError> {
    let regions: Vec<BoundingBox> =
        serde_json::from_str(json).map_err(|e| KnowledgeError::Invalid(format!("geography: {e}")))?;
    for r in &regions {
        r.validate()?;
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverted_box_rejected() {
        let json = r#"[{"name":"x","kind":"park","lat_min":2,"lat_max":1,"lon_min":0,"lon_max":1}]"#;
        assert!(parse_regions(json).is_err());
    }

    #[test]
    fn predicate_text() {
        let json = r#"[{"name":"x","kind":"park","lat_min":40.5707,"lat_max":40.7395,"lon_min":-74.0423,"lon_max":-73.8334}]"#;
        let r = &parse_regions(json).unwrap()[0];
        assert_eq!(
            r.predicate(),
            "latitude BETWEEN 40.5707 AND 40.7395 AND longitude BETWEEN -74.0423 AND -73.8334"
        );
        assert_eq!(r.source, "config");
    }
}
