use alloc::format;
use alloc::string::String;

use crate::knowledge::BoundingBox;

/// `CASE WHEN latitude BETWEEN .. AND longitude BETWEEN .. THEN '<name>' .. END AS borough`.
///
/// Clauses keep the caller's order; since boxes may overlap, the first
/// matching box labels a row. Returns `None` for an empty list.
pub fn build_borough_case(regions: &[&BoundingBox]) -> Option<String> {
    build_region_case(regions, "borough")
}

pub fn build_region_case(regions: &[&BoundingBox], alias: &str) -> Option<String> {
    if regions.is_empty() {
        return None;
    }
    let mut out = String::from("CASE\n");
    for r in regions {
        out.push_str(&format!(
            "  WHEN latitude BETWEEN {} AND {}\n   AND longitude BETWEEN {} AND {} THEN '{}'\n",
            r.lat_min,
            r.lat_max,
            r.lon_min,
            r.lon_max,
            r.name.replace('\'', "''")
        ));
    }
    out.push_str(&format!("END AS {alias}"));
    Some(out)
}
