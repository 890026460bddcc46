//! Replace a radial-distance predicate with an axis-aligned latitude/longitude box.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use super::lexer::{self, TokenKind};
use super::lint::LintConfig;
use super::parse::analyze;

/// Meters per degree of latitude used for box half-widths.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

/// Centers at or beyond this absolute latitude are rejected.
pub const MAX_CENTER_LATITUDE: f64 = 89.0;

/// Box edges are rounded outward to this many decimal places.
const EDGE_DECIMALS: i32 = 7;

/// Function names whose calls express a distance-to-point predicate.
const RADIAL_FUNCTIONS: &[&str] = &[
    "st_dwithin",
    "st_distance",
    "st_distancesphere",
    "st_distance_sphere",
    "st_distancespheroid",
    "st_dfullywithin",
    "earth_distance",
    "earth_box",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Inclusive degree bounds of a rewritten box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBounds {
    pub lat_lo: f64,
    pub lat_hi: f64,
    pub lon_lo: f64,
    pub lon_hi: f64,
}

impl BoxBounds {
    pub fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.lat_lo && p.lat <= self.lat_hi && p.lon >= self.lon_lo && p.lon <= self.lon_hi
    }

    /// `latitude BETWEEN .. AND .. AND longitude BETWEEN .. AND ..`
    pub fn predicate(&self) -> String {
        format!(
            "latitude BETWEEN {} AND {} AND longitude BETWEEN {} AND {}",
            fmt_deg(self.lat_lo),
            fmt_deg(self.lat_hi),
            fmt_deg(self.lon_lo),
            fmt_deg(self.lon_hi)
        )
    }
}

fn fmt_deg(v: f64) -> String {
    let scaled = v * libm::pow(10.0, EDGE_DECIMALS as f64);
    if libm::fabs(scaled - libm::round(scaled)) < 1e-6 {
        let s = format!("{:.7}", v);
        let s = s.trim_end_matches('0');
        let s = s.strip_suffix('.').unwrap_or(s);
        if s == "-0" { String::from("0") } else { String::from(s) }
    } else {
        format!("{}", v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewriteError {
    /// The statement does not contain exactly one radial predicate.
    NotApplicable(String),
    /// The box degenerates in longitude near the poles.
    DegenerateLongitude { latitude: f64 },
    InvalidRadius(f64),
}

impl fmt::Display for RewriteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewriteError::NotApplicable(why) => write!(f, "bounding-box rewrite not applicable: {why}"),
            RewriteError::DegenerateLongitude { latitude } => write!(
                f,
                "center latitude {latitude} is too close to a pole for a longitude box"
            ),
            RewriteError::InvalidRadius(r) => write!(f, "radius must be finite and non-negative, got {r}"),
        }
    }
}

/// Box bounds for `radius_m` around `center`.
///
/// The latitude half-width is `radius_m / 111_320` degrees. The longitude
/// half-width is the exact extent of the spherical cap on the sphere implied by
/// that constant, `asin(sin(d) / cos(lat))`, which is never narrower than the
/// first-order `radius_m / (111_320 * cos(lat))`. Edges are rounded outward to
/// 1e-7 degrees.
pub fn radial_box(center: LatLon, radius_m: f64) -> Result<BoxBounds, RewriteError> {
    if !radius_m.is_finite() || radius_m < 0.0 {
        return Err(RewriteError::InvalidRadius(radius_m));
    }
    if !center.lat.is_finite() || libm::fabs(center.lat) >= MAX_CENTER_LATITUDE {
        return Err(RewriteError::DegenerateLongitude { latitude: center.lat });
    }
    if radius_m == 0.0 {
        return Ok(BoxBounds {
            lat_lo: center.lat,
            lat_hi: center.lat,
            lon_lo: center.lon,
            lon_hi: center.lon,
        });
    }
    let lat_half = radius_m / METERS_PER_DEGREE;
    let angular = lat_half.to_radians();
    let ratio = libm::sin(angular) / libm::cos(center.lat.to_radians());
    if ratio >= 1.0 {
        return Err(RewriteError::DegenerateLongitude { latitude: center.lat });
    }
    let lon_half = libm::asin(ratio).to_degrees();
    let scale = libm::pow(10.0, EDGE_DECIMALS as f64);
    let down = |v: f64| libm::floor(v * scale) / scale;
    let up = |v: f64| libm::ceil(v * scale) / scale;
    Ok(BoxBounds {
        lat_lo: down(center.lat - lat_half),
        lat_hi: up(center.lat + lat_half),
        lon_lo: down(center.lon - lon_half),
        lon_hi: up(center.lon + lon_half),
    })
}

/// Rewrite the single radial predicate in `sql` into a bounding-box predicate.
pub fn rewrite_radial_to_bbox(sql: &str, center: LatLon, radius_m: f64) -> Result<String, RewriteError> {
    let span = radial_predicate_span(sql)?;
    let bounds = radial_box(center, radius_m)?;
    let mut out = String::with_capacity(sql.len() + 64);
    out.push_str(&sql[..span.start]);
    out.push('(');
    out.push_str(&bounds.predicate());
    out.push(')');
    out.push_str(&sql[span.end..]);
    Ok(out)
}

/// Byte span of the one radial predicate, including a trailing or leading comparison.
pub fn radial_predicate_span(sql: &str) -> Result<Range<usize>, RewriteError> {
    let analysis = analyze(sql);
    if let Some(f) = &analysis.failure {
        return Err(RewriteError::NotApplicable(format!("statement does not parse: {}", f.message)));
    }
    let calls: Vec<Range<usize>> = analysis
        .functions
        .iter()
        .filter(|f| RADIAL_FUNCTIONS.contains(&f.name.as_str()))
        .map(|f| f.span.clone())
        .collect();
    let outermost: Vec<Range<usize>> = calls
        .iter()
        .filter(|s| !calls.iter().any(|o| *o != **s && o.start <= s.start && s.end <= o.end))
        .cloned()
        .collect();

    let tokens = lexer::tokenize(sql).map_err(|e| RewriteError::NotApplicable(e.message.into()))?;
    let sig: Vec<&lexer::Token> = tokens.iter().filter(|t| !t.is_trivia()).collect();
    let index_at = |pos: usize| sig.iter().position(|t| t.span.start == pos);
    let index_ending = |pos: usize| sig.iter().position(|t| t.span.end == pos);

    let mut predicates: Vec<Range<usize>> = Vec::new();
    for call in outermost {
        if predicates.iter().any(|p| p.start <= call.start && call.end <= p.end) {
            continue;
        }
        let mut span = call.clone();
        if let Some(last) = index_ending(call.end) {
            // call <op> operand   |   call @> other_call(...)   |   call = TRUE
            if let Some(op) = sig.get(last + 1) {
                let op_text = op.text(sql);
                if op.kind == TokenKind::Symbol && matches!(op_text, "<" | "<=" | ">" | ">=" | "=") {
                    if let Some(end) = operand_end(sql, &sig, last + 2) {
                        span.end = end;
                    }
                } else if op.kind == TokenKind::Symbol && matches!(op_text, "@>" | "<@") {
                    if let Some(other) = analysis
                        .functions
                        .iter()
                        .find(|f| index_at(f.span.start) == Some(last + 2))
                    {
                        span.end = other.span.end;
                    }
                }
            }
        }
        if let Some(first) = index_at(call.start) {
            // operand <op> call
            if first >= 2 {
                let op = sig[first - 1];
                if op.kind == TokenKind::Symbol && matches!(op.text(sql), "<" | "<=" | ">" | ">=") {
                    let operand = sig[first - 2];
                    if matches!(operand.kind, TokenKind::Number) {
                        span.start = operand.span.start;
                    }
                }
            }
        }
        predicates.push(span);
    }

    match predicates.len() {
        0 => Err(RewriteError::NotApplicable("no radial-distance predicate found".into())),
        1 => {
            let span = predicates.remove(0);
            let config = LintConfig::default();
            let stray = analysis
                .functions
                .iter()
                .any(|f| config.is_geodesic(&f.name) && !(span.start <= f.span.start && f.span.end <= span.end));
            if stray {
                return Err(RewriteError::NotApplicable(
                    "geodesic calls remain outside the radial predicate".into(),
                ));
            }
            Ok(span)
        }
        n => Err(RewriteError::NotApplicable(format!("{n} radial-distance predicates found"))),
    }
}

/// End offset of a comparison operand starting at significant token `i`:
/// a signed number, a boolean, or an identifier.
fn operand_end(sql: &str, sig: &[&lexer::Token], i: usize) -> Option<usize> {
    let t = sig.get(i)?;
    if t.is_symbol(sql, "-") || t.is_symbol(sql, "+") {
        let n = sig.get(i + 1)?;
        return (n.kind == TokenKind::Number).then_some(n.span.end);
    }
    matches!(t.kind, TokenKind::Number | TokenKind::Ident).then_some(t.span.end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::lint::{lint, RuleId};
    use crate::sql::parse::parse_statement;

    const JFK: LatLon = LatLon::new(40.6413, -73.7781);

    #[test]
    fn jfk_two_km_half_width() {
        let b = radial_box(JFK, 2000.0).unwrap();
        let half = (b.lat_hi - b.lat_lo) / 2.0;
        let expected = 2000.0 / 111_320.0;
        assert!((half - expected).abs() < 2e-7, "{half}");
        assert!((half - 0.01797).abs() < 5e-6);
        assert!(half >= 2000.0 / METERS_PER_DEGREE);
    }

    #[test]
    fn zero_radius_is_point() {
        let sql = "SELECT * FROM checkins_nyc WHERE ST_DWithin(geom, ST_MakePoint(-73.7781, 40.6413), 0)";
        let out = rewrite_radial_to_bbox(sql, JFK, 0.0).unwrap();
        assert_eq!(
            out,
            "SELECT * FROM checkins_nyc WHERE (latitude BETWEEN 40.6413 AND 40.6413 AND longitude BETWEEN -73.7781 AND -73.7781)"
        );
    }

    #[test]
    fn no_radial_call_is_not_applicable() {
        let err = rewrite_radial_to_bbox("SELECT * FROM checkins_nyc", JFK, 100.0).unwrap_err();
        assert!(matches!(err, RewriteError::NotApplicable(_)));
    }

    #[test]
    fn two_radial_calls_not_applicable() {
        let sql = "SELECT * FROM checkins_nyc WHERE ST_DWithin(a, b, 1) OR ST_DWithin(c, d, 2)";
        assert!(matches!(rewrite_radial_to_bbox(sql, JFK, 10.0), Err(RewriteError::NotApplicable(_))));
    }

    #[test]
    fn polar_center_rejected() {
        let sql = "SELECT * FROM checkins_nyc WHERE ST_DWithin(a, b, 1)";
        assert!(matches!(
            rewrite_radial_to_bbox(sql, LatLon::new(89.5, 0.0), 10.0),
            Err(RewriteError::DegenerateLongitude { .. })
        ));
    }

    #[test]
    fn earth_distance_with_comparison() {
        let sql = "SELECT count(*) FROM checkins_nyc WHERE earth_distance(ll_to_earth(latitude, longitude), ll_to_earth(40.6413, -73.7781)) < 2000 AND category_name = 'Airport'";
        let out = rewrite_radial_to_bbox(sql, JFK, 2000.0).unwrap();
        assert!(out.starts_with("SELECT count(*) FROM checkins_nyc WHERE (latitude BETWEEN "));
        assert!(out.ends_with(") AND category_name = 'Airport'"));
        assert!(!lint(&out, &crate::sql::lint::tests::checkin_schema())
            .iter()
            .any(|d| d.rule_id == RuleId::R4));
        assert_eq!(parse_statement(sql).referenced_tables, parse_statement(&out).referenced_tables);
    }

    #[test]
    fn earth_box_containment_form() {
        let sql = "SELECT * FROM checkins_nyc WHERE earth_box(ll_to_earth(40.6413, -73.7781), 2000) @> ll_to_earth(latitude, longitude)";
        let out = rewrite_radial_to_bbox(sql, JFK, 2000.0).unwrap();
        assert!(!out.contains("earth"));
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(matches!(radial_box(JFK, -1.0), Err(RewriteError::InvalidRadius(_))));
    }
}
