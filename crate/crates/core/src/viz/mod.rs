//! Deterministic SVG plots and HTML maps built from result tables.

mod choose;
mod map;
mod plot;

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use choose::{choose_visualization, profile, ColumnKind, ColumnProfile, ResultProfile, HEATMAP_MIN_ROWS};
pub use map::{bin_points, render_map, HeatGrid, MapRender, DEFAULT_GRID};
pub use plot::{render_plot, PlotRender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VizKind {
    Line,
    Bar,
    Points,
    Heatmap,
}

impl VizKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VizKind::Line => "line",
            VizKind::Bar => "bar",
            VizKind::Points => "points",
            VizKind::Heatmap => "heatmap",
        }
    }

    pub fn is_map(self) -> bool {
        matches!(self, VizKind::Points | VizKind::Heatmap)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" => Some(VizKind::Line),
            "bar" => Some(VizKind::Bar),
            "points" | "point" => Some(VizKind::Points),
            "heatmap" => Some(VizKind::Heatmap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualizationSpec {
    pub kind: VizKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<String>,
    #[serde(default)]
    pub title: String,
}

impl VisualizationSpec {
    pub fn plot(kind: VizKind, x: &str, y: &str, title: &str) -> Self {
        Self {
            kind,
            x: Some(x.into()),
            y: Some(y.into()),
            series: None,
            lat: None,
            lon: None,
            title: title.into(),
        }
    }

    pub fn map(kind: VizKind, title: &str) -> Self {
        Self {
            kind,
            x: None,
            y: None,
            series: None,
            lat: None,
            lon: None,
            title: title.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VizError {
    NoRows,
    MissingColumn(String),
    NonNumeric { column: String, row: usize },
    WrongKind(VizKind),
    NoValidCoordinates { skipped: usize },
}

impl fmt::Display for VizError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VizError::NoRows => f.write_str("result has no rows to draw"),
            VizError::MissingColumn(c) => write!(f, "column '{c}' is not in the result"),
            VizError::NonNumeric { column, row } => write!(f, "column '{column}' is not numeric at row {row}"),
            VizError::WrongKind(k) => write!(f, "'{}' is not valid for this renderer", k.as_str()),
            VizError::NoValidCoordinates { skipped } => {
                write!(f, "no row has valid coordinates ({skipped} skipped)")
            }
        }
    }
}

pub(crate) fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Fixed two-decimal coordinates keep output byte-stable.
pub(crate) fn fmt2(v: f64) -> String {
    alloc::format!("{:.2}", v)
}
