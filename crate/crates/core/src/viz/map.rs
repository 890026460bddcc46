use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{escape_xml, fmt2, VisualizationSpec, VizError, VizKind};
use crate::value::ResultTable;

/// Heatmap grid cells per side.
pub const DEFAULT_GRID: usize = 64;
const CANVAS: f64 = 640.0;
const PAD: f64 = 40.0;
/// Extent used for an axis whose values are all equal.
const MIN_EXTENT: f64 = 1e-3;
const HEAT_COLOR: &str = "#d7301f";

#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    pub size: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// Row-major counts; row 0 is the southernmost band.
    pub counts: Vec<u32>,
}

impl HeatGrid {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// `(row, col, count)` of the fullest cell, lowest index on ties.
    pub fn hotspot(&self) -> Option<(usize, usize, u32)> {
        let mut best: Option<(usize, u32)> = None;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > 0 && best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        best.map(|(i, c)| (i / self.size, i % self.size, c))
    }

    pub fn cell_bounds(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let dlat = (self.lat_max - self.lat_min) / self.size as f64;
        let dlon = (self.lon_max - self.lon_min) / self.size as f64;
        (
            self.lat_min + dlat * row as f64,
            self.lat_min + dlat * (row + 1) as f64,
            self.lon_min + dlon * col as f64,
            self.lon_min + dlon * (col + 1) as f64,
        )
    }
}

fn extent(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < MIN_EXTENT {
        let mid = (lo + hi) / 2.0;
        (mid - MIN_EXTENT / 2.0, mid + MIN_EXTENT / 2.0)
    } else {
        (lo, hi)
    }
}

fn cell(v: f64, lo: f64, hi: f64, size: usize) -> usize {
    let idx = libm::floor((v - lo) / (hi - lo) * size as f64);
    if idx < 0.0 {
        0
    } else {
        (idx as usize).min(size - 1)
    }
}

/// Bin `(lat, lon)` points into a `size`×`size` grid over their bounding box.
pub fn bin_points(points: &[(f64, f64)], size: usize) -> Option<HeatGrid> {
    if points.is_empty() || size == 0 {
        return None;
    }
    let (mut lat_lo, mut lat_hi, mut lon_lo, mut lon_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(lat, lon) in points {
        lat_lo = lat_lo.min(lat);
        lat_hi = lat_hi.max(lat);
        lon_lo = lon_lo.min(lon);
        lon_hi = lon_hi.max(lon);
    }
    let (lat_min, lat_max) = extent(lat_lo, lat_hi);
    let (lon_min, lon_max) = extent(lon_lo, lon_hi);
    let mut counts = vec![0u32; size * size];
    for &(lat, lon) in points {
        let r = cell(lat, lat_min, lat_max, size);
        let c = cell(lon, lon_min, lon_max, size);
        counts[r * size + c] += 1;
    }
    Some(HeatGrid {
        size,
        lat_min,
        lat_max,
        lon_min,
        lon_max,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRender {
    pub html: String,
    pub accepted: usize,
    pub skipped: usize,
    /// Present in heatmap mode.
    pub grid: Option<HeatGrid>,
}

fn find_column(table: &ResultTable, explicit: Option<&str>, defaults: &[&str]) -> Result<usize, VizError> {
    if let Some(name) = explicit {
        return table.column_index(name).ok_or_else(|| VizError::MissingColumn(name.into()));
    }
    defaults
        .iter()
        .find_map(|d| table.column_index(d))
        .ok_or_else(|| VizError::MissingColumn(defaults[0].into()))
}

/// Render a point map or density heatmap as a standalone HTML document.
/// Rows with missing or out-of-range coordinates are skipped and counted.
pub fn render_map(spec: &VisualizationSpec, table: &ResultTable, grid_size: usize) -> Result<MapRender, VizError> {
    if !spec.kind.is_map() {
        return Err(VizError::WrongKind(spec.kind));
    }
    if table.rows.is_empty() {
        return Err(VizError::NoRows);
    }
    let lat_i = find_column(table, spec.lat.as_deref(), &["latitude", "lat"])?;
    let lon_i = find_column(table, spec.lon.as_deref(), &["longitude", "lon", "lng"])?;
    let mut points = Vec::with_capacity(table.rows.len());
    let mut skipped = 0;
    for row in &table.rows {
        let lat = row.get(lat_i).and_then(|v| v.as_f64());
        let lon = row.get(lon_i).and_then(|v| v.as_f64());
        match (lat, lon) {
            (Some(a), Some(o)) if (-90.0..=90.0).contains(&a) && (-180.0..=180.0).contains(&o) => points.push((a, o)),
            _ => skipped += 1,
        }
    }
    if points.is_empty() {
        return Err(VizError::NoValidCoordinates { skipped });
    }
    let size = grid_size.max(1);
    let grid = bin_points(&points, size).expect("points is non-empty");
    let span = CANVAS - 2.0 * PAD;
    let px = |lon: f64| PAD + (lon - grid.lon_min) / (grid.lon_max - grid.lon_min) * span;
    let py = |lat: f64| PAD + (grid.lat_max - lat) / (grid.lat_max - grid.lat_min) * span;

    let mut body = String::new();
    let _ = writeln!(
        body,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{c}\" height=\"{c}\" viewBox=\"0 0 {c} {c}\" font-family=\"sans-serif\" font-size=\"10\">",
        c = CANVAS
    );
    let _ = writeln!(
        body,
        "<rect x=\"{p}\" y=\"{p}\" width=\"{s}\" height=\"{s}\" fill=\"#f7f7f7\" stroke=\"#999\"/>",
        p = fmt2(PAD),
        s = fmt2(span)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let lon = grid.lon_min + (grid.lon_max - grid.lon_min) * f;
        let lat = grid.lat_min + (grid.lat_max - grid.lat_min) * f;
        let _ = writeln!(
            body,
            "<text class=\"axis-lon\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.4}</text>\
             <text class=\"axis-lat\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>",
            fmt2(px(lon)),
            fmt2(CANVAS - PAD + 14.0),
            lon,
            fmt2(PAD - 4.0),
            fmt2(py(lat) + 3.0),
            lat
        );
    }
    match spec.kind {
        VizKind::Points => {
            for &(lat, lon) in &points {
                let _ = writeln!(
                    body,
                    "<circle class=\"marker\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.7\" data-lat=\"{lat}\" data-lon=\"{lon}\"/>",
                    fmt2(px(lon)),
                    fmt2(py(lat))
                );
            }
        }
        _ => {
            let max = grid.counts.iter().copied().max().unwrap_or(1).max(1);
            let cell_w = span / size as f64;
            for r in 0..size {
                for c in 0..size {
                    let n = grid.counts[r * size + c];
                    if n == 0 {
                        continue;
                    }
                    let _ = writeln!(
                        body,
                        "<rect class=\"bin\" data-row=\"{r}\" data-col=\"{c}\" data-count=\"{n}\" x=\"{}\" y=\"{}\" width=\"{w}\" height=\"{w}\" fill=\"{HEAT_COLOR}\" fill-opacity=\"{:.3}\"/>",
                        fmt2(PAD + cell_w * c as f64),
                        fmt2(PAD + span - cell_w * (r + 1) as f64),
                        f64::from(n) / f64::from(max),
                        w = fmt2(cell_w)
                    );
                }
            }
        }
    }
    body.push_str("</svg>\n");

    let title = escape_xml(&spec.title);
    let mut html = String::new();
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n\
         <style>body{{font-family:sans-serif;margin:16px}}p.meta{{color:#555}}</style>\n</head>\n<body>\n\
         <h1>{title}</h1>\n<p class=\"meta\" data-kind=\"{kind}\" data-accepted=\"{acc}\" data-skipped=\"{skipped}\">\
         {kind}: {acc} rows drawn, {skipped} skipped</p>\n{body}</body>\n</html>\n",
        kind = spec.kind.as_str(),
        acc = points.len(),
    );
    Ok(MapRender {
        html,
        accepted: points.len(),
        skipped,
        grid: (spec.kind == VizKind::Heatmap).then_some(grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn coords(points: &[(f64, f64)]) -> ResultTable {
        ResultTable::new(
            vec!["latitude".into(), "longitude".into()],
            points.iter().map(|&(a, o)| vec![Value::Real(a), Value::Real(o)]).collect(),
        )
    }

    #[test]
    fn one_point_one_marker() {
        let out = render_map(&VisualizationSpec::map(VizKind::Points, "p"), &coords(&[(40.7, -73.9)]), 64).unwrap();
        assert_eq!(out.html.matches("class=\"marker\"").count(), 1);
        assert!(out.html.contains("data-lat=\"40.7\" data-lon=\"-73.9\""));
    }

    #[test]
    fn heatmap_conserves_rows_and_skips_invalid() {
        let mut pts: Vec<(f64, f64)> = (0..50).map(|i| (40.6 + i as f64 * 0.003, -74.0 + i as f64 * 0.002)).collect();
        pts.push((95.0, 0.0));
        pts.push((0.0, 200.0));
        let out = render_map(&VisualizationSpec::map(VizKind::Heatmap, "h"), &coords(&pts), 64).unwrap();
        assert_eq!((out.accepted, out.skipped), (50, 2));
        let sum: u64 = out
            .html
            .split("data-count=\"")
            .skip(1)
            .map(|s| s[..s.find('"').unwrap()].parse::<u64>().unwrap())
            .sum();
        assert_eq!(sum, 50);
        assert_eq!(out.grid.unwrap().total(), 50);
    }

    #[test]
    fn errors() {
        let empty = coords(&[]);
        assert_eq!(render_map(&VisualizationSpec::map(VizKind::Points, ""), &empty, 64).unwrap_err(), VizError::NoRows);
        let bad = coords(&[(100.0, 0.0)]);
        assert_eq!(
            render_map(&VisualizationSpec::map(VizKind::Heatmap, ""), &bad, 64).unwrap_err(),
            VizError::NoValidCoordinates { skipped: 1 }
        );
        let t = ResultTable::new(vec!["x".into()], vec![vec![Value::Integer(1)]]);
        assert_eq!(
            render_map(&VisualizationSpec::map(VizKind::Points, ""), &t, 64).unwrap_err(),
            VizError::MissingColumn("latitude".into())
        );
    }

    #[test]
    fn hotspot_is_densest_cell() {
        let mut pts = vec![(40.0, -74.0), (41.0, -73.0)];
        pts.extend(core::iter::repeat_n((40.5, -73.5), 5));
        let g = bin_points(&pts, 4).unwrap();
        let (r, c, n) = g.hotspot().unwrap();
        assert_eq!(n, 5);
        let (a, b, x, y) = g.cell_bounds(r, c);
        assert!(a <= 40.5 && 40.5 <= b && x <= -73.5 && -73.5 <= y);
    }
}
