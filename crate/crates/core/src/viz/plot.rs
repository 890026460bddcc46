use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{escape_xml, fmt2, VisualizationSpec, VizError, VizKind};
use crate::value::ResultTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;
const Y_TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRender {
    pub svg: String,
    /// `(series name, element count)` in drawing order.
    pub series: Vec<(String, usize)>,
    /// Number of x-axis ticks, one per distinct x value.
    pub ticks: usize,
}

fn column(table: &ResultTable, name: Option<&str>, fallback: usize) -> Result<usize, VizError> {
    match name {
        Some(n) => table.column_index(n).ok_or_else(|| VizError::MissingColumn(n.into())),
        None if fallback < table.columns.len() => Ok(fallback),
        None => Err(VizError::MissingColumn(alloc::format!("#{fallback}"))),
    }
}

/// Render a line or bar chart as a standalone SVG document.
pub fn render_plot(spec: &VisualizationSpec, table: &ResultTable) -> Result<PlotRender, VizError> {
    if !matches!(spec.kind, VizKind::Line | VizKind::Bar) {
        return Err(VizError::WrongKind(spec.kind));
    }
    if table.rows.is_empty() {
        return Err(VizError::NoRows);
    }
    let xi = column(table, spec.x.as_deref(), 0)?;
    let yi = column(table, spec.y.as_deref(), 1)?;
    let si = match spec.series.as_deref() {
        Some(s) => Some(table.column_index(s).ok_or_else(|| VizError::MissingColumn(s.into()))?),
        None => None,
    };

    let mut xs: Vec<String> = Vec::with_capacity(table.rows.len());
    let mut ys: Vec<f64> = Vec::with_capacity(table.rows.len());
    let mut ss: Vec<String> = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        xs.push(row.get(xi).map(|v| v.to_field()).unwrap_or_default());
        let y = row.get(yi).and_then(|v| v.as_f64()).filter(|y| y.is_finite());
        ys.push(y.ok_or_else(|| VizError::NonNumeric {
            column: table.columns[yi].clone(),
            row: r,
        })?);
        ss.push(si.and_then(|i| row.get(i)).map(|v| v.to_field()).unwrap_or_default());
    }

    let mut distinct_x: Vec<&str> = Vec::new();
    for x in &xs {
        if !distinct_x.contains(&x.as_str()) {
            distinct_x.push(x);
        }
    }
    let mut series_names: Vec<&str> = Vec::new();
    for s in &ss {
        if !series_names.contains(&s.as_str()) {
            series_names.push(s);
        }
    }

    let y_max = ys.iter().copied().fold(0.0_f64, f64::max);
    let y_min = ys.iter().copied().fold(0.0_f64, f64::min);
    let span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sy = |y: f64| TOP + plot_h - (y - y_min) / span * plot_h;
    let slots = match spec.kind {
        VizKind::Line => distinct_x.len(),
        _ => xs.len(),
    };
    let slot_w = plot_w / slots as f64;
    let slot_x = |slot: usize| LEFT + slot_w * (slot as f64 + 0.5);
    let x_slot = |x: &str| distinct_x.iter().position(|d| *d == x).unwrap_or(0);

    let x_label = escape_xml(&table.columns[xi]);
    let y_label = escape_xml(&table.columns[yi]);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         data-kind=\"{kind}\" font-family=\"sans-serif\" font-size=\"11\">",
        w = WIDTH,
        h = HEIGHT,
        kind = spec.kind.as_str()
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        svg,
        "<text class=\"title\" x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        fmt2(WIDTH / 2.0),
        escape_xml(&spec.title)
    );
    let _ = writeln!(
        svg,
        "<line class=\"axis\" x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>\n\
         <line class=\"axis\" x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"#333\"/>",
        l = fmt2(LEFT),
        r = fmt2(WIDTH - RIGHT),
        t = fmt2(TOP),
        b = fmt2(TOP + plot_h)
    );
    for k in 0..=Y_TICKS {
        let v = y_min + span * k as f64 / Y_TICKS as f64;
        let _ = writeln!(
            svg,
            "<g class=\"ytick\"><line x1=\"{l}\" y1=\"{y}\" x2=\"{r}\" y2=\"{y}\" stroke=\"#eee\"/>\
             <text x=\"{tx}\" y=\"{y}\" text-anchor=\"end\" dy=\"4\">{v}</text></g>",
            l = fmt2(LEFT),
            r = fmt2(WIDTH - RIGHT),
            y = fmt2(sy(v)),
            tx = fmt2(LEFT - 6.0),
            v = trim_number(v)
        );
    }
    for (i, x) in distinct_x.iter().enumerate() {
        let slot = match spec.kind {
            VizKind::Line => i,
            _ => xs.iter().position(|v| v == x).unwrap_or(0),
        };
        let px = fmt2(slot_x(slot));
        let _ = writeln!(
            svg,
            "<g class=\"tick\"><line x1=\"{px}\" y1=\"{b}\" x2=\"{px}\" y2=\"{b2}\" stroke=\"#333\"/>\
             <text x=\"{px}\" y=\"{ty}\" text-anchor=\"end\" transform=\"rotate(-40 {px} {ty})\">{label}</text></g>",
            b = fmt2(TOP + plot_h),
            b2 = fmt2(TOP + plot_h + 4.0),
            ty = fmt2(TOP + plot_h + 14.0),
            label = escape_xml(x)
        );
    }
    let _ = writeln!(
        svg,
        "<text class=\"xlabel\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text class=\"ylabel\" x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        fmt2(LEFT + plot_w / 2.0),
        fmt2(HEIGHT - 6.0),
        fmt2(TOP + plot_h / 2.0),
        fmt2(TOP + plot_h / 2.0)
    );

    let mut series = Vec::new();
    for (k, name) in series_names.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let members: Vec<usize> = (0..xs.len()).filter(|&r| ss[r] == *name).collect();
        match spec.kind {
            VizKind::Line => {
                let mut d = String::new();
                for (n, &r) in members.iter().enumerate() {
                    let _ = write!(
                        d,
                        "{}{},{}",
                        if n == 0 { "M" } else { " L" },
                        fmt2(slot_x(x_slot(&xs[r]))),
                        fmt2(sy(ys[r]))
                    );
                }
                let _ = writeln!(
                    svg,
                    "<path class=\"series\" data-series=\"{}\" data-points=\"{}\" d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
                    escape_xml(name),
                    members.len()
                );
            }
            _ => {
                for &r in &members {
                    let top = sy(ys[r].max(0.0));
                    let base = sy(ys[r].min(0.0));
                    let _ = writeln!(
                        svg,
                        "<rect class=\"bar\" data-series=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"><title>{}: {}</title></rect>",
                        escape_xml(name),
                        fmt2(LEFT + slot_w * r as f64 + slot_w * 0.1),
                        fmt2(top),
                        fmt2(slot_w * 0.8),
                        fmt2(base - top),
                        escape_xml(&xs[r]),
                        trim_number(ys[r])
                    );
                }
            }
        }
        series.push((String::from(*name), members.len()));
    }
    if series_names.len() > 1 {
        for (k, name) in series_names.iter().enumerate() {
            let y = TOP + 4.0 + 14.0 * k as f64;
            let _ = writeln!(
                svg,
                "<g class=\"legend\"><rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\
                 <text x=\"{}\" y=\"{}\">{}</text></g>",
                fmt2(WIDTH - RIGHT - 150.0),
                fmt2(y),
                PALETTE[k % PALETTE.len()],
                fmt2(WIDTH - RIGHT - 136.0),
                fmt2(y + 9.0),
                escape_xml(name)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(PlotRender {
        svg,
        series,
        ticks: distinct_x.len(),
    })
}

fn trim_number(v: f64) -> String {
    if v == libm::trunc(v) && libm::fabs(v) < 1e15 {
        alloc::format!("{}", v as i64)
    } else {
        alloc::format!("{:.2}", v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;
    use alloc::vec;

    fn hourly() -> ResultTable {
        ResultTable::new(
            vec!["hour".into(), "checkins".into()],
            (0..24).map(|h| vec![Value::Integer(h), Value::Integer(100 + h * 3)]).collect(),
        )
    }

    #[test]
    fn line_has_one_vertex_per_row() {
        let spec = VisualizationSpec::plot(VizKind::Line, "hour", "checkins", "Hourly check-ins");
        let out = render_plot(&spec, &hourly()).unwrap();
        assert_eq!(out.svg.matches("<path ").count(), 1);
        let d = out.svg.split(" d=\"").nth(1).unwrap();
        let d = &d[..d.find('"').unwrap()];
        assert_eq!(d.matches('M').count() + d.matches('L').count(), 24);
        assert_eq!(out.ticks, 24);
        assert!(out.svg.contains(">hour</text>") && out.svg.contains(">checkins</text>"));
    }

    #[test]
    fn one_bar_one_rect() {
        let t = ResultTable::new(vec!["category_name".into(), "n".into()], vec![vec!["Bar".into(), 3i64.into()]]);
        let out = render_plot(&VisualizationSpec::plot(VizKind::Bar, "category_name", "n", ""), &t).unwrap();
        assert_eq!(out.svg.matches("<rect class=\"bar\"").count(), 1);
    }

    #[test]
    fn twelve_months_twelve_ticks() {
        let rows = (1..=12)
            .map(|m| vec![Value::Text(alloc::format!("2012-{m:02}")), Value::Integer(m)])
            .collect();
        let t = ResultTable::new(vec!["month".into(), "n".into()], rows);
        let out = render_plot(&VisualizationSpec::plot(VizKind::Line, "month", "n", ""), &t).unwrap();
        assert_eq!(out.svg.matches("<g class=\"tick\">").count(), 12);
    }

    #[test]
    fn series_split() {
        let rows = vec![
            vec!["2012-04".into(), "Bar".into(), 1i64.into()],
            vec!["2012-05".into(), "Bar".into(), 2i64.into()],
            vec!["2012-04".into(), "Nightclub".into(), 3i64.into()],
        ];
        let t = ResultTable::new(vec!["month".into(), "category_name".into(), "n".into()], rows);
        let mut spec = VisualizationSpec::plot(VizKind::Line, "month", "n", "");
        spec.series = Some("category_name".into());
        let out = render_plot(&spec, &t).unwrap();
        assert_eq!(out.series, vec![("Bar".into(), 2), ("Nightclub".into(), 1)]);
        assert_eq!(out.svg.matches("<path ").count(), 2);
    }

    #[test]
    fn errors() {
        let t = ResultTable::new(vec!["a".into(), "b".into()], vec![vec!["x".into(), "y".into()]]);
        let spec = VisualizationSpec::plot(VizKind::Bar, "a", "b", "");
        assert_eq!(
            render_plot(&spec, &t).unwrap_err(),
            VizError::NonNumeric {
                column: "b".into(),
                row: 0
            }
        );
        let spec = VisualizationSpec::plot(VizKind::Bar, "a", "zz", "");
        assert_eq!(render_plot(&spec, &t).unwrap_err(), VizError::MissingColumn("zz".into()));
        let empty = ResultTable::new(vec!["a".into(), "b".into()], vec![]);
        assert_eq!(render_plot(&VisualizationSpec::plot(VizKind::Line, "a", "b", ""), &empty).unwrap_err(), VizError::NoRows);
    }

    #[test]
    fn deterministic() {
        let spec = VisualizationSpec::plot(VizKind::Line, "hour", "checkins", "<&>");
        assert_eq!(render_plot(&spec, &hourly()).unwrap().svg, render_plot(&spec, &hourly()).unwrap().svg);
        assert!(render_plot(&spec, &hourly()).unwrap().svg.contains("&lt;&amp;&gt;"));
    }
}
