//! Compact textual digests of executed results for the summary prompt.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::knowledge::{daypart, Daypart};
use crate::value::{ResultTable, Value};

/// Rows listed verbatim in a general digest.
pub const DIGEST_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub larger: String,
    pub larger_value: f64,
    pub smaller: String,
    pub smaller_value: f64,
}

impl Comparison {
    fn between(a: (&str, f64), b: (&str, f64)) -> Self {
        let ((l, lv), (s, sv)) = if a.1 >= b.1 { (a, b) } else { (b, a) };
        Self {
            larger: l.into(),
            larger_value: lv,
            smaller: s.into(),
            smaller_value: sv,
        }
    }

    pub fn difference(&self) -> f64 {
        self.larger_value - self.smaller_value
    }

    fn sentence(&self) -> String {
        if self.larger_value == self.smaller_value {
            format!("{} and {} are equal ({}).", self.larger, self.smaller, num(self.larger_value))
        } else {
            format!(
                "{} is larger: {} vs {} ({} more).",
                self.larger,
                num(self.larger_value),
                num(self.smaller_value),
                num(self.difference())
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaypartTotal {
    pub part: Daypart,
    pub total: f64,
    pub peak_hour: u32,
    pub peak_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DigestShape {
    Empty,
    Scalar { value: String },
    Hourly { dayparts: Vec<DaypartTotal>, peak_hour: u32, low_hour: u32 },
    Comparison(Comparison),
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDigest {
    pub text: String,
    pub shapes: Vec<DigestShape>,
}

impl ResultDigest {
    pub fn is_hourly(&self) -> bool {
        self.shapes.iter().any(|s| matches!(s, DigestShape::Hourly { .. }))
    }

    pub fn comparison(&self) -> Option<&Comparison> {
        self.shapes.iter().find_map(|s| match s {
            DigestShape::Comparison(c) => Some(c),
            _ => None,
        })
    }

    pub fn is_single_value(&self) -> bool {
        self.shapes.len() == 1 && matches!(self.shapes[0], DigestShape::Scalar { .. })
    }
}

fn num(v: f64) -> String {
    if v == libm::trunc(v) && libm::fabs(v) < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{:.2}", v)
    }
}

fn scalar(table: &ResultTable) -> Option<&Value> {
    (table.rows.len() == 1 && table.columns.len() == 1).then(|| &table.rows[0][0])
}

/// Last column after `skip` whose cells are all numeric.
fn measure_column(table: &ResultTable, skip: usize) -> Option<usize> {
    (0..table.columns.len())
        .rev()
        .filter(|&i| i != skip)
        .find(|&i| table.numeric_column(i).is_some())
}

fn hourly(table: &ResultTable) -> Option<DigestShape> {
    let hi = table.columns.iter().position(|c| c.to_ascii_lowercase().contains("hour"))?;
    let mi = measure_column(table, hi)?;
    let mut per_hour: Vec<(u32, f64)> = Vec::new();
    for row in &table.rows {
        let h = row.get(hi)?.as_f64()?;
        if h != libm::trunc(h) || !(0.0..=23.0).contains(&h) {
            return None;
        }
        per_hour.push((h as u32, row.get(mi)?.as_f64()?));
    }
    // two hours read as a comparison, not a profile
    if per_hour.len() < 3 {
        return None;
    }
    let mut dayparts: Vec<DaypartTotal> = Vec::new();
    for part in Daypart::ALL {
        let members: Vec<&(u32, f64)> = per_hour
            .iter()
            .filter(|(h, _)| daypart(i64::from(*h)).ok() == Some(part))
            .collect();
        let Some(peak) = members.iter().copied().fold(None::<&(u32, f64)>, |best, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        }) else {
            continue;
        };
        dayparts.push(DaypartTotal {
            part,
            total: members.iter().map(|(_, v)| v).sum(),
            peak_hour: peak.0,
            peak_value: peak.1,
        });
    }
    let peak = per_hour.iter().fold(per_hour[0], |b, c| if c.1 > b.1 { *c } else { b });
    let low = per_hour.iter().fold(per_hour[0], |b, c| if c.1 < b.1 { *c } else { b });
    Some(DigestShape::Hourly {
        dayparts,
        peak_hour: peak.0,
        low_hour: low.0,
    })
}

fn pair_comparison(table: &ResultTable) -> Option<Comparison> {
    if table.rows.len() == 2 && table.columns.len() >= 2 {
        let mi = measure_column(table, usize::MAX)?;
        let li = (0..table.columns.len()).find(|&i| i != mi)?;
        let a = (table.rows[0][li].to_field(), table.rows[0][mi].as_f64()?);
        let b = (table.rows[1][li].to_field(), table.rows[1][mi].as_f64()?);
        return Some(Comparison::between((&a.0, a.1), (&b.0, b.1)));
    }
    if table.rows.len() == 1 && table.columns.len() == 2 {
        let a = table.rows[0][0].as_f64()?;
        let b = table.rows[0][1].as_f64()?;
        return Some(Comparison::between((&table.columns[0], a), (&table.columns[1], b)));
    }
    None
}

fn table_text(out: &mut String, table: &ResultTable) {
    let _ = writeln!(out, "{}", table.columns.join(" | "));
    for row in table.rows.iter().take(DIGEST_ROWS) {
        let cells: Vec<String> = row.iter().map(Value::to_field).collect();
        let _ = writeln!(out, "{}", cells.join(" | "));
    }
    if table.rows.len() > DIGEST_ROWS {
        let _ = writeln!(out, "... {} more rows", table.rows.len() - DIGEST_ROWS);
    }
    if let Some(mi) = measure_column(table, usize::MAX) {
        let li = (0..table.columns.len()).find(|&i| i != mi);
        let values = table.numeric_column(mi).unwrap_or_default();
        let label = |r: usize| li.map_or_else(|| format!("row {}", r + 1), |i| table.rows[r][i].to_field());
        if let (Some(max_i), Some(min_i)) = (argmax(&values, true), argmax(&values, false)) {
            let _ = writeln!(
                out,
                "max {} = {} ({}); min = {} ({})",
                table.columns[mi],
                num(values[max_i]),
                label(max_i),
                num(values[min_i]),
                label(min_i)
            );
        }
    }
}

fn argmax(values: &[f64], largest: bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) if largest => v > values[b],
            Some(b) => v < values[b],
        };
        if better {
            best = Some(i);
        }
    }
    best
}

fn digest_one(out: &mut String, table: &ResultTable) -> DigestShape {
    if table.rows.is_empty() {
        out.push_str("no rows\n");
        return DigestShape::Empty;
    }
    if let Some(v) = scalar(table) {
        let _ = writeln!(out, "{} = {}", table.columns[0], v.to_field());
        return DigestShape::Scalar { value: v.to_field() };
    }
    if let Some(shape @ DigestShape::Hourly { .. }) = hourly(table) {
        if let DigestShape::Hourly { dayparts, peak_hour, low_hour } = &shape {
            out.push_str("Hour-of-day totals by daypart:\n");
            for d in dayparts {
                let _ = writeln!(
                    out,
                    "- {}: {} total, peak at {}:00 ({})",
                    d.part.label(),
                    num(d.total),
                    d.peak_hour,
                    num(d.peak_value)
                );
            }
            let _ = writeln!(out, "Busiest hour {peak_hour}:00; quietest hour {low_hour}:00.");
        }
        return shape;
    }
    if let Some(c) = pair_comparison(table) {
        table_text(out, table);
        let _ = writeln!(out, "{}", c.sentence());
        return DigestShape::Comparison(c);
    }
    table_text(out, table);
    DigestShape::Table
}

/// Digest labelled results. Two or more single-number results are compared
/// with each other; otherwise each result is digested on its own.
pub fn digest_results(results: &[(String, &ResultTable)]) -> ResultDigest {
    let mut text = String::new();
    let scalars: Vec<(&str, f64)> = results
        .iter()
        .filter_map(|(label, t)| scalar(t).and_then(Value::as_f64).map(|v| (label.as_str(), v)))
        .collect();
    if results.len() >= 2 && scalars.len() == results.len() {
        for (label, v) in &scalars {
            let _ = writeln!(text, "{label}: {}", num(*v));
        }
        let mut best = scalars[0];
        let mut worst = scalars[0];
        for s in &scalars[1..] {
            if s.1 > best.1 {
                best = *s;
            }
            if s.1 < worst.1 {
                worst = *s;
            }
        }
        let c = Comparison::between(best, worst);
        let _ = writeln!(text, "{}", c.sentence());
        return ResultDigest {
            text,
            shapes: alloc::vec![DigestShape::Comparison(c)],
        };
    }
    let mut shapes = Vec::new();
    for (label, table) in results {
        if results.len() > 1 {
            let _ = writeln!(text, "[{label}] {} rows", table.rows.len());
        }
        shapes.push(digest_one(&mut text, table));
    }
    ResultDigest { text, shapes }
}
