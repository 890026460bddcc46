use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use super::{normalize_term, KnowledgeError};

/// Half-open timestamp interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub name: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl DateWindow {
    pub fn contains(&self, t: NaiveDateTime) -> bool {
        t >= self.start && t < self.end
    }

    /// `checkin_time >= '..' AND checkin_time < '..'`
    pub fn predicate(&self, column: &str) -> String {
        format!(
            "{column} >= '{}' AND {column} < '{}'",
            self.start.format("%Y-%m-%d %H:%M:%S"),
            self.end.format("%Y-%m-%d %H:%M:%S")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WindowRule {
    /// A single day fixed by month and day.
    Fixed { month: u32, day: u32 },
    /// The `n`th weekday of a month; negative `n` counts from the end.
    NthWeekday { month: u32, weekday: Weekday, n: i8 },
    /// From start to end, wrapping into the next year when end precedes start.
    Season { start_month: u32, start_day: u32, end_month: u32, end_day: u32 },
}

impl WindowRule {
    fn resolve(&self, year: i32) -> Option<(NaiveDate, NaiveDate)> {
        match *self {
            WindowRule::Fixed { month, day } => {
                let d = NaiveDate::from_ymd_opt(year, month, day)?;
                Some((d, d.succ_opt()?))
            }
            WindowRule::NthWeekday { month, weekday, n } => {
                let d = if n > 0 {
                    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n as u8)?
                } else if n < 0 {
                    let first_next = if month == 12 {
                        NaiveDate::from_ymd_opt(year + 1, 1, 1)?
                    } else {
                        NaiveDate::from_ymd_opt(year, month + 1, 1)?
                    };
                    let mut d = first_next.pred_opt()?;
                    while d.weekday() != weekday {
                        d = d.pred_opt()?;
                    }
                    let back = (i64::from(-n) - 1) * 7;
                    let d = d - chrono::Duration::days(back);
                    if d.month() != month {
                        return None;
                    }
                    d
                } else {
                    return None;
                };
                Some((d, d.succ_opt()?))
            }
            WindowRule::Season { start_month, start_day, end_month, end_day } => {
                let start = NaiveDate::from_ymd_opt(year, start_month, start_day)?;
                let mut end = NaiveDate::from_ymd_opt(year, end_month, end_day)?;
                if end <= start {
                    end = NaiveDate::from_ymd_opt(year + 1, end_month, end_day)?;
                }
                Some((start, end))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedWindow {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub rule: WindowRule,
}

/// Hour-of-day interval `[start_hour, end_hour)`, wrapping past midnight
/// when `end_hour < start_hour`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub name: String,
    pub start_hour: u32,
    pub end_hour: u32,
}

impl HourWindow {
    pub fn contains(&self, hour: u32) -> bool {
        if self.start_hour <= self.end_hour {
            hour >= self.start_hour && hour < self.end_hour
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }

    pub fn predicate(&self, hour_expr: &str) -> String {
        if self.start_hour <= self.end_hour {
            format!("{hour_expr} >= {} AND {hour_expr} < {}", self.start_hour, self.end_hour)
        } else {
            format!("({hour_expr} >= {} OR {hour_expr} < {})", self.start_hour, self.end_hour)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    /// Inclusive `[first, last]` year range accepted by lookups.
    pub years: [i32; 2],
    pub windows: Vec<NamedWindow>,
    #[serde(default)]
    pub hour_windows: Vec<HourWindow>,
}

impl Calendar {
    pub fn from_json(json: &str) -> Result<Self, KnowledgeError> {
        let cal: Calendar =
            serde_json::from_str(json).map_err(|e| KnowledgeError::Invalid(format!("holidays: {e}")))?;
        if cal.years[0] > cal.years[1] {
            return Err(KnowledgeError::Invalid("holidays: empty year range".into()));
        }
        for w in &cal.windows {
            for y in cal.years[0]..=cal.years[1] {
                if w.rule.resolve(y).is_none() {
                    return Err(KnowledgeError::Invalid(format!("holidays: '{}' has no date in {y}", w.name)));
                }
            }
        }
        for h in &cal.hour_windows {
            if h.start_hour > 23 || h.end_hour > 24 || h.start_hour == h.end_hour {
                return Err(KnowledgeError::Invalid(format!("holidays: bad hour window '{}'", h.name)));
            }
        }
        Ok(cal)
    }

    fn find(&self, name: &str) -> Option<&NamedWindow> {
        let key = normalize_term(name);
        self.windows
            .iter()
            .find(|w| normalize_term(&w.name) == key || w.aliases.iter().any(|a| normalize_term(a) == key))
    }

    pub fn window(&self, name: &str, year: i32) -> Result<DateWindow, KnowledgeError> {
        let w = self.find(name).ok_or_else(|| KnowledgeError::UnknownWindow(name.into()))?;
        let [min, max] = self.years;
        if year < min || year > max {
            return Err(KnowledgeError::YearOutOfRange { year, min, max });
        }
        let (start, end) = w
            .rule
            .resolve(year)
            .ok_or_else(|| KnowledgeError::Invalid(format!("'{}' has no date in {year}", w.name)))?;
        Ok(DateWindow {
            name: w.name.clone(),
            start: start.and_hms_opt(0, 0, 0).expect("midnight"),
            end: end.and_hms_opt(0, 0, 0).expect("midnight"),
        })
    }

    pub fn hour_window(&self, name: &str) -> Result<&HourWindow, KnowledgeError> {
        let key = normalize_term(name);
        self.hour_windows
            .iter()
            .find(|h| normalize_term(&h.name) == key)
            .ok_or_else(|| KnowledgeError::UnknownWindow(name.into()))
    }

    pub fn window_names(&self) -> impl Iterator<Item = &str> {
        self.windows.iter().map(|w| w.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::super::KnowledgeBase;
    use super::*;
    use chrono::NaiveDate;

    fn ts(y: i32, m: u32, d: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    /// Fourth Thursday found by scanning the days of November.
    fn fourth_thursday(year: i32) -> NaiveDate {
        (1..=30)
            .map(|d| NaiveDate::from_ymd_opt(year, 11, d).unwrap())
            .filter(|d| d.weekday() == Weekday::Thu)
            .nth(3)
            .unwrap()
    }

    #[test]
    fn thanksgiving_matches_scan() {
        let kb = KnowledgeBase::builtin();
        for year in [2012, 2013] {
            let w = kb.lookup_window("Thanksgiving", year).unwrap();
            let d = fourth_thursday(year);
            assert_eq!(w.start, d.and_hms_opt(0, 0, 0).unwrap());
            assert_eq!(w.end, d.succ_opt().unwrap().and_hms_opt(0, 0, 0).unwrap());
        }
        assert_eq!(kb.lookup_window("thanksgiving", 2012).unwrap().start, ts(2012, 11, 22));
    }

    #[test]
    fn fixed_and_season_windows() {
        let kb = KnowledgeBase::builtin();
        let nye = kb.lookup_window("New Year\u{2019}s Eve", 2012).unwrap();
        assert_eq!((nye.start, nye.end), (ts(2012, 12, 31), ts(2013, 1, 1)));
        let summer = kb.lookup_window("summer", 2012).unwrap();
        assert_eq!((summer.start, summer.end), (ts(2012, 6, 1), ts(2012, 9, 1)));
        let winter = kb.lookup_window("winter", 2012).unwrap();
        assert_eq!((winter.start, winter.end), (ts(2012, 12, 1), ts(2013, 3, 1)));
        let memorial = kb.lookup_window("memorial day", 2012).unwrap();
        assert_eq!(memorial.start, ts(2012, 5, 28));
        let labor = kb.lookup_window("labor day", 2012).unwrap();
        assert_eq!(labor.start, ts(2012, 9, 3));
    }

    #[test]
    fn window_errors() {
        let kb = KnowledgeBase::builtin();
        assert_eq!(
            kb.lookup_window("festivus", 2012).unwrap_err(),
            KnowledgeError::UnknownWindow("festivus".into())
        );
        assert!(matches!(
            kb.lookup_window("summer", 1999),
            Err(KnowledgeError::YearOutOfRange { year: 1999, .. })
        ));
    }

    #[test]
    fn predicate_is_half_open() {
        let kb = KnowledgeBase::builtin();
        let w = kb.lookup_window("thanksgiving", 2012).unwrap();
        assert_eq!(
            w.predicate("checkin_time"),
            "checkin_time >= '2012-11-22 00:00:00' AND checkin_time < '2012-11-23 00:00:00'"
        );
        assert!(w.contains(ts(2012, 11, 22)));
        assert!(!w.contains(ts(2012, 11, 23)));
    }

    #[test]
    fn hour_windows() {
        let kb = KnowledgeBase::builtin();
        let morning = kb.calendar.hour_window("morning").unwrap();
        assert_eq!((morning.start_hour, morning.end_hour), (6, 12));
        let evening = kb.calendar.hour_window("evening").unwrap();
        assert_eq!((evening.start_hour, evening.end_hour), (18, 24));
        let late = kb.calendar.hour_window("late night").unwrap();
        assert!(late.contains(23) && late.contains(0) && late.contains(3));
        assert!(!late.contains(4) && !late.contains(21));
        assert_eq!(late.predicate("h"), "(h >= 22 OR h < 4)");
    }

    #[test]
    fn every_window_is_nonempty() {
        let kb = KnowledgeBase::builtin();
        for name in kb.calendar.window_names() {
            for year in 2012..=2013 {
                let w = kb.lookup_window(name, year).unwrap();
                assert!(w.start < w.end, "{name} {year}");
            }
        }
    }
}
