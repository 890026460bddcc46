use serde::{Deserialize, Serialize};

use super::KnowledgeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Daypart {
    LateNight,
    EarlyMorning,
    Morning,
    Midday,
    Afternoon,
    Evening,
}

impl Daypart {
    pub const ALL: [Daypart; 6] = [
        Daypart::LateNight,
        Daypart::EarlyMorning,
        Daypart::Morning,
        Daypart::Midday,
        Daypart::Afternoon,
        Daypart::Evening,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Daypart::LateNight => "Late Night",
            Daypart::EarlyMorning => "Early Morning",
            Daypart::Morning => "Morning",
            Daypart::Midday => "Midday",
            Daypart::Afternoon => "Afternoon",
            Daypart::Evening => "Evening",
        }
    }

    /// Inclusive hour range.
    pub fn hours(self) -> (u32, u32) {
        match self {
            Daypart::LateNight => (0, 4),
            Daypart::EarlyMorning => (5, 7),
            Daypart::Morning => (8, 11),
            Daypart::Midday => (12, 15),
            Daypart::Afternoon => (16, 18),
            Daypart::Evening => (19, 23),
        }
    }

    /// e.g. `Late Night (0–4)`
    pub fn label(self) -> alloc::string::String {
        let (a, b) = self.hours();
        alloc::format!("{} ({a}\u{2013}{b})", self.name())
    }
}

pub fn daypart(hour: i64) -> Result<Daypart, KnowledgeError> {
    Ok(match hour {
        0..=4 => Daypart::LateNight,
        5..=7 => Daypart::EarlyMorning,
        8..=11 => Daypart::Morning,
        12..=15 => Daypart::Midday,
        16..=18 => Daypart::Afternoon,
        19..=23 => Daypart::Evening,
        _ => return Err(KnowledgeError::HourOutOfRange(hour)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(daypart(3).unwrap().name(), "Late Night");
        assert_eq!(daypart(8).unwrap().name(), "Morning");
        assert_eq!(daypart(23).unwrap().name(), "Evening");
        assert_eq!(daypart(24), Err(KnowledgeError::HourOutOfRange(24)));
        assert_eq!(daypart(-1), Err(KnowledgeError::HourOutOfRange(-1)));
    }

    #[test]
    fn buckets_partition_the_day() {
        let mut seen = [0u8; 24];
        for part in Daypart::ALL {
            let (a, b) = part.hours();
            for h in a..=b {
                seen[h as usize] += 1;
                assert_eq!(daypart(i64::from(h)).unwrap(), part);
            }
        }
        assert!(seen.iter().all(|&n| n == 1));
    }

    proptest! {
        #[test]
        fn total_on_valid_hours(h in 0i64..24) {
            let part = daypart(h).unwrap();
            let (a, b) = part.hours();
            prop_assert!(i64::from(a) <= h && h <= i64::from(b));
        }

        #[test]
        fn rejects_invalid_hours(h in prop_oneof![i64::MIN..0, 24..i64::MAX]) {
            prop_assert!(daypart(h).is_err());
        }
    }
}
