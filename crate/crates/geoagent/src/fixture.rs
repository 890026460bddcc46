//! Seeded synthetic check-in files in the source dataset layout.
//!
//! The generator plants the structure the benchmark questions probe: nightlife
//! and commuter hour profiles, boroughs, Central Park, JFK, gym clusters,
//! laundromats, pizza places, a New Year's Eve spike and a busy place tail.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use geoagent_core::llm::prompt_hash;

pub const DEFAULT_SEED: u64 = 20120403;
pub const DEFAULT_ROWS: usize = 5000;
pub const NYC_FILE: &str = "nyc.tsv";
pub const TOKYO_FILE: &str = "tokyo.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum City {
    Nyc,
    Tokyo,
}

#[derive(Debug, Clone, Copy)]
struct Area {
    lat: (f64, f64),
    lon: (f64, f64),
}

const fn area(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Area {
    Area {
        lat: (lat_min, lat_max),
        lon: (lon_min, lon_max),
    }
}

// NYC areas; the Brooklyn and Queens entries stay clear of their shared overlap.
const MIDTOWN: Area = area(40.7430, 40.7640, -73.9990, -73.9720);
const DOWNTOWN: Area = area(40.7020, 40.7290, -74.0150, -73.9780);
const UPTOWN: Area = area(40.7700, 40.8500, -73.9600, -73.9300);
const CENTRAL_PARK: Area = area(40.7660, 40.7990, -73.9800, -73.9500);
const BROOKLYN: Area = area(40.5800, 40.6900, -74.0300, -73.9700);
const QUEENS: Area = area(40.6700, 40.7900, -73.8300, -73.7200);
const BRONX: Area = area(40.8300, 40.9000, -73.9000, -73.8000);
const JFK: Area = area(40.6300, 40.6600, -73.8100, -73.7600);
const LAGUARDIA: Area = area(40.7680, 40.7840, -73.8850, -73.8600);

const SHINJUKU: Area = area(35.6860, 35.7040, 139.6920, 139.7140);
const SHIBUYA: Area = area(35.6520, 35.6690, 139.6920, 139.7090);
const MARUNOUCHI: Area = area(35.6740, 35.6900, 139.7550, 139.7750);
const TOKYO_WIDE: Area = area(35.5800, 35.8000, 139.5800, 139.8800);
const HANEDA: Area = area(35.5420, 35.5560, 139.7700, 139.7950);

#[derive(Debug, Clone, Copy)]
enum Hours {
    Night,
    Office,
    Coffee,
    Home,
    Commute,
    Meal,
    Park,
    Day,
    Late,
}

impl Hours {
    fn weights(self) -> [f64; 24] {
        let mut w = [0.0; 24];
        let set = |w: &mut [f64; 24], hours: &[(usize, f64)]| {
            for &(h, v) in hours {
                w[h] = v;
            }
        };
        match self {
            Hours::Night => set(&mut w, &[(0, 8.0), (1, 7.0), (2, 5.0), (3, 3.0), (4, 1.0), (17, 1.0), (18, 2.0), (19, 3.0), (20, 5.0), (21, 7.0), (22, 9.0), (23, 9.0)]),
            Hours::Office => set(&mut w, &[(7, 2.0), (8, 8.0), (9, 9.0), (10, 6.0), (11, 4.0), (12, 3.0), (13, 4.0), (14, 4.0), (15, 3.0), (16, 3.0), (17, 3.0), (18, 2.0), (19, 1.0)]),
            Hours::Coffee => set(&mut w, &[(6, 2.0), (7, 6.0), (8, 9.0), (9, 8.0), (10, 6.0), (11, 4.0), (12, 3.0), (13, 3.0), (14, 3.0), (15, 3.0), (16, 2.0), (17, 1.0), (18, 1.0)]),
            Hours::Home => set(&mut w, &[(0, 3.0), (1, 1.0), (6, 2.0), (7, 3.0), (8, 1.0), (17, 2.0), (18, 4.0), (19, 5.0), (20, 6.0), (21, 6.0), (22, 6.0), (23, 5.0)]),
            Hours::Commute => set(&mut w, &[(0, 1.0), (6, 2.0), (7, 6.0), (8, 10.0), (9, 6.0), (10, 2.0), (11, 2.0), (12, 2.0), (13, 2.0), (14, 2.0), (15, 2.0), (16, 3.0), (17, 7.0), (18, 9.0), (19, 5.0), (20, 3.0), (21, 2.0), (22, 2.0), (23, 1.0)]),
            Hours::Meal => set(&mut w, &[(11, 4.0), (12, 9.0), (13, 7.0), (14, 2.0), (17, 2.0), (18, 6.0), (19, 9.0), (20, 7.0), (21, 3.0)]),
            Hours::Park => set(&mut w, &[(6, 1.0), (7, 2.0), (8, 2.0), (9, 2.0), (10, 2.0), (11, 3.0), (12, 4.0), (13, 5.0), (14, 5.0), (15, 6.0), (16, 7.0), (17, 7.0), (18, 7.0), (19, 6.0), (20, 4.0), (21, 2.0)]),
            Hours::Day => set(&mut w, &[(8, 2.0), (9, 3.0), (10, 4.0), (11, 5.0), (12, 6.0), (13, 6.0), (14, 5.0), (15, 5.0), (16, 5.0), (17, 5.0), (18, 4.0), (19, 3.0), (20, 2.0), (21, 1.0)]),
            Hours::Late => set(&mut w, &[(0, 6.0), (1, 5.0), (2, 3.0), (3, 2.0), (5, 1.0), (6, 2.0), (7, 4.0), (8, 5.0), (9, 3.0), (12, 2.0), (18, 3.0), (19, 4.0), (20, 5.0), (21, 6.0), (22, 8.0), (23, 8.0)]),
        }
        w
    }
}

struct CategorySpec {
    name: &'static str,
    weight: f64,
    venues: usize,
    hours: Hours,
    areas: &'static [(Area, f64)],
}

const NYC_SPREAD: &[(Area, f64)] = &[
    (MIDTOWN, 3.0),
    (DOWNTOWN, 2.0),
    (UPTOWN, 2.0),
    (BROOKLYN, 3.0),
    (QUEENS, 2.0),
    (BRONX, 1.0),
];
const NYC_MANHATTAN: &[(Area, f64)] = &[(MIDTOWN, 4.0), (DOWNTOWN, 3.0), (UPTOWN, 1.0)];
const NYC_OUTER: &[(Area, f64)] = &[(BROOKLYN, 3.0), (QUEENS, 3.0), (BRONX, 1.0)];
const NYC_GYMS: &[(Area, f64)] = &[(MIDTOWN, 6.0), (DOWNTOWN, 1.0), (BROOKLYN, 1.0)];
const NYC_PARKS: &[(Area, f64)] = &[(CENTRAL_PARK, 5.0), (BROOKLYN, 1.0), (QUEENS, 1.0)];
const NYC_AIRPORTS: &[(Area, f64)] = &[(JFK, 3.0), (LAGUARDIA, 1.0)];
const NYC_CENTRAL: &[(Area, f64)] = &[(CENTRAL_PARK, 1.0)];

const NYC_CATEGORIES: &[CategorySpec] = &[
    CategorySpec { name: "Home (private)", weight: 11.0, venues: 160, hours: Hours::Home, areas: NYC_OUTER },
    CategorySpec { name: "Office", weight: 9.5, venues: 70, hours: Hours::Office, areas: NYC_MANHATTAN },
    CategorySpec { name: "Bar", weight: 8.0, venues: 60, hours: Hours::Night, areas: NYC_SPREAD },
    CategorySpec { name: "Subway", weight: 6.5, venues: 40, hours: Hours::Commute, areas: NYC_SPREAD },
    CategorySpec { name: "Coffee Shop", weight: 5.5, venues: 40, hours: Hours::Coffee, areas: NYC_MANHATTAN },
    CategorySpec { name: "Deli / Bodega", weight: 4.5, venues: 50, hours: Hours::Day, areas: NYC_SPREAD },
    CategorySpec { name: "Gym / Fitness Center", weight: 4.0, venues: 25, hours: Hours::Office, areas: NYC_GYMS },
    CategorySpec { name: "American Restaurant", weight: 3.5, venues: 35, hours: Hours::Meal, areas: NYC_SPREAD },
    CategorySpec { name: "Train Station", weight: 3.0, venues: 6, hours: Hours::Commute, areas: NYC_MANHATTAN },
    CategorySpec { name: "Nightclub", weight: 3.0, venues: 15, hours: Hours::Night, areas: NYC_MANHATTAN },
    CategorySpec { name: "Food & Drink Shop", weight: 3.0, venues: 30, hours: Hours::Day, areas: NYC_SPREAD },
    CategorySpec { name: "Park", weight: 3.0, venues: 12, hours: Hours::Park, areas: NYC_PARKS },
    CategorySpec { name: "Italian Restaurant", weight: 2.5, venues: 25, hours: Hours::Meal, areas: NYC_SPREAD },
    CategorySpec { name: "Neighborhood", weight: 2.5, venues: 20, hours: Hours::Day, areas: NYC_SPREAD },
    CategorySpec { name: "Building", weight: 2.5, venues: 25, hours: Hours::Office, areas: NYC_MANHATTAN },
    CategorySpec { name: "Café", weight: 2.0, venues: 20, hours: Hours::Coffee, areas: NYC_SPREAD },
    CategorySpec { name: "Music Venue", weight: 2.0, venues: 10, hours: Hours::Night, areas: NYC_SPREAD },
    CategorySpec { name: "Pizza Place", weight: 2.0, venues: 20, hours: Hours::Meal, areas: NYC_SPREAD },
    CategorySpec { name: "Chinese Restaurant", weight: 2.0, venues: 20, hours: Hours::Meal, areas: NYC_SPREAD },
    CategorySpec { name: "Mexican Restaurant", weight: 1.5, venues: 15, hours: Hours::Meal, areas: NYC_SPREAD },
    CategorySpec { name: "Bus Station", weight: 1.5, venues: 12, hours: Hours::Commute, areas: NYC_OUTER },
    CategorySpec { name: "Hotel", weight: 1.5, venues: 15, hours: Hours::Home, areas: NYC_MANHATTAN },
    CategorySpec { name: "Airport", weight: 1.5, venues: 4, hours: Hours::Day, areas: NYC_AIRPORTS },
    CategorySpec { name: "Clothing Store", weight: 1.5, venues: 20, hours: Hours::Day, areas: NYC_MANHATTAN },
    CategorySpec { name: "Drugstore / Pharmacy", weight: 1.2, venues: 15, hours: Hours::Day, areas: NYC_SPREAD },
    CategorySpec { name: "Laundry Service", weight: 1.0, venues: 12, hours: Hours::Day, areas: NYC_OUTER },
    CategorySpec { name: "Gym", weight: 1.0, venues: 8, hours: Hours::Office, areas: NYC_GYMS },
    CategorySpec { name: "Plaza", weight: 1.0, venues: 6, hours: Hours::Park, areas: NYC_CENTRAL },
];

const TOKYO_ANY: &[(Area, f64)] = &[(SHINJUKU, 3.0), (SHIBUYA, 3.0), (MARUNOUCHI, 2.0), (TOKYO_WIDE, 4.0)];
const TOKYO_CENTER: &[(Area, f64)] = &[(SHINJUKU, 3.0), (SHIBUYA, 2.0), (MARUNOUCHI, 3.0)];
const TOKYO_HOMES: &[(Area, f64)] = &[(TOKYO_WIDE, 1.0)];
const TOKYO_AIRPORT: &[(Area, f64)] = &[(HANEDA, 1.0)];

const TOKYO_CATEGORIES: &[CategorySpec] = &[
    CategorySpec { name: "Train Station", weight: 22.0, venues: 60, hours: Hours::Late, areas: TOKYO_ANY },
    CategorySpec { name: "Subway", weight: 8.0, venues: 40, hours: Hours::Late, areas: TOKYO_CENTER },
    CategorySpec { name: "Convenience Store", weight: 7.0, venues: 60, hours: Hours::Late, areas: TOKYO_ANY },
    CategorySpec { name: "Ramen / Noodle House", weight: 6.0, venues: 40, hours: Hours::Meal, areas: TOKYO_ANY },
    CategorySpec { name: "Japanese Restaurant", weight: 5.0, venues: 40, hours: Hours::Meal, areas: TOKYO_ANY },
    CategorySpec { name: "Office", weight: 5.0, venues: 30, hours: Hours::Office, areas: TOKYO_CENTER },
    CategorySpec { name: "Bar", weight: 4.0, venues: 30, hours: Hours::Night, areas: TOKYO_CENTER },
    CategorySpec { name: "Food & Drink Shop", weight: 4.0, venues: 30, hours: Hours::Day, areas: TOKYO_ANY },
    CategorySpec { name: "Coffee Shop", weight: 3.0, venues: 25, hours: Hours::Coffee, areas: TOKYO_CENTER },
    CategorySpec { name: "Home (private)", weight: 3.0, venues: 60, hours: Hours::Home, areas: TOKYO_HOMES },
    CategorySpec { name: "Electronics Store", weight: 2.0, venues: 12, hours: Hours::Day, areas: TOKYO_CENTER },
    CategorySpec { name: "Café", weight: 2.0, venues: 15, hours: Hours::Coffee, areas: TOKYO_ANY },
    CategorySpec { name: "Sushi Restaurant", weight: 2.0, venues: 15, hours: Hours::Meal, areas: TOKYO_ANY },
    CategorySpec { name: "Park", weight: 2.0, venues: 10, hours: Hours::Park, areas: TOKYO_ANY },
    CategorySpec { name: "Nightclub", weight: 1.0, venues: 8, hours: Hours::Night, areas: TOKYO_CENTER },
    CategorySpec { name: "Music Venue", weight: 1.0, venues: 8, hours: Hours::Night, areas: TOKYO_CENTER },
    CategorySpec { name: "Gym / Fitness Center", weight: 1.0, venues: 10, hours: Hours::Office, areas: TOKYO_ANY },
    CategorySpec { name: "Airport", weight: 1.0, venues: 2, hours: Hours::Day, areas: TOKYO_AIRPORT },
    CategorySpec { name: "Pizza Place", weight: 0.5, venues: 5, hours: Hours::Meal, areas: TOKYO_ANY },
];

struct Venue {
    id: String,
    category: usize,
    lat: f64,
    lon: f64,
}

fn hex_id(parts: &[&str]) -> String {
    let mut hash = prompt_hash(&parts.join("\u{0}"));
    hash.truncate(24);
    hash
}

fn pick_area<R: Rng>(rng: &mut R, areas: &[(Area, f64)]) -> Area {
    let idx = WeightedIndex::new(areas.iter().map(|(_, w)| *w)).expect("area weights");
    areas[idx.sample(rng)].0
}

fn first_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 4, 3).expect("valid date")
}

fn last_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 2, 16).expect("valid date")
}

fn new_years_eve() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 12, 31).expect("valid date")
}

fn day_weight(d: NaiveDate) -> f64 {
    let season = match d.month() {
        6..=8 => 1.3,
        12 | 1 | 2 => 0.8,
        _ => 1.0,
    };
    let weekend = if d.weekday().num_days_from_monday() >= 5 { 1.15 } else { 1.0 };
    season * weekend
}

/// NYC observed daylight saving from 2012-03-11 to 2012-11-04.
fn utc_offset_minutes(city: City, local: NaiveDateTime) -> i64 {
    match city {
        City::Tokyo => 540,
        City::Nyc => {
            let d = local.date();
            let dst_end = NaiveDate::from_ymd_opt(2012, 11, 4).expect("valid date");
            if d < dst_end || d >= NaiveDate::from_ymd_opt(2013, 3, 10).expect("valid date") {
                -240
            } else {
                -300
            }
        }
    }
}

struct Row {
    user: String,
    venue: usize,
    local: NaiveDateTime,
}

/// Generate `rows` check-ins for `city` as TSV text in the eight-column dataset layout.
pub fn generate(city: City, rows: usize, seed: u64) -> String {
    let (specs, users, stream) = match city {
        City::Nyc => (NYC_CATEGORIES, 1083usize, 1u64),
        City::Tokyo => (TOKYO_CATEGORIES, 2293usize, 2u64),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (stream << 32));
    let city_tag = match city {
        City::Nyc => "nyc",
        City::Tokyo => "tokyo",
    };

    let mut venues = Vec::new();
    let mut by_category: Vec<Vec<usize>> = Vec::new();
    for (ci, spec) in specs.iter().enumerate() {
        let mut ids = Vec::new();
        for v in 0..spec.venues {
            let a = pick_area(&mut rng, spec.areas);
            let lat = rng.random_range(a.lat.0..a.lat.1);
            let lon = rng.random_range(a.lon.0..a.lon.1);
            ids.push(venues.len());
            venues.push(Venue {
                id: hex_id(&[city_tag, spec.name, &v.to_string()]),
                category: ci,
                lat,
                lon,
            });
        }
        by_category.push(ids);
    }
    let category_pick = WeightedIndex::new(specs.iter().map(|s| s.weight)).expect("category weights");
    // venue popularity within a category follows 1/rank^1.1
    let venue_picks: Vec<WeightedIndex<f64>> = by_category
        .iter()
        .map(|ids| WeightedIndex::new((0..ids.len()).map(|r| 1.0 / ((r + 1) as f64).powf(1.1))).expect("venue weights"))
        .collect();
    let hour_picks: Vec<WeightedIndex<f64>> = specs
        .iter()
        .map(|s| WeightedIndex::new(s.hours.weights()).expect("hour weights"))
        .collect();

    let days: Vec<NaiveDate> = first_day().iter_days().take_while(|d| *d <= last_day()).collect();
    let day_pick = WeightedIndex::new(days.iter().map(|d| day_weight(*d))).expect("day weights");
    let user_ids: Vec<String> = {
        let mut ids: Vec<usize> = (1..=users).collect();
        for i in (1..ids.len()).rev() {
            let j = rng.random_range(0..=i);
            ids.swap(i, j);
        }
        // keep one mid-ranked, recognisable user id
        if let Some(pos) = ids.iter().position(|&i| i == 123) {
            ids.swap(pos, 11.min(users - 1));
        }
        ids.into_iter().map(|i| i.to_string()).collect()
    };
    let user_pick = WeightedIndex::new((0..users).map(|r| 1.0 / (r + 1) as f64)).expect("user weights");

    let spike = if city == City::Nyc { rows / 125 } else { 0 };
    let mut out_rows = Vec::with_capacity(rows);
    for i in 0..rows {
        let ci = category_pick.sample(&mut rng);
        let venue = by_category[ci][venue_picks[ci].sample(&mut rng)];
        let day = if i < spike { new_years_eve() } else { days[day_pick.sample(&mut rng)] };
        let hour = hour_picks[ci].sample(&mut rng) as u32;
        let time = NaiveTime::from_hms_opt(hour, rng.random_range(0..60), rng.random_range(0..60)).expect("valid time");
        out_rows.push(Row {
            user: user_ids[user_pick.sample(&mut rng)].clone(),
            venue,
            local: day.and_time(time),
        });
    }
    out_rows.sort_by_key(|r| r.local - Duration::minutes(utc_offset_minutes(city, r.local)));

    let mut out = String::new();
    for r in &out_rows {
        let v = &venues[r.venue];
        let spec = &specs[v.category];
        let offset = utc_offset_minutes(city, r.local);
        let utc = r.local - Duration::minutes(offset);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            r.user,
            v.id,
            hex_id(&["category", spec.name]),
            spec.name,
            v.lat,
            v.lon,
            offset,
            utc.format("%a %b %d %H:%M:%S +0000 %Y")
        );
        debug_assert_eq!(utc.second(), r.local.second());
    }
    out
}

/// Write both city files into `dir`.
pub fn write_fixture(dir: &Path, rows: usize, seed: u64) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(NYC_FILE), generate(City::Nyc, rows, seed))?;
    std::fs::write(dir.join(TOKYO_FILE), generate(City::Tokyo, rows, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let a = generate(City::Nyc, 300, 7);
        assert_eq!(a, generate(City::Nyc, 300, 7));
        assert_ne!(a, generate(City::Nyc, 300, 8));
        assert_eq!(a.lines().count(), 300);
        assert!(a.lines().all(|l| l.split('\t').count() == 8));
    }
}
