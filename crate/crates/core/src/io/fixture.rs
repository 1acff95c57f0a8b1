//! Deterministic synthetic trace set: five households with 3 kWp rooftop PV,
//! 15-minute slots, a clear-sky generation bell and morning/evening demand
//! peaks. Households differ in panel yield and daytime load so that some
//! are net buyers while others export around noon.

use std::f64::consts::PI;

use chrono::{NaiveDate, TimeDelta};

use crate::energy::ProsumerId;
use crate::simulator::{Reading, TraceSet, TraceSlot};

pub const FIXTURE_DATE: (i32, u32, u32) = (2013, 12, 2);

const SLOTS_PER_DAY: i64 = 96;
const SLOT_HOURS: f64 = 0.25;
const PANEL_KWP: f64 = 4.0;
const SUNRISE: f64 = 5.5;
const SUNSET: f64 = 18.5;

struct Household {
    id: &'static str,
    /// Fraction of nameplate reached at solar noon.
    yield_factor: f64,
    base_kw: f64,
    morning_kw: f64,
    midday_kw: f64,
    evening_kw: f64,
}

const HOUSEHOLDS: [Household; 5] = [
    Household {
        id: "P1",
        yield_factor: 0.70,
        base_kw: 0.30,
        morning_kw: 1.2,
        midday_kw: 0.3,
        evening_kw: 1.8,
    },
    Household {
        id: "P2",
        yield_factor: 0.65,
        base_kw: 0.25,
        morning_kw: 0.9,
        midday_kw: 0.1,
        evening_kw: 1.2,
    },
    Household {
        id: "P3",
        yield_factor: 0.40,
        base_kw: 0.60,
        morning_kw: 1.5,
        midday_kw: 2.4,
        evening_kw: 2.5,
    },
    Household {
        id: "P4",
        yield_factor: 0.30,
        base_kw: 0.45,
        morning_kw: 1.0,
        midday_kw: 1.6,
        evening_kw: 2.0,
    },
    Household {
        id: "P5",
        yield_factor: 0.72,
        base_kw: 0.30,
        morning_kw: 0.8,
        midday_kw: 0.4,
        evening_kw: 1.4,
    },
];

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let x = (hour - center) / width;
    (-0.5 * x * x).exp()
}

fn clear_sky(hour: f64) -> f64 {
    if hour <= SUNRISE || hour >= SUNSET {
        0.0
    } else {
        (PI * (hour - SUNRISE) / (SUNSET - SUNRISE)).sin().powi(2)
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn reading(h: &Household, hour: f64, pv_scale: f64) -> Reading {
    let demand_kw = h.base_kw
        + h.morning_kw * bump(hour, 7.25, 1.0)
        + h.midday_kw * bump(hour, 13.0, 2.0)
        + h.evening_kw * bump(hour, 19.0, 1.5);
    let pv_kw = PANEL_KWP * h.yield_factor * clear_sky(hour) * pv_scale;
    Reading {
        demand_kwh: round4(demand_kw * SLOT_HOURS),
        pv_kwh: round4(pv_kw * SLOT_HOURS),
    }
}

/// Consecutive days starting at `start` (UTC midnight); day `i` has its PV
/// output scaled by `pv_scale[i]` (0 gives a sunless day).
pub fn synthetic_days(start: NaiveDate, pv_scale: &[f64]) -> TraceSet {
    let t0 = start
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
        .fixed_offset();
    let mut slots = Vec::with_capacity(pv_scale.len() * SLOTS_PER_DAY as usize);
    for (day, &scale) in pv_scale.iter().enumerate() {
        for k in 0..SLOTS_PER_DAY {
            let hour = (k as f64 + 0.5) * SLOT_HOURS;
            slots.push(TraceSlot {
                timestamp: t0 + TimeDelta::minutes(15 * (day as i64 * SLOTS_PER_DAY + k)),
                readings: HOUSEHOLDS.iter().map(|h| reading(h, hour, scale)).collect(),
            });
        }
    }
    let roster = HOUSEHOLDS.iter().map(|h| ProsumerId::new(h.id)).collect();
    TraceSet::new(15, roster, slots).expect("fixture is well formed")
}

/// One sunny day for five prosumers, 96 slots.
pub fn synthetic_fixture() -> TraceSet {
    let (y, m, d) = FIXTURE_DATE;
    synthetic_days(
        NaiveDate::from_ymd_opt(y, m, d).expect("valid date"),
        &[1.0],
    )
}
