//! Long-format trace CSV: `timestamp,prosumer_id,demand_kwh,pv_kwh`, one row
//! per prosumer per slot. Timestamps are ISO-8601; those without an offset
//! are read as UTC.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeDelta, Utc};
use log::warn;

use crate::energy::ProsumerId;
use crate::error::{Error, Result};
use crate::simulator::{Reading, TraceSet, TraceSlot, DEFAULT_SLOT_MINUTES};

pub const TRACE_HEADER: [&str; 4] = ["timestamp", "prosumer_id", "demand_kwh", "pv_kwh"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub slot_minutes: u32,
    /// Strict mode rejects missing readings and gap slots; lenient mode
    /// zero-fills them and logs a warning.
    pub strict: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            slot_minutes: DEFAULT_SLOT_MINUTES,
            strict: true,
        }
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<FixedOffset>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t);
    }
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    .map(|naive| naive.and_utc().fixed_offset())
}

fn parse_energy(s: &str, field: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("{field} `{s}` is not a decimal number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!(
            "{field} must be finite and non-negative, got `{s}`"
        ));
    }
    Ok(v)
}

struct RawSlot {
    timestamp: DateTime<FixedOffset>,
    rows: Vec<(ProsumerId, Reading)>,
    lines: HashMap<ProsumerId, u64>,
}

fn zero_slot(timestamp: DateTime<FixedOffset>, n: usize) -> TraceSlot {
    TraceSlot {
        timestamp,
        readings: vec![
            Reading {
                demand_kwh: 0.0,
                pv_kwh: 0.0,
            };
            n
        ],
    }
}

/// Reads and validates a trace file. Nothing is returned unless the whole
/// source parses.
pub fn load_traces<R: Read>(reader: R, source_name: &str, opts: &LoadOptions) -> Result<TraceSet> {
    let perr = |line: u64, message: String| Error::Parse {
        source_name: source_name.to_owned(),
        line,
        message,
    };
    if opts.slot_minutes == 0 {
        return Err(Error::validation("slot_minutes", "must be positive"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(perr(
            1,
            format!(
                "expected header `{}`, found `{}`",
                TRACE_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut slots: BTreeMap<DateTime<Utc>, RawSlot> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            perr(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts_text = &rec[0];
        let timestamp = parse_timestamp(ts_text)
            .ok_or_else(|| perr(line, format!("`{ts_text}` is not an ISO-8601 timestamp")))?;
        let id = rec[1].to_owned();
        if id.is_empty() {
            return Err(perr(line, "empty prosumer_id".into()));
        }
        let id = ProsumerId(id);
        let demand_kwh = parse_energy(&rec[2], "demand_kwh").map_err(|m| perr(line, m))?;
        let pv_kwh = parse_energy(&rec[3], "pv_kwh").map_err(|m| perr(line, m))?;

        let slot = slots
            .entry(timestamp.with_timezone(&Utc))
            .or_insert_with(|| RawSlot {
                timestamp,
                rows: Vec::new(),
                lines: HashMap::new(),
            });
        if let Some(first) = slot.lines.insert(id.clone(), line) {
            return Err(perr(
                line,
                format!("duplicate reading for `{id}` at {ts_text} (first on line {first})"),
            ));
        }
        slot.rows.push((id, Reading { demand_kwh, pv_kwh }));
    }

    let roster: Vec<ProsumerId> = slots
        .values()
        .next()
        .map(|s| s.rows.iter().map(|(id, _)| id.clone()).collect())
        .unwrap_or_default();
    let position: HashMap<&ProsumerId, usize> =
        roster.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let step = TimeDelta::minutes(opts.slot_minutes as i64);

    let mut out: Vec<TraceSlot> = Vec::with_capacity(slots.len());
    for raw in slots.values() {
        if let Some(prev) = out.last() {
            let gap = raw.timestamp - prev.timestamp;
            if gap != step {
                if gap.num_seconds() % step.num_seconds() != 0 {
                    return Err(Error::validation(
                        "timestamps",
                        format!(
                            "{} and {} are not spaced by a whole number of {}-minute slots",
                            prev.timestamp.to_rfc3339(),
                            raw.timestamp.to_rfc3339(),
                            opts.slot_minutes
                        ),
                    ));
                }
                let missing = prev.timestamp + step;
                if opts.strict {
                    return Err(Error::validation(
                        "timestamps",
                        format!(
                            "missing slot at {} (between {} and {})",
                            missing.to_rfc3339(),
                            prev.timestamp.to_rfc3339(),
                            raw.timestamp.to_rfc3339()
                        ),
                    ));
                }
                let mut t = missing;
                while t < raw.timestamp {
                    warn!(
                        "{source_name}: slot {} missing, zero-filled",
                        t.to_rfc3339()
                    );
                    out.push(zero_slot(t, roster.len()));
                    t += step;
                }
            }
        }

        let mut readings: Vec<Option<Reading>> = vec![None; roster.len()];
        for (id, r) in &raw.rows {
            let &i = position.get(id).ok_or_else(|| {
                perr(
                    raw.lines[id],
                    format!("prosumer `{id}` is not in the roster of the first slot"),
                )
            })?;
            readings[i] = Some(*r);
        }
        let readings = readings
            .into_iter()
            .zip(&roster)
            .map(|(r, id)| match r {
                Some(r) => Ok(r),
                None if opts.strict => Err(Error::validation(
                    "traces",
                    format!(
                        "slot {} has no reading for `{id}`",
                        raw.timestamp.to_rfc3339()
                    ),
                )),
                None => {
                    warn!(
                        "{source_name}: `{id}` missing at {}, zero-filled",
                        raw.timestamp.to_rfc3339()
                    );
                    Ok(Reading {
                        demand_kwh: 0.0,
                        pv_kwh: 0.0,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(TraceSlot {
            timestamp: raw.timestamp,
            readings,
        });
    }
    TraceSet::new(opts.slot_minutes, roster, out)
}

pub fn load_traces_path(path: &Path, opts: &LoadOptions) -> Result<TraceSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_traces(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        opts,
    )
}

/// Writes `traces` in the long format. Energies use the shortest decimal
/// that reads back to the same value.
pub fn write_traces<W: Write>(traces: &TraceSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(TRACE_HEADER).map_err(ser)?;
    for slot in traces.slots() {
        let ts = slot.timestamp.format("%Y-%m-%dT%H:%M:%S%:z").to_string();
        for (id, r) in traces.roster().iter().zip(&slot.readings) {
            w.write_record([
                ts.as_str(),
                id.as_str(),
                &r.demand_kwh.to_string(),
                &r.pv_kwh.to_string(),
            ])
            .map_err(ser)?;
        }
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}
