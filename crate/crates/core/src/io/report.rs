//! Report emission. JSON and CSV renderings are both deterministic: fields
//! come out in declaration order, maps in key order, floats with exactly six
//! decimals. Files are written to a temporary sibling and renamed into place.

use std::io::{self, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::energy::TariffConfig;
use crate::error::{Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::simulator::{CheckResult, SavingsReport, Scheme, SimulationReport, StabilityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Anything that can be emitted through [`emit_report`].
pub trait Report: Serialize {
    /// Short tag written into the CSV preamble.
    fn kind(&self) -> &'static str;

    fn write_csv(&self, out: &mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>;
}

fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

fn fmt6_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

/// Pretty JSON with fixed six-decimal floats.
struct FixedDecimals<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDecimals<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt6(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with six-decimal floats and a trailing newline.
pub fn render_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedDecimals(PrettyFormatter::with_indent(b"  ")),
    );
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// Renders `report` to bytes.
pub fn render_report<R: Report>(report: &R, format: ReportFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        ReportFormat::Json => return render_json(report),
        ReportFormat::Csv => {
            writeln!(
                buf,
                "# schema_version={SCHEMA_VERSION} kind={}",
                report.kind()
            )
            .expect("write to Vec");
            let mut w = csv::WriterBuilder::new()
                .flexible(false)
                .from_writer(&mut buf);
            report
                .write_csv(&mut w)
                .and_then(|_| w.flush().map_err(csv::Error::from))
                .map_err(|e| Error::Serialization(e.to_string()))?;
        }
    }
    Ok(buf)
}

/// Renders `report` and atomically replaces `destination` with it.
pub fn emit_report<R: Report>(report: &R, format: ReportFormat, destination: &Path) -> Result<()> {
    let bytes = render_report(report, format)?;
    write_atomic(destination, &bytes)
}

/// Writes `bytes` to a temporary sibling of `destination`, then renames it
/// into place.
pub fn write_atomic(destination: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match destination.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(destination, e))?;
    tmp.write_all(bytes)
        .map_err(|e| Error::io(destination, e))?;
    tmp.persist(destination)
        .map_err(|e| Error::io(destination, e.error))?;
    Ok(())
}

pub fn read_simulation_report(path: &Path) -> Result<SimulationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: SimulationReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::validation(
            "schema_version",
            format!(
                "{} was written as `{}`, expected `{SCHEMA_VERSION}`",
                path.display(),
                report.schema_version
            ),
        ));
    }
    Ok(report)
}

impl Report for SimulationReport {
    fn kind(&self) -> &'static str {
        match self.scheme {
            Scheme::P2p => "simulation/p2p",
            Scheme::Fit => "simulation/fit",
        }
    }

    fn write_csv(&self, w: &mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()> {
        w.write_record([
            "timestamp",
            "prosumer_id",
            "cost_cents",
            "case",
            "seller_price",
            "buyer_price",
        ])?;
        for rec in &self.per_slot_records {
            let ts = rec.timestamp.to_rfc3339();
            let case = rec
                .quote
                .map(|q| format!("{:?}", q.case))
                .unwrap_or_default();
            for (id, &cost) in &rec.costs {
                w.write_record([
                    ts.as_str(),
                    id.as_str(),
                    &fmt6(cost),
                    &case,
                    &fmt6_opt(rec.quote.map(|q| q.seller_price)),
                    &fmt6_opt(rec.quote.map(|q| q.buyer_price)),
                ])?;
            }
        }
        Ok(())
    }
}

impl Report for SavingsReport {
    fn kind(&self) -> &'static str {
        "savings"
    }

    /// One row per (prosumer, day).
    fn write_csv(&self, w: &mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()> {
        w.write_record([
            "prosumer_id",
            "date",
            "fit_cost_cents",
            "p2p_cost_cents",
            "saving_cents",
        ])?;
        for d in &self.per_day_saving {
            w.write_record([
                d.prosumer_id.as_str(),
                &d.date.to_string(),
                &fmt6(d.fit_cost),
                &fmt6(d.p2p_cost),
                &fmt6(d.saving),
            ])?;
        }
        Ok(())
    }
}

/// Envelope for a stability audit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: String,
    pub tariff: TariffConfig,
    pub slots: Vec<StabilityReport>,
}

impl AuditReport {
    pub fn new(tariff: TariffConfig, slots: Vec<StabilityReport>) -> Self {
        AuditReport {
            schema_version: SCHEMA_VERSION.to_owned(),
            tariff,
            slots,
        }
    }
}

fn check_cell<T>(r: &CheckResult<T>, f: impl Fn(&T) -> String) -> String {
    match r {
        CheckResult::Completed(t) => f(t),
        CheckResult::Skipped { .. } => "skipped".to_owned(),
    }
}

impl Report for AuditReport {
    fn kind(&self) -> &'static str {
        "audit"
    }

    fn write_csv(&self, w: &mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()> {
        w.write_record([
            "timestamp",
            "prosumers",
            "case",
            "superadditive",
            "superadditivity_violations",
            "mid_market_core_member",
            "blocking_coalitions",
            "min_blocking_slack",
            "witness_core_member",
            "balanced",
            "lp_optimum",
            "grand_value",
        ])?;
        for s in &self.slots {
            w.write_record([
                s.timestamp.to_rfc3339(),
                s.prosumers.to_string(),
                format!("{:?}", s.case),
                check_cell(&s.superadditivity, |o| o.superadditive.to_string()),
                check_cell(&s.superadditivity, |o| o.violations.len().to_string()),
                check_cell(&s.mid_market_core, |o| o.core_member.to_string()),
                check_cell(&s.mid_market_core, |o| o.blocking.len().to_string()),
                check_cell(&s.mid_market_core, |o| {
                    fmt6_opt(o.blocking.iter().map(|b| b.slack).reduce(f64::min))
                }),
                check_cell(&s.witness_core, |o| o.core_member.to_string()),
                check_cell(&s.balancedness, |o| o.balanced.to_string()),
                check_cell(&s.balancedness, |o| fmt6(o.lp_optimum)),
                check_cell(&s.balancedness, |o| fmt6(o.grand_value)),
            ])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub timestamp: DateTime<FixedOffset>,
    /// Absent when no energy moved between peers in the slot.
    pub seller_price: Option<f64>,
    pub buyer_price: Option<f64>,
}

/// Per-slot trade prices against the two grid prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub schema_version: String,
    pub grid_sell_price: f64,
    pub grid_buy_price: f64,
    pub points: Vec<PricePoint>,
}

pub fn price_series(report: &SimulationReport) -> Result<PriceSeries> {
    if report.scheme != Scheme::P2p {
        return Err(Error::validation(
            "report",
            "price series needs a P2P simulation report",
        ));
    }
    let points = report
        .per_slot_records
        .iter()
        .map(|rec| {
            let traded = rec.quote.filter(|q| q.has_peer_trade());
            PricePoint {
                timestamp: rec.timestamp,
                seller_price: traded.map(|q| q.seller_price),
                buyer_price: traded.map(|q| q.buyer_price),
            }
        })
        .collect();
    Ok(PriceSeries {
        schema_version: SCHEMA_VERSION.to_owned(),
        grid_sell_price: report.tariff.grid_sell_price(),
        grid_buy_price: report.tariff.grid_buy_price(),
        points,
    })
}

impl Report for PriceSeries {
    fn kind(&self) -> &'static str {
        "price_series"
    }

    fn write_csv(&self, w: &mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()> {
        w.write_record([
            "timestamp",
            "seller_price",
            "buyer_price",
            "grid_sell_price",
            "grid_buy_price",
        ])?;
        for p in &self.points {
            w.write_record([
                p.timestamp.to_rfc3339(),
                fmt6_opt(p.seller_price),
                fmt6_opt(p.buyer_price),
                fmt6(self.grid_sell_price),
                fmt6(self.grid_buy_price),
            ])?;
        }
        Ok(())
    }
}
