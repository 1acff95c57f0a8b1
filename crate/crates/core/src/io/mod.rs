//! File formats: trace and tariff ingestion, report emission and the bundled
//! synthetic fixture.

mod fixture;
mod report;
mod tariff;
mod traces;

pub use fixture::{synthetic_days, synthetic_fixture, FIXTURE_DATE};
pub use report::{
    emit_report, price_series, read_simulation_report, render_json, render_report, write_atomic,
    AuditReport, PricePoint, PriceSeries, Report, ReportFormat,
};
pub use tariff::{load_tariff, load_tariff_path, MarketConfig};
pub use traces::{load_traces, load_traces_path, write_traces, LoadOptions, TRACE_HEADER};

/// Written into every emitted report. Bump on any change to report layout.
pub const SCHEMA_VERSION: &str = "p2pmarket-report/1";
