//! Command-line front end. `main` parses arguments with [`parse`] and hands
//! them to [`run`]; the exit code comes from [`exit_code`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use p2pmarket::io::{
    emit_report, load_tariff_path, load_traces_path, price_series, read_simulation_report,
    render_json, render_report, synthetic_fixture, write_atomic, write_traces, AuditReport,
    LoadOptions, MarketConfig, ReportFormat,
};
use p2pmarket::simulator::{compare, run_fit, run_p2p, run_stability_audit, AuditCaps, SlotFilter};
use p2pmarket::{quote_slot, SlotAggregates, TariffConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
/// Audit found violations and `--fail-on-violation` was given.
pub const EXIT_FINDINGS: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "p2pmarket",
    version,
    about = "Peer-to-peer prosumer energy market simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the P2P and FiT schemes over a trace file.
    Simulate(SimulateArgs),
    /// Per-prosumer savings from a stored P2P and FiT report pair.
    Compare(CompareArgs),
    /// Price quote for one slot, printed as JSON.
    Quote(QuoteArgs),
    /// Superadditivity, core and balancedness checks per slot.
    Audit(AuditArgs),
    /// Write the bundled synthetic trace set.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub tariff: PathBuf,
    /// Reject gaps and missing readings (default).
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,
    /// Zero-fill gaps and missing readings with a warning.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory for p2p_report, fit_report and price_series.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// P2P report (JSON) written by `simulate`.
    #[arg(long)]
    pub p2p: PathBuf,
    /// FiT report (JSON) written by `simulate`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct QuoteArgs {
    #[arg(long, value_name = "KWH")]
    pub surplus: f64,
    #[arg(long, value_name = "KWH")]
    pub deficit: f64,
    /// Tariff file; defaults to 24.6 / 10 c/kWh.
    #[arg(long)]
    pub tariff: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SlotSelection {
    All,
    Trading,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 20)]
    pub max_core_n: usize,
    #[arg(long, default_value_t = 10)]
    pub max_lp_n: usize,
    #[arg(long, default_value_t = 10)]
    pub max_superadditivity_n: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub slots: SlotSelection,
    /// Exit with status 3 when any check reports a violation.
    #[arg(long)]
    pub fail_on_violation: bool,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args`. Help and version requests come back as `Err` with exit
/// code 0; every other parse failure maps to the input-error code.
pub fn parse<I, T>(args: I) -> Result<Cli, (String, i32)>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| {
        let code = match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
            _ => EXIT_INPUT,
        };
        (e.render().to_string(), code)
    })
}

/// What a successful command printed and the exit code it asks for.
#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    pub code: i32,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome {
            summary,
            code: EXIT_OK,
        }
    }
}

/// 2 for internal faults inside the library, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<p2pmarket::Error>() {
        Some(e) if e.is_internal() => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Quote(a) => quote(a),
        Command::Audit(a) => audit(a),
        Command::Fixture(a) => fixture(a),
    }
}

fn load_inputs(
    input: &InputArgs,
) -> anyhow::Result<(MarketConfig, p2pmarket::simulator::TraceSet)> {
    let market = load_tariff_path(&input.tariff)?;
    let opts = LoadOptions {
        slot_minutes: market.slot_minutes,
        strict: !input.lenient,
    };
    let traces = load_traces_path(&input.traces, &opts)?.with_timezone(market.timezone);
    Ok((market, traces))
}

fn out_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create output directory {}", path.display()))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<Outcome> {
    let (market, traces) = load_inputs(&a.input)?;
    let format = ReportFormat::from(a.format);
    let p2p = run_p2p(&traces, &market.tariff)?;
    let fit = run_fit(&traces, &market.tariff)?;
    let prices = price_series(&p2p)?;
    // Render everything before touching the output directory.
    let files = [
        ("p2p_report", render_report(&p2p, format)?),
        ("fit_report", render_report(&fit, format)?),
        ("price_series", render_report(&prices, format)?),
    ];
    out_dir(&a.out)?;
    let mut summary = format!(
        "simulated {} slots for {} prosumers\n",
        traces.len(),
        traces.roster().len()
    );
    for (name, bytes) in &files {
        let path = a.out.join(format!("{name}.{}", format.extension()));
        write_atomic(&path, bytes)?;
        writeln!(summary, "wrote {}", path.display())?;
    }
    writeln!(
        summary,
        "{:<12} {:>14} {:>14}",
        "prosumer", "p2p_cents", "fit_cents"
    )?;
    for id in traces.roster() {
        writeln!(
            summary,
            "{:<12} {:>14.2} {:>14.2}",
            id.as_str(),
            p2p.per_prosumer_total_cost[id],
            fit.per_prosumer_total_cost[id]
        )?;
    }
    Ok(Outcome::ok(summary))
}

fn compare_cmd(a: CompareArgs) -> anyhow::Result<Outcome> {
    let p2p = read_simulation_report(&a.p2p)?;
    let fit = read_simulation_report(&a.fit)?;
    let savings = compare(&p2p, &fit)?;
    emit_report(&savings, a.format.into(), &a.out)?;
    let mut summary = format!("wrote {}\n", a.out.display());
    writeln!(
        summary,
        "{:<12} {:>14} {:>10}",
        "prosumer", "saving_cents", "saving_%"
    )?;
    for id in &savings.roster {
        writeln!(
            summary,
            "{:<12} {:>14.2} {:>10.2}",
            id.as_str(),
            savings.per_prosumer_absolute_saving[id],
            savings.per_prosumer_percent_saving[id]
        )?;
    }
    Ok(Outcome::ok(summary))
}

fn quote(a: QuoteArgs) -> anyhow::Result<Outcome> {
    for (name, v) in [("surplus", a.surplus), ("deficit", a.deficit)] {
        if !v.is_finite() || v < 0.0 {
            return Err(anyhow!(
                "--{name} must be a finite non-negative kWh amount, got {v}"
            ));
        }
    }
    let tariff = match &a.tariff {
        Some(path) => load_tariff_path(path)?.tariff,
        None => TariffConfig::brisbane_2013(),
    };
    let q = quote_slot(&SlotAggregates::new(a.surplus, a.deficit), &tariff);
    Ok(Outcome::ok(String::from_utf8(render_json(&q)?)?))
}

fn audit(a: AuditArgs) -> anyhow::Result<Outcome> {
    let caps = AuditCaps::new(a.max_superadditivity_n, a.max_core_n, a.max_lp_n)?;
    let (market, traces) = load_inputs(&a.input)?;
    let filter = match a.slots {
        SlotSelection::All => SlotFilter::All,
        SlotSelection::Trading => SlotFilter::PeerTrading,
    };
    let slots = run_stability_audit(&traces, &market.tariff, &filter, &caps)?;
    let report = AuditReport::new(market.tariff, slots);
    emit_report(&report, a.format.into(), &a.out)?;

    let count = |f: &dyn Fn(&p2pmarket::simulator::StabilityReport) -> Option<bool>| {
        let done: Vec<bool> = report.slots.iter().filter_map(f).collect();
        (done.iter().filter(|ok| !**ok).count(), done.len())
    };
    let mut summary = format!(
        "audited {} slots, wrote {}\n",
        report.slots.len(),
        a.out.display()
    );
    for (label, (bad, done)) in [
        ("superadditivity violations", count(&|r| r.superadditive())),
        (
            "mid-market allocation outside core",
            count(&|r| r.core_member()),
        ),
        (
            "witness allocation outside core",
            count(&|r| r.witness_in_core()),
        ),
        ("unbalanced games", count(&|r| r.balanced())),
    ] {
        let skipped = report.slots.len() - done;
        writeln!(
            summary,
            "{label}: {bad} of {done} checked ({skipped} skipped)"
        )?;
    }
    let findings = report.slots.iter().any(|r| r.has_findings());
    Ok(Outcome {
        summary,
        code: if findings && a.fail_on_violation {
            EXIT_FINDINGS
        } else {
            EXIT_OK
        },
    })
}

fn fixture(a: FixtureArgs) -> anyhow::Result<Outcome> {
    let traces = synthetic_fixture();
    let mut bytes = Vec::new();
    write_traces(&traces, &mut bytes)?;
    write_atomic(&a.out, &bytes)?;
    Ok(Outcome::ok(format!(
        "wrote {} ({} slots x {} prosumers)\n",
        a.out.display(),
        traces.len(),
        traces.roster().len()
    )))
}

/// Applies `P2PMARKET_THREADS` to the global worker pool; 0 or unset keeps
/// rayon's default.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("P2PMARKET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow!("P2PMARKET_THREADS must be a non-negative integer, got `{raw}`"))?;
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}
