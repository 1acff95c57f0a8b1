//! Multi-slot driver for the P2P scheme and the FiT baseline.
//!
//! Slots are independent (there is no storage), so each slot runs through
//! the pipeline on its own and the results are assembled in timestamp order.

use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset, NaiveDate, TimeDelta};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::coalition::{
    allocation_payoffs, build_core_witness, check_balancedness, check_core_membership,
    check_superadditivity, BalancednessOutcome, CoreOutcome, PayoffVector, SuperadditivityOutcome,
    BALANCEDNESS_MAX_N, CORE_MAX_N, SUPERADDITIVITY_MAX_N,
};
use crate::energy::{
    aggregate, compute_slot_state, partition_roles, ProsumerId, ProsumerSlotState, TariffConfig,
};
use crate::error::{Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::par;
use crate::pricing::{quote_slot, settle_slot, PriceCase, PriceQuote, Settlement};

pub const DEFAULT_SLOT_MINUTES: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub demand_kwh: f64,
    pub pv_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSlot {
    pub timestamp: DateTime<FixedOffset>,
    /// One reading per roster entry, in roster order.
    pub readings: Vec<Reading>,
}

/// A validated multi-slot trace: uniformly spaced, strictly increasing
/// timestamps and the same roster in every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    slot_minutes: u32,
    timezone: Tz,
    roster: Vec<ProsumerId>,
    slots: Vec<TraceSlot>,
}

impl TraceSet {
    pub fn new(slot_minutes: u32, roster: Vec<ProsumerId>, slots: Vec<TraceSlot>) -> Result<Self> {
        if slot_minutes == 0 {
            return Err(Error::validation("slot_minutes", "must be positive"));
        }
        for (i, id) in roster.iter().enumerate() {
            if roster[..i].contains(id) {
                return Err(Error::DuplicateProsumer(id.to_string()));
            }
        }
        let step = TimeDelta::minutes(slot_minutes as i64);
        for w in slots.windows(2) {
            if w[1].timestamp - w[0].timestamp != step {
                return Err(Error::validation(
                    "timestamps",
                    format!(
                        "{} and {} are not one {slot_minutes}-minute slot apart",
                        w[0].timestamp.to_rfc3339(),
                        w[1].timestamp.to_rfc3339()
                    ),
                ));
            }
        }
        for s in &slots {
            if s.readings.len() != roster.len() {
                return Err(Error::RosterMismatch(format!(
                    "slot {} has {} readings for {} prosumers",
                    s.timestamp.to_rfc3339(),
                    s.readings.len(),
                    roster.len()
                )));
            }
        }
        Ok(TraceSet {
            slot_minutes,
            timezone: Tz::UTC,
            roster,
            slots,
        })
    }

    /// Time zone used to assign slots to calendar days.
    pub fn with_timezone(mut self, timezone: Tz) -> Self {
        self.timezone = timezone;
        self
    }

    pub fn slot_minutes(&self) -> u32 {
        self.slot_minutes
    }

    pub fn timezone(&self) -> Tz {
        self.timezone
    }

    pub fn roster(&self) -> &[ProsumerId] {
        &self.roster
    }

    pub fn slots(&self) -> &[TraceSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Appends `other`, which must continue this trace seamlessly.
    pub fn concat(&self, other: &TraceSet) -> Result<TraceSet> {
        if other.roster != self.roster || other.slot_minutes != self.slot_minutes {
            return Err(Error::RosterMismatch(
                "traces differ in roster or slot length".into(),
            ));
        }
        let slots = self.slots.iter().chain(&other.slots).cloned().collect();
        Ok(
            TraceSet::new(self.slot_minutes, self.roster.clone(), slots)?
                .with_timezone(self.timezone),
        )
    }

    fn day_of(&self, ts: &DateTime<FixedOffset>) -> NaiveDate {
        ts.with_timezone(&self.timezone).date_naive()
    }

    fn slot_states(&self, slot: &TraceSlot) -> Result<Vec<ProsumerSlotState>> {
        self.roster
            .iter()
            .zip(&slot.readings)
            .map(|(id, r)| compute_slot_state(id.clone(), r.demand_kwh, r.pv_kwh))
            .collect()
    }
}

fn in_slot<T>(ts: &DateTime<FixedOffset>, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Slot {
        timestamp: ts.to_rfc3339(),
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    P2p,
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub timestamp: DateTime<FixedOffset>,
    /// Cents per prosumer; negative is net revenue.
    pub costs: BTreeMap<ProsumerId, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quote: Option<PriceQuote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settlement: Option<Settlement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCost {
    pub prosumer_id: ProsumerId,
    pub date: NaiveDate,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: String,
    pub scheme: Scheme,
    pub tariff: TariffConfig,
    pub slot_minutes: u32,
    pub timezone: String,
    pub roster: Vec<ProsumerId>,
    pub per_prosumer_total_cost: BTreeMap<ProsumerId, f64>,
    /// Sorted by prosumer id, then date.
    pub per_day_cost: Vec<DayCost>,
    pub per_slot_records: Vec<SlotRecord>,
}

fn assemble(
    traces: &TraceSet,
    tariff: &TariffConfig,
    scheme: Scheme,
    per_slot_records: Vec<SlotRecord>,
) -> SimulationReport {
    let mut totals: BTreeMap<ProsumerId, f64> =
        traces.roster.iter().map(|id| (id.clone(), 0.0)).collect();
    let mut days: BTreeMap<(ProsumerId, NaiveDate), f64> = BTreeMap::new();
    for rec in &per_slot_records {
        let day = traces.day_of(&rec.timestamp);
        for (id, &c) in &rec.costs {
            *totals.get_mut(id).expect("roster member") += c;
            *days.entry((id.clone(), day)).or_insert(0.0) += c;
        }
    }
    SimulationReport {
        schema_version: SCHEMA_VERSION.to_owned(),
        scheme,
        tariff: *tariff,
        slot_minutes: traces.slot_minutes,
        timezone: traces.timezone.name().to_owned(),
        roster: traces.roster.clone(),
        per_prosumer_total_cost: totals,
        per_day_cost: days
            .into_iter()
            .map(|((prosumer_id, date), cost)| DayCost {
                prosumer_id,
                date,
                cost,
            })
            .collect(),
        per_slot_records,
    }
}

fn p2p_slot(traces: &TraceSet, slot: &TraceSlot, tariff: &TariffConfig) -> Result<SlotRecord> {
    let states = traces.slot_states(slot)?;
    let partition = partition_roles(&states)?;
    let quote = quote_slot(&aggregate(&states), tariff);
    let settlement = settle_slot(&partition, &states, &quote, tariff)?;
    Ok(SlotRecord {
        timestamp: slot.timestamp,
        costs: settlement.per_prosumer_cost.clone(),
        quote: Some(quote),
        settlement: Some(settlement),
    })
}

fn fit_slot(traces: &TraceSet, slot: &TraceSlot, tariff: &TariffConfig) -> Result<SlotRecord> {
    let states = traces.slot_states(slot)?;
    let costs = states
        .into_iter()
        .map(|s| {
            let cost = tariff.grid_buy_price() * s.deficit - tariff.grid_sell_price() * s.surplus;
            (s.prosumer_id, cost + 0.0)
        })
        .collect();
    Ok(SlotRecord {
        timestamp: slot.timestamp,
        costs,
        quote: None,
        settlement: None,
    })
}

fn run_scheme(
    traces: &TraceSet,
    tariff: &TariffConfig,
    scheme: Scheme,
    per_slot: fn(&TraceSet, &TraceSlot, &TariffConfig) -> Result<SlotRecord>,
) -> Result<SimulationReport> {
    let records = par::map_slice(&traces.slots, |slot| {
        in_slot(&slot.timestamp, per_slot(traces, slot, tariff))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(assemble(traces, tariff, scheme, records))
}

/// Clears every slot with mid-market pricing; a prosumer's slot cost is the
/// negative of its payoff.
pub fn run_p2p(traces: &TraceSet, tariff: &TariffConfig) -> Result<SimulationReport> {
    run_scheme(traces, tariff, Scheme::P2p, p2p_slot)
}

/// Every prosumer trades its surplus or deficit with the grid alone.
pub fn run_fit(traces: &TraceSet, tariff: &TariffConfig) -> Result<SimulationReport> {
    run_scheme(traces, tariff, Scheme::Fit, fit_slot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySaving {
    pub prosumer_id: ProsumerId,
    pub date: NaiveDate,
    pub fit_cost: f64,
    pub p2p_cost: f64,
    pub saving: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub schema_version: String,
    pub roster: Vec<ProsumerId>,
    pub per_prosumer_fit_cost: BTreeMap<ProsumerId, f64>,
    pub per_prosumer_p2p_cost: BTreeMap<ProsumerId, f64>,
    /// FiT cost minus P2P cost, cents.
    pub per_prosumer_absolute_saving: BTreeMap<ProsumerId, f64>,
    /// Saving as a percentage of the FiT cost; zero when that cost is not positive.
    pub per_prosumer_percent_saving: BTreeMap<ProsumerId, f64>,
    pub per_day_saving: Vec<DaySaving>,
}

pub fn percent_saving(fit_cost: f64, saving: f64) -> f64 {
    if fit_cost > 0.0 {
        100.0 * saving / fit_cost
    } else {
        0.0
    }
}

/// Savings of `p2p` relative to `fit`. Both reports must cover the same
/// roster and the same slots.
pub fn compare(p2p: &SimulationReport, fit: &SimulationReport) -> Result<SavingsReport> {
    let mut roster_a = p2p.roster.clone();
    let mut roster_b = fit.roster.clone();
    roster_a.sort();
    roster_b.sort();
    if roster_a != roster_b {
        return Err(Error::RosterMismatch(format!(
            "reports cover different prosumers: {:?} vs {:?}",
            p2p.roster, fit.roster
        )));
    }
    let stamps = |r: &SimulationReport| -> Vec<DateTime<FixedOffset>> {
        r.per_slot_records.iter().map(|s| s.timestamp).collect()
    };
    if stamps(p2p) != stamps(fit) {
        return Err(Error::RosterMismatch(format!(
            "reports cover different slots ({} vs {} slots)",
            p2p.per_slot_records.len(),
            fit.per_slot_records.len()
        )));
    }
    let day_keys = |r: &SimulationReport| -> Vec<(ProsumerId, NaiveDate)> {
        r.per_day_cost
            .iter()
            .map(|d| (d.prosumer_id.clone(), d.date))
            .collect()
    };
    if day_keys(p2p) != day_keys(fit) {
        return Err(Error::RosterMismatch(
            "reports assign slots to different days".into(),
        ));
    }
    let lookup = |m: &BTreeMap<ProsumerId, f64>, id: &ProsumerId| -> Result<f64> {
        m.get(id)
            .copied()
            .ok_or_else(|| Error::RosterMismatch(format!("no total cost for `{id}`")))
    };

    let mut absolute = BTreeMap::new();
    let mut percent = BTreeMap::new();
    for id in &roster_a {
        let f = lookup(&fit.per_prosumer_total_cost, id)?;
        let p = lookup(&p2p.per_prosumer_total_cost, id)?;
        let saving = f - p;
        absolute.insert(id.clone(), saving);
        percent.insert(id.clone(), percent_saving(f, saving));
    }
    let per_day_saving = fit
        .per_day_cost
        .iter()
        .zip(&p2p.per_day_cost)
        .map(|(f, p)| DaySaving {
            prosumer_id: f.prosumer_id.clone(),
            date: f.date,
            fit_cost: f.cost,
            p2p_cost: p.cost,
            saving: f.cost - p.cost,
        })
        .collect();
    Ok(SavingsReport {
        schema_version: SCHEMA_VERSION.to_owned(),
        roster: p2p.roster.clone(),
        per_prosumer_fit_cost: fit.per_prosumer_total_cost.clone(),
        per_prosumer_p2p_cost: p2p.per_prosumer_total_cost.clone(),
        per_prosumer_absolute_saving: absolute,
        per_prosumer_percent_saving: percent,
        per_day_saving,
    })
}

/// Prosumer-count caps for the three stability checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCaps {
    pub max_superadditivity_n: usize,
    pub max_core_n: usize,
    pub max_lp_n: usize,
}

impl Default for AuditCaps {
    fn default() -> Self {
        AuditCaps {
            max_superadditivity_n: SUPERADDITIVITY_MAX_N,
            max_core_n: CORE_MAX_N,
            max_lp_n: BALANCEDNESS_MAX_N,
        }
    }
}

impl AuditCaps {
    pub fn new(max_superadditivity_n: usize, max_core_n: usize, max_lp_n: usize) -> Result<Self> {
        for (name, v, hard) in [
            (
                "max_superadditivity_n",
                max_superadditivity_n,
                SUPERADDITIVITY_MAX_N,
            ),
            ("max_core_n", max_core_n, CORE_MAX_N),
            ("max_lp_n", max_lp_n, BALANCEDNESS_MAX_N),
        ] {
            if v > hard {
                return Err(Error::validation(
                    name,
                    format!("{v} exceeds the supported maximum of {hard}"),
                ));
            }
        }
        Ok(AuditCaps {
            max_superadditivity_n,
            max_core_n,
            max_lp_n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotFilter {
    All,
    /// Only slots where energy moves between peers.
    PeerTrading,
    /// Explicit slot positions within the trace.
    Indices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckResult<T> {
    Completed(T),
    Skipped { reason: String },
}

impl<T> CheckResult<T> {
    pub fn completed(&self) -> Option<&T> {
        match self {
            CheckResult::Completed(t) => Some(t),
            CheckResult::Skipped { .. } => None,
        }
    }

    fn from_capped(r: Result<T>) -> Result<Self> {
        match r {
            Ok(t) => Ok(CheckResult::Completed(t)),
            Err(e @ Error::TooManyProsumers { .. }) => Ok(CheckResult::Skipped {
                reason: e.to_string(),
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub timestamp: DateTime<FixedOffset>,
    pub prosumers: usize,
    pub case: PriceCase,
    pub superadditivity: CheckResult<SuperadditivityOutcome>,
    /// Core check of the mid-market settlement payoffs.
    pub mid_market_core: CheckResult<CoreOutcome>,
    pub witness_allocation: PayoffVector,
    pub witness_core: CheckResult<CoreOutcome>,
    pub balancedness: CheckResult<BalancednessOutcome>,
}

impl StabilityReport {
    pub fn superadditive(&self) -> Option<bool> {
        self.superadditivity.completed().map(|o| o.superadditive)
    }

    pub fn core_member(&self) -> Option<bool> {
        self.mid_market_core.completed().map(|o| o.core_member)
    }

    pub fn witness_in_core(&self) -> Option<bool> {
        self.witness_core.completed().map(|o| o.core_member)
    }

    pub fn balanced(&self) -> Option<bool> {
        self.balancedness.completed().map(|o| o.balanced)
    }

    /// True when some completed check found a violation.
    pub fn has_findings(&self) -> bool {
        [
            self.superadditive(),
            self.core_member(),
            self.witness_in_core(),
            self.balanced(),
        ]
        .contains(&Some(false))
    }
}

pub fn audit_slot(
    timestamp: DateTime<FixedOffset>,
    states: &[ProsumerSlotState],
    tariff: &TariffConfig,
    caps: &AuditCaps,
) -> Result<StabilityReport> {
    let partition = partition_roles(states)?;
    let quote = quote_slot(&aggregate(states), tariff);
    let payoffs = allocation_payoffs(&partition, &quote, states);
    let witness_allocation = build_core_witness(states, tariff);
    Ok(StabilityReport {
        timestamp,
        prosumers: states.len(),
        case: quote.case,
        superadditivity: CheckResult::from_capped(check_superadditivity(
            states,
            tariff,
            caps.max_superadditivity_n,
        ))?,
        mid_market_core: CheckResult::from_capped(check_core_membership(
            &payoffs,
            states,
            tariff,
            caps.max_core_n,
        ))?,
        witness_core: CheckResult::from_capped(check_core_membership(
            &witness_allocation,
            states,
            tariff,
            caps.max_core_n,
        ))?,
        witness_allocation,
        balancedness: CheckResult::from_capped(check_balancedness(states, tariff, caps.max_lp_n))?,
    })
}

/// Runs the three stability checks on every selected slot. Slots above a
/// cap get a `Skipped` entry for that check; the rest are still audited.
pub fn run_stability_audit(
    traces: &TraceSet,
    tariff: &TariffConfig,
    slot_filter: &SlotFilter,
    caps: &AuditCaps,
) -> Result<Vec<StabilityReport>> {
    let selected: Vec<&TraceSlot> = match slot_filter {
        SlotFilter::All => traces.slots.iter().collect(),
        SlotFilter::PeerTrading => {
            let mut keep = Vec::new();
            for slot in &traces.slots {
                let states = in_slot(&slot.timestamp, traces.slot_states(slot))?;
                if quote_slot(&aggregate(&states), tariff).has_peer_trade() {
                    keep.push(slot);
                }
            }
            keep
        }
        SlotFilter::Indices(idx) => {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            sorted
                .into_iter()
                .map(|i| {
                    traces.slots.get(i).ok_or_else(|| {
                        Error::validation(
                            "slot index",
                            format!("{i} is out of range for {} slots", traces.len()),
                        )
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    // Slots run one after another; each check parallelizes internally.
    selected
        .into_iter()
        .map(|slot| {
            in_slot(
                &slot.timestamp,
                traces
                    .slot_states(slot)
                    .and_then(|states| audit_slot(slot.timestamp, &states, tariff, caps)),
            )
        })
        .collect()
}
