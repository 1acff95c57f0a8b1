//! Per-slot energy accounting.
//!
//! Each prosumer first covers its own demand from its PV output. Whatever is
//! left over is surplus (the prosumer sells), whatever is still missing is
//! deficit (the prosumer buys). A prosumer is never both in the same slot.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ENERGY_EPS;

/// Opaque prosumer identifier as it appears in trace files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProsumerId(pub String);

impl ProsumerId {
    pub fn new(id: impl Into<String>) -> Self {
        ProsumerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProsumerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProsumerId {
    fn from(s: &str) -> Self {
        ProsumerId(s.to_owned())
    }
}

/// Grid prices in cents/kWh.
///
/// `grid_buy_price` is what a prosumer pays the grid for a kWh,
/// `grid_sell_price` is the feed-in tariff it receives for an exported kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TariffFields")]
pub struct TariffConfig {
    grid_buy_price: f64,
    grid_sell_price: f64,
}

#[derive(Deserialize)]
struct TariffFields {
    grid_buy_price: f64,
    grid_sell_price: f64,
}

impl TryFrom<TariffFields> for TariffConfig {
    type Error = Error;

    fn try_from(f: TariffFields) -> Result<Self> {
        TariffConfig::new(f.grid_buy_price, f.grid_sell_price)
    }
}

impl TariffConfig {
    /// Requires `grid_buy_price > grid_sell_price >= 0`, both finite.
    pub fn new(grid_buy_price: f64, grid_sell_price: f64) -> Result<Self> {
        if !grid_buy_price.is_finite() {
            return Err(Error::validation("grid_buy_price", "must be finite"));
        }
        if !grid_sell_price.is_finite() || grid_sell_price < 0.0 {
            return Err(Error::validation(
                "grid_sell_price",
                "must be finite and non-negative",
            ));
        }
        if grid_buy_price <= grid_sell_price {
            return Err(Error::validation(
                "tariff",
                format!(
                    "grid buy price ({grid_buy_price}) must exceed grid sell price \
                     ({grid_sell_price}); a non-empty core requires p_b,g > p_s,g"
                ),
            ));
        }
        Ok(TariffConfig {
            grid_buy_price,
            grid_sell_price,
        })
    }

    /// Retail price of 24.6 c/kWh against a 10 c/kWh feed-in tariff.
    pub fn brisbane_2013() -> Self {
        TariffConfig {
            grid_buy_price: 24.6,
            grid_sell_price: 10.0,
        }
    }

    pub fn grid_buy_price(&self) -> f64 {
        self.grid_buy_price
    }

    pub fn grid_sell_price(&self) -> f64 {
        self.grid_sell_price
    }
}

/// One prosumer's energy position in one slot (kWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsumerSlotState {
    pub prosumer_id: ProsumerId,
    pub demand: f64,
    pub generation: f64,
    pub consumed: f64,
    pub surplus: f64,
    pub deficit: f64,
}

impl ProsumerSlotState {
    /// Signed net position: surplus minus deficit.
    pub fn net(&self) -> f64 {
        self.surplus - self.deficit
    }

    pub fn is_seller(&self) -> bool {
        self.surplus > ENERGY_EPS
    }

    pub fn is_buyer(&self) -> bool {
        self.deficit > ENERGY_EPS
    }
}

pub fn compute_slot_state(
    prosumer_id: ProsumerId,
    demand: f64,
    generation: f64,
) -> Result<ProsumerSlotState> {
    if !demand.is_finite() || demand < 0.0 {
        return Err(Error::validation(
            format!("demand of {prosumer_id}"),
            format!("must be finite and non-negative, got {demand}"),
        ));
    }
    if !generation.is_finite() || generation < 0.0 {
        return Err(Error::validation(
            format!("generation of {prosumer_id}"),
            format!("must be finite and non-negative, got {generation}"),
        ));
    }
    let consumed = demand.min(generation);
    Ok(ProsumerSlotState {
        prosumer_id,
        demand,
        generation,
        consumed,
        surplus: generation - consumed,
        deficit: demand - consumed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePartition {
    pub sellers: BTreeSet<ProsumerId>,
    pub buyers: BTreeSet<ProsumerId>,
    pub neutrals: BTreeSet<ProsumerId>,
}

impl RolePartition {
    pub fn len(&self) -> usize {
        self.sellers.len() + self.buyers.len() + self.neutrals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: &ProsumerId) -> bool {
        self.sellers.contains(id) || self.buyers.contains(id) || self.neutrals.contains(id)
    }
}

pub fn partition_roles(states: &[ProsumerSlotState]) -> Result<RolePartition> {
    if states.is_empty() {
        return Err(Error::validation("states", "slot has no prosumers"));
    }
    let mut partition = RolePartition {
        sellers: BTreeSet::new(),
        buyers: BTreeSet::new(),
        neutrals: BTreeSet::new(),
    };
    for s in states {
        if partition.contains(&s.prosumer_id) {
            return Err(Error::DuplicateProsumer(s.prosumer_id.to_string()));
        }
        let set = if s.is_seller() {
            &mut partition.sellers
        } else if s.is_buyer() {
            &mut partition.buyers
        } else {
            &mut partition.neutrals
        };
        set.insert(s.prosumer_id.clone());
    }
    Ok(partition)
}

/// Slot totals in kWh. `net_position` is positive when the slot exports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotAggregates {
    pub total_surplus: f64,
    pub total_deficit: f64,
    pub net_position: f64,
}

impl SlotAggregates {
    pub fn new(total_surplus: f64, total_deficit: f64) -> Self {
        SlotAggregates {
            total_surplus,
            total_deficit,
            net_position: total_surplus - total_deficit,
        }
    }
}

/// Sums are taken over prosumers sorted by id, so any permutation of the
/// same states yields bit-identical totals.
pub fn aggregate(states: &[ProsumerSlotState]) -> SlotAggregates {
    let mut order: Vec<&ProsumerSlotState> = states.iter().collect();
    order.sort_by(|a, b| a.prosumer_id.cmp(&b.prosumer_id));
    let total_surplus = order
        .iter()
        .filter(|s| s.is_seller())
        .map(|s| s.surplus)
        .sum();
    let total_deficit = order
        .iter()
        .filter(|s| s.is_buyer())
        .map(|s| s.deficit)
        .sum();
    SlotAggregates::new(total_surplus, total_deficit)
}
