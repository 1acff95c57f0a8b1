//! Mid-market-rate clearing.
//!
//! Energy changes hands inside the coalition at the midpoint of the two grid
//! prices. Whichever side is long after internal netting trades its residual
//! with the grid, and that residual is folded into that side's average price:
//!
//! - surplus-heavy slot: buyers pay the mid price, sellers receive a blend of
//!   the mid price (on the share bought by peers) and the feed-in tariff (on
//!   the exported remainder);
//! - deficit-heavy slot: sellers receive the mid price, buyers pay a blend of
//!   the mid price and the grid retail price.
//!
//! The blend weights use the buyers' total *deficit*, not their gross demand:
//! peers can only sell into unmet need. With that reading settlement balances
//! to the coalition value and both prices stay inside the grid price band.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coalition::{allocation_payoffs, grand_value, PayoffVector};
use crate::energy::{
    aggregate, ProsumerId, ProsumerSlotState, RolePartition, SlotAggregates, TariffConfig,
};
use crate::error::{Error, Result};
use crate::{ENERGY_EPS, MONEY_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceCase {
    /// Total surplus equals total deficit.
    Balanced,
    /// More surplus than deficit; the remainder is exported.
    SurplusHeavy,
    /// More deficit than surplus; the remainder is imported.
    DeficitHeavy,
    /// Neither surplus nor deficit anywhere in the slot.
    NoTrade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub case: PriceCase,
    pub mid_price: f64,
    pub seller_price: f64,
    pub buyer_price: f64,
    /// The totals this quote was cleared from.
    pub aggregates: SlotAggregates,
}

impl PriceQuote {
    /// True when energy actually moves between peers: both sides non-empty.
    pub fn has_peer_trade(&self) -> bool {
        self.aggregates.total_surplus > ENERGY_EPS && self.aggregates.total_deficit > ENERGY_EPS
    }
}

pub fn mid_price(tariff: &TariffConfig) -> f64 {
    (tariff.grid_sell_price() + tariff.grid_buy_price()) / 2.0
}

pub fn quote_slot(aggregates: &SlotAggregates, tariff: &TariffConfig) -> PriceQuote {
    let mid = mid_price(tariff);
    let SlotAggregates {
        total_surplus: supply,
        total_deficit: need,
        net_position: net,
    } = *aggregates;
    let (case, seller_price, buyer_price) = if supply <= ENERGY_EPS && need <= ENERGY_EPS {
        (PriceCase::NoTrade, mid, mid)
    } else if net.abs() <= ENERGY_EPS {
        (PriceCase::Balanced, mid, mid)
    } else if net > 0.0 {
        // share of the surplus absorbed by peers, in [0, 1)
        let k = need / supply;
        let fit = tariff.grid_sell_price();
        (PriceCase::SurplusHeavy, fit + k * (mid - fit), mid)
    } else {
        // share of the deficit covered by peers, in [0, 1)
        let k = supply / need;
        let retail = tariff.grid_buy_price();
        (PriceCase::DeficitHeavy, mid, retail - k * (retail - mid))
    };
    PriceQuote {
        case,
        mid_price: mid,
        seller_price,
        buyer_price,
        aggregates: *aggregates,
    }
}

/// Monetary outcome of one cleared slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub payoffs: PayoffVector,
    /// kWh, positive when the coalition exports.
    pub grid_energy: f64,
    /// Cents, positive when the coalition receives money from the grid.
    pub grid_cashflow: f64,
    /// Cents, buyers positive, sellers negative.
    pub per_prosumer_cost: BTreeMap<ProsumerId, f64>,
}

pub fn settle_slot(
    partition: &RolePartition,
    states: &[ProsumerSlotState],
    quote: &PriceQuote,
    tariff: &TariffConfig,
) -> Result<Settlement> {
    if partition.len() != states.len() || !states.iter().all(|s| partition.contains(&s.prosumer_id))
    {
        return Err(Error::RosterMismatch(
            "role partition does not cover the slot's prosumers".into(),
        ));
    }
    let totals = aggregate(states);
    let q = quote.aggregates;
    if (totals.total_surplus - q.total_surplus).abs() > ENERGY_EPS
        || (totals.total_deficit - q.total_deficit).abs() > ENERGY_EPS
    {
        return Err(Error::RosterMismatch(format!(
            "quote was cleared for surplus {} / deficit {} but the slot has {} / {}",
            q.total_surplus, q.total_deficit, totals.total_surplus, totals.total_deficit
        )));
    }

    let payoffs = allocation_payoffs(partition, quote, states);
    let grid_cashflow = grand_value(totals.net_position, tariff);
    let paid: f64 = payoffs.total();
    if (paid - grid_cashflow).abs() > MONEY_EPS {
        return Err(Error::Internal(format!(
            "settlement does not balance: payoffs sum to {paid}, grid cashflow is {grid_cashflow}"
        )));
    }
    let per_prosumer_cost = payoffs
        .iter()
        .map(|(id, &e)| (id.clone(), 0.0 - e))
        .collect();
    Ok(Settlement {
        payoffs,
        grid_energy: totals.net_position,
        grid_cashflow,
        per_prosumer_cost,
    })
}
