//! Peer-to-peer prosumer energy trading modeled as a canonical coalition game.
//!
//! The crate clears 15-minute slots with mid-market-rate pricing, settles
//! per-prosumer payoffs, compares the result against a feed-in-tariff (FiT)
//! baseline and numerically checks the stability properties of the game:
//! superadditivity of the value function, core membership of allocations and
//! Bondareva-Shapley balancedness.
//!
//! Module map:
//!
//! - [`energy`]: per-slot energy accounting, role partition and aggregates.
//! - [`pricing`]: mid-market-rate quotes and slot settlement.
//! - [`coalition`]: value function and the stability checks.
//! - [`lp`]: dense two-phase simplex used by the balancedness check.
//! - [`simulator`]: multi-slot P2P and FiT runs, savings, stability audit.
//! - [`io`]: trace/tariff ingestion, report emission, bundled fixture.
//!
//! With the default `parallel` feature, slot pipelines and subset
//! enumerations run on rayon. Without it every loop runs sequentially; output
//! is identical either way.

pub mod coalition;
pub mod energy;
mod error;
pub mod io;
pub mod lp;
mod par;
pub mod pricing;
pub mod simulator;

pub use coalition::{
    allocation_payoffs, build_core_witness, check_balancedness, check_core_membership,
    check_superadditivity, coalition_value, min_core_cost, BalancednessOutcome, BlockingCoalition,
    CoreOutcome, PayoffVector, SuperadditivityOutcome, SuperadditivityViolation,
};
pub use energy::{
    aggregate, compute_slot_state, partition_roles, ProsumerId, ProsumerSlotState, RolePartition,
    SlotAggregates, TariffConfig,
};
pub use error::{Error, Result};
pub use pricing::{mid_price, quote_slot, settle_slot, PriceCase, PriceQuote, Settlement};

/// Energy below this magnitude (kWh) counts as zero surplus or deficit.
pub const ENERGY_EPS: f64 = 1e-9;

/// Absolute tolerance (cents) for every monetary and game-theoretic comparison.
pub const MONEY_EPS: f64 = 1e-6;
