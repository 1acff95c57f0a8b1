//! The slot's coalition game and its stability checks.
//!
//! The value of a coalition S is what it nets from the grid after trading
//! internally: with `z` the coalition's surplus minus deficit,
//!
//! ```text
//! v(S) = p_sell * max(0, z) - p_buy * max(0, -z)
//! ```
//!
//! Each prosumer keeps its grand-slot surplus or deficit when it defects, so
//! `v` depends only on `z` and the tariff. Since `p_buy > p_sell`, `v` is
//! concave and positively homogeneous in `z`.
//!
//! Subsets are encoded as bitmasks over the slot's state order (bit `i` is
//! `states[i]`). All reported violations are sorted by mask.

use std::collections::BTreeMap;
use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::energy::{ProsumerId, ProsumerSlotState, RolePartition, TariffConfig};
use crate::error::{Error, Result};
use crate::lp::{self, Bounds, LinearProgram, LpStatus, Relation, Sense};
use crate::pricing::{mid_price, PriceQuote};
use crate::{par, ENERGY_EPS, MONEY_EPS};

/// Hard cap on prosumers for the exhaustive disjoint-pair scan (3^N work).
pub const SUPERADDITIVITY_MAX_N: usize = 10;
/// Hard cap on prosumers for the exhaustive core check (2^N subsets).
pub const CORE_MAX_N: usize = 20;
/// Hard cap on prosumers for the balancedness LP (2^N - 1 columns).
pub const BALANCEDNESS_MAX_N: usize = 10;

/// Per-prosumer payoffs in cents. Buyers carry negative payoffs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffVector(BTreeMap<ProsumerId, f64>);

impl PayoffVector {
    pub fn new(payoffs: BTreeMap<ProsumerId, f64>) -> Self {
        PayoffVector(payoffs)
    }

    /// Sum over prosumers in id order.
    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn into_inner(self) -> BTreeMap<ProsumerId, f64> {
        self.0
    }
}

impl Deref for PayoffVector {
    type Target = BTreeMap<ProsumerId, f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl Index<&ProsumerId> for PayoffVector {
    type Output = f64;

    fn index(&self, id: &ProsumerId) -> &f64 {
        &self.0[id]
    }
}

impl FromIterator<(ProsumerId, f64)> for PayoffVector {
    fn from_iter<I: IntoIterator<Item = (ProsumerId, f64)>>(iter: I) -> Self {
        PayoffVector(iter.into_iter().collect())
    }
}

/// Value of a coalition whose net position (surplus minus deficit) is `net`.
pub fn value_of_net(net: f64, tariff: &TariffConfig) -> f64 {
    if net > 0.0 {
        tariff.grid_sell_price() * net
    } else if net < 0.0 {
        tariff.grid_buy_price() * net
    } else {
        0.0
    }
}

pub(crate) fn grand_value(net: f64, tariff: &TariffConfig) -> f64 {
    value_of_net(net, tariff)
}

/// Bitmask view of one slot.
struct Game<'a> {
    states: &'a [ProsumerSlotState],
    nets: Vec<f64>,
    tariff: TariffConfig,
}

impl<'a> Game<'a> {
    fn new(states: &'a [ProsumerSlotState], tariff: &TariffConfig) -> Self {
        Game {
            states,
            nets: states.iter().map(ProsumerSlotState::net).collect(),
            tariff: *tariff,
        }
    }

    fn n(&self) -> usize {
        self.states.len()
    }

    fn full(&self) -> u32 {
        ((1u64 << self.n()) - 1) as u32
    }

    fn sum_over(values: &[f64], mask: u32) -> f64 {
        let mut m = mask;
        let mut acc = 0.0;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            acc += values[i];
            m &= m - 1;
        }
        acc
    }

    fn value(&self, mask: u32) -> f64 {
        value_of_net(Self::sum_over(&self.nets, mask), &self.tariff)
    }

    fn members(&self, mask: u32) -> Vec<ProsumerId> {
        (0..self.n())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.states[i].prosumer_id.clone())
            .collect()
    }
}

fn guard(check: &'static str, n: usize, requested: usize, hard: usize) -> Result<()> {
    let cap = requested.min(hard);
    if n > cap {
        return Err(Error::TooManyProsumers { check, n, cap });
    }
    Ok(())
}

fn index_of(states: &[ProsumerSlotState]) -> Result<BTreeMap<&ProsumerId, usize>> {
    let mut idx = BTreeMap::new();
    for (i, s) in states.iter().enumerate() {
        if idx.insert(&s.prosumer_id, i).is_some() {
            return Err(Error::DuplicateProsumer(s.prosumer_id.to_string()));
        }
    }
    Ok(idx)
}

/// `v(S)` for an explicit subset of the slot's prosumers.
pub fn coalition_value(
    subset: &[ProsumerId],
    states: &[ProsumerSlotState],
    tariff: &TariffConfig,
) -> Result<f64> {
    let idx = index_of(states)?;
    let mut seen = vec![false; states.len()];
    let mut net = 0.0;
    for id in subset {
        let &i = idx
            .get(id)
            .ok_or_else(|| Error::UnknownProsumer(id.to_string()))?;
        if !seen[i] {
            seen[i] = true;
            net += states[i].net();
        }
    }
    Ok(value_of_net(net, tariff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityViolation {
    pub a: Vec<ProsumerId>,
    pub b: Vec<ProsumerId>,
    pub a_mask: u32,
    pub b_mask: u32,
    /// v(A ∪ B)
    pub union_value: f64,
    /// v(A) + v(B)
    pub split_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityOutcome {
    pub superadditive: bool,
    pub pairs_checked: u64,
    pub violations: Vec<SuperadditivityViolation>,
}

/// Scans every unordered pair of disjoint non-empty coalitions for
/// `v(A ∪ B) < v(A) + v(B) - tol`.
pub fn check_superadditivity(
    states: &[ProsumerSlotState],
    tariff: &TariffConfig,
    max_n: usize,
) -> Result<SuperadditivityOutcome> {
    guard(
        "superadditivity check",
        states.len(),
        max_n,
        SUPERADDITIVITY_MAX_N,
    )?;
    index_of(states)?;
    let game = Game::new(states, tariff);
    if game.n() < 2 {
        return Ok(SuperadditivityOutcome {
            superadditive: true,
            pairs_checked: 0,
            violations: Vec::new(),
        });
    }
    let per_union = par::filter_map_range(1, game.full() + 1, |union| {
        if union.count_ones() < 2 {
            return None;
        }
        let low = union & union.wrapping_neg();
        let rest = union ^ low;
        let v_union = game.value(union);
        let mut found = Vec::new();
        let mut checked = 0u64;
        // A always holds the lowest member, so each unordered pair is seen once.
        let mut sub = rest;
        loop {
            let a = low | sub;
            if a != union {
                let b = union ^ a;
                checked += 1;
                let split = game.value(a) + game.value(b);
                if v_union < split - MONEY_EPS {
                    found.push((a, b, v_union, split));
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        Some((checked, found))
    });
    let pairs_checked = per_union.iter().map(|(c, _)| c).sum();
    let mut raw: Vec<_> = per_union.into_iter().flat_map(|(_, f)| f).collect();
    raw.sort_by_key(|&(a, b, _, _)| (a | b, a));
    let violations: Vec<_> = raw
        .into_iter()
        .map(
            |(a, b, union_value, split_value)| SuperadditivityViolation {
                a: game.members(a),
                b: game.members(b),
                a_mask: a,
                b_mask: b,
                union_value,
                split_value,
            },
        )
        .collect();
    Ok(SuperadditivityOutcome {
        superadditive: violations.is_empty(),
        pairs_checked,
        violations,
    })
}

/// Payoffs under a cleared quote: sellers earn `seller_price * surplus`,
/// buyers pay `buyer_price * deficit`, neutrals get zero.
pub fn allocation_payoffs(
    partition: &RolePartition,
    quote: &PriceQuote,
    states: &[ProsumerSlotState],
) -> PayoffVector {
    states
        .iter()
        .map(|s| {
            let id = &s.prosumer_id;
            let e = if partition.sellers.contains(id) {
                quote.seller_price * s.surplus
            } else if partition.buyers.contains(id) {
                -(quote.buyer_price * s.deficit)
            } else {
                0.0
            };
            (id.clone(), e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingCoalition {
    pub members: Vec<ProsumerId>,
    pub mask: u32,
    /// e(S)
    pub payoff_sum: f64,
    /// v(S)
    pub value: f64,
    /// e(S) - v(S); negative for a blocking coalition.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreOutcome {
    pub core_member: bool,
    pub efficient: bool,
    pub payoff_total: f64,
    pub grand_value: f64,
    pub subsets_checked: u64,
    pub blocking: Vec<BlockingCoalition>,
}

/// Checks efficiency and coalition rationality of `payoffs` over all
/// non-empty subsets of the slot.
pub fn check_core_membership(
    payoffs: &PayoffVector,
    states: &[ProsumerSlotState],
    tariff: &TariffConfig,
    max_n: usize,
) -> Result<CoreOutcome> {
    guard("core membership check", states.len(), max_n, CORE_MAX_N)?;
    let idx = index_of(states)?;
    if payoffs.len() != states.len() {
        return Err(Error::RosterMismatch(format!(
            "payoff vector has {} entries for {} prosumers",
            payoffs.len(),
            states.len()
        )));
    }
    if let Some(id) = payoffs.keys().find(|id| !idx.contains_key(id)) {
        return Err(Error::RosterMismatch(format!(
            "payoff vector names `{id}`, which is not in the slot"
        )));
    }
    let game = Game::new(states, tariff);
    let e: Vec<f64> = states.iter().map(|s| payoffs[&s.prosumer_id]).collect();
    let payoff_total = Game::sum_over(&e, game.full());
    let grand_value = game.value(game.full());
    let efficient = (payoff_total - grand_value).abs() <= MONEY_EPS;

    let blocking: Vec<BlockingCoalition> = par::filter_map_range(1, game.full() + 1, |mask| {
        let payoff_sum = Game::sum_over(&e, mask);
        let value = game.value(mask);
        (payoff_sum < value - MONEY_EPS).then(|| BlockingCoalition {
            members: game.members(mask),
            mask,
            payoff_sum,
            value,
            slack: payoff_sum - value,
        })
    });
    Ok(CoreOutcome {
        core_member: efficient && blocking.is_empty(),
        efficient,
        payoff_total,
        grand_value,
        subsets_checked: game.full() as u64,
        blocking,
    })
}

/// A core allocation built by pricing every prosumer's net position at one
/// uniform rate: the feed-in tariff when the slot exports, the retail price
/// when it imports, the mid price when it is balanced.
///
/// Since `v(S) = min(p_sell * z, p_buy * z)` and the rate lies in
/// `[p_sell, p_buy]`, every coalition gets at least its value, and the rate
/// choice makes the grand coalition's share exactly `v(N)`.
pub fn build_core_witness(states: &[ProsumerSlotState], tariff: &TariffConfig) -> PayoffVector {
    let nets: Vec<f64> = states.iter().map(ProsumerSlotState::net).collect();
    let z: f64 = nets.iter().sum();
    let rate = if z > ENERGY_EPS {
        tariff.grid_sell_price()
    } else if z < -ENERGY_EPS {
        tariff.grid_buy_price()
    } else {
        mid_price(tariff)
    };
    states
        .iter()
        .zip(nets)
        .map(|(s, q)| (s.prosumer_id.clone(), rate * q))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCoalition {
    pub members: Vec<ProsumerId>,
    pub mask: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancednessOutcome {
    pub balanced: bool,
    /// max over balanced weightings of sum f(S) v(S)
    pub lp_optimum: f64,
    pub grand_value: f64,
    /// Coalitions with positive weight in the optimal weighting.
    pub optimal_collection: Vec<WeightedCoalition>,
}

/// Solves `max sum_S f(S) v(S)` subject to `sum_{S ∋ n} f(S) = 1` for every
/// prosumer and `0 <= f(S) <= 1`, and compares the optimum with `v(N)`. The
/// core is non-empty exactly when the optimum does not exceed `v(N)`.
pub fn check_balancedness(
    states: &[ProsumerSlotState],
    tariff: &TariffConfig,
    max_n: usize,
) -> Result<BalancednessOutcome> {
    guard(
        "balancedness check",
        states.len(),
        max_n,
        BALANCEDNESS_MAX_N,
    )?;
    index_of(states)?;
    let game = Game::new(states, tariff);
    let grand_value = game.value(game.full());
    if game.n() == 0 {
        return Ok(BalancednessOutcome {
            balanced: true,
            lp_optimum: 0.0,
            grand_value,
            optimal_collection: Vec::new(),
        });
    }
    let masks: Vec<u32> = (1..=game.full()).collect();
    let objective = masks.iter().map(|&m| game.value(m)).collect();
    let mut program =
        LinearProgram::new(Sense::Maximize, objective).with_bounds(vec![Bounds::UNIT; masks.len()]);
    for i in 0..game.n() {
        let row = masks
            .iter()
            .map(|&m| if m & (1 << i) != 0 { 1.0 } else { 0.0 })
            .collect();
        program.add_constraint(row, Relation::Eq, 1.0);
    }
    let solution = lp::solve(&program)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "balancedness program ended {:?}; singleton weights are always feasible",
            solution.status
        )));
    }
    let optimal_collection = masks
        .iter()
        .zip(&solution.primal_values)
        .filter(|(_, &w)| w > 1e-9)
        .map(|(&mask, &weight)| WeightedCoalition {
            members: game.members(mask),
            mask,
            weight,
        })
        .collect();
    Ok(BalancednessOutcome {
        balanced: solution.objective_value <= grand_value + MONEY_EPS,
        lp_optimum: solution.objective_value,
        grand_value,
        optimal_collection,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreCostOutcome {
    /// min sum_n e_n subject to e(S) >= v(S) for all S
    pub min_total: f64,
    /// The minimizing allocation.
    pub allocation: PayoffVector,
}

/// Dual of the balancedness program: the cheapest allocation that no
/// coalition can block. The core is non-empty exactly when `min_total`
/// does not exceed `v(N)`; strong duality makes it equal the balancedness
/// optimum.
pub fn min_core_cost(
    states: &[ProsumerSlotState],
    tariff: &TariffConfig,
    max_n: usize,
) -> Result<CoreCostOutcome> {
    guard("core cost program", states.len(), max_n, BALANCEDNESS_MAX_N)?;
    index_of(states)?;
    let game = Game::new(states, tariff);
    let n = game.n();
    let mut program =
        LinearProgram::new(Sense::Minimize, vec![1.0; n]).with_bounds(vec![Bounds::FREE; n]);
    for mask in 1..=game.full() {
        let row = (0..n)
            .map(|i| if mask & (1 << i) != 0 { 1.0 } else { 0.0 })
            .collect();
        program.add_constraint(row, Relation::Ge, game.value(mask));
    }
    let solution = lp::solve(&program)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "core cost program ended {:?}",
            solution.status
        )));
    }
    let allocation = states
        .iter()
        .zip(&solution.primal_values)
        .map(|(s, &e)| (s.prosumer_id.clone(), e))
        .collect();
    Ok(CoreCostOutcome {
        min_total: if n == 0 {
            0.0
        } else {
            solution.objective_value
        },
        allocation,
    })
}
