//! Acceptance suite. Runs every criterion, prints one `[PASS]`/`[FAIL]` line
//! each, and exits non-zero if any failed.
//!
//! Golden files live in `tests/golden/`. They may only be regenerated
//! (`UPDATE_GOLDEN=1`) after `SCHEMA_VERSION` has been bumped.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use p2pmarket::coalition::min_core_cost;
use p2pmarket::io::{synthetic_days, synthetic_fixture, SCHEMA_VERSION};
use p2pmarket::lp::{solve, Bounds, LinearProgram, LpStatus, Relation, Sense};
use p2pmarket::simulator::{compare, run_fit, run_p2p};
use p2pmarket::{
    aggregate, allocation_payoffs, build_core_witness, check_balancedness, check_core_membership,
    check_superadditivity, compute_slot_state, partition_roles, quote_slot, settle_slot,
    ProsumerId, ProsumerSlotState, TariffConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, &str, Check); 8] = [
        ("AC1", "quoted prices stay within the grid band", price_band),
        (
            "AC2",
            "settlement payoffs sum to the grand-coalition value",
            efficiency,
        ),
        ("AC3", "coalition game is superadditive", superadditivity),
        (
            "AC4",
            "core is non-empty; balancedness LP and its dual agree",
            core_existence,
        ),
        (
            "AC5",
            "mid-market blocking coalition reported with slack -65.7",
            mid_market_audit,
        ),
        (
            "AC6",
            "P2P never costs more than FiT on the fixture",
            reinforcement,
        ),
        (
            "AC7",
            "simulate + compare output is byte-stable and matches golden files",
            golden,
        ),
        (
            "AC8",
            "simplex matches basic-feasible-solution enumeration",
            lp_oracle,
        ),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (tag, title, check) in criteria {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {tag} {title}: {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {tag} {title}: {why} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn id(i: usize) -> ProsumerId {
    ProsumerId::new(format!("p{i}"))
}

fn random_tariff(rng: &mut ChaCha8Rng) -> TariffConfig {
    let sell = rng.random_range(0.0..20.0);
    let buy = sell + rng.random_range(0.01..30.0);
    TariffConfig::new(buy, sell).unwrap()
}

/// Random slot; one draw in ten zeroes a prosumer and one in twenty makes
/// generation equal demand, so degenerate roles show up regularly.
fn random_states(rng: &mut ChaCha8Rng, n: usize) -> Vec<ProsumerSlotState> {
    (0..n)
        .map(|i| {
            let demand: f64 = rng.random_range(0.0..=10.0);
            let pv = match rng.random_range(0..20) {
                0 | 1 => 0.0,
                2 => demand,
                _ => rng.random_range(0.0..=10.0),
            };
            compute_slot_state(id(i), demand, pv).unwrap()
        })
        .collect()
}

/// Grand-coalition style value of a subset from its net position.
fn value(states: &[ProsumerSlotState], mask: u32, t: &TariffConfig) -> f64 {
    let z: f64 = states
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, s)| s.generation - s.demand)
        .sum();
    if z >= 0.0 {
        t.grid_sell_price() * z
    } else {
        t.grid_buy_price() * z
    }
}

fn slot_corpus() -> Vec<(TariffConfig, Vec<ProsumerSlotState>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..10_000)
        .map(|_| {
            let t = random_tariff(&mut rng);
            let n = rng.random_range(1..=10);
            (t, random_states(&mut rng, n))
        })
        .collect()
}

fn price_band() -> Result<String, String> {
    let corpus = slot_corpus();
    let started = Instant::now();
    let mut violations = 0;
    for (t, states) in &corpus {
        let q = quote_slot(&aggregate(states), t);
        for p in [q.seller_price, q.buyer_price] {
            if p < t.grid_sell_price() - 1e-9 || p > t.grid_buy_price() + 1e-9 {
                violations += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(violations == 0, || {
        format!("{violations} prices outside the band")
    })?;
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} slots, 0 violations in {:.3}s",
        corpus.len(),
        elapsed.as_secs_f64()
    ))
}

fn efficiency() -> Result<String, String> {
    let corpus = slot_corpus();
    let mut worst: f64 = 0.0;
    for (k, (t, states)) in corpus.iter().enumerate() {
        let partition = partition_roles(states).unwrap();
        let q = quote_slot(&aggregate(states), t);
        let s = settle_slot(&partition, states, &q, t).map_err(|e| format!("slot {k}: {e}"))?;
        let full = (1u32 << states.len()) - 1;
        let gap = (s.payoffs.values().sum::<f64>() - value(states, full, t)).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-6, || {
            format!("slot {k}: payoffs miss v(N) by {gap}")
        })?;
    }
    Ok(format!("{} slots, max gap {worst:.2e} cents", corpus.len()))
}

fn superadditivity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let started = Instant::now();
    let mut pairs = 0u64;
    for k in 0..1000 {
        let t = random_tariff(&mut rng);
        let n = rng.random_range(1..=8);
        let states = random_states(&mut rng, n);
        let out = check_superadditivity(&states, &t, 8).map_err(|e| e.to_string())?;
        ensure(out.superadditive && out.violations.is_empty(), || {
            format!("instance {k}: {} violations", out.violations.len())
        })?;
        // Unordered pairs of disjoint non-empty subsets.
        let expected = 3u64.pow(n as u32).div_ceil(2) - 2u64.pow(n as u32);
        ensure(out.pairs_checked == expected, || {
            format!(
                "instance {k}: {} pairs checked, expected {expected}",
                out.pairs_checked
            )
        })?;
        pairs += out.pairs_checked;
        // Independent enumeration on every tenth instance.
        if k % 10 == 0 {
            let full = (1u32 << n) - 1;
            for a in 1..=full {
                let rest = full & !a;
                let mut b = rest;
                while b > 0 {
                    let gap =
                        value(&states, a | b, &t) - value(&states, a, &t) - value(&states, b, &t);
                    ensure(gap >= -1e-6, || {
                        format!("instance {k}: {a:b} + {b:b} loses {gap}")
                    })?;
                    b = (b - 1) & rest;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1000 instances, {pairs} pairs, 0 violations in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn core_existence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lp_checked = 0;
    for k in 0..500 {
        let t = random_tariff(&mut rng);
        let n = rng.random_range(1..=8);
        let states = random_states(&mut rng, n);
        let witness = build_core_witness(&states, &t);
        let out = check_core_membership(&witness, &states, &t, 8).map_err(|e| e.to_string())?;
        ensure(out.core_member && out.efficient, || {
            format!(
                "instance {k}: witness blocked by {} coalitions",
                out.blocking.len()
            )
        })?;
        // Brute-force re-check of the same allocation.
        let full = (1u32 << n) - 1;
        let pay: Vec<f64> = (0..n).map(|i| witness[&id(i)]).collect();
        ensure(
            (pay.iter().sum::<f64>() - value(&states, full, &t)).abs() <= 1e-6,
            || format!("instance {k}: witness not efficient"),
        )?;
        for mask in 1..=full {
            let got: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pay[i]).sum();
            ensure(got >= value(&states, mask, &t) - 1e-6, || {
                format!("instance {k}: subset {mask:b} blocks the witness")
            })?;
        }
        if n <= 6 {
            lp_checked += 1;
            let bal = check_balancedness(&states, &t, 6).map_err(|e| e.to_string())?;
            let grand = value(&states, full, &t);
            ensure((bal.lp_optimum - grand).abs() <= 1e-6, || {
                format!(
                    "instance {k}: LP optimum {} vs v(N) {grand}",
                    bal.lp_optimum
                )
            })?;
            let dual = min_core_cost(&states, &t, 6).map_err(|e| e.to_string())?;
            ensure((dual.min_total - bal.lp_optimum).abs() <= 1e-6, || {
                format!(
                    "instance {k}: primal {} vs dual {}",
                    bal.lp_optimum, dual.min_total
                )
            })?;
        }
    }
    Ok(format!(
        "500 witnesses in core, {lp_checked} LP primal/dual pairs agree"
    ))
}

fn mid_market_audit() -> Result<String, String> {
    let t = TariffConfig::new(24.6, 10.0).unwrap();
    let states = vec![
        compute_slot_state(id(1), 0.0, 90.0).unwrap(),
        compute_slot_state(id(2), 0.0, 10.0).unwrap(),
        compute_slot_state(id(3), 10.0, 0.0).unwrap(),
    ];
    let partition = partition_roles(&states).unwrap();
    let payoffs = allocation_payoffs(&partition, &quote_slot(&aggregate(&states), &t), &states);
    let out = check_core_membership(&payoffs, &states, &t, 20).map_err(|e| e.to_string())?;
    let hit = out
        .blocking
        .iter()
        .find(|b| b.members == vec![id(2), id(3)])
        .ok_or("{p2, p3} not reported as blocking")?;
    ensure((hit.slack + 65.7).abs() <= 1e-4, || {
        format!("slack {}", hit.slack)
    })?;

    // Brute force: every subset whose payoffs fall short of its value.
    let pay = [payoffs[&id(1)], payoffs[&id(2)], payoffs[&id(3)]];
    let mut brute: Vec<(u32, f64)> = (1u32..8)
        .map(|m| {
            let s: f64 = (0..3).filter(|i| m >> i & 1 == 1).map(|i| pay[i]).sum();
            (m, s - value(&states, m, &t))
        })
        .filter(|(_, slack)| *slack < -1e-6)
        .collect();
    brute.sort_by_key(|(m, _)| *m);
    let reported: Vec<(u32, f64)> = out.blocking.iter().map(|b| (b.mask, b.slack)).collect();
    ensure(brute.len() == reported.len(), || {
        format!("brute force {brute:?} vs {reported:?}")
    })?;
    for ((bm, bs), (rm, rs)) in brute.iter().zip(&reported) {
        ensure(bm == rm && (bs - rs).abs() <= 1e-9, || {
            format!("brute force {brute:?} vs {reported:?}")
        })?;
    }
    let brute_slack = brute.iter().find(|(m, _)| *m == 0b110).map(|(_, s)| *s);
    ensure(
        brute_slack.is_some_and(|s| (s + 65.7).abs() <= 1e-4),
        || format!("brute-force slack {brute_slack:?}"),
    )?;
    Ok(format!(
        "{{p2, p3}} slack {:.4}, {} blocking subsets re-verified",
        hit.slack,
        brute.len()
    ))
}

fn reinforcement() -> Result<String, String> {
    let t = TariffConfig::brisbane_2013();
    let sunny = synthetic_fixture();
    let date = NaiveDate::from_ymd_opt(2013, 12, 2).unwrap();
    let dark_date = date.succ_opt().unwrap();
    let traces = sunny
        .concat(&synthetic_days(dark_date, &[0.0]))
        .map_err(|e| e.to_string())?;
    let p2p = run_p2p(&traces, &t).map_err(|e| e.to_string())?;
    let fit = run_fit(&traces, &t).map_err(|e| e.to_string())?;
    for (a, b) in p2p.per_slot_records.iter().zip(&fit.per_slot_records) {
        for (pid, cost) in &a.costs {
            ensure(*cost <= b.costs[pid] + 1e-6, || {
                format!("{} {pid}: P2P {cost} > FiT {}", a.timestamp, b.costs[pid])
            })?;
        }
    }
    let savings = compare(&p2p, &fit).map_err(|e| e.to_string())?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for day in &savings.per_day_saving {
        if day.date == dark_date {
            ensure(day.saving == 0.0, || {
                format!(
                    "{} saves {} on the sunless day",
                    day.prosumer_id, day.saving
                )
            })?;
        } else {
            let pct = 100.0 * day.saving / day.fit_cost;
            ensure(pct > 0.0 && pct <= 60.0, || {
                format!("{} saves {pct:.2}%", day.prosumer_id)
            })?;
            lo = lo.min(pct);
            hi = hi.max(pct);
        }
    }
    Ok(format!(
        "{} slots dominated, sunless day saves 0, sunny-day savings {lo:.1}%..{hi:.1}%",
        p2p.per_slot_records.len()
    ))
}

const GOLDEN_FILES: [&str; 8] = [
    "p2p_report.json",
    "fit_report.json",
    "price_series.json",
    "savings.json",
    "p2p_report.csv",
    "fit_report.csv",
    "price_series.csv",
    "savings.csv",
];

fn bin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_p2pmarket"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

/// Fixture -> simulate -> compare in both formats; returns the output folder.
fn pipeline(root: &Path) -> Result<PathBuf, String> {
    let s = |p: PathBuf| p.to_str().unwrap().to_owned();
    let traces = s(root.join("fixture.csv"));
    let tariff = s(root.join("tariff.toml"));
    std::fs::write(
        &tariff,
        "grid_buy_price_cents_per_kwh = 24.6\ngrid_sell_price_cents_per_kwh = 10.0\n",
    )
    .map_err(|e| e.to_string())?;
    bin(&["fixture", "--out", &traces])?;
    let out = root.join("out");
    for fmt in ["json", "csv"] {
        bin(&[
            "simulate",
            "--traces",
            &traces,
            "--tariff",
            &tariff,
            "--out",
            &s(out.clone()),
            "--format",
            fmt,
        ])?;
        bin(&[
            "compare",
            "--p2p",
            &s(out.join("p2p_report.json")),
            "--fit",
            &s(out.join("fit_report.json")),
            "--out",
            &s(out.join(format!("savings.{fmt}"))),
            "--format",
            fmt,
        ])?;
    }
    Ok(out)
}

fn golden() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (out_a, out_b) = (pipeline(a.path())?, pipeline(b.path())?);
    let read = |p: PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    for name in GOLDEN_FILES {
        ensure(read(out_a.join(name))? == read(out_b.join(name))?, || {
            format!("{name} differs between runs")
        })?;
    }

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let stamp = dir.join("SCHEMA_VERSION");
    let pinned = std::fs::read_to_string(&stamp)
        .ok()
        .map(|s| s.trim().to_owned());
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        ensure(pinned.as_deref() != Some(SCHEMA_VERSION), || {
            format!("refusing to regenerate golden files without a schema-version bump (still {SCHEMA_VERSION})")
        })?;
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for name in GOLDEN_FILES {
            std::fs::copy(out_a.join(name), dir.join(name)).map_err(|e| e.to_string())?;
        }
        std::fs::write(&stamp, format!("{SCHEMA_VERSION}\n")).map_err(|e| e.to_string())?;
        return Ok(format!("golden files regenerated for {SCHEMA_VERSION}"));
    }
    ensure(pinned.as_deref() == Some(SCHEMA_VERSION), || {
        format!("golden files pinned to {pinned:?}, reports are {SCHEMA_VERSION}")
    })?;
    for name in GOLDEN_FILES {
        ensure(read(out_a.join(name))? == read(dir.join(name))?, || {
            format!("{name} no longer matches the golden copy")
        })?;
    }
    Ok(format!(
        "{} files identical across two runs and to the golden copies",
        GOLDEN_FILES.len()
    ))
}

struct RandomLp {
    lp: LinearProgram,
    /// Every constraint as (coefficients, relation, rhs), including the
    /// rows that bound otherwise free variables.
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

fn random_lp(rng: &mut ChaCha8Rng) -> RandomLp {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(0..=4);
    let sense = if rng.random_bool(0.5) {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    let objective: Vec<f64> = (0..n)
        .map(|_| f64::from(rng.random_range(-5i32..=5)))
        .collect();
    let mut rows = Vec::new();
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(-4i32..=5)))
            .collect();
        let kind = match rng.random_range(0..10) {
            0..=5 => Relation::Le,
            6..=8 => Relation::Ge,
            _ => Relation::Eq,
        };
        rows.push((coeffs, kind, f64::from(rng.random_range(-4i32..=12))));
    }
    // A duplicated row now and then for degeneracy.
    if m > 0 && rng.random_bool(0.2) {
        rows.push(rows[0].clone());
    }
    let mut bounds = Vec::with_capacity(n);
    for j in 0..n {
        let lo = f64::from(rng.random_range(-3i32..=2));
        let hi = lo + f64::from(rng.random_range(0i32..=5));
        let unit = |sign: f64| {
            let mut e = vec![0.0; n];
            e[j] = sign;
            e
        };
        // Every variable ends up boxed, either through its bounds or through
        // explicit rows, so the feasible set is a polytope.
        match rng.random_range(0..4) {
            0 => {
                bounds.push(Bounds {
                    lower: f64::NEG_INFINITY,
                    upper: hi,
                });
                rows.push((unit(1.0), Relation::Ge, lo));
            }
            1 => {
                bounds.push(Bounds::FREE);
                rows.push((unit(1.0), Relation::Ge, lo));
                rows.push((unit(1.0), Relation::Le, hi));
            }
            _ => bounds.push(Bounds {
                lower: lo,
                upper: hi,
            }),
        }
    }
    let mut lp = LinearProgram::new(sense, objective).with_bounds(bounds);
    for (c, k, b) in &rows {
        lp.add_constraint(c.clone(), *k, *b);
    }
    RandomLp { lp, rows }
}

/// Best objective over all basic feasible solutions, or `None` when no
/// vertex is feasible.
fn vertex_oracle(r: &RandomLp) -> Option<f64> {
    let n = r.lp.num_variables();
    let mut planes: Vec<(Vec<f64>, f64)> = r.rows.iter().map(|(c, _, b)| (c.clone(), *b)).collect();
    for (j, bd) in r.lp.variable_bounds.iter().enumerate() {
        for v in [bd.lower, bd.upper] {
            if v.is_finite() {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                planes.push((e, v));
            }
        }
    }
    let feasible = |x: &DVector<f64>| {
        let rows_ok = r.rows.iter().all(|(c, k, b)| {
            let lhs: f64 = c.iter().zip(x.iter()).map(|(a, v)| a * v).sum();
            match k {
                Relation::Le => lhs <= b + 1e-9,
                Relation::Ge => lhs >= b - 1e-9,
                Relation::Eq => (lhs - b).abs() <= 1e-9,
            }
        });
        rows_ok
            && r.lp
                .variable_bounds
                .iter()
                .zip(x.iter())
                .all(|(bd, v)| *v >= bd.lower - 1e-9 && *v <= bd.upper + 1e-9)
    };
    let sign = if r.lp.sense == Sense::Maximize {
        1.0
    } else {
        -1.0
    };
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| planes[pick[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| planes[pick[i]].1);
        let lu = a.clone().full_piv_lu();
        if lu.is_invertible() && lu.determinant().abs() > 1e-9 {
            if let Some(x) = lu.solve(&b) {
                if feasible(&x) {
                    let obj: f64 =
                        r.lp.objective
                            .iter()
                            .zip(x.iter())
                            .map(|(c, v)| c * v)
                            .sum();
                    best = Some(match best {
                        Some(v) if sign * v >= sign * obj => v,
                        _ => obj,
                    });
                }
            }
        }
        // Next n-combination of plane indices in lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < planes.len() - n + i {
                break;
            }
        }
        pick[i] += 1;
        for k in i + 1..n {
            pick[k] = pick[k - 1] + 1;
        }
    }
}

fn lp_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut optimal, mut infeasible) = (0, 0);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let r = random_lp(&mut rng);
        let sol = solve(&r.lp).map_err(|e| format!("lp {k}: {e}"))?;
        match (vertex_oracle(&r), sol.status) {
            (Some(expected), LpStatus::Optimal) => {
                let gap = (expected - sol.objective_value).abs();
                worst = worst.max(gap);
                ensure(gap <= 1e-8, || {
                    format!(
                        "lp {k}: simplex {} vs vertices {expected}",
                        sol.objective_value
                    )
                })?;
                optimal += 1;
            }
            (None, LpStatus::Infeasible) => infeasible += 1,
            (oracle, status) => {
                return Err(format!(
                    "lp {k}: simplex {status:?}, vertex optimum {oracle:?}"
                ))
            }
        }
    }
    Ok(format!(
        "200 LPs ({optimal} optimal, {infeasible} infeasible), max gap {worst:.1e}"
    ))
}
