//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

use vplb_core::adaptive::{AdaptiveOracle, OracleError};
use vplb_core::algorithms::AlgorithmSpec;
use vplb_core::exactnum::{ExactValue, Exponent, NumericContext};
use vplb_core::vpcore::{Decision, Item, OfflineSolution, PackingState};

pub const F: u64 = 1000;

/// Denominators dividing 12, tails of size at most 16.
pub fn tiny_context() -> Arc<NumericContext> {
    Arc::new(NumericContext::with_minimal_start(BigUint::from(F), 16, BigUint::from(12u32), 8).unwrap())
}

/// `v` as a plain rational for the base `base`.
pub fn evaluate(v: &ExactValue, base: u64) -> BigRational {
    let f = BigInt::from(base);
    let mut out = v.rational().clone();
    for (e, &c) in v.tail() {
        let e: usize = e.value().try_into().unwrap();
        out += BigRational::new(BigInt::from(c), num_traits::pow(f.clone(), e));
    }
    out
}

/// Component values: multiples of 1/12 plus a few values one μ away from them.
pub fn component(ctx: &NumericContext) -> impl Strategy<Value = ExactValue> {
    let mu = ExactValue::tiny(Exponent::from(ctx.e_start()));
    let r = |p: i64, q: i64| ExactValue::from_ratio(BigRational::new(p.into(), q.into()));
    let mut pool: Vec<ExactValue> = (0..=12).map(|k| r(k, 12)).collect();
    pool.push(mu.clone());
    pool.push(&r(1, 2) + &mu);
    pool.push(&r(1, 2) - &mu);
    pool.push(&r(1, 3) - &mu);
    pool.push(&ExactValue::one() - &mu);
    prop::sample::select(pool)
}

/// Up to `max_items` items of dimension `1..=max_d`, none of them zero.
pub fn instance(max_items: usize, max_d: usize) -> impl Strategy<Value = Vec<Arc<Item>>> {
    let ctx = tiny_context();
    (1..=max_d).prop_flat_map(move |d| {
        prop::collection::vec(prop::collection::vec(component(&ctx), d), 0..=max_items).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(id, mut comps)| {
                    if comps.iter().all(ExactValue::is_zero) {
                        comps[0] = ExactValue::from_ratio(BigRational::new(1.into(), 12.into()));
                    }
                    Arc::new(Item::new(id, "fuzz", comps))
                })
                .collect()
        })
    })
}

/// The online packing as an offline assignment.
pub fn as_offline(state: &PackingState) -> OfflineSolution {
    let mut sol = OfflineSolution::new();
    for p in state.trace() {
        sol.assign(p.item.id, p.bin);
    }
    sol
}

/// Fewest bins by enumerating every set partition and testing each block
/// with plain rational arithmetic.
pub fn naive_opt(items: &[Arc<Item>]) -> usize {
    fn fits(block: &[usize], items: &[Arc<Item>]) -> bool {
        let d = items[0].dimension();
        (0..d).all(|j| {
            let total: BigRational = block.iter().map(|&i| evaluate(&items[i].components[j], F)).sum();
            total <= BigRational::one()
        })
    }
    fn go(i: usize, blocks: &mut Vec<Vec<usize>>, items: &[Arc<Item>], best: &mut usize) {
        if blocks.len() >= *best {
            return;
        }
        if i == items.len() {
            *best = blocks.len();
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            if fits(&blocks[b], items) {
                go(i + 1, blocks, items, best);
            }
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        go(i + 1, blocks, items, best);
        blocks.pop();
    }
    let mut best = items.len();
    go(0, &mut Vec::new(), items, &mut best);
    best
}

pub fn pack(spec: &AlgorithmSpec, items: &[Arc<Item>], d: usize) -> (PackingState, Vec<Decision>) {
    let mut alg = spec.instantiate(d, "test").unwrap();
    let mut state = PackingState::new(d, tiny_context());
    let mut decisions = Vec::new();
    for it in items {
        let dec = alg.place(it, &state).unwrap();
        state.apply(it.clone(), dec).unwrap();
        decisions.push(dec);
    }
    (state, decisions)
}

pub fn oracle_context(m: u64) -> Arc<NumericContext> {
    Arc::new(NumericContext::with_minimal_start(BigUint::from(1000u32), 16, BigUint::one(), 2 * m.max(1)).unwrap())
}

fn exponent(v: &ExactValue) -> BigUint {
    assert_eq!(v.tail().len(), 1);
    v.tail().keys().next().unwrap().value().clone()
}

pub struct Snap {
    pub mu: ExactValue,
    pub larges_before: Vec<ExactValue>,
    pub emitted_after: Vec<ExactValue>,
}

#[derive(Default)]
pub struct OracleRun {
    pub larges: Vec<ExactValue>,
    pub smalls: Vec<ExactValue>,
    pub snaps: Vec<Snap>,
}

/// Plays `bits` (true = large), taking a snapshot after step `i` whenever
/// `snap_after[i]` holds.
pub fn play_oracle(bits: &[bool], snap_after: &[bool]) -> Result<OracleRun, OracleError> {
    let m = bits.len() as u64;
    let mut oracle = AdaptiveOracle::new(oracle_context(m), m, m)?;
    let mut run = OracleRun::default();
    for (i, &large) in bits.iter().enumerate() {
        let v = oracle.emit()?;
        oracle.classify(large)?;
        for s in &mut run.snaps {
            s.emitted_after.push(v.clone());
        }
        if large {
            run.larges.push(v);
        } else {
            run.smalls.push(v);
        }
        if snap_after.get(i).copied().unwrap_or(false) {
            let mu = oracle.snapshot_mu()?;
            run.snaps.push(Snap {
                mu,
                larges_before: run.larges.clone(),
                emitted_after: Vec::new(),
            });
        }
    }
    Ok(run)
}

pub fn check_oracle_run(run: &OracleRun) -> Result<(), String> {
    let max_large = run.larges.iter().map(exponent).max();
    let min_small = run.smalls.iter().map(exponent).min();
    if let (Some(l), Some(s)) = (&max_large, &min_small) {
        // F^(−l) ≥ F·F^(−s)  ⟺  s ≥ l + 1
        if *s < l + 1u32 {
            return Err(format!("separation fails: large exponent {l}, small exponent {s}"));
        }
    }
    for (k, snap) in run.snaps.iter().enumerate() {
        if let Some(bad) = snap.larges_before.iter().find(|v| **v <= snap.mu) {
            return Err(format!("snapshot {k}: earlier large {bad:?} is not above μ"));
        }
        let total: ExactValue = run.smalls.iter().chain(&snap.emitted_after).sum();
        if total >= snap.mu {
            return Err(format!("snapshot {k}: smalls plus later emissions reach μ"));
        }
    }
    Ok(())
}

/// Every classification string of length `m`, with a snapshot after each
/// step and, separately, all `m` snapshots after the last step.
pub fn check_capacity(m: usize) -> Result<(), String> {
    for mask in 0u32..(1 << m) {
        let bits: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
        let fail = |e: OracleError| format!("m={m} mask={mask:b}: {e}");
        let run = play_oracle(&bits, &vec![true; m]).map_err(fail)?;
        check_oracle_run(&run)?;
        let mut oracle = AdaptiveOracle::new(oracle_context(m as u64), m as u64, m as u64).map_err(fail)?;
        for &b in &bits {
            oracle.emit().map_err(fail)?;
            oracle.classify(b).map_err(fail)?;
        }
        for _ in 0..m {
            oracle.snapshot_mu().map_err(fail)?;
        }
    }
    Ok(())
}
