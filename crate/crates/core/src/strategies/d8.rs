//! Dimension 8: tiny first-part items on components 2..7, six groups of
//! items with one near-1 component and 1/3 on component 8, then one of ten
//! continuations indexed by the triples of components 2..7 containing 2.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;

use super::certificate::ceil_div;
use super::d3::{pack_part1, small_d_context};
use super::{
    branch_certificate, feasible_among, last_placement, pack_in_groups, Adversary, AdversaryStep, BranchRun,
    Certificate, StrategyError,
};
use crate::adaptive::{AdaptiveOracle, OracleEvent};
use crate::exactnum::{ExactValue, NumericContext};
use crate::vpcore::{Item, OfflineSolution, PackingState};

/// Components (1-based) that carry the part-2 near-1 values.
const GROUP_COMPONENTS: std::ops::RangeInclusive<usize> = 2..=7;

/// The ten triples `{2, j, k}` with `3 ≤ j < k ≤ 7`, as bitmasks over
/// 1-based component indexes.
pub fn triples() -> Vec<u8> {
    let mut out = Vec::new();
    for j in 3..=7 {
        for k in j + 1..=7 {
            out.push(1 << 2 | 1 << j | 1 << k);
        }
    }
    out
}

fn complement(t: u8) -> u8 {
    GROUP_COMPONENTS.fold(0u8, |m, c| m | 1 << c) & !t
}

fn label(mask: u8) -> String {
    (0..8).filter(|c| mask >> c & 1 == 1).map(|c| c.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Part1,
    Part2,
    AwaitFork,
    Part3(u8),
    Done,
}

#[derive(Debug, Clone)]
pub struct D8 {
    n: usize,
    k: usize,
    ctx: Arc<NumericContext>,
    oracle: AdaptiveOracle,
    stage: Stage,
    next_id: usize,
    part1: Vec<(usize, bool)>,
    q: usize,
    mu: ExactValue,
    part2: Vec<usize>,
    part3: Vec<usize>,
    early_stop: bool,
    blocking_checks: u64,
    blocking_violations: u64,
}

impl D8 {
    pub fn new(n: usize, k: usize) -> Result<Self, StrategyError> {
        if n == 0 || k < n {
            return Err(StrategyError::PreconditionViolated(format!(
                "need K ≥ N ≥ 1, got N = {n}, K = {k}"
            )));
        }
        let ctx = small_d_context(n, k, 16)?;
        let oracle = AdaptiveOracle::new(ctx.clone(), (2 * k * n) as u64, 1)?;
        Ok(D8 {
            n,
            k,
            ctx,
            oracle,
            stage: Stage::Part1,
            next_id: 0,
            part1: Vec::new(),
            q: 0,
            mu: ExactValue::zero(),
            part2: Vec::new(),
            part3: Vec::new(),
            early_stop: false,
            blocking_checks: 0,
            blocking_violations: 0,
        })
    }

    /// `⌈152N/29⌉ / (2N + 7)`.
    pub fn guaranteed_bound(n: usize) -> BigRational {
        BigRational::new(ceil_div(152 * n as u64, 29).into(), (2 * n as u64 + 7).into())
    }

    fn emit_blocked(&mut self, state: &PackingState, phase: String, c: Vec<ExactValue>) -> Result<AdversaryStep, StrategyError> {
        let item = Item::new(self.next_id, phase, c);
        self.next_id += 1;
        self.blocking_checks += 1;
        if feasible_among(state, 0..self.q, &item)? > 0 {
            self.blocking_violations += 1;
        }
        Ok(AdversaryStep::Emit(item))
    }

    /// `1−μ` on the components in `near_one`, `2μ` on the rest of 2..7.
    fn split_item(&self, near_one: u8) -> Result<Vec<ExactValue>, StrategyError> {
        let one_minus = self.ctx.sub(&ExactValue::one(), &self.mu)?;
        let two_mu = self.mu.times(2);
        let mut c = vec![ExactValue::zero(); 8];
        for j in GROUP_COMPONENTS {
            c[j - 1] = if near_one >> j & 1 == 1 { one_minus.clone() } else { two_mu.clone() };
        }
        Ok(c)
    }
}

impl Adversary for D8 {
    fn name(&self) -> &'static str {
        "d8"
    }

    fn dimension(&self) -> usize {
        8
    }

    fn context(&self) -> &Arc<NumericContext> {
        &self.ctx
    }

    fn next_step(&mut self, state: &PackingState) -> Result<AdversaryStep, StrategyError> {
        let n = self.n;
        if self.stage == Stage::Part1 {
            if self.part1.len() < 2 * self.k * n {
                let a = self.oracle.emit()?;
                let mut c = vec![a; 8];
                c[0] = self.ctx.rational(1, self.k as i64)?;
                c[7] = ExactValue::zero();
                let item = Item::new(self.next_id, "part1", c);
                self.next_id += 1;
                return Ok(AdversaryStep::Emit(item));
            }
            self.q = state.bins().len();
            if self.q > 6 * n {
                self.early_stop = true;
                self.stage = Stage::Done;
                return Ok(AdversaryStep::Done);
            }
            self.mu = self.oracle.snapshot_mu()?;
            self.stage = Stage::Part2;
        }
        match self.stage {
            Stage::Part2 if self.part2.len() < 6 * n => {
                let g = self.part2.len() % 6;
                let mut c = vec![ExactValue::zero(); 8];
                c[g + 1] = self.ctx.sub(&ExactValue::one(), &self.mu.times(3))?;
                c[7] = self.ctx.rational(1, 3)?;
                self.emit_blocked(state, format!("part2-g{}", g + 2), c)
            }
            Stage::Part2 => {
                self.stage = Stage::AwaitFork;
                Ok(AdversaryStep::Fork(triples().into_iter().map(|t| format!("T{}", label(t))).collect()))
            }
            Stage::Part3(t) => {
                let i = self.part3.len();
                if i == 2 * n {
                    self.stage = Stage::Done;
                    return Ok(AdversaryStep::Done);
                }
                // alternate: near 1 on the triple, then near 1 on its complement
                let near_one = if i.is_multiple_of(2) { t } else { complement(t) };
                let c = self.split_item(near_one)?;
                self.emit_blocked(state, format!("part3-T{}", label(t)), c)
            }
            Stage::Done => Ok(AdversaryStep::Done),
            Stage::AwaitFork | Stage::Part1 => Err(StrategyError::ConstructionInvariantBroken(
                "d8 asked for an item while waiting for a branch".into(),
            )),
        }
    }

    fn observe(&mut self, state: &PackingState) -> Result<(), StrategyError> {
        let p = last_placement(state)?;
        match self.stage {
            Stage::Part1 => {
                self.oracle.classify(p.opened)?;
                self.part1.push((p.item.id, p.opened));
            }
            Stage::Part2 => self.part2.push(p.item.id),
            Stage::Part3(_) => self.part3.push(p.item.id),
            _ => {
                return Err(StrategyError::ConstructionInvariantBroken(
                    "placement reported outside an emitting stage".into(),
                ))
            }
        }
        Ok(())
    }

    fn enter_branch(&mut self, index: usize) -> Result<(), StrategyError> {
        let t = triples();
        if self.stage != Stage::AwaitFork || index >= t.len() {
            return Err(StrategyError::ConstructionInvariantBroken(format!("cannot enter branch {index}")));
        }
        self.stage = Stage::Part3(t[index]);
        Ok(())
    }

    fn take_events(&mut self) -> Vec<OracleEvent> {
        self.oracle.take_events()
    }

    fn certify(runs: &[BranchRun<Self>]) -> Result<Certificate, StrategyError> {
        let first = runs
            .first()
            .ok_or_else(|| StrategyError::ConstructionInvariantBroken("no runs".into()))?;
        let adv = &first.adversary;
        let (n, k, q) = (adv.n, adv.k, adv.q);
        let mut cert = Certificate::new("d8");
        cert.param("d", 8);
        cert.param("N", n);
        cert.param("K", k);
        cert.param("F", adv.ctx.base());
        cert.param("e_start", adv.ctx.e_start());
        cert.counter("Q", q);
        cert.guaranteed_bound = D8::guaranteed_bound(n);

        if adv.early_stop {
            let mut offline = OfflineSolution::new();
            let ids: Vec<usize> = adv.part1.iter().map(|r| r.0).collect();
            pack_in_groups(&mut offline, &ids, k, 0);
            cert.early_stop = true;
            cert.branches.push(branch_certificate("main", &first.state, offline));
            let b = cert.branches[0].clone();
            cert.check_eq("offline_equals_counting_bound", b.offline_cost, b.counting_lower_bound);
            cert.check_eq("offline_cost_exact", b.offline_cost, 2 * n as u64);
            cert.check_ge("q_above_6n", q, 6 * n + 1);
            cert.check_branches(2 * n as u64);
        } else {
            if let Some(e) = adv.mu.tail().keys().next() {
                cert.param("mu", e);
            }
            // large-component mask of every bin holding part-2 items
            let mut masks: BTreeMap<usize, (u8, usize, bool)> = BTreeMap::new();
            for p in first.state.trace().iter().filter(|p| p.item.phase.starts_with("part2")) {
                let c = GROUP_COMPONENTS
                    .clone()
                    .find(|&j| !p.item.components[j - 1].is_zero())
                    .unwrap_or(0);
                let e = masks.entry(p.bin).or_insert((0, 0, true));
                e.2 &= e.0 >> c & 1 == 0;
                e.0 |= 1 << c;
                e.1 += 1;
            }
            let most = masks.values().map(|m| m.1).max().unwrap_or(0);
            let distinct = masks.values().all(|m| m.2);
            let mut by_mask: BTreeMap<u8, i64> = BTreeMap::new();
            for m in masks.values() {
                *by_mask.entry(m.0).or_default() += 1;
            }
            let mut tables: BTreeMap<&str, BTreeMap<String, i64>> = BTreeMap::new();
            for size in 1..=3u32 {
                let name = ["Z", "Y", "X"][size as usize - 1];
                let table = tables.entry(name).or_default();
                for mask in 0u8..=255 {
                    if mask & !complement(0) == 0 && mask.count_ones() == size {
                        table.insert(label(mask), by_mask.get(&mask).copied().unwrap_or(0));
                    }
                }
            }
            let sum = |name: &str| tables[name].values().sum::<i64>();
            let (x, y, z) = (sum("X"), sum("Y"), sum("Z"));
            cert.counter("X", x);
            cert.counter("Y", y);
            cert.counter("Z", z);
            cert.counter("blocking_checks", runs.iter().map(|r| r.adversary.blocking_checks).sum::<u64>());
            let violations: u64 = runs.iter().map(|r| r.adversary.blocking_violations).sum();
            cert.counter("blocking_violations", violations);
            let count = |m: u8| by_mask.get(&m).copied().unwrap_or(0);

            let mut alg_max = 0u64;
            let mut per_branch = Vec::new();
            for run in runs {
                let a = &run.adversary;
                let Stage::Done = a.stage else {
                    return Err(StrategyError::ConstructionInvariantBroken("unfinished branch".into()));
                };
                let t = triples()
                    .into_iter()
                    .find(|&t| run.label == format!("T{}", label(t)))
                    .ok_or_else(|| StrategyError::ConstructionInvariantBroken(format!("unknown branch {}", run.label)))?;
                let tc = complement(t);
                let x_blocked = x - count(t) - count(tc);
                let y_split: i64 = by_mask
                    .iter()
                    .filter(|(m, _)| m.count_ones() == 2 && *m & t != 0 && *m & tc != 0)
                    .map(|(_, c)| c)
                    .sum();
                let alg = run.state.cost() as i64;
                cert.counter(&format!("alg_{}", run.label), alg);
                cert.counter(&format!("X'_{}", run.label), x_blocked);
                cert.counter(&format!("Y'_{}", run.label), y_split);
                per_branch.push((run.label.clone(), alg, q as i64 + x_blocked + y_split + 2 * n as i64));
                alg_max = alg_max.max(alg as u64);

                // slot p: groups in T plus the p-th item near 1 on the
                // complement; slot N+p: the other groups plus the p-th item
                // near 1 on T
                let mut offline = OfflineSolution::new();
                let slot0 = pack_part1(&mut offline, &a.part1, k);
                for (i, &id) in a.part2.iter().enumerate() {
                    let comp = i % 6 + 2;
                    let slot = if t >> comp & 1 == 1 { i / 6 } else { n + i / 6 };
                    offline.assign(id, slot0 + slot);
                }
                for (i, &id) in a.part3.iter().enumerate() {
                    let slot = if i % 2 == 1 { i / 2 } else { n + i / 2 };
                    offline.assign(id, slot0 + slot);
                }
                cert.branches.push(branch_certificate(&run.label, &run.state, offline));
            }
            for (name, table) in tables {
                cert.tables.insert(name.to_string(), table);
            }

            cert.check_ge("q_counting", q, 2 * n);
            cert.check_le("q_at_most_6n", q, 6 * n);
            cert.check_eq("counter_identity", 3 * x + 2 * y + z, 6 * n as i64);
            cert.check_le("part2_per_bin", most, 3);
            cert.check("part2_distinct_components", format!("{distinct}"), distinct);
            for (label, alg, lower) in per_branch {
                cert.check_ge(&format!("alg_{label}"), alg, lower);
            }
            cert.check_ge("max_branch_alg", alg_max, ceil_div(152 * n as u64, 29));
            cert.check_eq("blocking_violations", violations, 0);
            cert.check_eq("branch_count", runs.len(), 10);
            cert.check_branches(2 * n as u64 + ceil_div(q as u64, k as u64) + 1);
        }
        cert.compute_certified_ratio();
        let (certified, guaranteed) = (cert.certified_ratio.clone(), cert.guaranteed_bound.clone());
        cert.check_ratio_ge("certified_ratio", &certified, &guaranteed);
        Ok(cert)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn ten_triples_with_complements() {
        let t = triples();
        assert_eq!(t.len(), 10);
        let all: BTreeSet<u8> = t.iter().copied().collect();
        assert_eq!(all.len(), 10);
        for m in t {
            assert_eq!(m.count_ones(), 3);
            assert_eq!(complement(m).count_ones(), 3);
            assert_eq!(m & complement(m), 0);
            assert!(m & 1 << 2 != 0);
        }
        assert_eq!(label(triples()[0]), "234");
    }
}
