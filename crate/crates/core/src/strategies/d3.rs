//! Dimension 3: a long first part of tiny items, then 2N items with one
//! near-1 component, then one of two continuations.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;

use super::certificate::ceil_div;
use super::{
    branch_certificate, feasible_among, last_placement, pack_in_groups, Adversary, AdversaryStep, BranchRun,
    Certificate, StrategyError,
};
use crate::adaptive::{AdaptiveOracle, OracleEvent};
use crate::exactnum::{ExactValue, NumericContext};
use crate::vpcore::{Item, OfflineSolution, PackingState};

pub const BRANCHES: [&str; 2] = ["I21", "I22"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Part1,
    Part2,
    AwaitFork,
    Part3(usize),
    Done,
}

#[derive(Debug, Clone)]
pub struct D3 {
    n: usize,
    k: usize,
    ctx: Arc<NumericContext>,
    oracle: AdaptiveOracle,
    stage: Stage,
    next_id: usize,
    part1: Vec<(usize, bool)>,
    x: usize,
    mu: ExactValue,
    part2: Vec<usize>,
    part3: Vec<usize>,
    branch: Option<usize>,
    early_stop: bool,
    blocking_checks: u64,
    blocking_violations: u64,
}

/// Part-1 larges `k` per offline bin, then part-1 smalls `k` per bin. Returns
/// the id of the first small bin, where the part-2 slots start.
pub(crate) fn pack_part1(offline: &mut OfflineSolution, part1: &[(usize, bool)], k: usize) -> usize {
    let larges: Vec<usize> = part1.iter().filter(|r| r.1).map(|r| r.0).collect();
    let smalls: Vec<usize> = part1.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let first_small = pack_in_groups(offline, &larges, k, 0);
    pack_in_groups(offline, &smalls, k, first_small);
    first_small
}

/// Context for the two small-dimension constructions: `F` is at least `10K`
/// and must also exceed the emission count.
pub(crate) fn small_d_context(n: usize, k: usize, c_max: u64) -> Result<Arc<NumericContext>, StrategyError> {
    let m_cap = (2 * k * n + 1) as u64;
    let base = BigUint::from((10 * k as u64).max(m_cap + 1).max(2 * c_max + 1));
    let d_macro = BigUint::from(num_integer::lcm(k, 3));
    Ok(Arc::new(NumericContext::with_minimal_start(base, c_max, d_macro, m_cap)?))
}

impl D3 {
    pub fn new(n: usize, k: usize) -> Result<Self, StrategyError> {
        if n == 0 || k < n {
            return Err(StrategyError::PreconditionViolated(format!(
                "need K ≥ N ≥ 1, got N = {n}, K = {k}"
            )));
        }
        let ctx = small_d_context(n, k, 16)?;
        let oracle = AdaptiveOracle::new(ctx.clone(), (2 * k * n) as u64, 1)?;
        Ok(D3 {
            n,
            k,
            ctx,
            oracle,
            stage: Stage::Part1,
            next_id: 0,
            part1: Vec::new(),
            x: 0,
            mu: ExactValue::zero(),
            part2: Vec::new(),
            part3: Vec::new(),
            branch: None,
            early_stop: false,
            blocking_checks: 0,
            blocking_violations: 0,
        })
    }

    /// `⌈9N/2⌉ / (2N + 7)`.
    pub fn guaranteed_bound(n: usize) -> BigRational {
        BigRational::new(ceil_div(9 * n as u64, 2).into(), (2 * n as u64 + 7).into())
    }

    fn value(&self, whole: i64, mus: i64) -> Result<ExactValue, StrategyError> {
        let base = if whole == 0 { ExactValue::zero() } else { ExactValue::one() };
        Ok(self.ctx.add(&base, &self.mu.times(mus))?)
    }

    fn emit_blocked(&mut self, state: &PackingState, phase: &str, c: [ExactValue; 3]) -> Result<AdversaryStep, StrategyError> {
        let item = Item::new(self.next_id, phase, c.to_vec());
        self.next_id += 1;
        self.blocking_checks += 1;
        if feasible_among(state, 0..self.x, &item)? > 0 {
            self.blocking_violations += 1;
        }
        Ok(AdversaryStep::Emit(item))
    }
}

impl Adversary for D3 {
    fn name(&self) -> &'static str {
        "d3"
    }

    fn dimension(&self) -> usize {
        3
    }

    fn context(&self) -> &Arc<NumericContext> {
        &self.ctx
    }

    fn next_step(&mut self, state: &PackingState) -> Result<AdversaryStep, StrategyError> {
        let n = self.n;
        if self.stage == Stage::Part1 {
            if self.part1.len() < 2 * self.k * n {
                let a = self.oracle.emit()?;
                let item = Item::new(self.next_id, "part1", vec![self.ctx.rational(1, self.k as i64)?, a.clone(), a]);
                self.next_id += 1;
                return Ok(AdversaryStep::Emit(item));
            }
            self.x = state.bins().len();
            if self.x > 6 * n {
                self.early_stop = true;
                self.stage = Stage::Done;
                return Ok(AdversaryStep::Done);
            }
            self.mu = self.oracle.snapshot_mu()?;
            self.stage = Stage::Part2;
        }
        match self.stage {
            Stage::Part2 if self.part2.len() < 2 * n => {
                let zero = ExactValue::zero();
                let c = if self.part2.len().is_multiple_of(2) {
                    [zero, self.value(1, -4)?, self.value(0, 1)?]
                } else {
                    [zero, self.value(0, 1)?, self.value(1, -4)?]
                };
                self.emit_blocked(state, "part2", c)
            }
            Stage::Part2 => {
                self.stage = Stage::AwaitFork;
                Ok(AdversaryStep::Fork(BRANCHES.iter().map(|s| s.to_string()).collect()))
            }
            Stage::Part3(b) => {
                let total = if b == 0 { n } else { 2 * n };
                let i = self.part3.len();
                if i == total {
                    self.stage = Stage::Done;
                    return Ok(AdversaryStep::Done);
                }
                let zero = ExactValue::zero();
                let c = match (b, i < n) {
                    (0, _) => [zero, self.value(1, -1)?, self.value(1, -1)?],
                    (_, true) => [zero, self.value(0, 3)?, self.value(1, -2)?],
                    (_, false) => [zero, self.value(1, -2)?, self.value(0, 3)?],
                };
                self.emit_blocked(state, &format!("part3-{}", BRANCHES[b]), c)
            }
            Stage::Done => Ok(AdversaryStep::Done),
            Stage::AwaitFork | Stage::Part1 => Err(StrategyError::ConstructionInvariantBroken(
                "d3 asked for an item while waiting for a branch".into(),
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
        if self.stage != Stage::AwaitFork || index >= BRANCHES.len() {
            return Err(StrategyError::ConstructionInvariantBroken(format!("cannot enter branch {index}")));
        }
        self.stage = Stage::Part3(index);
        self.branch = Some(index);
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
        let (n, k, x) = (adv.n, adv.k, adv.x);
        let mut cert = Certificate::new("d3");
        cert.param("d", 3);
        cert.param("N", n);
        cert.param("K", k);
        cert.param("F", adv.ctx.base());
        cert.param("e_start", adv.ctx.e_start());
        cert.counter("X", x);
        cert.guaranteed_bound = D3::guaranteed_bound(n);

        if adv.early_stop {
            let mut offline = OfflineSolution::new();
            let ids: Vec<usize> = adv.part1.iter().map(|r| r.0).collect();
            pack_in_groups(&mut offline, &ids, k, 0);
            cert.early_stop = true;
            cert.branches.push(branch_certificate("main", &first.state, offline));
            let b = cert.branches[0].clone();
            cert.check_eq("offline_equals_counting_bound", b.offline_cost, b.counting_lower_bound);
            cert.check_eq("offline_cost_exact", b.offline_cost, 2 * n as u64);
            cert.check_ge("x_above_6n", x, 6 * n + 1);
            cert.check_branches(2 * n as u64);
        } else {
            let mu = adv.mu.tail().keys().next().cloned();
            if let Some(e) = mu {
                cert.param("mu", e);
            }
            let mut part2_per_bin: BTreeMap<usize, usize> = BTreeMap::new();
            for p in first.state.trace().iter().filter(|p| p.item.phase == "part2") {
                *part2_per_bin.entry(p.bin).or_default() += 1;
            }
            let z1 = part2_per_bin.values().filter(|&&c| c == 1).count();
            let z2 = part2_per_bin.values().filter(|&&c| c == 2).count();
            let most = part2_per_bin.values().copied().max().unwrap_or(0);
            cert.counter("Z1", z1);
            cert.counter("Z2", z2);
            cert.counter("blocking_checks", runs.iter().map(|r| r.adversary.blocking_checks).sum::<u64>());
            let violations: u64 = runs.iter().map(|r| r.adversary.blocking_violations).sum();
            cert.counter("blocking_violations", violations);

            for run in runs {
                let a = &run.adversary;
                let mut offline = OfflineSolution::new();
                let slot0 = pack_part1(&mut offline, &a.part1, k);
                let pairs = a.branch == Some(0);
                for (i, &id) in a.part2.iter().enumerate() {
                    // I21 pairs the two types; I22 gives each its own slot
                    let slot = if pairs { i / 2 } else { (i % 2) * n + i / 2 };
                    offline.assign(id, slot0 + slot);
                }
                for (i, &id) in a.part3.iter().enumerate() {
                    let slot = if pairs { n + i } else { i };
                    offline.assign(id, slot0 + slot);
                }
                cert.counter(&format!("alg_{}", run.label), run.state.cost());
                cert.branches.push(branch_certificate(&run.label, &run.state, offline));
            }

            let cost = |label: &str| cert.get(&format!("alg_{label}")).unwrap_or(0) as usize;
            let (alg21, alg22) = (cost(BRANCHES[0]), cost(BRANCHES[1]));
            cert.check_ge("x_counting", x, 2 * n);
            cert.check_le("x_at_most_6n", x, 6 * n);
            cert.check_eq("z_identity", z1 + 2 * z2, 2 * n);
            cert.check_le("part2_per_bin", most, 2);
            cert.check_ge("alg_I21", alg21, x + z1 + z2 + n);
            cert.check_ge("alg_I22", alg22, x + 2 * n + z2);
            cert.check_ge("max_branch_alg", alg21.max(alg22) as u64, ceil_div(9 * n as u64, 2));
            cert.check_eq("blocking_violations", violations, 0);
            cert.check_eq("branch_count", runs.len(), BRANCHES.len());
            cert.check_branches(2 * n as u64 + ceil_div(x as u64, k as u64) + 1);
        }
        cert.compute_certified_ratio();
        let (certified, guaranteed) = (cert.certified_ratio.clone(), cert.guaranteed_bound.clone());
        cert.check_ratio_ge("certified_ratio", &certified, &guaranteed);
        Ok(cert)
    }
}
