//! Medium dimension: β phases, each ending when the algorithm has opened N new
//! bins. Intermediate phases place a near-1 value at a moving component π.

use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;

use super::{
    branch_certificate, feasible_among, last_placement, Adversary, AdversaryStep, BranchRun, Certificate,
    StrategyError,
};
use crate::adaptive::{AdaptiveOracle, OracleEvent};
use crate::exactnum::{ExactValue, NumericContext};
use crate::vpcore::{Item, OfflineSolution, PackingState};

#[derive(Debug, Clone)]
struct Record {
    id: usize,
    phase: usize,
    large: bool,
}

#[derive(Debug, Clone)]
pub struct MediumD {
    d: usize,
    n: usize,
    alpha: usize,
    beta: usize,
    ctx: Arc<NumericContext>,
    oracle: AdaptiveOracle,
    phase: usize,
    phase_first_bin: usize,
    pi: usize,
    new_bins_in_phase: usize,
    larges_under_pi: usize,
    items_under_pi: usize,
    max_items_under_pi: usize,
    max_item_pi: usize,
    mus: Vec<ExactValue>,
    records: Vec<Record>,
    pi_trajectory: Vec<i64>,
    new_bins_per_phase: Vec<i64>,
    items_per_phase: Vec<i64>,
    blocking_checks: u64,
    blocking_violations: u64,
}

impl MediumD {
    pub fn new(d: usize, n: usize, alpha: usize, beta: usize) -> Result<Self, StrategyError> {
        let pre = |m: String| Err(StrategyError::PreconditionViolated(m));
        if alpha < 2 || beta < 2 {
            return pre(format!("α = {alpha} and β = {beta} must both be at least 2"));
        }
        if d < 2 + alpha * (beta - 2) {
            return pre(format!("d = {d} < 2 + α(β−2) = {}", 2 + alpha * (beta - 2)));
        }
        if n == 0 || !n.is_multiple_of(alpha) {
            return pre(format!("α = {alpha} must divide N = {n}"));
        }
        let emissions = (n * n + (beta - 2) * alpha * n) as u64;
        let m_cap = emissions + n as u64;
        let n3 = BigUint::from(n).pow(3);
        let base = n3.max(BigUint::from(m_cap + 1)).max(BigUint::from(9u32));
        let ctx = Arc::new(NumericContext::with_minimal_start(base, 4, BigUint::from(n), m_cap)?);
        let oracle = AdaptiveOracle::new(ctx.clone(), emissions, (beta - 1) as u64)?;
        Ok(MediumD {
            d,
            n,
            alpha,
            beta,
            ctx,
            oracle,
            phase: 1,
            phase_first_bin: 0,
            pi: 2,
            new_bins_in_phase: 0,
            larges_under_pi: 0,
            items_under_pi: 0,
            max_items_under_pi: 0,
            max_item_pi: 0,
            mus: Vec::new(),
            records: Vec::new(),
            pi_trajectory: vec![2],
            new_bins_per_phase: Vec::new(),
            items_per_phase: Vec::new(),
            blocking_checks: 0,
            blocking_violations: 0,
        })
    }

    /// `βN / (N(1 + (β−2)/α) + 1)`.
    pub fn guaranteed_bound(n: usize, alpha: usize, beta: usize) -> BigRational {
        let n = n as i64;
        let offline = BigRational::new((n * (alpha + beta - 2) as i64).into(), (alpha as i64).into())
            + BigRational::from_integer(1.into());
        BigRational::from_integer((beta as i64 * n).into()) / offline
    }

    fn is_last_phase(&self) -> bool {
        self.phase == self.beta
    }

    fn one_minus_mu(&self) -> Result<ExactValue, StrategyError> {
        let mu = self.mus.last().ok_or_else(|| {
            StrategyError::ConstructionInvariantBroken("no μ before the first intermediate phase".into())
        })?;
        Ok(self.ctx.sub(&ExactValue::one(), mu)?)
    }

    fn close_phase(&mut self, state: &PackingState) -> Result<(), StrategyError> {
        self.new_bins_per_phase.push(self.new_bins_in_phase as i64);
        let items = self.records.iter().filter(|r| r.phase == self.phase).count();
        self.items_per_phase.push(items as i64);
        self.mus.push(self.oracle.snapshot_mu()?);
        self.phase += 1;
        self.phase_first_bin = state.bins().len();
        self.new_bins_in_phase = 0;
        self.larges_under_pi = 0;
        self.items_under_pi = 0;
        Ok(())
    }
}

impl Adversary for MediumD {
    fn name(&self) -> &'static str {
        "medium-d"
    }

    fn dimension(&self) -> usize {
        self.d
    }

    fn context(&self) -> &Arc<NumericContext> {
        &self.ctx
    }

    fn next_step(&mut self, state: &PackingState) -> Result<AdversaryStep, StrategyError> {
        let id = self.records.len();
        let mut comps = vec![ExactValue::zero(); self.d];
        if self.phase == 1 {
            if id >= self.n * self.n {
                return Err(StrategyError::ConstructionInvariantBroken(format!(
                    "first phase exceeded N² = {} items",
                    self.n * self.n
                )));
            }
            let a = self.oracle.emit()?;
            comps[0] = self.ctx.rational(1, self.n as i64)?;
            for c in &mut comps[1..] {
                *c = a.clone();
            }
            return Ok(AdversaryStep::Emit(Item::new(id, "phase1", comps)));
        }
        let item = if self.is_last_phase() {
            if self.new_bins_in_phase == self.n {
                return Ok(AdversaryStep::Done);
            }
            comps[self.d - 1] = self.one_minus_mu()?;
            Item::new(id, format!("phase{}", self.phase), comps)
        } else {
            if self.pi > self.d - 1 {
                return Err(StrategyError::ConstructionInvariantBroken(format!(
                    "π = {} exceeds d − 1 = {} inside a phase",
                    self.pi,
                    self.d - 1
                )));
            }
            let a = self.oracle.emit()?;
            comps[self.pi - 1] = self.one_minus_mu()?;
            for c in &mut comps[self.pi..] {
                *c = a.clone();
            }
            self.max_item_pi = self.max_item_pi.max(self.pi);
            Item::new(id, format!("phase{}", self.phase), comps)
        };
        self.blocking_checks += 1;
        if feasible_among(state, 0..self.phase_first_bin, &item)? > 0 {
            self.blocking_violations += 1;
        }
        Ok(AdversaryStep::Emit(item))
    }

    fn observe(&mut self, state: &PackingState) -> Result<(), StrategyError> {
        let p = last_placement(state)?;
        let large = p.opened;
        self.records.push(Record {
            id: p.item.id,
            phase: self.phase,
            large,
        });
        if large {
            self.new_bins_in_phase += 1;
        }
        if self.is_last_phase() {
            return Ok(());
        }
        self.oracle.classify(large)?;
        if self.phase == 1 {
            if self.new_bins_in_phase == self.n {
                self.close_phase(state)?;
            }
            return Ok(());
        }
        self.items_under_pi += 1;
        self.max_items_under_pi = self.max_items_under_pi.max(self.items_under_pi);
        if large {
            self.larges_under_pi += 1;
        }
        if self.larges_under_pi == self.n / self.alpha {
            self.pi += 1;
            self.pi_trajectory.push(self.pi as i64);
            self.larges_under_pi = 0;
            self.items_under_pi = 0;
        }
        if self.new_bins_in_phase == self.n {
            if self.larges_under_pi != 0 {
                return Err(StrategyError::ConstructionInvariantBroken(
                    "phase ended between π increments".into(),
                ));
            }
            self.close_phase(state)?;
        }
        Ok(())
    }

    fn enter_branch(&mut self, index: usize) -> Result<(), StrategyError> {
        Err(StrategyError::ConstructionInvariantBroken(format!(
            "medium-d never forks (asked for branch {index})"
        )))
    }

    fn take_events(&mut self) -> Vec<OracleEvent> {
        self.oracle.take_events()
    }

    fn certify(runs: &[BranchRun<Self>]) -> Result<Certificate, StrategyError> {
        let [run] = runs else {
            return Err(StrategyError::ConstructionInvariantBroken("medium-d expects one run".into()));
        };
        let adv = &run.adversary;
        let (n, alpha, beta, d) = (adv.n, adv.alpha, adv.beta, adv.d);

        // phase-1 larges share bin 0; intermediate larges round-robin over N/α
        // bins per phase; smalls and last-phase items round-robin over N bins
        let per_phase = n / alpha;
        let small_base = 1 + (beta - 2) * per_phase;
        let mut offline = OfflineSolution::new();
        let mut larges_seen = vec![0usize; beta + 1];
        let mut smalls_seen = 0usize;
        for r in &adv.records {
            let bin = if r.large && r.phase == 1 {
                0
            } else if r.large && r.phase < beta {
                let k = larges_seen[r.phase];
                larges_seen[r.phase] += 1;
                1 + (r.phase - 2) * per_phase + k % per_phase
            } else {
                let k = smalls_seen;
                smalls_seen += 1;
                small_base + k % n
            };
            offline.assign(r.id, bin);
        }

        let mut cert = Certificate::new("medium-d");
        cert.param("d", d);
        cert.param("N", n);
        cert.param("alpha", alpha);
        cert.param("beta", beta);
        cert.param("F", adv.ctx.base());
        cert.param("e_start", adv.ctx.e_start());
        for (j, mu) in adv.mus.iter().enumerate() {
            if let Some(e) = mu.tail().keys().next() {
                cert.param(&format!("mu_{}", j + 1), e);
            }
        }
        cert.counter("alg_cost", run.state.cost());
        cert.counter("phases", adv.new_bins_per_phase.len() + 1);
        cert.counter("final_pi", adv.pi);
        cert.counter("max_item_pi", adv.max_item_pi);
        cert.counter("max_items_same_pi", adv.max_items_under_pi);
        cert.counter("blocking_checks", adv.blocking_checks);
        cert.counter("blocking_violations", adv.blocking_violations);
        cert.trajectories.insert("pi".into(), adv.pi_trajectory.clone());
        let mut per_phase_bins = adv.new_bins_per_phase.clone();
        per_phase_bins.push(adv.new_bins_in_phase as i64);
        cert.trajectories.insert("new_bins_per_phase".into(), per_phase_bins);
        cert.trajectories.insert("items_per_phase".into(), adv.items_per_phase.clone());
        cert.branches.push(branch_certificate("main", &run.state, offline));

        cert.check_eq("alg_cost_exact", run.state.cost(), beta * n);
        cert.check_le("final_pi", adv.pi, alpha * (beta - 2) + 2);
        cert.check_le("final_pi_dimension", adv.pi, d);
        if beta > 2 {
            cert.check_le("item_pi", adv.max_item_pi, d - 1);
            cert.check_eq("pi_increments", adv.pi_trajectory.len() - 1, alpha * (beta - 2));
        }
        cert.check_le("items_same_pi", adv.max_items_under_pi, n);
        cert.check_eq("blocking_violations", adv.blocking_violations, 0);
        // cost bound N(1 + (β−2)/α) + 1 is an integer since α | N
        cert.check_branches((n + (beta - 2) * per_phase + 1) as u64);
        cert.guaranteed_bound = MediumD::guaranteed_bound(n, alpha, beta);
        cert.compute_certified_ratio();
        let (certified, guaranteed) = (cert.certified_ratio.clone(), cert.guaranteed_bound.clone());
        cert.check_ratio_ge("certified_ratio", &certified, &guaranteed);
        if d < alpha * (beta - 2) + beta + 1 {
            cert.notes.push(format!(
                "d = {d} is below α(β−2)+β+1 = {}; the looser π estimate would not apply, \
                 the run relies on the coincident phase-end increment",
                alpha * (beta - 2) + beta + 1
            ));
        }
        Ok(cert)
    }
}
