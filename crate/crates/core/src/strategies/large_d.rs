//! Large dimension: d phases of N identical items. Phase j puts 1 on
//! component j and ε on earlier components whose class lies outside the
//! chosen set S_j, so a bin can only take the item if its classes are inside
//! S_j.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;

use super::{branch_certificate, last_placement, Adversary, AdversaryStep, BranchRun, Certificate, StrategyError};
use crate::exactnum::{ExactValue, NumericContext};
use crate::setfamily::{Subset, SubsetFamily};
use crate::vpcore::{Item, OfflineSolution, PackingState};

#[derive(Debug, Clone)]
pub struct LargeD {
    d: usize,
    n: usize,
    family: Arc<SubsetFamily>,
    ctx: Arc<NumericContext>,
    eps: ExactValue,
    phase: usize,
    emitted_in_phase: usize,
    current: Option<usize>,
    represented_at_start: Vec<bool>,
    receiving: Vec<usize>,
    class_of_phase: Vec<u32>,
    bin_sets: Vec<Subset>,
    n_counts: Vec<usize>,
    phase_items: Vec<Vec<usize>>,
    phi: u64,
    phi_trajectory: Vec<i64>,
    delta_phi: Vec<i64>,
    set_trajectory: Vec<i64>,
    sum_n_trajectory: Vec<i64>,
    early_stop: bool,
    done: bool,
    blocking_violations: u64,
}

fn ceil_ratio(r: &BigRational) -> BigInt {
    r.ceil().to_integer()
}

impl LargeD {
    pub fn new(d: usize, n: usize, family: SubsetFamily) -> Result<Self, StrategyError> {
        let nu = family.nu() as usize;
        let alpha = family.alpha();
        if n == 0 || d == 0 {
            return Err(StrategyError::PreconditionViolated("d and N must be positive".into()));
        }
        if alpha == 0 {
            return Err(StrategyError::PreconditionViolated("empty set family".into()));
        }
        let need = BigRational::from_integer((nu * nu * alpha).into()) / family.gamma();
        if BigRational::from_integer(d.into()) < need {
            return Err(StrategyError::PreconditionViolated(format!(
                "d = {d} < ν²α/γ = {}",
                crate::exactnum::format_ratio(&need)
            )));
        }
        family.verify()?;
        let m_cap = (n * d) as u64;
        let ctx = Arc::new(NumericContext::with_minimal_start(
            BigUint::from(m_cap + 1).max(BigUint::from(3u32)),
            1,
            BigUint::from(n * d),
            m_cap,
        )?);
        let eps = ctx.rational(1, (n * d) as i64)?;
        let sets = family.alpha();
        Ok(LargeD {
            d,
            n,
            family: Arc::new(family),
            ctx,
            eps,
            phase: 1,
            emitted_in_phase: 0,
            current: None,
            represented_at_start: Vec::new(),
            receiving: Vec::new(),
            class_of_phase: Vec::new(),
            bin_sets: Vec::new(),
            n_counts: vec![0; sets],
            phase_items: Vec::new(),
            phi: 0,
            phi_trajectory: Vec::new(),
            delta_phi: Vec::new(),
            set_trajectory: Vec::new(),
            sum_n_trajectory: Vec::new(),
            early_stop: false,
            done: false,
            blocking_violations: 0,
        })
    }

    pub fn family(&self) -> &SubsetFamily {
        &self.family
    }

    /// `min(⌈αN/2⌉, ⌈dγN/(2ν²)⌉) / (νN)`.
    pub fn guaranteed_bound(d: usize, n: usize, family: &SubsetFamily) -> BigRational {
        let nu = family.nu() as usize;
        let stop = (family.alpha() * n).div_ceil(2);
        let full = ceil_ratio(
            &(BigRational::from_integer((d * n).into()) * family.gamma() / BigRational::from_integer((2 * nu * nu).into())),
        );
        BigRational::new(BigInt::from(stop).min(full), (nu * n).into())
    }

    fn start_phase(&mut self) -> Result<bool, StrategyError> {
        let sum_n: usize = self.n_counts.iter().sum();
        self.sum_n_trajectory.push(sum_n as i64);
        if sum_n >= (self.family.alpha() * self.n).div_ceil(2) {
            self.early_stop = true;
            return Ok(false);
        }
        let idx = self
            .n_counts
            .iter()
            .position(|&c| 2 * c < self.n)
            .ok_or_else(|| StrategyError::ConstructionInvariantBroken("no set with n(S) < N/2".into()))?;
        self.current = Some(idx);
        self.set_trajectory.push(idx as i64);
        self.represented_at_start = self
            .bin_sets
            .iter()
            .map(|&s| self.family.representative(s) == Some(idx))
            .collect();
        self.receiving.clear();
        self.phase_items.push(Vec::new());
        Ok(true)
    }

    fn end_phase(&mut self) {
        let Some(idx) = self.current.take() else { return };
        let s_j = self.family.sets()[idx];
        let mut best: Option<(u32, usize)> = None;
        for l in 1..=self.family.nu() {
            let bit = 1u64 << (l - 1);
            if s_j & bit == 0 {
                continue;
            }
            let count = self
                .receiving
                .iter()
                .filter(|&&b| !self.represented_at_start.get(b).copied().unwrap_or(false))
                .filter(|&&b| self.bin_sets[b] & bit == 0)
                .count();
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((l, count));
            }
        }
        let o = best.map(|b| b.0).unwrap_or(1);
        let bit = 1u64 << (o - 1);
        self.class_of_phase.push(o);
        let mut delta = 0;
        for &b in &self.receiving {
            if self.bin_sets[b] & bit == 0 {
                self.bin_sets[b] |= bit;
                delta += 1;
            }
        }
        self.phi += delta;
        self.delta_phi.push(delta as i64);
        self.phi_trajectory.push(self.phi as i64);
        self.n_counts.iter_mut().for_each(|c| *c = 0);
        for &s in &self.bin_sets {
            if let Some(i) = self.family.representative(s) {
                self.n_counts[i] += 1;
            }
        }
        self.phase += 1;
        self.emitted_in_phase = 0;
    }
}

impl Adversary for LargeD {
    fn name(&self) -> &'static str {
        "large-d"
    }

    fn dimension(&self) -> usize {
        self.d
    }

    fn context(&self) -> &Arc<NumericContext> {
        &self.ctx
    }

    fn next_step(&mut self, _state: &PackingState) -> Result<AdversaryStep, StrategyError> {
        if self.done {
            return Ok(AdversaryStep::Done);
        }
        if self.current.is_none()
            && (self.phase > self.d || !self.start_phase()?) {
                self.done = true;
                return Ok(AdversaryStep::Done);
            }
        let s_j = self.family.sets()[self.current.unwrap_or(0)];
        let mut comps = vec![ExactValue::zero(); self.d];
        for (jp, &class) in self.class_of_phase.iter().enumerate() {
            if s_j >> (class - 1) & 1 == 0 {
                comps[jp] = self.eps.clone();
            }
        }
        comps[self.phase - 1] = ExactValue::one();
        let id = self.phase_items.iter().map(Vec::len).sum();
        Ok(AdversaryStep::Emit(Item::new(id, format!("phase{}", self.phase), comps)))
    }

    fn observe(&mut self, state: &PackingState) -> Result<(), StrategyError> {
        let p = last_placement(state)?;
        let idx = self
            .current
            .ok_or_else(|| StrategyError::ConstructionInvariantBroken("placement outside a phase".into()))?;
        if p.opened {
            self.bin_sets.push(0);
        }
        if self.bin_sets[p.bin] & !self.family.sets()[idx] != 0 {
            self.blocking_violations += 1;
        }
        self.receiving.push(p.bin);
        if let Some(items) = self.phase_items.last_mut() {
            items.push(p.item.id);
        }
        self.emitted_in_phase += 1;
        if self.emitted_in_phase == self.n {
            self.end_phase();
        }
        Ok(())
    }

    fn enter_branch(&mut self, index: usize) -> Result<(), StrategyError> {
        Err(StrategyError::ConstructionInvariantBroken(format!(
            "large-d never forks (asked for branch {index})"
        )))
    }

    fn certify(runs: &[BranchRun<Self>]) -> Result<Certificate, StrategyError> {
        let [run] = runs else {
            return Err(StrategyError::ConstructionInvariantBroken("large-d expects one run".into()));
        };
        let adv = &run.adversary;
        let fam = &adv.family;
        let (d, n, nu, alpha) = (adv.d, adv.n, fam.nu() as usize, fam.alpha());
        let gamma = fam.gamma();

        let mut offline = OfflineSolution::new();
        for (items, &class) in adv.phase_items.iter().zip(&adv.class_of_phase) {
            for (l, &id) in items.iter().enumerate() {
                offline.assign(id, (class as usize - 1) * n + l);
            }
        }

        let mut cert = Certificate::new("large-d");
        cert.param("d", d);
        cert.param("N", n);
        cert.param("nu", nu);
        cert.param("alpha", alpha);
        cert.param("beta", fam.beta());
        cert.param("gamma", crate::exactnum::format_ratio(&gamma));
        cert.param("family", format!("{:?}", fam.kind()).to_lowercase());
        cert.param("epsilon", format!("1/{}", n * d));
        cert.param("F", adv.ctx.base());
        let alg = run.state.cost() as u64;
        let sum_n: usize = adv.n_counts.iter().sum();
        cert.early_stop = adv.early_stop;
        cert.counter("alg_cost", alg);
        cert.counter("phases_completed", adv.class_of_phase.len());
        cert.counter("Phi", adv.phi);
        cert.counter("sum_n", sum_n);
        cert.counter("blocking_violations", adv.blocking_violations);
        cert.trajectories.insert("Phi".into(), adv.phi_trajectory.clone());
        cert.trajectories.insert("delta_Phi".into(), adv.delta_phi.clone());
        cert.trajectories.insert("S_j".into(), adv.set_trajectory.clone());
        cert.trajectories
            .insert("o_j".into(), adv.class_of_phase.iter().map(|&c| c as i64).collect());
        cert.trajectories.insert("sum_n".into(), adv.sum_n_trajectory.clone());
        cert.tables.insert(
            "n".into(),
            fam.sets()
                .iter()
                .zip(&adv.n_counts)
                .map(|(s, &c)| (format!("{s:#x}"), c as i64))
                .collect(),
        );
        cert.branches.push(branch_certificate("main", &run.state, offline));

        cert.check_ge(
            "dimension_precondition",
            BigRational::from_integer(d.into()) * &gamma,
            BigRational::from_integer((nu * nu * alpha).into()),
        );
        cert.check("family_distance", format!("pairwise |△| ≥ {}", fam.beta()), fam.verify().is_ok());
        cert.check_eq("blocking_violations", adv.blocking_violations, 0);
        let per_phase = ceil_ratio(&(BigRational::from_integer(n.into()) * &gamma / BigRational::from_integer((2 * nu).into())));
        let min_delta = adv.delta_phi.iter().copied().min().map(BigInt::from);
        if let Some(min_delta) = min_delta {
            cert.check_ge("per_phase_delta_phi", min_delta, per_phase.clone());
        }
        cert.check_le("alg_at_most_phi", alg, adv.phi);
        cert.check_ge("alg_at_least_phi_over_nu", alg, adv.phi.div_ceil(nu as u64));
        if adv.early_stop {
            cert.check_ge("early_stop_sum_n", sum_n, (alpha * n).div_ceil(2));
            cert.check_ge("alg_at_least_sum_n", alg as usize, sum_n);
        } else {
            cert.check_eq("phases_completed", adv.class_of_phase.len(), d);
            let phi = BigRational::from_integer(adv.phi.into());
            let weak = BigRational::from_integer((d * n).into()) * &gamma / BigRational::from_integer((2 * nu * nu).into());
            cert.check_ge("phi_lower_bound", phi.clone(), weak.clone());
            cert.check_ge("phi_sum_of_phases", BigInt::from(adv.phi), per_phase * BigInt::from(d));
            cert.check_ge("alg_lower_bound", BigInt::from(alg), ceil_ratio(&weak));
        }
        cert.check_branches((nu * n) as u64);
        cert.guaranteed_bound = LargeD::guaranteed_bound(d, n, fam);
        cert.compute_certified_ratio();
        let (certified, guaranteed) = (cert.certified_ratio.clone(), cert.guaranteed_bound.clone());
        cert.check_ratio_ge("certified_ratio", &certified, &guaranteed);
        Ok(cert)
    }
}
