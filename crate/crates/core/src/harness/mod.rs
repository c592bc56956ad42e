//! Run orchestration: drives an adversary against an algorithm, handles the
//! fork by replaying the shared prefix on fresh algorithm instances, and
//! produces the certificate together with a trace.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{AlgorithmFault, AlgorithmSpec, OnlineAlgorithm};
use crate::setfamily::{FamilyKind, SubsetFamily};
use crate::strategies::{
    Adversary, AdversaryStep, BranchRun, Certificate, StrategyConfig, StrategyError, D3, D8, LargeD, MediumD,
};
use crate::vpcore::{Decision, Item, PackError, PackingState};

pub mod bounds;
pub mod config;
pub mod trace;
pub mod verify;

pub use trace::TraceRecord;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("algorithm fault at seq {seq}{}: {fault}", branch_suffix(.branch))]
    Algorithm {
        seq: usize,
        branch: Option<String>,
        fault: AlgorithmFault,
    },
    #[error("infeasible decision at seq {seq}{}: {error}", branch_suffix(.branch))]
    Infeasible {
        seq: usize,
        branch: Option<String>,
        error: PackError,
    },
    #[error("parameters rejected: {0}")]
    Parameters(StrategyError),
    #[error("testbed fault: {0}")]
    Construction(StrategyError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn branch_suffix(b: &Option<String>) -> String {
    b.as_ref().map(|l| format!(" in branch {l}")).unwrap_or_default()
}

impl From<StrategyError> for RunError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::PreconditionViolated(_) | StrategyError::Family(_) => RunError::Parameters(e),
            other => RunError::Construction(other),
        }
    }
}

impl RunError {
    /// 2 for algorithm faults, 3 for testbed faults, 4 for bad parameters.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Algorithm { .. } | RunError::Infeasible { .. } => 2,
            RunError::Construction(_) => 3,
            RunError::Parameters(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

/// Builds a fresh algorithm instance; the argument is the branch index for
/// instances that replay a fork prefix.
pub type AlgorithmFactory<'a> = dyn Fn(Option<usize>) -> Result<Box<dyn OnlineAlgorithm>, AlgorithmFault> + Sync + 'a;

#[derive(Debug)]
pub struct Played<A> {
    pub runs: Vec<BranchRun<A>>,
    pub records: Vec<TraceRecord>,
    pub algorithm: String,
}

fn drive<A: Adversary>(
    adv: &mut A,
    state: &mut PackingState,
    alg: &mut dyn OnlineAlgorithm,
    branch: Option<&str>,
    log: &mut Vec<TraceRecord>,
) -> Result<Option<Vec<String>>, RunError> {
    let branch_name = || branch.map(str::to_string);
    loop {
        let step = adv.next_step(state)?;
        log.extend(adv.take_events().into_iter().map(|event| TraceRecord::Oracle {
            branch: branch_name(),
            event,
        }));
        let item = match step {
            AdversaryStep::Emit(item) => item,
            AdversaryStep::Fork(labels) => return Ok(Some(labels)),
            AdversaryStep::Done => return Ok(None),
        };
        let seq = state.trace().len();
        item.validate().map_err(|e| RunError::Construction(e.into()))?;
        let item = Arc::new(item);
        let decision = alg.place(&item, state).map_err(|fault| RunError::Algorithm {
            seq,
            branch: branch_name(),
            fault,
        })?;
        let (bin, opened) = state.apply(item.clone(), decision).map_err(|error| match error {
            PackError::InfeasibleDecision { .. } => RunError::Infeasible {
                seq,
                branch: branch_name(),
                error,
            },
            other => RunError::Construction(other.into()),
        })?;
        log.push(TraceRecord::Placement {
            seq,
            branch: branch_name(),
            item: (*item).clone(),
            decision,
            bin,
            opened,
        });
        adv.observe(state)?;
        log.extend(adv.take_events().into_iter().map(|event| TraceRecord::Oracle {
            branch: branch_name(),
            event,
        }));
    }
}

/// Replays `prefix` on a fresh instance, requiring identical decisions.
fn replay_prefix(
    alg: &mut dyn OnlineAlgorithm,
    state: &mut PackingState,
    prefix: &[(Arc<Item>, Decision)],
    label: &str,
) -> Result<(), RunError> {
    for (seq, (item, expected)) in prefix.iter().enumerate() {
        let fault = |fault| RunError::Algorithm {
            seq,
            branch: Some(label.to_string()),
            fault,
        };
        let got = alg.place(item, state).map_err(fault)?;
        if got != *expected {
            return Err(fault(AlgorithmFault::Nondeterministic {
                item: item.id,
                got,
                expected: *expected,
            }));
        }
        state.apply(item.clone(), got).map_err(|error| RunError::Infeasible {
            seq,
            branch: Some(label.to_string()),
            error,
        })?;
    }
    Ok(())
}

/// Plays `adversary` to completion. On a fork every branch starts from a
/// clone of the adversary and a fresh algorithm that re-plays the prefix.
pub fn play<A: Adversary>(mut adversary: A, factory: &AlgorithmFactory, parallel: bool) -> Result<Played<A>, RunError> {
    let mut state = PackingState::new(adversary.dimension(), adversary.context().clone());
    let mut alg = factory(None).map_err(|fault| RunError::Algorithm {
        seq: 0,
        branch: None,
        fault,
    })?;
    let algorithm = alg.identity();
    let mut records = Vec::new();
    let Some(labels) = drive(&mut adversary, &mut state, alg.as_mut(), None, &mut records)? else {
        return Ok(Played {
            runs: vec![BranchRun {
                label: "main".into(),
                adversary,
                state,
            }],
            records,
            algorithm,
        });
    };
    drop(alg);
    records.push(TraceRecord::Fork { labels: labels.clone() });
    let prefix: Vec<(Arc<Item>, Decision)> = state.trace().iter().map(|p| (p.item.clone(), p.decision)).collect();
    let d = adversary.dimension();
    let ctx = adversary.context().clone();

    let branch = |i: usize| -> Result<(BranchRun<A>, Vec<TraceRecord>), RunError> {
        let label = &labels[i];
        let mut alg = factory(Some(i)).map_err(|fault| RunError::Algorithm {
            seq: 0,
            branch: Some(label.clone()),
            fault,
        })?;
        let mut st = PackingState::new(d, ctx.clone());
        replay_prefix(alg.as_mut(), &mut st, &prefix, label)?;
        let mut adv = adversary.clone();
        adv.enter_branch(i)?;
        let mut log = Vec::new();
        if drive(&mut adv, &mut st, alg.as_mut(), Some(label), &mut log)?.is_some() {
            return Err(RunError::Construction(StrategyError::ConstructionInvariantBroken(
                "second fork in one run".into(),
            )));
        }
        Ok((
            BranchRun {
                label: label.clone(),
                adversary: adv,
                state: st,
            },
            log,
        ))
    };
    let results: Vec<_> = if parallel {
        (0..labels.len()).into_par_iter().map(branch).collect()
    } else {
        (0..labels.len()).map(branch).collect()
    };
    let mut runs = Vec::new();
    for r in results {
        let (run, log) = r?;
        records.extend(log);
        runs.push(run);
    }
    Ok(Played {
        runs,
        records,
        algorithm,
    })
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub certificate: Certificate,
    pub records: Vec<TraceRecord>,
}

impl RunOutcome {
    pub fn report(&self) -> Report {
        Report::new(&self.certificate)
    }
}

pub fn family_for(nu: u32, kind: FamilyKind, seed: u64) -> Result<SubsetFamily, StrategyError> {
    Ok(match kind {
        FamilyKind::Powerset => SubsetFamily::powerset(nu)?,
        FamilyKind::Code => SubsetFamily::code(nu, seed)?,
    })
}

fn finish<A: Adversary>(
    config: &StrategyConfig,
    adversary: A,
    factory: &AlgorithmFactory,
    parallel: bool,
) -> Result<RunOutcome, RunError> {
    let dimension = adversary.dimension();
    let context = (**adversary.context()).clone();
    let played = play(adversary, factory, parallel)?;
    let mut certificate = A::certify(&played.runs)?;
    certificate.algorithm = played.algorithm.clone();
    let mut records = Vec::with_capacity(played.records.len() + 2);
    records.push(TraceRecord::Header {
        version: trace::TRACE_VERSION,
        config: config.clone(),
        algorithm: played.algorithm,
        dimension,
        context,
    });
    records.extend(played.records);
    records.push(TraceRecord::Certificate {
        certificate: Box::new(certificate.clone()),
    });
    Ok(RunOutcome { certificate, records })
}

/// Validates the parameters and runs the configured strategy.
pub fn run_with_factory(config: &StrategyConfig, factory: &AlgorithmFactory, parallel: bool) -> Result<RunOutcome, RunError> {
    match *config {
        StrategyConfig::LargeD {
            d,
            n,
            nu,
            family,
            seed,
        } => finish(config, LargeD::new(d, n, family_for(nu, family, seed)?)?, factory, parallel),
        StrategyConfig::MediumD { d, n, alpha, beta } => {
            finish(config, MediumD::new(d, n, alpha, beta)?, factory, parallel)
        }
        StrategyConfig::D3 { n, k } => finish(config, D3::new(n, k)?, factory, parallel),
        StrategyConfig::D8 { n, k } => finish(config, D8::new(n, k)?, factory, parallel),
    }
}

pub fn run(config: &StrategyConfig, algorithm: &AlgorithmSpec, parallel: bool) -> Result<RunOutcome, RunError> {
    let d = config.dimension();
    let factory = move |branch: Option<usize>| {
        let run_id = match branch {
            Some(b) => format!("{}-branch{b}", config.id()),
            None => config.id().to_string(),
        };
        algorithm.instantiate(d, &run_id)
    };
    run_with_factory(config, &factory, parallel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub label: String,
    pub alg_cost: u64,
    pub offline_cost: u64,
    pub measured_ratio: f64,
}

/// The JSON report: the certificate plus a human-oriented summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub branches: Vec<BranchSummary>,
    pub certified_ratio_decimal: f64,
    pub guaranteed_bound_decimal: f64,
    pub certificate: Certificate,
}

fn to_f64(r: &num_rational::BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

impl Report {
    pub fn new(cert: &Certificate) -> Self {
        Report {
            passed: cert.passed(),
            failed_checks: cert
                .failed_checks()
                .iter()
                .map(|c| format!("{}: {}", c.name, c.statement))
                .collect(),
            branches: cert
                .branches
                .iter()
                .map(|b| BranchSummary {
                    label: b.label.clone(),
                    alg_cost: b.alg_cost,
                    offline_cost: b.offline_cost,
                    measured_ratio: b.alg_cost as f64 / b.offline_cost.max(1) as f64,
                })
                .collect(),
            certified_ratio_decimal: to_f64(&cert.certified_ratio),
            guaranteed_bound_decimal: to_f64(&cert.guaranteed_bound),
            certificate: cert.clone(),
        }
    }
}
