//! The four adversaries. Each one is a pull-based item generator: the driver
//! asks for the next step, hands the item to the algorithm, applies the
//! decision and reports back. At the end the adversary turns the finished
//! runs into a [`Certificate`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::{OracleError, OracleEvent};
use crate::exactnum::{NumError, NumericContext};
use crate::setfamily::{FamilyError, FamilyKind};
use crate::vpcore::{counting_lower_bound, offline_verify, Item, OfflineSolution, PackError, PackingState, Placement};

pub mod certificate;
pub mod d3;
pub mod d8;
pub mod large_d;
pub mod medium_d;

pub use certificate::{BranchCertificate, Certificate, Check};
pub use d3::D3;
pub use d8::D8;
pub use large_d::LargeD;
pub use medium_d::MediumD;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("construction invariant broken: {0}")]
    ConstructionInvariantBroken(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Pack(#[from] PackError),
}

#[derive(Debug, Clone)]
pub enum AdversaryStep {
    Emit(Item),
    Fork(Vec<String>),
    Done,
}

/// One finished line of play: the adversary and packing after `Done`.
#[derive(Debug, Clone)]
pub struct BranchRun<A> {
    pub label: String,
    pub adversary: A,
    pub state: PackingState,
}

pub trait Adversary: Clone + Send + Sync {
    fn name(&self) -> &'static str;

    fn dimension(&self) -> usize;

    fn context(&self) -> &Arc<NumericContext>;

    fn next_step(&mut self, state: &PackingState) -> Result<AdversaryStep, StrategyError>;

    /// Called after the item from the last `Emit` was placed; the placement is
    /// the last entry of `state.trace()`.
    fn observe(&mut self, state: &PackingState) -> Result<(), StrategyError>;

    /// Selects continuation `index` of the preceding `Fork`.
    fn enter_branch(&mut self, index: usize) -> Result<(), StrategyError>;

    fn take_events(&mut self) -> Vec<OracleEvent> {
        Vec::new()
    }

    fn certify(runs: &[BranchRun<Self>]) -> Result<Certificate, StrategyError>
    where
        Self: Sized;
}

/// Strategy selection and parameters, as stored in configs and trace headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum StrategyConfig {
    LargeD {
        d: usize,
        n: usize,
        nu: u32,
        family: FamilyKind,
        #[serde(default)]
        seed: u64,
    },
    MediumD {
        d: usize,
        n: usize,
        alpha: usize,
        beta: usize,
    },
    D3 {
        n: usize,
        k: usize,
    },
    D8 {
        n: usize,
        k: usize,
    },
}

impl StrategyConfig {
    pub fn id(&self) -> &'static str {
        match self {
            StrategyConfig::LargeD { .. } => "large-d",
            StrategyConfig::MediumD { .. } => "medium-d",
            StrategyConfig::D3 { .. } => "d3",
            StrategyConfig::D8 { .. } => "d8",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            StrategyConfig::LargeD { d, .. } | StrategyConfig::MediumD { d, .. } => *d,
            StrategyConfig::D3 { .. } => 3,
            StrategyConfig::D8 { .. } => 8,
        }
    }
}

/// Packages one branch: algorithm cost, offline solution and its verification,
/// and the counting bound over the branch's items.
pub(crate) fn branch_certificate(label: &str, state: &PackingState, offline: OfflineSolution) -> BranchCertificate {
    let items = branch_items(state);
    let ctx = state.context();
    BranchCertificate {
        label: label.to_string(),
        alg_cost: state.cost() as u64,
        offline_cost: offline.cost() as u64,
        counting_lower_bound: counting_lower_bound(&items, ctx),
        offline_violation: offline_verify(&items, &offline, ctx).err(),
        offline,
    }
}

pub(crate) fn branch_items(state: &PackingState) -> Vec<Arc<Item>> {
    state.trace().iter().map(|p| p.item.clone()).collect()
}

pub(crate) fn last_placement(state: &PackingState) -> Result<&Placement, StrategyError> {
    state
        .trace()
        .last()
        .ok_or_else(|| StrategyError::ConstructionInvariantBroken("observe without a placement".into()))
}

/// Number of bins among `bins` into which `item` would fit.
pub(crate) fn feasible_among(state: &PackingState, bins: impl IntoIterator<Item = usize>, item: &Item) -> Result<usize, StrategyError> {
    let mut n = 0;
    for b in bins {
        if state.fits(b, item)? {
            n += 1;
        }
    }
    Ok(n)
}

/// Splits `items` into consecutive groups of `k`, one offline bin per group
/// starting at `first_bin`. Returns the next free bin id.
pub(crate) fn pack_in_groups(offline: &mut OfflineSolution, items: &[usize], k: usize, first_bin: usize) -> usize {
    for (i, &id) in items.iter().enumerate() {
        offline.assign(id, first_bin + i / k);
    }
    first_bin + items.len().div_ceil(k)
}
