//! The adaptive value oracle.
//!
//! Values are pure powers `F^(−e)`. The oracle keeps an open exponent interval
//! `(lo, hi)`: every value classified large has exponent `≤ lo`, every value
//! classified small has exponent `≥ hi`, and the next value is taken at the
//! midpoint. Because the classification is only known after the algorithm has
//! packed the item, this is a binary search driven by the algorithm.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{ExactValue, Exponent, NumericContext};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle capacity too small: {0}")]
    CapacityTooSmall(String),
    #[error("previous emission has not been classified")]
    PendingClassification,
    #[error("nothing to classify")]
    NothingPending,
    #[error("exponent interval exhausted")]
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum OracleEvent {
    Emit { exponent: Exponent },
    Classify { exponent: Exponent, large: bool },
    Snapshot { exponent: Exponent },
}

#[derive(Debug, Clone)]
pub struct AdaptiveOracle {
    ctx: Arc<NumericContext>,
    lo: BigUint,
    hi: BigUint,
    pending: Option<Exponent>,
    history: Vec<(Exponent, bool)>,
    snapshots: Vec<Exponent>,
    events: Vec<OracleEvent>,
}

impl AdaptiveOracle {
    /// Oracle for up to `emissions` values and `snapshots` μ snapshots in any
    /// order. The initial width is `2^emissions · max(4, snapshots + 1)`, which
    /// survives every classification string and every interleaving.
    pub fn new(ctx: Arc<NumericContext>, emissions: u64, snapshots: u64) -> Result<Self, OracleError> {
        if emissions > ctx.m_cap() {
            return Err(OracleError::CapacityTooSmall(format!(
                "{emissions} emissions exceed M_cap = {}",
                ctx.m_cap()
            )));
        }
        if ctx.base() <= &BigUint::from(emissions) {
            return Err(OracleError::CapacityTooSmall(format!(
                "F = {} must exceed the emission count {emissions}",
                ctx.base()
            )));
        }
        let lo = BigUint::from(ctx.e_start() - 1);
        let width = (BigUint::one() << emissions) * BigUint::from(snapshots.saturating_add(1).max(4));
        let hi = &lo + width;
        Ok(AdaptiveOracle {
            ctx,
            lo,
            hi,
            pending: None,
            history: Vec::new(),
            snapshots: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn context(&self) -> &Arc<NumericContext> {
        &self.ctx
    }

    pub fn bounds(&self) -> (&BigUint, &BigUint) {
        (&self.lo, &self.hi)
    }

    pub fn history(&self) -> &[(Exponent, bool)] {
        &self.history
    }

    pub fn snapshots(&self) -> &[Exponent] {
        &self.snapshots
    }

    pub fn pending(&self) -> Option<&Exponent> {
        self.pending.as_ref()
    }

    pub fn take_events(&mut self) -> Vec<OracleEvent> {
        std::mem::take(&mut self.events)
    }

    fn width_at_least_two(&self) -> bool {
        &self.hi - &self.lo >= BigUint::from(2u32)
    }

    pub fn emit(&mut self) -> Result<ExactValue, OracleError> {
        if self.pending.is_some() {
            return Err(OracleError::PendingClassification);
        }
        if !self.width_at_least_two() {
            return Err(OracleError::Exhausted);
        }
        let m = Exponent::new((&self.lo + &self.hi) >> 1);
        self.pending = Some(m.clone());
        self.events.push(OracleEvent::Emit { exponent: m.clone() });
        Ok(ExactValue::tiny(m))
    }

    pub fn classify(&mut self, is_large: bool) -> Result<(), OracleError> {
        let m = self.pending.take().ok_or(OracleError::NothingPending)?;
        if is_large {
            self.lo = m.value().clone();
        } else {
            self.hi = m.value().clone();
        }
        self.events.push(OracleEvent::Classify {
            exponent: m.clone(),
            large: is_large,
        });
        self.history.push((m, is_large));
        Ok(())
    }

    /// Fixes `μ = F^(−(lo+1))` and reserves that exponent, so every large value
    /// so far is at least `F·μ` and every small value, past or future, and every
    /// future emission is at most `μ/F`.
    pub fn snapshot_mu(&mut self) -> Result<ExactValue, OracleError> {
        if self.pending.is_some() {
            return Err(OracleError::PendingClassification);
        }
        if !self.width_at_least_two() {
            return Err(OracleError::Exhausted);
        }
        self.lo += 1u32;
        let e = Exponent::new(self.lo.clone());
        self.snapshots.push(e.clone());
        self.events.push(OracleEvent::Snapshot { exponent: e.clone() });
        Ok(ExactValue::tiny(e))
    }

    /// Remaining interval width, saturated to `u64`.
    pub fn width(&self) -> u64 {
        (&self.hi - &self.lo).to_u64().unwrap_or(u64::MAX)
    }
}
