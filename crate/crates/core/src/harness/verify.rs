//! Trace re-verification in three layers: a raw feasibility replay of every
//! recorded placement, a regeneration of the run from the recorded decisions,
//! and a comparison of the regenerated certificate with the recorded one.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::trace::{read_trace, TraceError, TraceRecord};
use super::{run_with_factory, RunError};
use crate::algorithms::{AlgorithmFault, OnlineAlgorithm};
use crate::strategies::Certificate;
use crate::vpcore::{Decision, Item, PackError, PackingState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceViolation {
    pub seq: Option<usize>,
    pub branch: Option<String>,
    pub component: Option<usize>,
    pub message: String,
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.seq {
            write!(f, "seq {s}: ")?;
        }
        if let Some(b) = &self.branch {
            write!(f, "branch {b}: ")?;
        }
        if let Some(c) = self.component {
            write!(f, "component {c}: ")?;
        }
        f.write_str(&self.message)
    }
}

fn violation(message: impl Into<String>) -> TraceViolation {
    TraceViolation {
        seq: None,
        branch: None,
        component: None,
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{} violation(s), first: {}", .0.len(), .0[0])]
    Violations(Vec<TraceViolation>),
}

/// Returns recorded decisions in order.
struct Scripted {
    identity: String,
    decisions: Vec<Decision>,
    next: usize,
}

impl OnlineAlgorithm for Scripted {
    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn place(&mut self, _item: &Item, _bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        let d = self
            .decisions
            .get(self.next)
            .copied()
            .ok_or_else(|| AlgorithmFault::External("trace has no further decisions".into()))?;
        self.next += 1;
        Ok(d)
    }
}

struct Placed<'a> {
    seq: usize,
    item: &'a Item,
    decision: Decision,
    bin: usize,
    opened: bool,
}

fn replay_line(state: &mut PackingState, line: &[Placed], branch: Option<&str>) -> Result<(), TraceViolation> {
    for p in line {
        let v = |component: Option<usize>, message: String| TraceViolation {
            seq: Some(p.seq),
            branch: branch.map(str::to_string),
            component,
            message,
        };
        if p.seq != state.trace().len() {
            return Err(v(None, format!("expected seq {}", state.trace().len())));
        }
        match state.apply(Arc::new(p.item.clone()), p.decision) {
            Ok((bin, opened)) if bin == p.bin && opened == p.opened => {}
            Ok((bin, opened)) => {
                return Err(v(None, format!("recorded bin {} opened={}, replay gives bin {bin} opened={opened}", p.bin, p.opened)))
            }
            Err(PackError::InfeasibleDecision { bin, component, .. }) => {
                return Err(v(Some(component), format!("load of bin {bin} would exceed 1")))
            }
            Err(e) => return Err(v(None, e.to_string())),
        }
    }
    Ok(())
}

/// First differing component between two items of the same shape.
fn differing_component(a: &Item, b: &Item) -> Option<usize> {
    a.components.iter().zip(&b.components).position(|(x, y)| x != y)
}

fn compare_records(recorded: &[TraceRecord], regenerated: &[TraceRecord]) -> Option<TraceViolation> {
    for (r, g) in recorded.iter().zip(regenerated) {
        if r == g {
            continue;
        }
        return Some(match (r, g) {
            (
                TraceRecord::Placement { seq, branch, item, .. },
                TraceRecord::Placement { item: regen, .. },
            ) => TraceViolation {
                seq: Some(*seq),
                branch: branch.clone(),
                component: differing_component(item, regen),
                message: "recorded placement differs from the regenerated run".into(),
            },
            (TraceRecord::Certificate { certificate: a }, TraceRecord::Certificate { certificate: b }) => {
                violation(certificate_diff(a, b))
            }
            _ => violation(format!(
                "recorded {} differs from the regenerated run",
                serde_json::to_string(r).unwrap_or_default()
            )),
        });
    }
    (recorded.len() != regenerated.len()).then(|| {
        violation(format!(
            "trace has {} records, regenerated run has {}",
            recorded.len(),
            regenerated.len()
        ))
    })
}

fn certificate_diff(a: &Certificate, b: &Certificate) -> String {
    let mut diffs = Vec::new();
    let keys: std::collections::BTreeSet<&String> = a.counters.keys().chain(b.counters.keys()).collect();
    for k in keys {
        if a.counters.get(k) != b.counters.get(k) {
            diffs.push(format!("counter {k}: recorded {:?}, recomputed {:?}", a.counters.get(k), b.counters.get(k)));
        }
    }
    if a.trajectories != b.trajectories {
        diffs.push("trajectories differ".into());
    }
    if a.branches != b.branches {
        diffs.push("branch costs or offline solutions differ".into());
    }
    if a.checks != b.checks {
        diffs.push("checks differ".into());
    }
    if a.certified_ratio != b.certified_ratio || a.guaranteed_bound != b.guaranteed_bound {
        diffs.push("ratios differ".into());
    }
    if diffs.is_empty() {
        diffs.push("certificate fields differ".into());
    }
    format!("certificate mismatch: {}", diffs.join("; "))
}

/// Verifies parsed records; on success returns the recomputed certificate.
pub fn verify_records(records: &[TraceRecord]) -> Result<Certificate, Vec<TraceViolation>> {
    let Some(TraceRecord::Header {
        config,
        algorithm,
        dimension,
        context,
        ..
    }) = records.first()
    else {
        return Err(vec![violation("trace does not start with a header")]);
    };
    let Some(TraceRecord::Certificate { certificate }) = records.last() else {
        return Err(vec![violation("trace does not end with a certificate")]);
    };
    if *dimension != config.dimension() {
        return Err(vec![violation("header dimension does not match the strategy")]);
    }

    let mut prefix = Vec::new();
    let mut branches: BTreeMap<&str, Vec<Placed>> = BTreeMap::new();
    let mut labels: Vec<String> = Vec::new();
    for r in records {
        match r {
            TraceRecord::Placement {
                seq,
                branch,
                item,
                decision,
                bin,
                opened,
            } => {
                let p = Placed {
                    seq: *seq,
                    item,
                    decision: *decision,
                    bin: *bin,
                    opened: *opened,
                };
                match branch {
                    None => prefix.push(p),
                    Some(b) => branches.entry(b.as_str()).or_default().push(p),
                }
            }
            TraceRecord::Fork { labels: l } => labels = l.clone(),
            _ => {}
        }
    }

    // layer 1: feasibility of every recorded decision
    let ctx = Arc::new(context.clone());
    let mut violations = Vec::new();
    let mut base = PackingState::new(*dimension, ctx.clone());
    match replay_line(&mut base, &prefix, None) {
        Err(v) => violations.push(v),
        Ok(()) => {
            for label in &labels {
                let mut st = base.clone();
                let line = branches.get(label.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                if let Err(v) = replay_line(&mut st, line, Some(label)) {
                    violations.push(v);
                }
            }
        }
    }

    // layer 2: regenerate from the recorded decisions; this pins an altered
    // item to its own seq even when layer 1 only trips over a later one
    let script = |branch: Option<usize>| -> Vec<Decision> {
        let mut d: Vec<Decision> = prefix.iter().map(|p| p.decision).collect();
        if let Some(line) = branch.and_then(|i| labels.get(i)).and_then(|l| branches.get(l.as_str())) {
            d.extend(line.iter().map(|p| p.decision));
        }
        d
    };
    let factory = |branch: Option<usize>| -> Result<Box<dyn OnlineAlgorithm>, AlgorithmFault> {
        Ok(Box::new(Scripted {
            identity: algorithm.clone(),
            decisions: script(branch),
            next: 0,
        }))
    };
    let outcome = match run_with_factory(config, &factory, false) {
        Ok(o) => {
            violations.extend(compare_records(records, &o.records));
            Some(o)
        }
        Err(e) => {
            let (seq, branch) = match &e {
                RunError::Algorithm { seq, branch, .. } | RunError::Infeasible { seq, branch, .. } => {
                    (Some(*seq), branch.clone())
                }
                _ => (None, None),
            };
            violations.push(TraceViolation {
                seq,
                branch,
                component: None,
                message: format!("regeneration failed: {e}"),
            });
            None
        }
    };
    if !violations.is_empty() {
        violations.sort_by_key(|v| (v.seq.is_none(), v.seq));
        return Err(violations);
    }
    let outcome = outcome.expect("a failed regeneration always records a violation");

    // layer 3: the certificate itself
    if outcome.certificate != **certificate {
        return Err(vec![violation(certificate_diff(certificate, &outcome.certificate))]);
    }
    let failed: Vec<TraceViolation> = outcome
        .certificate
        .failed_checks()
        .iter()
        .map(|c| violation(format!("check {} failed: {}", c.name, c.statement)))
        .collect();
    if !failed.is_empty() {
        return Err(failed);
    }
    Ok(outcome.certificate)
}

pub fn verify_trace(path: &Path) -> Result<Certificate, VerifyError> {
    let records = read_trace(path)?;
    verify_records(&records).map_err(VerifyError::Violations)
}
