//! Online algorithms under test.
//!
//! Every algorithm must be deterministic given its seed and the items seen so
//! far: branching adversaries evaluate alternative continuations by replaying
//! the shared prefix on a fresh instance.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::vpcore::{Decision, Item, PackingState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgorithmFault {
    #[error("external algorithm: {0}")]
    External(String),
    #[error("algorithm is not deterministic: replay of item {item} chose {got:?}, recorded {expected:?}")]
    Nondeterministic {
        item: usize,
        got: Decision,
        expected: Decision,
    },
    #[error("unknown algorithm {0:?}")]
    Unknown(String),
}

pub trait OnlineAlgorithm: Send {
    fn identity(&self) -> String;

    /// Chooses a bin for `item` given a read-only view of the algorithm's own
    /// packing. Feasibility is checked by the caller.
    fn place(&mut self, item: &Item, bins: &PackingState) -> Result<Decision, AlgorithmFault>;
}

pub struct FirstFit;

impl OnlineAlgorithm for FirstFit {
    fn identity(&self) -> String {
        "first-fit".into()
    }

    fn place(&mut self, item: &Item, bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        Ok(bins
            .first_feasible(item)
            .map_or(Decision::NewBin, Decision::Existing))
    }
}

/// Keeps only the most recently opened bin available.
pub struct NextFit;

impl OnlineAlgorithm for NextFit {
    fn identity(&self) -> String {
        "next-fit".into()
    }

    fn place(&mut self, item: &Item, bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        match bins.cost().checked_sub(1) {
            Some(last) if bins.fits(last, item).unwrap_or(false) => Ok(Decision::Existing(last)),
            _ => Ok(Decision::NewBin),
        }
    }
}

/// Feasible bin with the largest sum of load components; ties go to the lower
/// index.
pub struct BestFit;

impl OnlineAlgorithm for BestFit {
    fn identity(&self) -> String {
        "best-fit(fullness=sum of load components)".into()
    }

    fn place(&mut self, item: &Item, bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        let mut best: Option<(usize, &crate::exactnum::ExactValue)> = None;
        for b in bins.feasible_bins(item) {
            let full = bins.bins()[b].fullness();
            if best.is_none_or(|(_, f)| full > f) {
                best = Some((b, full));
            }
        }
        Ok(best.map_or(Decision::NewBin, |(b, _)| Decision::Existing(b)))
    }
}

pub struct AlwaysNew;

impl OnlineAlgorithm for AlwaysNew {
    fn identity(&self) -> String {
        "always-new".into()
    }

    fn place(&mut self, _item: &Item, _bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        Ok(Decision::NewBin)
    }
}

/// Uniformly random feasible bin, new bin when none is feasible.
pub struct RandomFit {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomFit {
    pub fn new(seed: u64) -> Self {
        RandomFit {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl OnlineAlgorithm for RandomFit {
    fn identity(&self) -> String {
        format!("random-fit(seed={})", self.seed)
    }

    fn place(&mut self, item: &Item, bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        let feasible: Vec<usize> = bins.feasible_bins(item).collect();
        if feasible.is_empty() {
            return Ok(Decision::NewBin);
        }
        Ok(Decision::Existing(feasible[self.rng.gen_range(0..feasible.len())]))
    }
}

/// Adapter for an algorithm running as a subprocess speaking newline-delimited
/// JSON. The handshake line gets no reply; every item line gets exactly one
/// `{"bin": k}` reply, with `k = -1` for a new bin.
pub struct ExternalAlgorithm {
    command: String,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    seq: usize,
}

impl ExternalAlgorithm {
    pub fn spawn(command: &str, d: usize, run_id: &str) -> Result<Self, AlgorithmFault> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| AlgorithmFault::External(format!("spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut me = ExternalAlgorithm {
            command: command.to_string(),
            child,
            stdin,
            stdout,
            seq: 0,
        };
        me.send(&json!({"protocol": 1, "d": d, "run_id": run_id}))?;
        Ok(me)
    }

    fn send(&mut self, v: &serde_json::Value) -> Result<(), AlgorithmFault> {
        writeln!(self.stdin, "{v}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| AlgorithmFault::External(format!("write: {e}")))
    }
}

impl OnlineAlgorithm for ExternalAlgorithm {
    fn identity(&self) -> String {
        format!("extern:{}", self.command)
    }

    fn place(&mut self, item: &Item, _bins: &PackingState) -> Result<Decision, AlgorithmFault> {
        let msg = json!({"seq": self.seq, "components": item.components});
        self.seq += 1;
        self.send(&msg)?;
        let mut line = String::new();
        let n = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| AlgorithmFault::External(format!("read: {e}")))?;
        if n == 0 {
            return Err(AlgorithmFault::External("process closed its output".into()));
        }
        let v: serde_json::Value = serde_json::from_str(line.trim())
            .map_err(|e| AlgorithmFault::External(format!("bad response {line:?}: {e}")))?;
        match v.get("bin").and_then(serde_json::Value::as_i64) {
            Some(-1) => Ok(Decision::NewBin),
            Some(k) if k >= 0 => Ok(Decision::Existing(k as usize)),
            _ => Err(AlgorithmFault::External(format!("bad response {line:?}"))),
        }
    }
}

impl Drop for ExternalAlgorithm {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A named algorithm that can be instantiated any number of times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgorithmSpec {
    FirstFit,
    NextFit,
    BestFit,
    AlwaysNew,
    RandomFit(u64),
    External(String),
}

impl AlgorithmSpec {
    pub fn instantiate(&self, d: usize, run_id: &str) -> Result<Box<dyn OnlineAlgorithm>, AlgorithmFault> {
        Ok(match self {
            AlgorithmSpec::FirstFit => Box::new(FirstFit),
            AlgorithmSpec::NextFit => Box::new(NextFit),
            AlgorithmSpec::BestFit => Box::new(BestFit),
            AlgorithmSpec::AlwaysNew => Box::new(AlwaysNew),
            AlgorithmSpec::RandomFit(seed) => Box::new(RandomFit::new(*seed)),
            AlgorithmSpec::External(cmd) => Box::new(ExternalAlgorithm::spawn(cmd, d, run_id)?),
        })
    }
}

/// The built-in test subjects.
pub fn zoo(seed: u64) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::FirstFit,
        AlgorithmSpec::NextFit,
        AlgorithmSpec::BestFit,
        AlgorithmSpec::AlwaysNew,
        AlgorithmSpec::RandomFit(seed),
    ]
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmSpec::FirstFit => write!(f, "first-fit"),
            AlgorithmSpec::NextFit => write!(f, "next-fit"),
            AlgorithmSpec::BestFit => write!(f, "best-fit"),
            AlgorithmSpec::AlwaysNew => write!(f, "always-new"),
            AlgorithmSpec::RandomFit(s) => write!(f, "random:{s}"),
            AlgorithmSpec::External(c) => write!(f, "extern:{c}"),
        }
    }
}

impl FromStr for AlgorithmSpec {
    type Err = AlgorithmFault;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(AlgorithmSpec::RandomFit)
                .map_err(|_| AlgorithmFault::Unknown(s.into()));
        }
        if let Some(cmd) = s.strip_prefix("extern:") {
            return Ok(AlgorithmSpec::External(cmd.into()));
        }
        match s {
            "first-fit" => Ok(AlgorithmSpec::FirstFit),
            "next-fit" => Ok(AlgorithmSpec::NextFit),
            "best-fit" => Ok(AlgorithmSpec::BestFit),
            "always-new" => Ok(AlgorithmSpec::AlwaysNew),
            _ => Err(AlgorithmFault::Unknown(s.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{ExactValue, NumericContext};
    use num_bigint::BigUint;
    use std::sync::Arc;

    fn state() -> PackingState {
        let ctx = NumericContext::with_minimal_start(BigUint::from(1000u32), 16, BigUint::from(4u32), 100).unwrap();
        PackingState::new(2, Arc::new(ctx))
    }

    fn quarter(id: usize) -> Arc<Item> {
        let q = ExactValue::from_ratio(num_rational::BigRational::new(1.into(), 4.into()));
        Arc::new(Item::new(id, "t", vec![q.clone(), q]))
    }

    fn unit(id: usize) -> Arc<Item> {
        Arc::new(Item::new(id, "t", vec![ExactValue::one(), ExactValue::zero()]))
    }

    #[test]
    fn first_fit_uses_existing_bin() {
        let mut s = state();
        s.apply(quarter(0), Decision::NewBin).unwrap();
        assert_eq!(FirstFit.place(&quarter(1), &s).unwrap(), Decision::Existing(0));
        assert_eq!(AlwaysNew.place(&quarter(1), &s).unwrap(), Decision::NewBin);
    }

    #[test]
    fn next_fit_cost_on_units() {
        let mut s = state();
        let mut nf = NextFit;
        for i in 0..7 {
            let it = unit(i);
            let d = nf.place(&it, &s).unwrap();
            s.apply(it, d).unwrap();
        }
        assert_eq!(s.cost(), 7);
    }

    #[test]
    fn best_fit_prefers_fuller_then_lower_index() {
        let mut s = state();
        s.apply(quarter(0), Decision::NewBin).unwrap();
        s.apply(quarter(1), Decision::NewBin).unwrap();
        // equal loads: lower index
        assert_eq!(BestFit.place(&quarter(2), &s).unwrap(), Decision::Existing(0));
        s.apply(quarter(2), Decision::Existing(1)).unwrap();
        assert_eq!(BestFit.place(&quarter(3), &s).unwrap(), Decision::Existing(1));
    }

    #[test]
    fn random_fit_is_replayable() {
        let run = |seed| {
            let mut s = state();
            let mut rf = RandomFit::new(seed);
            for i in 0..40 {
                let it = quarter(i);
                let d = rf.place(&it, &s).unwrap();
                s.apply(it, d).unwrap();
            }
            s.trace().iter().map(|p| p.bin).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn parse_specs() {
        for s in ["first-fit", "next-fit", "best-fit", "always-new", "random:12", "extern:./x --y"] {
            assert_eq!(s.parse::<AlgorithmSpec>().unwrap().to_string(), s);
        }
        assert!("worst-fit".parse::<AlgorithmSpec>().is_err());
        assert!("random:x".parse::<AlgorithmSpec>().is_err());
    }

    #[test]
    fn external_always_new() {
        let spec = AlgorithmSpec::External(r#"read h; while read l; do echo '{"bin":-1}'; done"#.into());
        let mut alg = spec.instantiate(2, "t").unwrap();
        let s = state();
        assert_eq!(alg.place(&quarter(0), &s).unwrap(), Decision::NewBin);
        assert_eq!(alg.place(&quarter(1), &s).unwrap(), Decision::NewBin);
    }

    #[test]
    fn external_garbage_is_a_fault() {
        let spec = AlgorithmSpec::External("read h; echo nope".into());
        let mut alg = spec.instantiate(2, "t").unwrap();
        assert!(matches!(alg.place(&quarter(0), &state()), Err(AlgorithmFault::External(_))));
    }
}
