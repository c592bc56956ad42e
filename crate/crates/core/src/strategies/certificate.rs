use std::collections::BTreeMap;
use std::fmt::Display;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::exactnum::ratio_str;
use crate::vpcore::{OfflineSolution, Violation};

/// One asserted inequality or identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statement: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCertificate {
    pub label: String,
    pub alg_cost: u64,
    pub offline_cost: u64,
    pub counting_lower_bound: u64,
    pub offline_violation: Option<Violation>,
    pub offline: OfflineSolution,
}

/// Machine-checkable record of one adversary run against one algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub strategy: String,
    pub algorithm: String,
    pub parameters: BTreeMap<String, String>,
    pub counters: BTreeMap<String, i64>,
    pub tables: BTreeMap<String, BTreeMap<String, i64>>,
    pub trajectories: BTreeMap<String, Vec<i64>>,
    pub early_stop: bool,
    pub branches: Vec<BranchCertificate>,
    pub checks: Vec<Check>,
    #[serde(with = "ratio_str")]
    pub guaranteed_bound: BigRational,
    #[serde(with = "ratio_str")]
    pub certified_ratio: BigRational,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(strategy: &str) -> Self {
        Certificate {
            strategy: strategy.to_string(),
            algorithm: String::new(),
            parameters: BTreeMap::new(),
            counters: BTreeMap::new(),
            tables: BTreeMap::new(),
            trajectories: BTreeMap::new(),
            early_stop: false,
            branches: Vec::new(),
            checks: Vec::new(),
            guaranteed_bound: BigRational::from_integer(0.into()),
            certified_ratio: BigRational::from_integer(0.into()),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn counter(&mut self, key: &str, value: impl TryInto<i64>) {
        self.counters
            .insert(key.to_string(), value.try_into().unwrap_or(i64::MAX));
    }

    pub fn get(&self, key: &str) -> Option<i64> {
        self.counters.get(key).copied()
    }

    pub fn check(&mut self, name: &str, statement: String, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            statement,
            pass,
        });
    }

    pub fn check_ge<T: PartialOrd + Display>(&mut self, name: &str, lhs: T, rhs: T) {
        let pass = lhs >= rhs;
        self.check(name, format!("{lhs} >= {rhs}"), pass);
    }

    pub fn check_le<T: PartialOrd + Display>(&mut self, name: &str, lhs: T, rhs: T) {
        let pass = lhs <= rhs;
        self.check(name, format!("{lhs} <= {rhs}"), pass);
    }

    pub fn check_eq<T: PartialEq + Display>(&mut self, name: &str, lhs: T, rhs: T) {
        let pass = lhs == rhs;
        self.check(name, format!("{lhs} == {rhs}"), pass);
    }

    pub fn check_ratio_ge(&mut self, name: &str, lhs: &BigRational, rhs: &BigRational) {
        let pass = lhs >= rhs;
        self.check(
            name,
            format!("{}/{} >= {}/{}", lhs.numer(), lhs.denom(), rhs.numer(), rhs.denom()),
            pass,
        );
    }

    /// Adds the per-branch checks shared by all strategies: the offline
    /// solution verifies, it is no cheaper than the counting bound, and it
    /// respects `offline_cap`.
    pub fn check_branches(&mut self, offline_cap: u64) {
        let branches = self.branches.clone();
        for b in &branches {
            self.check(
                &format!("offline_feasible[{}]", b.label),
                match &b.offline_violation {
                    None => "offline solution verifies".to_string(),
                    Some(v) => v.to_string(),
                },
                b.offline_violation.is_none(),
            );
            self.check_le(
                &format!("counting_sandwich[{}]", b.label),
                b.counting_lower_bound,
                b.offline_cost,
            );
            self.check_le(&format!("offline_cost[{}]", b.label), b.offline_cost, offline_cap);
        }
    }

    /// `max ALG / max offline` over branches.
    pub fn compute_certified_ratio(&mut self) {
        let alg = self.branches.iter().map(|b| b.alg_cost).max().unwrap_or(0);
        let off = self.branches.iter().map(|b| b.offline_cost).max().unwrap_or(0);
        self.certified_ratio = if off == 0 {
            BigRational::from_integer(0.into())
        } else {
            BigRational::new(alg.into(), off.into())
        };
    }

    pub fn max_alg_cost(&self) -> u64 {
        self.branches.iter().map(|b| b.alg_cost).max().unwrap_or(0)
    }

    pub fn max_offline_cost(&self) -> u64 {
        self.branches.iter().map(|b| b.offline_cost).max().unwrap_or(0)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.branches.iter().all(|b| b.offline_violation.is_none())
    }
}

/// `⌈p/q⌉` for nonnegative integers.
pub fn ceil_div(p: u64, q: u64) -> u64 {
    p.div_ceil(q)
}
