//! Exact optimum for tiny instances, used as ground truth in tests.

use thiserror::Error;

use crate::exactnum::{ExactValue, NumericContext};
use crate::vpcore::{le_one_exact, Item, OfflineSolution};

pub const MAX_ITEMS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptError {
    #[error("{0} items exceed the brute-force limit of {MAX_ITEMS}")]
    TooLarge(usize),
    #[error("item {0} does not fit an empty bin")]
    Oversized(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptResult {
    pub opt_cost: usize,
    pub witness: OfflineSolution,
    pub explored: u64,
}

struct Search<'a> {
    items: Vec<&'a Item>,
    ctx: &'a NumericContext,
    loads: Vec<Vec<ExactValue>>,
    assign: Vec<usize>,
    best: usize,
    best_assign: Vec<usize>,
    explored: u64,
}

impl Search<'_> {
    fn fits(&self, bin: usize, item: &Item) -> bool {
        self.loads[bin]
            .iter()
            .zip(&item.components)
            .all(|(l, c)| c.is_zero() || le_one_exact(&(l + c), self.ctx))
    }

    fn put(&mut self, bin: usize, i: usize, sign: i64) {
        let comps = &self.items[i].components;
        for (l, c) in self.loads[bin].iter_mut().zip(comps) {
            if !c.is_zero() {
                *l = if sign > 0 { &*l + c } else { &*l - c };
            }
        }
    }

    /// Items are placed in index order; a new bin is only ever opened by the
    /// lowest-index unplaced item, so each partition is visited once.
    fn go(&mut self, i: usize) {
        self.explored += 1;
        if self.loads.len() >= self.best {
            return;
        }
        if i == self.items.len() {
            self.best = self.loads.len();
            self.best_assign = self.assign.clone();
            return;
        }
        let item = self.items[i];
        for b in 0..self.loads.len() {
            if self.fits(b, item) {
                self.put(b, i, 1);
                self.assign[i] = b;
                self.go(i + 1);
                self.put(b, i, -1);
            }
        }
        if self.loads.len() + 1 < self.best {
            self.loads.push(vec![ExactValue::zero(); item.dimension()]);
            self.put(self.loads.len() - 1, i, 1);
            self.assign[i] = self.loads.len() - 1;
            self.go(i + 1);
            self.loads.pop();
        }
    }
}

/// Minimum number of bins over all feasible partitions of `items`.
pub fn brute_force_opt<I: AsRef<Item>>(items: &[I], ctx: &NumericContext) -> Result<OptResult, OptError> {
    if items.len() > MAX_ITEMS {
        return Err(OptError::TooLarge(items.len()));
    }
    let items: Vec<&Item> = items.iter().map(AsRef::as_ref).collect();
    for it in &items {
        if !it.components.iter().all(|c| le_one_exact(c, ctx)) {
            return Err(OptError::Oversized(it.id));
        }
    }
    let n = items.len();
    let mut s = Search {
        items,
        ctx,
        loads: Vec::new(),
        assign: vec![0; n],
        best: n + 1,
        best_assign: (0..n).collect(),
        explored: 0,
    };
    s.go(0);
    let mut witness = OfflineSolution::new();
    for (it, &b) in s.items.iter().zip(&s.best_assign) {
        witness.assign(it.id, b);
    }
    Ok(OptResult {
        opt_cost: s.best.min(n),
        witness,
        explored: s.explored,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_bigint::BigUint;

    use super::*;
    use crate::vpcore::offline_verify;

    fn ctx() -> NumericContext {
        NumericContext::with_minimal_start(BigUint::from(1000u32), 8, BigUint::from(60u32), 100).unwrap()
    }

    #[test]
    fn unit_items_need_their_own_bins() {
        let c = ctx();
        let items: Vec<Item> = (0..3)
            .map(|i| Item::new(i, "t", vec![ExactValue::one(), ExactValue::zero()]))
            .collect();
        let r = brute_force_opt(&items, &c).unwrap();
        assert_eq!(r.opt_cost, 3);
        offline_verify(&items, &r.witness, &c).unwrap();
    }

    #[test]
    fn empty_input() {
        let r = brute_force_opt::<Item>(&[], &ctx()).unwrap();
        assert_eq!(r.opt_cost, 0);
        assert_eq!(r.witness.cost(), 0);
    }

    #[test]
    fn mu_micro_instance() {
        let c = ctx();
        let mu = c.tiny(&c.e_start().into()).unwrap();
        let one = ExactValue::one();
        let v = |w: &ExactValue, k: i64| w + &mu.times(k);
        let z = ExactValue::zero();
        let items = vec![
            Item::new(0, "a", vec![z.clone(), v(&one, -4), mu.clone()]),
            Item::new(1, "b", vec![z.clone(), mu.clone(), v(&one, -4)]),
            Item::new(2, "c", vec![z, v(&one, -1), v(&one, -1)]),
        ];
        let r = brute_force_opt(&items, &c).unwrap();
        assert_eq!(r.opt_cost, 2);
        assert_eq!(r.witness.assignment[&0], r.witness.assignment[&1]);
        offline_verify(&items, &r.witness, &c).unwrap();
    }

    #[test]
    fn guard() {
        let items: Vec<Arc<Item>> = (0..13)
            .map(|i| Arc::new(Item::new(i, "t", vec![ExactValue::one()])))
            .collect();
        assert_eq!(brute_force_opt(&items, &ctx()), Err(OptError::TooLarge(13)));
    }
}
