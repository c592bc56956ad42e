//! Items, bins, online placement and offline solutions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{ExactValue, NumError, NumericContext};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: usize,
    pub phase: String,
    pub components: Vec<ExactValue>,
}

impl Item {
    pub fn new(id: usize, phase: impl Into<String>, components: Vec<ExactValue>) -> Self {
        Item {
            id,
            phase: phase.into(),
            components,
        }
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    /// Every component in `[0, 1]` and at least one nonzero.
    pub fn validate(&self) -> Result<(), PackError> {
        let one = ExactValue::one();
        let zero = ExactValue::zero();
        for (j, c) in self.components.iter().enumerate() {
            if c < &zero || c > &one {
                return Err(PackError::InvalidItem {
                    item: self.id,
                    reason: format!("component {j} = {c} outside [0,1]"),
                });
            }
        }
        if self.components.iter().all(ExactValue::is_zero) {
            return Err(PackError::InvalidItem {
                item: self.id,
                reason: "zero vector".into(),
            });
        }
        Ok(())
    }
}

impl AsRef<Item> for Item {
    fn as_ref(&self) -> &Item {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    NewBin,
    Existing(usize),
}

#[derive(Serialize, Deserialize)]
struct DecisionRepr {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bin: Option<usize>,
}

impl Serialize for Decision {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Decision::NewBin => DecisionRepr {
                kind: "new".into(),
                bin: None,
            },
            Decision::Existing(b) => DecisionRepr {
                kind: "existing".into(),
                bin: Some(*b),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decision {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = DecisionRepr::deserialize(d)?;
        match (r.kind.as_str(), r.bin) {
            ("new", _) => Ok(Decision::NewBin),
            ("existing", Some(b)) => Ok(Decision::Existing(b)),
            (kind, bin) => Err(serde::de::Error::custom(format!("bad decision type={kind} bin={bin:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackError {
    #[error("unknown bin {0}")]
    UnknownBin(usize),
    #[error("item {item} does not fit bin {bin}: component {component} would exceed 1")]
    InfeasibleDecision {
        item: usize,
        bin: usize,
        component: usize,
    },
    #[error("item {item} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        item: usize,
        got: usize,
        expected: usize,
    },
    #[error("invalid item {item}: {reason}")]
    InvalidItem { item: usize, reason: String },
    #[error(transparent)]
    Numeric(#[from] NumError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub id: usize,
    pub items: Vec<usize>,
    pub load: Vec<ExactValue>,
    placements: Vec<usize>,
    fullness: ExactValue,
}

impl Bin {
    /// Sum of load components, used by best-fit as its scalar fullness.
    pub fn fullness(&self) -> &ExactValue {
        &self.fullness
    }
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub item: Arc<Item>,
    pub decision: Decision,
    pub bin: usize,
    pub opened: bool,
}

/// The online packing of one run.
#[derive(Debug, Clone)]
pub struct PackingState {
    d: usize,
    ctx: Arc<NumericContext>,
    bins: Vec<Bin>,
    trace: Vec<Placement>,
}

impl PackingState {
    pub fn new(d: usize, ctx: Arc<NumericContext>) -> Self {
        PackingState {
            d,
            ctx,
            bins: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn context(&self) -> &Arc<NumericContext> {
        &self.ctx
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn bin(&self, id: usize) -> Option<&Bin> {
        self.bins.get(id)
    }

    pub fn trace(&self) -> &[Placement] {
        &self.trace
    }

    pub fn cost(&self) -> usize {
        self.bins.len()
    }

    pub fn fits(&self, bin_id: usize, item: &Item) -> Result<bool, PackError> {
        let bin = self.bins.get(bin_id).ok_or(PackError::UnknownBin(bin_id))?;
        Ok(first_overflow(&bin.load, item).is_none())
    }

    /// Lowest-index bin the item fits into, if any.
    pub fn first_feasible(&self, item: &Item) -> Option<usize> {
        self.bins
            .iter()
            .position(|b| first_overflow(&b.load, item).is_none())
    }

    pub fn feasible_bins<'a>(&'a self, item: &'a Item) -> impl Iterator<Item = usize> + 'a {
        self.bins
            .iter()
            .filter(move |b| first_overflow(&b.load, item).is_none())
            .map(|b| b.id)
    }

    /// Places the item irrevocably. Returns the bin id and whether it was opened
    /// by this placement.
    pub fn apply(&mut self, item: Arc<Item>, decision: Decision) -> Result<(usize, bool), PackError> {
        if item.dimension() != self.d {
            return Err(PackError::DimensionMismatch {
                item: item.id,
                got: item.dimension(),
                expected: self.d,
            });
        }
        let (bin_id, opened) = match decision {
            Decision::NewBin => {
                let zero = vec![ExactValue::zero(); self.d];
                if let Some(component) = first_overflow(&zero, &item) {
                    return Err(PackError::InfeasibleDecision {
                        item: item.id,
                        bin: self.bins.len(),
                        component,
                    });
                }
                for c in &item.components {
                    self.ctx.check(c)?;
                }
                let id = self.bins.len();
                self.bins.push(Bin {
                    id,
                    items: Vec::new(),
                    load: zero,
                    placements: Vec::new(),
                    fullness: ExactValue::zero(),
                });
                (id, true)
            }
            Decision::Existing(b) => {
                let bin = self.bins.get(b).ok_or(PackError::InfeasibleDecision {
                    item: item.id,
                    bin: b,
                    component: 0,
                })?;
                if let Some(component) = first_overflow(&bin.load, &item) {
                    return Err(PackError::InfeasibleDecision {
                        item: item.id,
                        bin: b,
                        component,
                    });
                }
                for (load, c) in bin.load.iter().zip(&item.components) {
                    self.ctx.check_add(load, c)?;
                }
                (b, false)
            }
        };
        let bin = &mut self.bins[bin_id];
        for (load, c) in bin.load.iter_mut().zip(&item.components) {
            if !c.is_zero() {
                *load += c;
                bin.fullness += c;
            }
        }
        bin.items.push(item.id);
        bin.placements.push(self.trace.len());
        self.trace.push(Placement {
            item,
            decision,
            bin: bin_id,
            opened,
        });
        if cfg!(debug_assertions) && self.trace.len().is_multiple_of(100) {
            self.assert_bin_load(bin_id);
        }
        Ok((bin_id, opened))
    }

    /// Recomputes the load of one bin from its placements and compares.
    pub fn assert_bin_load(&self, bin_id: usize) {
        let bin = &self.bins[bin_id];
        let mut load = vec![ExactValue::zero(); self.d];
        for &p in &bin.placements {
            for (l, c) in load.iter_mut().zip(&self.trace[p].item.components) {
                *l = &*l + c;
            }
        }
        assert_eq!(bin.load, load, "load of bin {bin_id} drifted");
        assert_eq!(bin.fullness, load.iter().sum(), "fullness of bin {bin_id} drifted");
    }

    pub fn assert_loads(&self) {
        for b in 0..self.bins.len() {
            self.assert_bin_load(b);
        }
    }
}

/// First component where `load + item` exceeds 1.
fn first_overflow(load: &[ExactValue], item: &Item) -> Option<usize> {
    let one = ExactValue::one();
    item.components
        .iter()
        .zip(load)
        .position(|(c, l)| !c.is_zero() && ExactValue::cmp_sum(l, c, &one) == Ordering::Greater)
}

/// `max_j ⌈Σ_i item_i[j]⌉`, a lower bound on the cost of any packing.
pub fn counting_lower_bound<I: AsRef<Item>>(items: &[I], ctx: &NumericContext) -> u64 {
    let Some(d) = items.first().map(|i| i.as_ref().dimension()) else {
        return 0;
    };
    (0..d)
        .map(|j| {
            let total: ExactValue = items.iter().map(|i| &i.as_ref().components[j]).sum();
            total.ceil_exact(ctx.base()).to_u64().unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

/// Offline assignment of items (by id) to offline bins.
/// Serialized as `[[item, bin], ...]`: integer map keys do not survive
/// internally tagged records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineSolution {
    #[serde(with = "pairs")]
    pub assignment: BTreeMap<usize, usize>,
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<usize, usize>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, usize>, D::Error> {
        Ok(Vec::<(usize, usize)>::deserialize(d)?.into_iter().collect())
    }
}

impl OfflineSolution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, item: usize, bin: usize) {
        self.assignment.insert(item, bin);
    }

    pub fn cost(&self) -> usize {
        self.assignment.values().collect::<BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum Violation {
    #[error("offline bin {bin} exceeds capacity in component {component}")]
    Capacity { bin: usize, component: usize },
    #[error("item {item} is not assigned")]
    Unassigned { item: usize },
    #[error("assignment names unknown item {item}")]
    UnknownItem { item: usize },
}

/// Checks that the solution covers exactly the items and that every offline bin
/// satisfies the capacity constraint. Loads are summed without coefficient
/// bounds and compared exactly.
pub fn offline_verify<I: AsRef<Item>>(
    items: &[I],
    solution: &OfflineSolution,
    ctx: &NumericContext,
) -> Result<(), Violation> {
    let mut by_id = BTreeMap::new();
    for it in items {
        let it = it.as_ref();
        by_id.insert(it.id, it);
        if !solution.assignment.contains_key(&it.id) {
            return Err(Violation::Unassigned { item: it.id });
        }
    }
    let mut loads: BTreeMap<usize, Vec<ExactValue>> = BTreeMap::new();
    for (&item, &bin) in &solution.assignment {
        let it = by_id.get(&item).ok_or(Violation::UnknownItem { item })?;
        let load = loads
            .entry(bin)
            .or_insert_with(|| vec![ExactValue::zero(); it.dimension()]);
        for (l, c) in load.iter_mut().zip(&it.components) {
            if !c.is_zero() {
                *l = &*l + c;
            }
        }
    }
    for (bin, load) in &loads {
        for (component, l) in load.iter().enumerate() {
            if !le_one_exact(l, ctx) {
                return Err(Violation::Capacity {
                    bin: *bin,
                    component,
                });
            }
        }
    }
    Ok(())
}

/// `v ≤ 1` with the carrying sign rule, valid for any coefficient sizes.
pub fn le_one_exact(v: &ExactValue, ctx: &NumericContext) -> bool {
    let one = num_rational::BigRational::one();
    match v.rational().cmp(&one) {
        // a macro gap of at least 1/D dominates any in-range tail
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => v.tail_signum_exact(ctx.base()) != Ordering::Greater,
    }
}

/// Recomputes loads of an assignment; used by reports and the web demo.
pub fn offline_loads<I: AsRef<Item>>(items: &[I], solution: &OfflineSolution) -> BTreeMap<usize, Vec<ExactValue>> {
    let mut loads: BTreeMap<usize, Vec<ExactValue>> = BTreeMap::new();
    for it in items {
        let it = it.as_ref();
        if let Some(&bin) = solution.assignment.get(&it.id) {
            let load = loads
                .entry(bin)
                .or_insert_with(|| vec![ExactValue::zero(); it.dimension()]);
            for (l, c) in load.iter_mut().zip(&it.components) {
                *l = &*l + c;
            }
        }
    }
    loads
}

/// Approximate float value of the macro part, for display only.
pub fn approx(v: &ExactValue) -> f64 {
    let r = v.rational();
    let f = r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
    if v.tail().is_empty() || f.abs() > 0.0 {
        f
    } else {
        // pure tail: report the sign only
        match v.tail_signum_leading() {
            Ordering::Greater => f64::MIN_POSITIVE,
            Ordering::Less => -f64::MIN_POSITIVE,
            Ordering::Equal => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::Exponent;
    use num_bigint::BigUint;

    fn ctx() -> Arc<NumericContext> {
        Arc::new(NumericContext::with_minimal_start(BigUint::from(1000u32), 16, BigUint::from(12u32), 100).unwrap())
    }

    fn mu() -> ExactValue {
        ExactValue::tiny(Exponent::from(20))
    }

    fn one_minus(k: i64) -> ExactValue {
        &ExactValue::one() - &mu().times(k)
    }

    fn item(id: usize, c: Vec<ExactValue>) -> Arc<Item> {
        Arc::new(Item::new(id, "t", c))
    }

    #[test]
    fn empty_bin_accepts_valid_item() {
        let mut s = PackingState::new(3, ctx());
        let a = item(0, vec![ExactValue::zero(), ExactValue::zero(), mu()]);
        assert_eq!(s.apply(a, Decision::NewBin).unwrap(), (0, true));
        assert_eq!(s.cost(), 1);
        assert!(matches!(s.fits(3, &Item::new(9, "t", vec![])), Err(PackError::UnknownBin(3))));
    }

    #[test]
    fn part_two_blocking() {
        let mut s = PackingState::new(3, ctx());
        let z = ExactValue::zero;
        s.apply(item(0, vec![z(), one_minus(4), mu()]), Decision::NewBin).unwrap();
        let blocked = Item::new(1, "t", vec![z(), one_minus(1), one_minus(1)]);
        assert!(!s.fits(0, &blocked).unwrap());
        let joins = Item::new(2, "t", vec![z(), mu().times(3), one_minus(2)]);
        assert!(s.fits(0, &joins).unwrap());
        let err = s.apply(Arc::new(blocked), Decision::Existing(0)).unwrap_err();
        assert!(matches!(err, PackError::InfeasibleDecision { bin: 0, component: 1, .. }));
    }

    #[test]
    fn unit_items_force_one_bin_each() {
        let mut s = PackingState::new(2, ctx());
        for i in 0..5 {
            let it = item(i, vec![ExactValue::one(), ExactValue::zero()]);
            let d = s.first_feasible(&it).map_or(Decision::NewBin, Decision::Existing);
            s.apply(it, d).unwrap();
        }
        assert_eq!(s.cost(), 5);
        let extra = item(9, vec![ExactValue::one(), ExactValue::zero()]);
        assert!(s.apply(extra, Decision::Existing(2)).is_err());
    }

    #[test]
    fn counting_bound() {
        let c = ctx();
        let k = 12;
        let items: Vec<_> = (0..2 * k * 3)
            .map(|i| Item::new(i as usize, "p1", vec![c.rational(1, k).unwrap(), ExactValue::tiny(Exponent::from(30 + i as u64))]))
            .collect();
        assert_eq!(counting_lower_bound(&items, &c), 6);
        assert_eq!(counting_lower_bound(&items[..1], &c), 1);
        let empty: Vec<Item> = vec![];
        assert_eq!(counting_lower_bound(&empty, &c), 0);
        // six part-2 style items with 1/3 in one component: ⌈6·1/3⌉ = 2
        let thirds: Vec<_> = (0..6).map(|i| Item::new(i, "p2", vec![one_minus(3), c.rational(1, 3).unwrap()])).collect();
        assert_eq!(counting_lower_bound(&thirds, &c), 6);
        let thirds: Vec<_> = (0..6).map(|i| Item::new(i, "p2", vec![mu(), c.rational(1, 3).unwrap()])).collect();
        assert_eq!(counting_lower_bound(&thirds, &c), 2);
    }

    #[test]
    fn verify_offline() {
        let c = ctx();
        let items = vec![
            Item::new(0, "a", vec![ExactValue::one(), ExactValue::zero()]),
            Item::new(1, "a", vec![ExactValue::one(), ExactValue::zero()]),
        ];
        let mut sol = OfflineSolution::new();
        sol.assign(0, 0);
        sol.assign(1, 1);
        assert_eq!(offline_verify(&items, &sol, &c), Ok(()));
        assert_eq!(sol.cost(), 2);
        sol.assign(1, 0);
        assert_eq!(offline_verify(&items, &sol, &c), Err(Violation::Capacity { bin: 0, component: 0 }));
        sol.assignment.remove(&1);
        assert_eq!(offline_verify(&items, &sol, &c), Err(Violation::Unassigned { item: 1 }));
        sol.assign(1, 1);
        sol.assign(7, 1);
        assert_eq!(offline_verify(&items, &sol, &c), Err(Violation::UnknownItem { item: 7 }));
    }

    #[test]
    fn item_validation() {
        let z = ExactValue::zero;
        assert!(Item::new(0, "x", vec![z(), z()]).validate().is_err());
        assert!(Item::new(0, "x", vec![-&mu(), z()]).validate().is_err());
        assert!(Item::new(0, "x", vec![&ExactValue::one() + &mu(), z()]).validate().is_err());
        assert!(Item::new(0, "x", vec![one_minus(1), z()]).validate().is_ok());
    }
}
