//! Exact numbers of the form `q + Σ c_e·F^(−e)`.
//!
//! The adversaries need values that are astronomically small relative to each
//! other (the adaptive oracle runs a binary search over exponents), so a value
//! is stored as a rational "macro" part plus a sparse tail of integer
//! coefficients indexed by arbitrary-precision exponents of a fixed base `F`.
//!
//! Comparison never evaluates powers of `F`. Macro parts decide whenever they
//! differ; otherwise the coefficient at the smallest exponent where the tails
//! differ decides. Both rules are sound under the inequalities checked by
//! [`NumericContext::new`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("invalid numeric parameters: {0}")]
    InvalidParameters(String),
    #[error("denominator {denominator} does not divide D_macro = {d_macro}")]
    InvalidDenominator { denominator: BigInt, d_macro: BigUint },
    #[error("exponent {exponent} is below the context start {start}")]
    ExponentBelowStart { exponent: BigUint, start: u64 },
    #[error("tail coefficient {coefficient} at exponent {exponent} exceeds C_max = {c_max}")]
    CoefficientOverflow {
        exponent: BigUint,
        coefficient: i64,
        c_max: u64,
    },
    #[error("scaling by {0} leaves a non-integral tail coefficient")]
    NonIntegralScale(String),
    #[error("cannot parse exact value: {0}")]
    Parse(String),
}

/// A (possibly huge) exponent of the base `F`. Cloning is cheap: the digits are
/// shared, which matters because the oracle's exponents run to thousands of bits
/// and every component of every item carries one.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(Arc<BigUint>);

impl Exponent {
    pub fn new(value: BigUint) -> Self {
        Exponent(Arc::new(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }
}

impl From<u64> for Exponent {
    fn from(v: u64) -> Self {
        Exponent::new(BigUint::from(v))
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.bits() <= 64 {
            write!(f, "{}", self.0)
        } else {
            write!(f, "<{}-bit exponent>", self.0.bits())
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_str_radix(10))
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::from_str(&s)
            .map(Exponent::new)
            .map_err(|e| de::Error::custom(format!("bad exponent {s:?}: {e}")))
    }
}

/// Validated parameters shared by every value of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericContext {
    #[serde(with = "biguint_str")]
    base: BigUint,
    e_start: u64,
    c_max: u64,
    #[serde(with = "biguint_str")]
    d_macro: BigUint,
    m_cap: u64,
}

impl NumericContext {
    /// Checks `2·C_max < F`, `F > M_cap` and `C_max·M_cap·D² < F^(e_start−1)`.
    pub fn new(
        base: BigUint,
        e_start: u64,
        c_max: u64,
        d_macro: BigUint,
        m_cap: u64,
    ) -> Result<Self, NumError> {
        if base.is_zero() || e_start == 0 || c_max == 0 || d_macro.is_zero() || m_cap == 0 {
            return Err(NumError::InvalidParameters(
                "all parameters must be positive integers".into(),
            ));
        }
        if BigUint::from(2 * c_max) >= base {
            return Err(NumError::InvalidParameters(format!(
                "2·C_max < F fails: 2·{c_max} >= {base}"
            )));
        }
        if base <= BigUint::from(m_cap) {
            return Err(NumError::InvalidParameters(format!(
                "F > M_cap fails: {base} <= {m_cap}"
            )));
        }
        if !Self::scale_separated(&base, e_start, c_max, &d_macro, m_cap) {
            return Err(NumError::InvalidParameters(format!(
                "C_max·M_cap·F^(1−e_start) < 1/D_macro² fails for F={base}, e_start={e_start}, \
                 C_max={c_max}, D_macro={d_macro}, M_cap={m_cap}"
            )));
        }
        Ok(NumericContext {
            base,
            e_start,
            c_max,
            d_macro,
            m_cap,
        })
    }

    /// Same as [`NumericContext::new`] with the smallest `e_start` that passes.
    pub fn with_minimal_start(
        base: BigUint,
        c_max: u64,
        d_macro: BigUint,
        m_cap: u64,
    ) -> Result<Self, NumError> {
        let mut e_start = 1;
        while !Self::scale_separated(&base, e_start, c_max, &d_macro, m_cap) {
            e_start += 1;
            if e_start > 4096 || base <= BigUint::one() {
                return Err(NumError::InvalidParameters(format!(
                    "no e_start separates macro and tail scales for F={base}"
                )));
            }
        }
        Self::new(base, e_start, c_max, d_macro, m_cap)
    }

    fn scale_separated(base: &BigUint, e_start: u64, c_max: u64, d: &BigUint, m_cap: u64) -> bool {
        let lhs = BigUint::from(c_max) * BigUint::from(m_cap) * d * d;
        let rhs = num_traits::pow(base.clone(), (e_start - 1) as usize);
        lhs < rhs
    }

    pub fn base(&self) -> &BigUint {
        &self.base
    }

    pub fn e_start(&self) -> u64 {
        self.e_start
    }

    pub fn c_max(&self) -> u64 {
        self.c_max
    }

    pub fn d_macro(&self) -> &BigUint {
        &self.d_macro
    }

    pub fn m_cap(&self) -> u64 {
        self.m_cap
    }

    /// `p/q` in lowest terms; `q` (after reduction) must divide `D_macro`.
    pub fn rational(&self, p: i64, q: i64) -> Result<ExactValue, NumError> {
        if q == 0 {
            return Err(NumError::InvalidParameters("zero denominator".into()));
        }
        self.from_ratio(BigRational::new(p.into(), q.into()))
    }

    pub fn from_ratio(&self, r: BigRational) -> Result<ExactValue, NumError> {
        self.check_denominator(&r)?;
        Ok(ExactValue::from_ratio(r))
    }

    /// `F^(−e)`.
    pub fn tiny(&self, e: &Exponent) -> Result<ExactValue, NumError> {
        if e.value() < &BigUint::from(self.e_start) {
            return Err(NumError::ExponentBelowStart {
                exponent: e.value().clone(),
                start: self.e_start,
            });
        }
        Ok(ExactValue::tiny(e.clone()))
    }

    pub fn add(&self, a: &ExactValue, b: &ExactValue) -> Result<ExactValue, NumError> {
        let v = a + b;
        self.check(&v)?;
        Ok(v)
    }

    /// Checks that `a + b` stays in context, given that `a` already is.
    pub fn check_add(&self, a: &ExactValue, b: &ExactValue) -> Result<(), NumError> {
        self.check_denominator(&b.rational)?;
        for (e, &c) in &b.tail {
            let sum = a.tail.get(e).copied().unwrap_or(0) + c;
            if sum.unsigned_abs() > self.c_max {
                return Err(NumError::CoefficientOverflow {
                    exponent: e.value().clone(),
                    coefficient: sum,
                    c_max: self.c_max,
                });
            }
        }
        Ok(())
    }

    /// `a += b` for an in-context `a`; `a` is left untouched on error.
    pub fn add_assign(&self, a: &mut ExactValue, b: &ExactValue) -> Result<(), NumError> {
        self.check_add(a, b)?;
        *a += b;
        Ok(())
    }

    pub fn sub(&self, a: &ExactValue, b: &ExactValue) -> Result<ExactValue, NumError> {
        let v = a - b;
        self.check(&v)?;
        Ok(v)
    }

    /// Multiplies by a rational. Tail coefficients must stay integral.
    pub fn scale(&self, a: &ExactValue, r: &BigRational) -> Result<ExactValue, NumError> {
        let rational = &a.rational * r;
        let mut tail = BTreeMap::new();
        for (e, &c) in &a.tail {
            let scaled = r * BigRational::from_integer(c.into());
            if !scaled.is_integer() {
                return Err(NumError::NonIntegralScale(format_ratio(r)));
            }
            let c = scaled.to_integer().to_i64().ok_or(NumError::CoefficientOverflow {
                exponent: e.value().clone(),
                coefficient: i64::MAX,
                c_max: self.c_max,
            })?;
            if c != 0 {
                tail.insert(e.clone(), c);
            }
        }
        let v = ExactValue { rational, tail };
        self.check(&v)?;
        Ok(v)
    }

    /// Verifies the value against this context: denominator divides `D_macro`
    /// and every tail coefficient is within `C_max`.
    pub fn check(&self, v: &ExactValue) -> Result<(), NumError> {
        self.check_denominator(&v.rational)?;
        for (e, &c) in &v.tail {
            if c.unsigned_abs() > self.c_max {
                return Err(NumError::CoefficientOverflow {
                    exponent: e.value().clone(),
                    coefficient: c,
                    c_max: self.c_max,
                });
            }
        }
        Ok(())
    }

    fn check_denominator(&self, r: &BigRational) -> Result<(), NumError> {
        let denom = r.denom();
        let d = BigInt::from(self.d_macro.clone());
        if !d.is_multiple_of(denom) {
            return Err(NumError::InvalidDenominator {
                denominator: denom.clone(),
                d_macro: self.d_macro.clone(),
            });
        }
        Ok(())
    }
}

/// `macro + Σ tail[e]·F^(−e)`, in canonical form (no zero coefficients).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactValue {
    rational: BigRational,
    tail: BTreeMap<Exponent, i64>,
}

impl ExactValue {
    pub fn zero() -> Self {
        ExactValue {
            rational: BigRational::zero(),
            tail: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::from_ratio(BigRational::one())
    }

    pub fn from_ratio(r: BigRational) -> Self {
        ExactValue {
            rational: r,
            tail: BTreeMap::new(),
        }
    }

    pub fn from_parts(rational: BigRational, tail: impl IntoIterator<Item = (Exponent, i64)>) -> Self {
        let mut v = ExactValue::from_ratio(rational);
        for (e, c) in tail {
            v.add_coefficient(e, c);
        }
        v
    }

    pub fn tiny(e: Exponent) -> Self {
        let mut tail = BTreeMap::new();
        tail.insert(e, 1);
        ExactValue {
            rational: BigRational::zero(),
            tail,
        }
    }

    pub fn rational(&self) -> &BigRational {
        &self.rational
    }

    pub fn tail(&self) -> &BTreeMap<Exponent, i64> {
        &self.tail
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.tail.is_empty()
    }

    fn add_coefficient(&mut self, e: Exponent, c: i64) {
        if c == 0 {
            return;
        }
        let entry = self.tail.entry(e);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + c;
                if sum == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    /// Multiplies by a small integer without any context check.
    pub fn times(&self, k: i64) -> ExactValue {
        if k == 0 {
            return ExactValue::zero();
        }
        ExactValue {
            rational: &self.rational * BigRational::from_integer(k.into()),
            tail: self.tail.iter().map(|(e, c)| (e.clone(), c * k)).collect(),
        }
    }

    /// Sign of the tail by the leading-coefficient rule. Sound whenever every
    /// coefficient is below `F` in magnitude.
    pub fn tail_signum_leading(&self) -> Ordering {
        match self.tail.values().next() {
            Some(c) => c.cmp(&0),
            None => Ordering::Equal,
        }
    }

    /// Sign of the tail for arbitrary coefficients: carries multiples of `F`
    /// toward smaller exponents until every coefficient is below `F`, then
    /// applies the leading rule.
    pub fn tail_signum_exact(&self, base: &BigUint) -> Ordering {
        let f = BigInt::from(base.clone());
        if self.tail.values().all(|c| BigInt::from(c.unsigned_abs()) < f) {
            return self.tail_signum_leading();
        }
        let mut work: BTreeMap<Exponent, BigInt> = self
            .tail
            .iter()
            .map(|(e, &c)| (e.clone(), BigInt::from(c)))
            .collect();
        let mut settled: BTreeMap<Exponent, BigInt> = BTreeMap::new();
        while let Some((e, c)) = work.pop_last() {
            if c.abs() < f || e.value().is_zero() {
                if !c.is_zero() {
                    settled.insert(e, c);
                }
                continue;
            }
            // truncating division keeps |r| < F and moves q one place up
            let (q, r) = c.div_rem(&f);
            if !r.is_zero() {
                settled.insert(e.clone(), r);
            }
            let up = Exponent::new(e.value() - 1u32);
            let slot = work.entry(up).or_insert_with(BigInt::zero);
            *slot += q;
        }
        match settled.values().next() {
            Some(c) => c.sign().cmp_zero(),
            None => Ordering::Equal,
        }
    }

    /// Smallest integer `≥ self`, exact for any tail whose magnitude stays below
    /// the distance from the macro part to the next integer (guaranteed by the
    /// context's scale inequality).
    pub fn ceil_exact(&self, base: &BigUint) -> BigInt {
        let r = &self.rational;
        let sign = self.tail_signum_exact(base);
        if r.is_integer() {
            match sign {
                Ordering::Greater => r.to_integer() + 1,
                _ => r.to_integer(),
            }
        } else {
            r.ceil().to_integer()
        }
    }

    /// Order of `a + b` against `c` without materializing the sum. Sound when
    /// `|a_e + b_e − c_e| < F` at every exponent; for in-context `a`, `b` and a
    /// tail-free `c` this follows from `2·C_max < F`.
    pub fn cmp_sum(a: &ExactValue, b: &ExactValue, c: &ExactValue) -> Ordering {
        let macro_order = if b.rational.is_zero() {
            a.rational.cmp(&c.rational)
        } else if a.rational.is_zero() {
            b.rational.cmp(&c.rational)
        } else {
            // cross-multiplied, no gcd
            let (an, ad) = (a.rational.numer(), a.rational.denom());
            let (bn, bd) = (b.rational.numer(), b.rational.denom());
            let (cn, cd) = (c.rational.numer(), c.rational.denom());
            ((an * bd + bn * ad) * cd).cmp(&(cn * ad * bd))
        };
        match macro_order {
            Ordering::Equal => {}
            other => return other,
        }
        let mut ia = a.tail.iter().peekable();
        let mut ib = b.tail.iter().peekable();
        let mut ic = c.tail.iter().peekable();
        loop {
            let next = [ia.peek().map(|x| x.0), ib.peek().map(|x| x.0), ic.peek().map(|x| x.0)]
                .into_iter()
                .flatten()
                .min()
                .cloned();
            let Some(e) = next else {
                return Ordering::Equal;
            };
            let take = |it: &mut std::iter::Peekable<std::collections::btree_map::Iter<'_, Exponent, i64>>| {
                match it.peek() {
                    Some((k, v)) if **k == e => {
                        let v = **v;
                        it.next();
                        v
                    }
                    _ => 0,
                }
            };
            let s = take(&mut ia) + take(&mut ib) - take(&mut ic);
            if s != 0 {
                return s.cmp(&0);
            }
        }
    }
}

trait SignCmp {
    fn cmp_zero(self) -> Ordering;
}

impl SignCmp for num_bigint::Sign {
    fn cmp_zero(self) -> Ordering {
        match self {
            num_bigint::Sign::Minus => Ordering::Less,
            num_bigint::Sign::NoSign => Ordering::Equal,
            num_bigint::Sign::Plus => Ordering::Greater,
        }
    }
}

impl Ord for ExactValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.rational.cmp(&other.rational) {
            Ordering::Equal => {}
            o => return o,
        }
        let mut ia = self.tail.iter().peekable();
        let mut ib = other.tail.iter().peekable();
        loop {
            match (ia.peek(), ib.peek()) {
                (None, None) => return Ordering::Equal,
                (Some((_, &ca)), None) => return ca.cmp(&0),
                (None, Some((_, &cb))) => return 0.cmp(&cb),
                (Some((ea, &ca)), Some((eb, &cb))) => match ea.cmp(eb) {
                    Ordering::Less => return ca.cmp(&0),
                    Ordering::Greater => return 0.cmp(&cb),
                    Ordering::Equal => {
                        if ca != cb {
                            return ca.cmp(&cb);
                        }
                        ia.next();
                        ib.next();
                    }
                },
            }
        }
    }
}

impl PartialOrd for ExactValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::ops::AddAssign<&ExactValue> for ExactValue {
    fn add_assign(&mut self, rhs: &ExactValue) {
        if !rhs.rational.is_zero() {
            self.rational += &rhs.rational;
        }
        for (e, &c) in &rhs.tail {
            self.add_coefficient(e.clone(), c);
        }
    }
}

impl std::ops::Add for &ExactValue {
    type Output = ExactValue;

    fn add(self, rhs: &ExactValue) -> ExactValue {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl std::ops::Sub for &ExactValue {
    type Output = ExactValue;

    fn sub(self, rhs: &ExactValue) -> ExactValue {
        let mut out = self.clone();
        out.rational -= &rhs.rational;
        for (e, &c) in &rhs.tail {
            out.add_coefficient(e.clone(), -c);
        }
        out
    }
}

impl std::ops::Neg for &ExactValue {
    type Output = ExactValue;

    fn neg(self) -> ExactValue {
        self.times(-1)
    }
}

impl std::iter::Sum for ExactValue {
    fn sum<I: Iterator<Item = ExactValue>>(iter: I) -> Self {
        iter.fold(ExactValue::zero(), |mut acc, v| {
            acc += &v;
            acc
        })
    }
}

impl<'a> std::iter::Sum<&'a ExactValue> for ExactValue {
    fn sum<I: Iterator<Item = &'a ExactValue>>(iter: I) -> Self {
        iter.fold(ExactValue::zero(), |mut acc, v| {
            acc += v;
            acc
        })
    }
}

impl fmt::Debug for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_ratio(&self.rational))?;
        for (e, c) in &self.tail {
            write!(f, " {:+}·F^-{:?}", c, e)?;
        }
        Ok(())
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Renders a rational as `p/q` (always with a denominator).
/// `p/q`, or just `p` for integers.
pub fn format_ratio(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_ratio(s: &str) -> Result<BigRational, NumError> {
    let bad = || NumError::Parse(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(
            BigInt::from_str(s.trim()).map_err(|_| bad())?,
        )),
    }
}

impl Serialize for ExactValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(rename = "macro")]
            rational: String,
            tail: TailRepr<'a>,
        }
        struct TailRepr<'a>(&'a BTreeMap<Exponent, i64>);
        impl Serialize for TailRepr<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.len()))?;
                for (e, c) in self.0 {
                    seq.serialize_element(&(e, c))?;
                }
                seq.end()
            }
        }
        Repr {
            rational: format_ratio(&self.rational),
            tail: TailRepr(&self.tail),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            #[serde(rename = "macro")]
            rational: String,
            tail: Vec<(Exponent, i64)>,
        }
        let repr = Repr::deserialize(d)?;
        let rational = parse_ratio(&repr.rational).map_err(de::Error::custom)?;
        let mut tail = BTreeMap::new();
        let mut last: Option<&Exponent> = None;
        for (e, c) in &repr.tail {
            if c == &0 {
                return Err(de::Error::custom("zero tail coefficient"));
            }
            if last.is_some_and(|l| l >= e) {
                return Err(de::Error::custom("tail exponents must be strictly increasing"));
            }
            last = Some(e);
        }
        for (e, c) in repr.tail {
            tail.insert(e, c);
        }
        Ok(ExactValue { rational, tail })
    }
}

pub(crate) mod biguint_str {
    use num_bigint::BigUint;
    use serde::{de, Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::from_str(&s).map_err(de::Error::custom)
    }
}

/// Serde helper storing a rational as `"p/q"`.
pub mod ratio_str {
    use super::{format_ratio, parse_ratio};
    use num_rational::BigRational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn ctx() -> NumericContext {
        NumericContext::new(big(1_000_000), 3, 16, big(60), 10_000).unwrap()
    }

    #[test]
    fn context_rejects_scale_violation() {
        let err = NumericContext::new(big(10), 1, 4, big(1), 5).unwrap_err();
        assert!(matches!(err, NumError::InvalidParameters(m) if m.contains("1/D_macro")));
        assert!(NumericContext::new(big(200), 3, 16, big(60), 100).is_err());
        // e_start = 2 is one short for this tuple
        assert!(NumericContext::new(big(1_000_000), 2, 16, big(60), 10_000).is_err());
        assert!(NumericContext::new(big(1_000_000), 3, 16, big(60), 10_000).is_ok());
    }

    #[test]
    fn context_rejects_small_base() {
        assert!(NumericContext::new(big(32), 9, 16, big(1), 5).is_err());
        assert!(NumericContext::new(big(40), 9, 16, big(1), 50).is_err());
    }

    #[test]
    fn minimal_start_is_minimal() {
        let c = NumericContext::with_minimal_start(big(1_000_000), 16, big(60), 10_000).unwrap();
        assert_eq!(c.e_start(), 3);
    }

    #[test]
    fn constructors() {
        let c = ctx();
        let third = c.rational(1, 3).unwrap();
        assert_eq!(third.rational(), &BigRational::new(1.into(), 3.into()));
        assert!(third.tail().is_empty());
        assert_eq!(c.rational(2, 6).unwrap(), third);
        assert!(matches!(c.rational(1, 7), Err(NumError::InvalidDenominator { .. })));
        assert!(matches!(
            c.tiny(&Exponent::from(2)),
            Err(NumError::ExponentBelowStart { .. })
        ));
        let t = c.tiny(&Exponent::from(5)).unwrap();
        let two = c.add(&t, &t).unwrap();
        assert_eq!(two.tail().get(&Exponent::from(5)), Some(&2));
    }

    #[test]
    fn one_minus_four_mu() {
        let c = ctx();
        let mu = c.tiny(&Exponent::from(9)).unwrap();
        let v = c.sub(&ExactValue::one(), &mu.times(4)).unwrap();
        assert_eq!(v.rational(), &BigRational::one());
        assert_eq!(v.tail().get(&Exponent::from(9)), Some(&-4));
        // 1 − 4μ + 10μ > 1
        let w = c.add(&v, &mu.times(10)).unwrap();
        assert_eq!(w.cmp(&ExactValue::one()), Ordering::Greater);
        assert_eq!(v.cmp(&ExactValue::one()), Ordering::Less);
    }

    #[test]
    fn tiny_order() {
        let a = ExactValue::tiny(Exponent::from(5));
        let b = ExactValue::tiny(Exponent::from(7));
        assert_eq!(a.cmp(&b), Ordering::Greater);
        assert!(ExactValue::zero() < b);
    }

    #[test]
    fn overflow_is_an_error() {
        let c = ctx();
        let mu = c.tiny(&Exponent::from(9)).unwrap();
        assert!(matches!(
            c.scale(&mu, &BigRational::from_integer(17.into())),
            Err(NumError::CoefficientOverflow { .. })
        ));
        assert!(matches!(
            c.scale(&mu, &BigRational::new(1.into(), 2.into())),
            Err(NumError::NonIntegralScale(_))
        ));
        let s = c.scale(&mu, &BigRational::from_integer(3.into())).unwrap();
        assert_eq!(s, mu.times(3));
    }

    #[test]
    fn cmp_sum_matches_materialized() {
        let mu = ExactValue::tiny(Exponent::from(9));
        let a = &ExactValue::one() - &mu.times(4);
        let b = mu.times(3);
        assert_eq!(ExactValue::cmp_sum(&a, &b, &ExactValue::one()), Ordering::Less);
        let b = mu.times(4);
        assert_eq!(ExactValue::cmp_sum(&a, &b, &ExactValue::one()), Ordering::Equal);
        let b = mu.times(5);
        assert_eq!(ExactValue::cmp_sum(&a, &b, &ExactValue::one()), Ordering::Greater);
    }

    #[test]
    fn exact_signum_carries() {
        // 1000·F^-5 − F^-4 with F = 100 is 10·F^-4 > 0; leading rule alone says negative
        let base = big(100);
        let v = ExactValue::from_parts(
            BigRational::zero(),
            [(Exponent::from(4), -1), (Exponent::from(5), 1000)],
        );
        assert_eq!(v.tail_signum_leading(), Ordering::Less);
        assert_eq!(v.tail_signum_exact(&base), Ordering::Greater);
        let w = ExactValue::from_parts(
            BigRational::zero(),
            [(Exponent::from(4), -10), (Exponent::from(5), 1000)],
        );
        assert_eq!(w.tail_signum_exact(&base), Ordering::Equal);
    }

    #[test]
    fn ceil_exact_cases() {
        let base = big(1000);
        let mu = ExactValue::tiny(Exponent::from(4));
        assert_eq!(ExactValue::one().ceil_exact(&base), BigInt::from(1));
        assert_eq!((&ExactValue::one() + &mu).ceil_exact(&base), BigInt::from(2));
        assert_eq!((&ExactValue::one() - &mu).ceil_exact(&base), BigInt::from(1));
        let half = ExactValue::from_ratio(BigRational::new(1.into(), 2.into()));
        assert_eq!((&half - &mu).ceil_exact(&base), BigInt::from(1));
        assert_eq!(ExactValue::zero().ceil_exact(&base), BigInt::from(0));
    }

    #[test]
    fn json_shape() {
        let v = ExactValue::from_parts(
            BigRational::new(1.into(), 3.into()),
            [(Exponent::from(4), -2), (Exponent::from(12), 1)],
        );
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"macro":"1/3","tail":[["4",-2],["12",1]]}"#);
        let back: ExactValue = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<ExactValue>(r#"{"macro":"1","tail":[["4",1],["4",1]]}"#).is_err());
        assert!(serde_json::from_str::<ExactValue>(r#"{"macro":"1","tail":[["4",0]]}"#).is_err());
    }
}
