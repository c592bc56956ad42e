//! Lower-bound values per dimension for each construction.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::exactnum::{format_ratio, ratio_str};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundsRow {
    pub d: usize,
    pub construction: &'static str,
    pub parameters: String,
    #[serde(with = "ratio_str")]
    pub bound: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundsEntry {
    pub d: usize,
    pub rows: Vec<BoundsRow>,
    pub best: BoundsRow,
}

fn ratio(p: usize, q: usize) -> BigRational {
    BigRational::new(p.into(), q.into())
}

/// Best `αβ/(α+β−2)` over integers `α, β ≥ 2` with `α(β−2)+2 ≤ d`; ties go
/// to the smaller α, then the smaller β.
pub fn medium_best(d: usize) -> Option<(usize, usize, BigRational)> {
    if d < 2 {
        return None;
    }
    // for fixed α the bound is nondecreasing in β and strictly increasing
    // when α > 2, so only the largest admissible β matters
    let mut best = (2usize, 2usize);
    for alpha in 3..=(d - 2).max(2) {
        let beta = (d - 2) / alpha + 2;
        let (num, den) = ((alpha * beta) as u128, (alpha + beta - 2) as u128);
        let (bn, bd) = ((best.0 * best.1) as u128, (best.0 + best.1 - 2) as u128);
        if num * bd > bn * den {
            best = (alpha, beta);
        }
    }
    Some((best.0, best.1, ratio(best.0 * best.1, best.0 + best.1 - 2)))
}

/// `ν = ⌊log₂ d − 2·log₂ log₂ d⌋`, when positive.
pub fn large_nu(d: usize) -> Option<u32> {
    let l = (d as f64).log2();
    let nu = (l - 2.0 * l.log2()).floor();
    (nu >= 1.0).then_some(nu as u32)
}

pub fn bounds_for(d: usize) -> BoundsEntry {
    let mut rows = Vec::new();
    if let Some((alpha, beta, bound)) = medium_best(d) {
        rows.push(BoundsRow {
            d,
            construction: "medium-d",
            parameters: format!("alpha={alpha} beta={beta}"),
            bound,
        });
    }
    if d >= 3 {
        rows.push(BoundsRow {
            d,
            construction: "d3",
            parameters: String::new(),
            bound: ratio(9, 4),
        });
    }
    if d >= 8 {
        rows.push(BoundsRow {
            d,
            construction: "d8",
            parameters: String::new(),
            bound: ratio(76, 29),
        });
    }
    if d > 16 {
        if let Some(nu) = large_nu(d) {
            rows.push(BoundsRow {
                d,
                construction: "large-d",
                parameters: format!("nu={nu}"),
                bound: ratio((1usize << nu) - 1, 2 * nu as usize),
            });
        }
    }
    let best = rows
        .iter()
        .fold(None::<&BoundsRow>, |acc, r| match acc {
            Some(b) if b.bound >= r.bound => Some(b),
            _ => Some(r),
        })
        .cloned()
        .unwrap_or(BoundsRow {
            d,
            construction: "none",
            parameters: String::new(),
            bound: ratio(1, 1),
        });
    BoundsEntry { d, rows, best }
}

pub fn bounds(d_min: usize, d_max: usize) -> Vec<BoundsEntry> {
    (d_min.max(2)..=d_max).map(bounds_for).collect()
}

pub fn to_csv(entries: &[BoundsEntry]) -> String {
    let mut out = String::from("d,construction,parameters,bound,decimal,best\n");
    for e in entries {
        for r in &e.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{}\n",
                r.d,
                r.construction,
                r.parameters,
                format_ratio(&r.bound),
                r.bound.to_f64().unwrap_or(f64::NAN),
                r == &e.best
            ));
        }
    }
    out
}
