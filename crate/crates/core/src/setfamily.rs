//! Families of nonempty subsets of `{1..ν}` with a guaranteed pairwise
//! symmetric-difference distance, and the "represents" predicate used by the
//! large-dimension adversary.

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Subset of `{1..ν}`; element `i` is bit `i − 1`.
pub type Subset = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("ν = {nu} outside the supported range {range}")]
    NuTooLarge { nu: u32, range: &'static str },
    #[error("ν = {0} must be a positive multiple of 4")]
    NuNotMultipleOfFour(u32),
    #[error("sets {a:#x} and {b:#x} are at distance {distance} < β = {beta}")]
    Distance {
        a: Subset,
        b: Subset,
        distance: u32,
        beta: u32,
    },
    #[error("family contains an empty or out-of-range set")]
    BadSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Powerset,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetFamily {
    nu: u32,
    sets: Vec<Subset>,
    beta: u32,
    kind: FamilyKind,
}

/// `|a △ b|`.
pub fn distance(a: Subset, b: Subset) -> u32 {
    (a ^ b).count_ones()
}

/// `S` represents a bin with associated set `s_b` iff `|S △ s_b| ≤ β/5`,
/// compared as `5·|S △ s_b| ≤ β`.
pub fn represents(s: Subset, s_b: Subset, beta: u32) -> bool {
    5 * distance(s, s_b) <= beta
}

impl SubsetFamily {
    /// All `2^ν − 1` nonempty subsets, `β = 1`.
    pub fn powerset(nu: u32) -> Result<Self, FamilyError> {
        if !(1..=20).contains(&nu) {
            return Err(FamilyError::NuTooLarge { nu, range: "1..=20" });
        }
        let fam = SubsetFamily {
            nu,
            sets: (1..(1u64 << nu)).collect(),
            beta: 1,
            kind: FamilyKind::Powerset,
        };
        fam.verify()?;
        Ok(fam)
    }

    /// Greedy constant-weight family: `ν/2`-subsets in a seeded relabelling of
    /// `{1..ν}`, accepted when at distance `≥ ⌈0.3ν⌉` from every accepted set,
    /// until `2^(ν/4)` sets or the candidates run out.
    pub fn code(nu: u32, seed: u64) -> Result<Self, FamilyError> {
        if nu == 0 || !nu.is_multiple_of(4) {
            return Err(FamilyError::NuNotMultipleOfFour(nu));
        }
        if nu > 40 {
            return Err(FamilyError::NuTooLarge { nu, range: "4..=40" });
        }
        let beta = (3 * nu).div_ceil(10);
        let target = 1usize << (nu / 4);
        let mut labels: Vec<u32> = (0..nu).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let relabel = |mask: u64| -> u64 {
            let mut out = 0;
            for (pos, &l) in labels.iter().enumerate() {
                if mask >> pos & 1 == 1 {
                    out |= 1 << l;
                }
            }
            out
        };
        let mut sets: Vec<Subset> = Vec::new();
        let half = nu / 2;
        let limit = 1u64 << nu;
        let mut mask: u64 = (1u64 << half) - 1;
        while mask < limit && sets.len() < target {
            let cand = relabel(mask);
            if sets.iter().all(|&s| distance(s, cand) >= beta) {
                sets.push(cand);
            }
            // Gosper's hack: next integer with the same popcount
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
        let fam = SubsetFamily {
            nu,
            sets,
            beta,
            kind: FamilyKind::Code,
        };
        fam.verify()?;
        Ok(fam)
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn alpha(&self) -> usize {
        self.sets.len()
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn sets(&self) -> &[Subset] {
        &self.sets
    }

    /// `γ = max(1, β/5)`.
    pub fn gamma(&self) -> BigRational {
        let r = BigRational::new(self.beta.into(), 5.into());
        if r > BigRational::from_integer(1.into()) {
            r
        } else {
            BigRational::from_integer(1.into())
        }
    }

    /// Index of the family member representing `s_b`, if any (at most one).
    pub fn representative(&self, s_b: Subset) -> Option<usize> {
        self.sets.iter().position(|&s| represents(s, s_b, self.beta))
    }

    /// Exhaustive pairwise check of the distance guarantee.
    pub fn verify(&self) -> Result<(), FamilyError> {
        let universe = if self.nu >= 64 { u64::MAX } else { (1u64 << self.nu) - 1 };
        for (i, &a) in self.sets.iter().enumerate() {
            if a == 0 || a & !universe != 0 {
                return Err(FamilyError::BadSet);
            }
            for &b in &self.sets[i + 1..] {
                let distance = distance(a, b);
                if distance < self.beta {
                    return Err(FamilyError::Distance {
                        a,
                        b,
                        distance,
                        beta: self.beta,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> FamilyDump {
        FamilyDump {
            nu: self.nu,
            alpha: self.alpha(),
            beta: self.beta,
            kind: self.kind,
            sets: self.sets.iter().map(|s| format!("{s:#x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDump {
    pub nu: u32,
    pub alpha: usize,
    pub beta: u32,
    pub kind: FamilyKind,
    pub sets: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powerset_sizes() {
        let f = SubsetFamily::powerset(2).unwrap();
        assert_eq!(f.sets(), &[0b01, 0b10, 0b11]);
        assert_eq!(SubsetFamily::powerset(4).unwrap().alpha(), 15);
        assert_eq!(SubsetFamily::powerset(1).unwrap().sets(), &[1]);
        assert!(matches!(SubsetFamily::powerset(21), Err(FamilyError::NuTooLarge { .. })));
        assert!(SubsetFamily::powerset(0).is_err());
        assert_eq!(f.gamma(), BigRational::from_integer(1.into()));
    }

    #[test]
    fn code_family_small() {
        let f = SubsetFamily::code(4, 0).unwrap();
        assert_eq!(f.beta(), 2);
        assert!(f.alpha() >= 2);
        assert!(f.sets().iter().all(|s| s.count_ones() == 2));
        let f = SubsetFamily::code(8, 0).unwrap();
        assert_eq!(f.beta(), 3);
        assert_eq!(f.alpha(), 4);
        f.verify().unwrap();
        assert!(SubsetFamily::code(6, 0).is_err());
    }

    #[test]
    fn code_family_larger() {
        for nu in [12, 16, 20] {
            let f = SubsetFamily::code(nu, 7).unwrap();
            assert_eq!(f.beta(), (3 * nu).div_ceil(10));
            f.verify().unwrap();
            assert!(f.alpha() >= 1);
        }
    }

    #[test]
    fn represents_rule() {
        // β = 1: only equality
        assert!(represents(0b101, 0b101, 1));
        assert!(!represents(0b101, 0b100, 1));
        assert!(represents(0b11, 0b00, 10));
        assert!(!represents(0b111, 0b000, 10));
    }

    #[test]
    fn gamma_is_max() {
        let f = SubsetFamily::code(20, 0).unwrap();
        assert_eq!(f.beta(), 6);
        assert_eq!(f.gamma(), BigRational::new(6.into(), 5.into()));
    }
}
