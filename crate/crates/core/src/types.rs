//! Value types shared by every module: labels, genotype vectors and
//! base-3 state codes.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Binary response. `Case` is `Y = 1`, `Control` is `Y = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Control,
    Case,
}

impl Label {
    /// Iteration order used by every summation over labels: `-1` first.
    pub const BOTH: [Label; 2] = [Label::Control, Label::Case];

    pub fn from_sign(v: i8) -> Option<Label> {
        match v {
            -1 => Some(Label::Control),
            1 => Some(Label::Case),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Control => -1,
            Label::Case => 1,
        }
    }

    /// Slot in two-element per-label arrays.
    pub fn index(self) -> usize {
        match self {
            Label::Control => 0,
            Label::Case => 1,
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Control => Label::Case,
            Label::Case => Label::Control,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sign())
    }
}

/// Genotype vector: one value in `{0, 1, 2}` (minor allele count) per factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FactorVector(Vec<u8>);

impl FactorVector {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v > 2) {
            return Err(invalid(format!("genotype value {v} is not in {{0, 1, 2}}")));
        }
        Ok(FactorVector(values))
    }

    pub(crate) fn from_trusted(values: Vec<u8>) -> Self {
        debug_assert!(values.iter().all(|&v| v <= 2));
        FactorVector(values)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl Deref for FactorVector {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub x: FactorVector,
    pub y: Label,
}

/// Base-3 code of the projection of `x` onto `coords`: `sum x[c_i] * 3^i`.
pub fn projection_code(x: &[u8], coords: &[usize]) -> u32 {
    coords
        .iter()
        .rev()
        .fold(0u32, |acc, &c| acc * 3 + u32::from(x[c]))
}

/// Inverse of [`projection_code`] for a projection of length `len`.
pub fn decode_state(mut code: u32, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((code % 3) as u8);
        code /= 3;
    }
    out
}

/// Number of states of `len` ternary coordinates, if it fits in `u32`.
pub fn state_count(len: usize) -> Option<u32> {
    3u32.checked_pow(u32::try_from(len).ok()?)
}

/// Checks that `subset` is non-empty, duplicate-free and inside `0..n`.
pub(crate) fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(invalid("factor subset must be non-empty"));
    }
    for (i, &m) in subset.iter().enumerate() {
        if m >= n {
            return Err(Error::IndexOutOfRange { index: m, n });
        }
        if subset[..i].contains(&m) {
            return Err(invalid(format!("factor {m} appears twice in the subset")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_roundtrip_small() {
        let x = [2u8, 0, 1, 2];
        let coords = [0usize, 2, 3];
        let code = projection_code(&x, &coords);
        assert_eq!(code, 2 + 3 + 2 * 9);
        assert_eq!(decode_state(code, 3), vec![2, 1, 2]);
    }

    #[test]
    fn rejects_bad_genotype() {
        assert!(FactorVector::new(vec![0, 3]).is_err());
        assert!(FactorVector::new(vec![0, 1, 2]).is_ok());
    }

    #[test]
    fn label_signs() {
        for l in Label::BOTH {
            assert_eq!(Label::from_sign(l.sign()), Some(l));
            assert_eq!(l.opposite().opposite(), l);
        }
        assert_eq!(Label::from_sign(0), None);
    }

    #[test]
    fn subset_checks() {
        assert!(check_subset(&[], 3).is_err());
        assert!(matches!(check_subset(&[0, 3], 3), Err(Error::IndexOutOfRange { index: 3, n: 3 })));
        assert!(check_subset(&[1, 1], 3).is_err());
        assert!(check_subset(&[2, 0], 3).is_ok());
    }
}
