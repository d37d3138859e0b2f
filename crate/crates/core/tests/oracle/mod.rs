//! Brute-force reference for the cross-validated error estimate: rational
//! arithmetic for the plug-in rule, direct counting for the held-out errors.

#![allow(dead_code)]

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub struct OracleSample {
    /// `classes[0]` controls, `classes[1]` cases, in arrival order.
    pub classes: [Vec<Vec<u8>>; 2],
}

#[derive(Debug, Clone, Copy)]
pub enum OraclePsi {
    Natural,
    Fixed(f64, f64),
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn frac(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Held-out block of fold `k` among `len` items: `len / K` items per block,
/// the remainder going to the last one.
pub fn block(len: usize, k_folds: usize, k: usize) -> std::ops::Range<usize> {
    let base = len / k_folds;
    let start = k * base;
    let end = if k + 1 == k_folds { len } else { start + base };
    start..end
}

fn cell(x: &[u8], subset: &[usize]) -> Vec<u8> {
    subset.iter().map(|&i| x[i]).collect()
}

/// Predicted label (0 control, 1 case) of every cell by the rule trained on
/// all blocks except `k`: a case iff `g > h`, where
/// `g = P1 I1 / (P0 I0 + P1 I1)` and `h = psi- / (psi- + psi+)`. An undefined
/// `g` or `h` predicts a control.
pub fn predict(
    sample: &OracleSample,
    k_folds: usize,
    k: usize,
    subset: &[usize],
    p1: f64,
    psi: OraclePsi,
    x: &[u8],
) -> u8 {
    // natural penalties are undefined for a degenerate prevalence
    if matches!(psi, OraclePsi::Natural) && (p1 <= 0.0 || p1 >= 1.0) {
        return 0;
    }
    let target = cell(x, subset);
    let mut freq = Vec::new();
    for class in &sample.classes {
        let held = block(class.len(), k_folds, k);
        let mut hits = 0;
        let mut total = 0;
        for (i, obs) in class.iter().enumerate() {
            if held.contains(&i) {
                continue;
            }
            total += 1;
            if cell(obs, subset) == target {
                hits += 1;
            }
        }
        freq.push(frac(hits, total));
    }
    let big_p1 = rat(p1);
    let big_p0 = rat(1.0 - p1);
    let (psi_minus, psi_plus) = match psi {
        OraclePsi::Natural => (BigRational::one() / &big_p0, BigRational::one() / &big_p1),
        OraclePsi::Fixed(m, p) => (rat(m), rat(p)),
    };
    let denom = &big_p0 * &freq[0] + &big_p1 * &freq[1];
    if denom.is_zero() {
        return 0;
    }
    let g = &big_p1 * &freq[1] / denom;
    let h = &psi_minus / (&psi_minus + &psi_plus);
    u8::from(g > h)
}

/// Held-out error counts `[fold][class]`.
pub fn error_counts(sample: &OracleSample, k_folds: usize, subset: &[usize], p1: f64, psi: OraclePsi) -> Vec<[u64; 2]> {
    (0..k_folds)
        .map(|k| {
            let mut e = [0u64; 2];
            for (y, class) in sample.classes.iter().enumerate() {
                let mut memo: HashMap<Vec<u8>, u8> = HashMap::new();
                for i in block(class.len(), k_folds, k) {
                    let c = cell(&class[i], subset);
                    let pred = *memo
                        .entry(c)
                        .or_insert_with(|| predict(sample, k_folds, k, subset, p1, psi, &class[i]));
                    if usize::from(pred) != y {
                        e[y] += 1;
                    }
                }
            }
            e
        })
        .collect()
}

/// `(2 / K) sum_y sum_k psi(y) P(y) e_k^y / |block_k^y|`, summed controls
/// first, folds in order; class weights are `1` for natural penalties.
pub fn err_est(sample: &OracleSample, k_folds: usize, subset: &[usize], p1: f64, psi: OraclePsi) -> f64 {
    let errors = error_counts(sample, k_folds, subset, p1, psi);
    let weights = match psi {
        OraclePsi::Natural => [1.0, 1.0],
        OraclePsi::Fixed(m, p) => [m * (1.0 - p1), p * p1],
    };
    let mut acc = 0.0;
    for y in 0..2 {
        for (k, e) in errors.iter().enumerate() {
            let size = block(sample.classes[y].len(), k_folds, k).len();
            if size > 0 {
                acc += weights[y] * e[y] as f64 / size as f64;
            }
        }
    }
    acc * (2.0 / k_folds as f64)
}
