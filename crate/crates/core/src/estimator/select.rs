use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{check_estimable_subset, CvData, Scratch};
use super::{ErrEstimate, IidPrevalence, IidSample, PsiMode};
use crate::error::{invalid, Result};
use crate::stratify::StratifiedSample;

/// Candidates evaluated per parallel task.
const CHUNK: u64 = 256;

/// The subset with the smallest cross-validated error among all `r`-subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Sorted, 0-based factor indices.
    pub subset: Vec<usize>,
    pub estimate: ErrEstimate,
    pub candidates: u64,
}

/// `n choose r`, saturating at `u64::MAX`.
pub fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// The `rank`-th `r`-subset of the naturals in colexicographic order
/// (rank 0 is `{0, .., r - 1}`), sorted ascending.
pub fn colex_unrank(mut rank: u64, r: usize) -> Vec<usize> {
    let mut out = vec![0; r];
    for i in (1..=r).rev() {
        // largest c with C(c, i) <= rank
        let mut c = i - 1;
        while binomial(c as u64 + 1, i as u64) <= rank {
            c += 1;
        }
        rank -= binomial(c as u64, i as u64);
        out[i - 1] = c;
    }
    out
}

/// Advances `s` to the next `r`-subset of `0..n` in colex order.
fn colex_next(s: &mut [usize], n: usize) -> bool {
    let r = s.len();
    for i in 0..r {
        let limit = if i + 1 < r { s[i + 1] } else { n };
        if s[i] + 1 < limit {
            s[i] += 1;
            for (j, v) in s[..i].iter_mut().enumerate() {
                *v = j;
            }
            return true;
        }
    }
    false
}

/// Ascending by value, then lexicographically by subset.
fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.1 < b.1,
    }
}

fn search(data: &CvData, r: usize) -> Result<Selection> {
    let n = data.factor_count();
    if r == 0 || r > n {
        return Err(invalid(format!("subset size {r} must lie in 1..={n}")));
    }
    check_estimable_subset(&(0..r).collect::<Vec<_>>(), n)?;
    let total = binomial(n as u64, r as u64);
    let chunks = total.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut subset = colex_unrank(start, r);
            let mut best = (data.value(&subset, scratch), subset.clone());
            for _ in start + 1..end {
                colex_next(&mut subset, n);
                let cand = (data.value(&subset, scratch), subset.clone());
                if better(&cand, &best) {
                    best = cand;
                }
            }
            best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("at least one candidate");
    let estimate = data.estimate(&best.1, &mut Scratch::default());
    debug_assert_eq!(estimate.value.to_bits(), best.0.to_bits());
    Ok(Selection {
        subset: best.1,
        estimate,
        candidates: total,
    })
}

/// Evaluates every `r`-subset of the factors on a stratified sample and
/// returns the minimizer; ties go to the lexicographically smallest subset.
pub fn select_relevant(sample: &StratifiedSample, k: usize, r: usize, p_hat: f64, psi: PsiMode) -> Result<Selection> {
    search(&CvData::for_stratified(sample, k, p_hat, psi)?, r)
}

/// [`select_relevant`] for an i.i.d. sample.
pub fn select_relevant_iid(
    sample: &IidSample,
    k: usize,
    r: usize,
    prevalence: IidPrevalence,
    psi: PsiMode,
) -> Result<Selection> {
    search(&CvData::for_iid(sample, k, prevalence, psi)?, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::err_hat_k;
    use crate::types::FactorVector;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(100, 3), 161_700);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(7, 0), 1);
    }

    #[test]
    fn colex_enumeration_is_complete_and_ranked() {
        let (n, r) = (7, 3);
        let mut s = colex_unrank(0, r);
        let mut seen = vec![s.clone()];
        while colex_next(&mut s, n) {
            seen.push(s.clone());
        }
        assert_eq!(seen.len() as u64, binomial(n as u64, r as u64));
        for (rank, subset) in seen.iter().enumerate() {
            assert_eq!(&colex_unrank(rank as u64, r), subset);
            assert!(subset.windows(2).all(|w| w[0] < w[1]));
            assert!(subset.iter().all(|&v| v < n));
        }
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), seen.len());
    }

    #[test]
    fn full_subset_when_r_equals_n() {
        let fv = |v: &[u8]| FactorVector::new(v.to_vec()).unwrap();
        let s = StratifiedSample::from_classes(
            vec![fv(&[1, 0]), fv(&[0, 1]), fv(&[1, 2])],
            vec![fv(&[0, 0]), fv(&[1, 1]), fv(&[2, 2])],
        )
        .unwrap();
        let sel = select_relevant(&s, 3, 2, 0.5, PsiMode::Natural).unwrap();
        assert_eq!(sel.subset, vec![0, 1]);
        assert_eq!(sel.candidates, 1);
        let direct = err_hat_k(&s, 3, &[0, 1], 0.5, PsiMode::Natural).unwrap();
        assert_eq!(sel.estimate, direct);
        assert!(select_relevant(&s, 3, 3, 0.5, PsiMode::Natural).is_err());
    }
}
