use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::folds::block_range;
use super::rule::DecisionRule;
use super::{check_prevalence, partition_folds, PsiMode};
use crate::error::{invalid, Result};
use crate::stratify::StratifiedSample;
use crate::types::{check_subset, state_count, Label, Observation};

/// Cell tables up to this many states are indexed directly by projection code.
const DENSE_CELLS: u32 = 3u32.pow(7);

/// The cross-validated error of one factor subset.
///
/// `value = (2 / K) * sum_y sum_k weight[k][y] * errors[k][y] / size[k][y]`,
/// accumulated in the order `y = -1, 1`, then `k = 1..K`, each term computed
/// as `(weight * errors) / size`; blocks of size `0` contribute nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrEstimate {
    pub subset: Vec<usize>,
    pub value: f64,
    /// Held-out misclassifications per fold, indexed by [`Label::index`].
    pub errors: Vec<[u64; 2]>,
    /// Held-out block sizes per fold.
    pub sizes: Vec<[u64; 2]>,
    /// `psi(y) P(Y = y)` estimates per fold (all `1` for natural weights).
    pub weights: Vec<[f64; 2]>,
}

impl ErrEstimate {
    fn from_counts(subset: Vec<usize>, errors: Vec<[u64; 2]>, sizes: Vec<[u64; 2]>, weights: Vec<[f64; 2]>) -> Self {
        let value = reduce(&errors, &sizes, &weights);
        ErrEstimate {
            subset,
            value,
            errors,
            sizes,
            weights,
        }
    }

    pub fn k(&self) -> usize {
        self.errors.len()
    }

    /// Held-out misclassification fraction of class `label` in `fold` (`0` for empty blocks).
    pub fn fraction(&self, fold: usize, label: Label) -> f64 {
        let (e, s) = (self.errors[fold][label.index()], self.sizes[fold][label.index()]);
        if s == 0 {
            0.0
        } else {
            e as f64 / s as f64
        }
    }
}

fn reduce(errors: &[[u64; 2]], sizes: &[[u64; 2]], weights: &[[f64; 2]]) -> f64 {
    let mut acc = 0.0;
    for label in Label::BOTH {
        let y = label.index();
        for k in 0..errors.len() {
            if sizes[k][y] > 0 {
                acc += weights[k][y] * errors[k][y] as f64 / sizes[k][y] as f64;
            }
        }
    }
    acc * (2.0 / errors.len() as f64)
}

#[derive(Debug, Clone, Copy)]
struct FoldModel {
    rule: DecisionRule,
    weights: [f64; 2],
}

/// Column-major factor data grouped into held-out blocks, with the decision
/// rule and class weights of every fold. Shared by every candidate subset.
#[derive(Debug, Clone)]
pub(crate) struct CvData {
    columns: Vec<Vec<u8>>,
    /// `blocks[k][y]`: positions (in column order) held out in fold `k`.
    blocks: Vec<[Range<usize>; 2]>,
    class_totals: [u64; 2],
    folds: Vec<FoldModel>,
}

/// Per-thread buffers for [`CvData::errors`].
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    codes: Vec<u32>,
    distinct: Vec<u32>,
    counts: Vec<u64>,
    totals: Vec<u64>,
}

impl CvData {
    /// `groups[k][y]` lists the vectors held out in fold `k` for class `y`.
    fn from_groups(n: usize, groups: Vec<[Vec<&[u8]>; 2]>, folds: Vec<FoldModel>) -> Self {
        let mut columns = vec![Vec::new(); n];
        let mut blocks = Vec::with_capacity(groups.len());
        let mut class_totals = [0u64; 2];
        let mut pos = 0;
        for group in &groups {
            let mut pair = [0..0, 0..0];
            for y in 0..2 {
                let start = pos;
                for x in &group[y] {
                    for (col, &v) in columns.iter_mut().zip(x.iter()) {
                        col.push(v);
                    }
                }
                pos += group[y].len();
                class_totals[y] += group[y].len() as u64;
                pair[y] = start..pos;
            }
            blocks.push(pair);
        }
        CvData {
            columns,
            blocks,
            class_totals,
            folds,
        }
    }

    fn stratified(sample: &StratifiedSample, k: usize, p_hat: f64, psi: PsiMode) -> Result<Self> {
        let partition = partition_folds(sample, k)?;
        let groups = (0..k)
            .map(|f| {
                Label::BOTH.map(|label| {
                    sample.class(label)[partition.block(label, f)]
                        .iter()
                        .map(|x| x.as_slice())
                        .collect()
                })
            })
            .collect();
        let model = FoldModel {
            rule: DecisionRule::new(psi, p_hat),
            weights: psi.class_weights(p_hat),
        };
        Ok(Self::from_groups(sample.factor_count(), groups, vec![model; k]))
    }

    fn iid(sample: &IidSample, k: usize, prevalence: IidPrevalence, psi: PsiMode) -> Result<Self> {
        let obs = &sample.observations;
        let groups: Vec<[Vec<&[u8]>; 2]> = (0..k)
            .map(|f| {
                let fold = &obs[block_range(obs.len(), k, f)];
                Label::BOTH.map(|label| {
                    fold.iter()
                        .filter(|o| o.y == label)
                        .map(|o| o.x.as_slice())
                        .collect()
                })
            })
            .collect();
        let cases_total: usize = groups.iter().map(|g| g[1].len()).sum();
        let folds = groups
            .iter()
            .map(|g| {
                let p_case = match prevalence {
                    IidPrevalence::Known(p) => p,
                    IidPrevalence::TrainingFolds => {
                        let train_cases = cases_total - g[1].len();
                        let train_all = obs.len() - g[0].len() - g[1].len();
                        train_cases as f64 / train_all as f64
                    }
                };
                FoldModel {
                    rule: DecisionRule::new(psi, p_case),
                    weights: psi.class_weights(p_case),
                }
            })
            .collect();
        Ok(Self::from_groups(sample.factor_count(), groups, folds))
    }

    pub(crate) fn factor_count(&self) -> usize {
        self.columns.len()
    }

    pub(crate) fn k(&self) -> usize {
        self.blocks.len()
    }

    fn sizes(&self) -> Vec<[u64; 2]> {
        self.blocks
            .iter()
            .map(|b| [b[0].len() as u64, b[1].len() as u64])
            .collect()
    }

    fn weights(&self) -> Vec<[f64; 2]> {
        self.folds.iter().map(|f| f.weights).collect()
    }

    /// Held-out misclassifications per fold and class for `subset`.
    pub(crate) fn errors(&self, subset: &[usize], scratch: &mut Scratch) -> Vec<[u64; 2]> {
        let total = self.columns.first().map_or(0, Vec::len);
        let codes = &mut scratch.codes;
        codes.clear();
        codes.resize(total, 0);
        let mut scale = 1u32;
        for &m in subset {
            for (c, &v) in codes.iter_mut().zip(&self.columns[m]) {
                *c += u32::from(v) * scale;
            }
            scale = scale.wrapping_mul(3);
        }

        let states = state_count(subset.len()).expect("subset length checked by the caller");
        let cells = if states <= DENSE_CELLS {
            states as usize
        } else {
            let distinct = &mut scratch.distinct;
            distinct.clear();
            distinct.extend_from_slice(codes);
            distinct.sort_unstable();
            distinct.dedup();
            for c in codes.iter_mut() {
                *c = distinct.binary_search(c).expect("code was collected") as u32;
            }
            distinct.len()
        };

        let k = self.k();
        // counts[(fold * 2 + y) * cells + cell]
        let counts = &mut scratch.counts;
        counts.clear();
        counts.resize(2 * k * cells, 0);
        for (f, pair) in self.blocks.iter().enumerate() {
            for y in 0..2 {
                let row = &mut counts[(2 * f + y) * cells..(2 * f + y + 1) * cells];
                for &c in &codes[pair[y].clone()] {
                    row[c as usize] += 1;
                }
            }
        }
        let totals = &mut scratch.totals;
        totals.clear();
        totals.resize(2 * cells, 0);
        for f in 0..k {
            for y in 0..2 {
                let row = &counts[(2 * f + y) * cells..(2 * f + y + 1) * cells];
                for (t, &c) in totals[y * cells..(y + 1) * cells].iter_mut().zip(row) {
                    *t += c;
                }
            }
        }

        let mut errors = vec![[0u64; 2]; k];
        for (f, (pair, model)) in self.blocks.iter().zip(&self.folds).enumerate() {
            let train_controls = self.class_totals[0] - pair[0].len() as u64;
            let train_cases = self.class_totals[1] - pair[1].len() as u64;
            let held_controls = &counts[2 * f * cells..(2 * f + 1) * cells];
            let held_cases = &counts[(2 * f + 1) * cells..(2 * f + 2) * cells];
            for cell in 0..cells {
                let (h0, h1) = (held_controls[cell], held_cases[cell]);
                if h0 == 0 && h1 == 0 {
                    continue;
                }
                let c0 = totals[cell] - h0;
                let c1 = totals[cells + cell] - h1;
                match model.rule.decide(c1, train_cases, c0, train_controls) {
                    Label::Case => errors[f][0] += h0,
                    Label::Control => errors[f][1] += h1,
                }
            }
        }
        errors
    }

    pub(crate) fn estimate(&self, subset: &[usize], scratch: &mut Scratch) -> ErrEstimate {
        let errors = self.errors(subset, scratch);
        ErrEstimate::from_counts(subset.to_vec(), errors, self.sizes(), self.weights())
    }

    /// Estimate value only; identical to `estimate(..).value`.
    pub(crate) fn value(&self, subset: &[usize], scratch: &mut Scratch) -> f64 {
        let errors = self.errors(subset, scratch);
        reduce(&errors, &self.sizes(), &self.weights())
    }

    pub(crate) fn for_stratified(sample: &StratifiedSample, k: usize, p_hat: f64, psi: PsiMode) -> Result<Self> {
        check_prevalence(p_hat)?;
        psi.validate()?;
        Self::stratified(sample, k, p_hat, psi)
    }

    pub(crate) fn for_iid(sample: &IidSample, k: usize, prevalence: IidPrevalence, psi: PsiMode) -> Result<Self> {
        psi.validate()?;
        if let IidPrevalence::Known(p) = prevalence {
            check_prevalence(p)?;
        }
        if k < 2 {
            return Err(invalid(format!("need at least 2 folds, got {k}")));
        }
        if sample.len() < k {
            return Err(invalid(format!(
                "i.i.d. sample of size {} cannot be cut into {k} folds",
                sample.len()
            )));
        }
        Self::iid(sample, k, prevalence, psi)
    }
}

pub(crate) fn check_estimable_subset(subset: &[usize], n: usize) -> Result<()> {
    check_subset(subset, n)?;
    if state_count(subset.len()).is_none() {
        return Err(invalid(format!("subsets of {} factors are too large", subset.len())));
    }
    Ok(())
}

/// Cross-validated error of the plug-in rule on `subset` for a stratified
/// sample; `p_hat` estimates `P(Y = 1)`.
pub fn err_hat_k(sample: &StratifiedSample, k: usize, subset: &[usize], p_hat: f64, psi: PsiMode) -> Result<ErrEstimate> {
    check_estimable_subset(subset, sample.factor_count())?;
    let data = CvData::for_stratified(sample, k, p_hat, psi)?;
    Ok(data.estimate(subset, &mut Scratch::default()))
}

/// A sample of i.i.d. observations in draw order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidSample {
    observations: Vec<Observation>,
}

impl IidSample {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let n = observations.first().map_or(0, |o| o.x.len());
        if observations.iter().any(|o| o.x.len() != n) {
            return Err(invalid("observations have different factor counts"));
        }
        Ok(IidSample { observations })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn factor_count(&self) -> usize {
        self.observations.first().map_or(0, |o| o.x.len())
    }

    pub fn case_count(&self) -> usize {
        self.observations.iter().filter(|o| o.y == Label::Case).count()
    }
}

/// Source of `P(Y = 1)` for the i.i.d. estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IidPrevalence {
    Known(f64),
    /// Case frequency among the training folds, fold by fold.
    TrainingFolds,
}

/// Cross-validated error for an i.i.d. sample: folds are consecutive blocks of
/// the draw order and each fold's class blocks are its members of that class.
pub fn err_hat_iid(
    sample: &IidSample,
    k: usize,
    subset: &[usize],
    prevalence: IidPrevalence,
    psi: PsiMode,
) -> Result<ErrEstimate> {
    check_estimable_subset(subset, sample.factor_count())?;
    let data = CvData::for_iid(sample, k, prevalence, psi)?;
    Ok(data.estimate(subset, &mut Scratch::default()))
}
