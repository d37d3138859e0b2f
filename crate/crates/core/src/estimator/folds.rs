use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stratify::StratifiedSample;
use crate::types::Label;

/// Block `fold` (0-based) of `len` ordered positions cut into `k` blocks of
/// `len / k` positions, the last block taking the remainder.
pub(crate) fn block_range(len: usize, k: usize, fold: usize) -> Range<usize> {
    let base = len / k;
    let start = fold * base;
    let end = if fold + 1 == k { len } else { start + base };
    start..end
}

/// Per-class split of sample positions into `K` consecutive blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    k: usize,
    /// Class sizes, indexed by [`Label::index`].
    sizes: [usize; 2],
}

impl FoldPartition {
    pub fn new(sizes: [usize; 2], k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("need at least 2 folds, got {k}")));
        }
        for label in Label::BOTH {
            let size = sizes[label.index()];
            if size < k {
                return Err(Error::ClassTooSmall { label, size, folds: k });
            }
        }
        Ok(FoldPartition { k, sizes })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn class_size(&self, label: Label) -> usize {
        self.sizes[label.index()]
    }

    /// Positions of class `label` held out in `fold`.
    pub fn block(&self, label: Label, fold: usize) -> Range<usize> {
        block_range(self.sizes[label.index()], self.k, fold)
    }

    pub fn blocks(&self, label: Label) -> Vec<Range<usize>> {
        (0..self.k).map(|f| self.block(label, f)).collect()
    }

    /// Positions of class `label` used for training when `fold` is held out.
    pub fn training(&self, label: Label, fold: usize) -> impl Iterator<Item = usize> {
        let held = self.block(label, fold);
        (0..self.sizes[label.index()]).filter(move |i| !held.contains(i))
    }
}

pub fn partition_folds(sample: &StratifiedSample, k: usize) -> Result<FoldPartition> {
    FoldPartition::new([sample.controls().len(), sample.cases().len()], k)
}
