use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{check_prevalence, FoldPartition, PsiMode};
use crate::error::Result;
use crate::stratify::StratifiedSample;
use crate::types::{check_subset, projection_code, Label};

/// The plug-in decision for one fold, evaluated on training cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) enum DecisionRule {
    /// Degenerate prevalence estimate under natural weights.
    AlwaysControl,
    /// Natural weights: `g > P1` reduces to `I1 > I0`.
    CountRatio,
    /// `g > h` reduces to `P1 psi(1) I1 > psi(-1) P0 I0`.
    Weighted {
        p_case: f64,
        p_control: f64,
        psi_minus: f64,
        psi_plus: f64,
    },
}

impl DecisionRule {
    pub(crate) fn new(psi: PsiMode, p_case: f64) -> Self {
        match psi {
            PsiMode::Natural if p_case > 0.0 && p_case < 1.0 => DecisionRule::CountRatio,
            PsiMode::Natural => DecisionRule::AlwaysControl,
            PsiMode::Fixed { psi_minus, psi_plus } => DecisionRule::Weighted {
                p_case,
                p_control: 1.0 - p_case,
                psi_minus,
                psi_plus,
            },
        }
    }

    /// Decision for a cell seen `case_count` times among `case_total` training
    /// cases and `control_count` times among `control_total` training
    /// controls. Frequencies over an empty class are `0`.
    pub(crate) fn decide(&self, case_count: u64, case_total: u64, control_count: u64, control_total: u64) -> Label {
        let case_freq_zero = case_total == 0 || case_count == 0;
        let control_freq_zero = control_total == 0 || control_count == 0;
        match *self {
            DecisionRule::AlwaysControl => Label::Control,
            DecisionRule::CountRatio => {
                if case_freq_zero {
                    Label::Control
                } else if control_freq_zero
                    || u128::from(case_count) * u128::from(control_total)
                        > u128::from(control_count) * u128::from(case_total)
                {
                    Label::Case
                } else {
                    Label::Control
                }
            }
            DecisionRule::Weighted {
                p_case,
                p_control,
                psi_minus,
                psi_plus,
            } => {
                if case_freq_zero || p_case == 0.0 {
                    return Label::Control;
                }
                if control_freq_zero || p_control == 0.0 {
                    return Label::Case;
                }
                let lhs_n = u128::from(case_count) * u128::from(control_total);
                let rhs_n = u128::from(control_count) * u128::from(case_total);
                let lhs = p_case * psi_plus * lhs_n as f64;
                let rhs = psi_minus * p_control * rhs_n as f64;
                // rounding error is a few ulps; only near-ties need exact arithmetic
                let case = if (lhs - rhs).abs() > 1e-9 * lhs.max(rhs) {
                    lhs > rhs
                } else {
                    let q = |v: f64| BigRational::from_float(v).expect("finite weight");
                    let n = |v: u128| BigRational::from_integer(BigInt::from(v));
                    q(p_case) * q(psi_plus) * n(lhs_n) > q(psi_minus) * q(p_control) * n(rhs_n)
                };
                if case {
                    Label::Case
                } else {
                    Label::Control
                }
            }
        }
    }
}

/// The plug-in classifier trained on the complement of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRule {
    subset: Vec<usize>,
    /// Training counts per projection code, indexed by [`Label::index`].
    counts: [BTreeMap<u32, u64>; 2],
    totals: [u64; 2],
    prevalence: [f64; 2],
    psi: [f64; 2],
    rule: DecisionRule,
}

impl TrainedRule {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Number of training vectors of class `label`.
    pub fn training_size(&self, label: Label) -> u64 {
        self.totals[label.index()]
    }

    /// `I_y(x)`: frequency of `x`'s projection among training vectors of class `label`.
    pub fn frequency(&self, label: Label, x: &[u8]) -> f64 {
        let total = self.totals[label.index()];
        if total == 0 {
            return 0.0;
        }
        self.count(label, projection_code(x, &self.subset)) as f64 / total as f64
    }

    fn count(&self, label: Label, code: u32) -> u64 {
        self.counts[label.index()].get(&code).copied().unwrap_or(0)
    }

    /// `(P(Y = -1), P(Y = 1))` estimates used by the rule.
    pub fn prevalence(&self) -> [f64; 2] {
        self.prevalence
    }

    /// `(psi(-1), psi(1))` estimates used by the rule.
    pub fn psi(&self) -> [f64; 2] {
        self.psi
    }

    pub fn predict(&self, x: &[u8]) -> Label {
        let code = projection_code(x, &self.subset);
        self.rule.decide(
            self.count(Label::Case, code),
            self.totals[Label::Case.index()],
            self.count(Label::Control, code),
            self.totals[Label::Control.index()],
        )
    }
}

/// Trains the rule for held-out `fold` on `subset`; `p_hat` estimates `P(Y = 1)`.
pub fn train_rule(
    sample: &StratifiedSample,
    partition: &FoldPartition,
    fold: usize,
    subset: &[usize],
    p_hat: f64,
    psi: PsiMode,
) -> Result<TrainedRule> {
    check_subset(subset, sample.factor_count())?;
    check_prevalence(p_hat)?;
    psi.validate()?;
    let mut counts = [BTreeMap::new(), BTreeMap::new()];
    let mut totals = [0u64; 2];
    for label in Label::BOTH {
        let class = sample.class(label);
        for i in partition.training(label, fold) {
            *counts[label.index()]
                .entry(projection_code(&class[i], subset))
                .or_insert(0) += 1;
            totals[label.index()] += 1;
        }
    }
    let prevalence = [1.0 - p_hat, p_hat];
    let psi_values = match psi {
        PsiMode::Natural => [1.0 / prevalence[0], 1.0 / prevalence[1]],
        PsiMode::Fixed { psi_minus, psi_plus } => [psi_minus, psi_plus],
    };
    Ok(TrainedRule {
        subset: subset.to_vec(),
        counts,
        totals,
        prevalence,
        psi: psi_values,
        rule: DecisionRule::new(psi, p_hat),
    })
}
