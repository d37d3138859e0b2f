//! Cross-validated estimation of the penalized prediction error and the
//! exhaustive search for the factor subset that minimizes it.
//!
//! The held-out blocks of fold `k` are scored by a plug-in rule trained on
//! the other `K - 1` blocks of each class: predict a case iff the estimated
//! posterior `g = P1 I1 / (P0 I0 + P1 I1)` exceeds the estimated threshold
//! `h`, where `I_y` are class-conditional cell frequencies on the subset.

mod cv;
mod folds;
mod rule;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use cv::{err_hat_iid, err_hat_k, ErrEstimate, IidPrevalence, IidSample};
pub use folds::{partition_folds, FoldPartition};
pub use rule::{train_rule, TrainedRule};
pub use select::{binomial, colex_unrank, select_relevant, select_relevant_iid, Selection};

/// How the penalty weights and the decision threshold are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum PsiMode {
    /// `psi(y) = 1 / P(Y = y)` with the prevalence estimate plugged in: every
    /// class weight `psi(y) P(Y = y)` is `1` and the threshold is `P1`.
    Natural,
    /// Fixed weights; class weights are `psi(y) P(Y = y)` and the threshold is
    /// `psi_minus / (psi_minus + psi_plus)`.
    Fixed { psi_minus: f64, psi_plus: f64 },
}

impl PsiMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PsiMode::Natural => Ok(()),
            PsiMode::Fixed { psi_minus, psi_plus } => {
                if psi_minus > 0.0 && psi_minus.is_finite() && psi_plus > 0.0 && psi_plus.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!(
                        "penalty weights must be positive and finite, got ({psi_minus}, {psi_plus})"
                    )))
                }
            }
        }
    }

    /// `[psi(-1) P0, psi(1) P1]` for a case prevalence `p_case`.
    pub(crate) fn class_weights(&self, p_case: f64) -> [f64; 2] {
        match *self {
            PsiMode::Natural => [1.0, 1.0],
            PsiMode::Fixed { psi_minus, psi_plus } => [psi_minus * (1.0 - p_case), psi_plus * p_case],
        }
    }
}

fn check_prevalence(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("prevalence {p} is outside [0, 1]")))
    }
}
