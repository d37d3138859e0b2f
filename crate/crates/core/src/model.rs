//! Exact quantities of a known joint law: the penalized error function,
//! the Bayes-optimal classifier and the consistency diagnostics built on
//! `L(x) = psi(1) P(X = x, Y = 1) - psi(-1) P(X = x, Y = -1)`.
//!
//! The response depends on the relevant coordinates only and the factors are
//! independent, so every sum is taken over the states of the coordinates that
//! matter (a classifier's subset plus the relevant set) instead of `3^n`.

use serde::{Deserialize, Serialize};

use crate::datagen::{genotype_pmf, XorModel};
use crate::error::{invalid, Error, Result};
use crate::types::{check_subset, decode_state, projection_code, state_count, Label};

/// Largest number of coordinates summed over exactly (`3^14` states).
pub const MAX_EXACT_COORDS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyMode {
    Explicit,
    /// `psi(y) = 1 / P(Y = y)`.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    psi_minus: f64,
    psi_plus: f64,
    mode: PenaltyMode,
}

impl PenaltySpec {
    pub fn explicit(psi_minus: f64, psi_plus: f64) -> Result<Self> {
        if !(psi_minus > 0.0 && psi_minus.is_finite() && psi_plus > 0.0 && psi_plus.is_finite()) {
            return Err(invalid(format!(
                "penalty weights must be positive and finite, got ({psi_minus}, {psi_plus})"
            )));
        }
        Ok(PenaltySpec {
            psi_minus,
            psi_plus,
            mode: PenaltyMode::Explicit,
        })
    }

    /// Natural weights for a model with case prevalence `p`.
    pub fn natural_for_prevalence(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("prevalence {p} is outside (0, 1)")));
        }
        Ok(PenaltySpec {
            psi_minus: 1.0 / (1.0 - p),
            psi_plus: 1.0 / p,
            mode: PenaltyMode::Natural,
        })
    }

    pub fn natural(model: &XorModel) -> Self {
        Self::natural_for_prevalence(model.case_prevalence())
            .expect("XOR model prevalence lies in (0, 1)")
    }

    pub fn psi_minus(&self) -> f64 {
        self.psi_minus
    }

    pub fn psi_plus(&self) -> f64 {
        self.psi_plus
    }

    pub fn mode(&self) -> PenaltyMode {
        self.mode
    }

    pub fn weight(&self, label: Label) -> f64 {
        match label {
            Label::Control => self.psi_minus,
            Label::Case => self.psi_plus,
        }
    }

    /// `psi(-1) / (psi(-1) + psi(1))`, the posterior threshold of the optimal rule.
    pub fn threshold(&self) -> f64 {
        self.psi_minus / (self.psi_minus + self.psi_plus)
    }
}

/// A classifier that looks at an ordered subset of factors. `decision` is a
/// full table indexed by the base-3 projection code, so it is total on
/// `{0,1,2}^|subset|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classifier {
    subset: Vec<usize>,
    decision: Vec<Label>,
}

impl Classifier {
    pub fn new(subset: Vec<usize>, decision: Vec<Label>) -> Result<Self> {
        for (i, m) in subset.iter().enumerate() {
            if subset[..i].contains(m) {
                return Err(invalid(format!("factor {m} appears twice in the classifier subset")));
            }
        }
        let cells = state_count(subset.len())
            .ok_or_else(|| invalid("classifier subset is too large"))?;
        if decision.len() != cells as usize {
            return Err(invalid(format!(
                "decision table has {} entries, expected {cells}",
                decision.len()
            )));
        }
        Ok(Classifier { subset, decision })
    }

    /// Tabulates `rule` over every state of `subset` (values in subset order).
    pub fn from_fn(subset: Vec<usize>, rule: impl Fn(&[u8]) -> Label) -> Result<Self> {
        let cells = state_count(subset.len())
            .ok_or_else(|| invalid("classifier subset is too large"))?;
        let decision = (0..cells)
            .map(|c| rule(&decode_state(c, subset.len())))
            .collect();
        Self::new(subset, decision)
    }

    pub fn constant(label: Label) -> Self {
        Classifier {
            subset: Vec::new(),
            decision: vec![label],
        }
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn decision(&self) -> &[Label] {
        &self.decision
    }

    /// Classifies a full factor vector.
    pub fn classify(&self, x: &[u8]) -> Label {
        self.decision[projection_code(x, &self.subset) as usize]
    }

    fn check_against(&self, n: usize) -> Result<()> {
        if let Some(&m) = self.subset.iter().find(|&&m| m >= n) {
            return Err(Error::IndexOutOfRange { index: m, n });
        }
        Ok(())
    }
}

/// States of a sorted set of coordinates, enumerated by base-3 code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    coords: Vec<usize>,
}

impl StateSpace {
    pub fn new(mut coords: Vec<usize>) -> Result<Self> {
        coords.sort_unstable();
        coords.dedup();
        if coords.len() > MAX_EXACT_COORDS {
            return Err(Error::StateSpaceTooLarge {
                coords: coords.len(),
                limit: MAX_EXACT_COORDS,
            });
        }
        Ok(StateSpace { coords })
    }

    /// Sorted union of `a` and `b`.
    pub fn union(a: &[usize], b: &[usize]) -> Result<Self> {
        Self::new(a.iter().chain(b).copied().collect())
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    /// Number of states, `3^|coords|`.
    pub fn size(&self) -> u32 {
        3u32.pow(self.coords.len() as u32)
    }

    /// Writes state `code` into the matching coordinates of `x`.
    fn fill(&self, code: u32, x: &mut [u8]) {
        let mut c = code;
        for &k in &self.coords {
            x[k] = (c % 3) as u8;
            c /= 3;
        }
    }

    fn code_of(&self, x: &[u8]) -> u32 {
        projection_code(x, &self.coords)
    }

    fn prob(&self, model: &XorModel, x: &[u8]) -> f64 {
        self.coords
            .iter()
            .map(|&k| genotype_pmf(model.mafs()[k], x[k]).expect("model MAFs are valid"))
            .product()
    }

    fn check_against(&self, n: usize) -> Result<()> {
        match self.coords.last() {
            Some(&k) if k >= n => Err(Error::IndexOutOfRange { index: k, n }),
            _ => Ok(()),
        }
    }
}

/// `Err(f) = 2 * sum_y psi(y) P(Y = y, f(X) != y)`, summed exactly over the
/// states of `f.subset` together with the relevant factors.
pub fn error_exact(model: &XorModel, f: &Classifier, psi: &PenaltySpec) -> Result<f64> {
    f.check_against(model.n())?;
    let space = StateSpace::union(f.subset(), model.relevant())?;
    let mut x = vec![0u8; model.n()];
    let mut total = 0.0;
    for code in 0..space.size() {
        space.fill(code, &mut x);
        let px = space.prob(model, &x);
        let pi = model.response_prob(&x);
        total += match f.classify(&x) {
            Label::Control => psi.psi_plus * px * pi,
            Label::Case => psi.psi_minus * px * (1.0 - pi),
        };
    }
    Ok(2.0 * total)
}

/// `P(Y = 1 | X_subset = x_subset)` for every state of `subset` (indexed by
/// projection code), marginalizing the relevant factors outside `subset`.
pub fn conditional_case_probs(model: &XorModel, subset: &[usize]) -> Result<Vec<f64>> {
    check_subset(subset, model.n())?;
    let outer = StateSpace::new(subset.to_vec())?;
    let hidden: Vec<usize> = model
        .relevant()
        .iter()
        .copied()
        .filter(|k| !subset.contains(k))
        .collect();
    let hidden = StateSpace::new(hidden)?;
    let cells = state_count(subset.len()).expect("bounded by MAX_EXACT_COORDS");
    let mut x = vec![0u8; model.n()];
    let mut out = Vec::with_capacity(cells as usize);
    for code in 0..cells {
        for (v, &k) in decode_state(code, subset.len()).into_iter().zip(subset) {
            x[k] = v;
        }
        let mut pi = 0.0;
        for h in 0..hidden.size() {
            hidden.fill(h, &mut x);
            pi += hidden.prob(model, &x) * model.response_prob(&x);
        }
        out.push(pi);
    }
    debug_assert_eq!(outer.coords().len(), subset.len());
    Ok(out)
}

/// The plug-in-free restricted rule: `+1` iff
/// `P(Y = 1 | X_subset = x_subset) > psi(-1) / (psi(-1) + psi(1))`.
/// Ties at the threshold map to `-1`.
pub fn optimal_restricted_classifier(
    model: &XorModel,
    psi: &PenaltySpec,
    subset: &[usize],
) -> Result<Classifier> {
    let t = psi.threshold();
    let decision = conditional_case_probs(model, subset)?
        .into_iter()
        .map(|pi| if pi > t { Label::Case } else { Label::Control })
        .collect();
    Classifier::new(subset.to_vec(), decision)
}

/// The optimal classifier `f*` (on the relevant coordinates).
pub fn optimal_classifier(model: &XorModel, psi: &PenaltySpec) -> Classifier {
    optimal_restricted_classifier(model, psi, model.relevant())
        .expect("relevant set is a valid subset")
}

/// Exact law of `X_coords` given `Y = label`, indexed by the projection code
/// over the sorted `coords`.
pub fn class_conditional_law(model: &XorModel, label: Label, coords: &[usize]) -> Result<Vec<f64>> {
    let space = StateSpace::union(coords, model.relevant())?;
    space.check_against(model.n())?;
    let target = StateSpace::new(coords.to_vec())?;
    let mut law = vec![0.0; target.size() as usize];
    let mut x = vec![0u8; model.n()];
    for code in 0..space.size() {
        space.fill(code, &mut x);
        let pi = model.response_prob(&x);
        let py = match label {
            Label::Case => pi,
            Label::Control => 1.0 - pi,
        };
        law[target.code_of(&x) as usize] += space.prob(model, &x) * py;
    }
    let z: f64 = law.iter().sum();
    law.iter_mut().for_each(|v| *v /= z);
    Ok(law)
}

/// Support, optimal set `A`, the set `U` on which the posterior differs from
/// the threshold, and `L(x)`, all over a collapsed state space.
#[derive(Debug, Clone)]
pub struct ModelDiagnostics {
    space: StateSpace,
    support: Vec<u32>,
    set_a: Vec<u32>,
    set_u: Vec<u32>,
    l_weights: Vec<f64>,
}

impl ModelDiagnostics {
    /// Diagnostics over the relevant coordinates.
    pub fn new(model: &XorModel, psi: &PenaltySpec) -> Self {
        Self::over(model, psi, model.relevant()).expect("relevant set is a valid state space")
    }

    /// Diagnostics over `coords` together with the relevant coordinates.
    pub fn over(model: &XorModel, psi: &PenaltySpec, coords: &[usize]) -> Result<Self> {
        let space = StateSpace::union(coords, model.relevant())?;
        space.check_against(model.n())?;
        let t = psi.threshold();
        let scale = psi.psi_minus + psi.psi_plus;
        let mut x = vec![0u8; model.n()];
        let (mut support, mut set_a, mut set_u) = (Vec::new(), Vec::new(), Vec::new());
        let mut l_weights = Vec::with_capacity(space.size() as usize);
        for code in 0..space.size() {
            space.fill(code, &mut x);
            let px = space.prob(model, &x);
            let pi = model.response_prob(&x);
            // psi(1) px pi - psi(-1) px (1 - pi), factored so it is exactly 0 when pi == t
            l_weights.push(px * scale * (pi - t));
            if px > 0.0 {
                support.push(code);
                if pi != t {
                    set_u.push(code);
                }
                if pi > t {
                    set_a.push(code);
                }
            }
        }
        Ok(ModelDiagnostics {
            space,
            support,
            set_a,
            set_u,
            l_weights,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn set_a(&self) -> &[u32] {
        &self.set_a
    }

    pub fn set_u(&self) -> &[u32] {
        &self.set_u
    }

    /// `L(x)` indexed by state code.
    pub fn l_weights(&self) -> &[f64] {
        &self.l_weights
    }

    /// Decodes a state code into a full-length factor vector (zeros elsewhere).
    pub fn state_vector(&self, code: u32, n: usize) -> Vec<u8> {
        let mut x = vec![0u8; n];
        self.space.fill(code, &mut x);
        x
    }
}

/// One fold's contribution to the consistency condition:
/// `sum_y sum_{x in X_y} y * 1{prediction(x) = -y} * L(x)` with
/// `X_y = (support \ U) ∩ {f = y}`.
///
/// States are those of `f.subset ∪ relevant` (see [`ModelDiagnostics::over`]);
/// `predictions` and `set_u` are indexed by that space's codes.
pub fn maincond_residual(
    model: &XorModel,
    psi: &PenaltySpec,
    predictions: &[Label],
    f: &Classifier,
    set_u: &[u32],
) -> Result<f64> {
    f.check_against(model.n())?;
    let diag = ModelDiagnostics::over(model, psi, f.subset())?;
    if predictions.len() != diag.space.size() as usize {
        return Err(invalid(format!(
            "expected {} predictions, got {}",
            diag.space.size(),
            predictions.len()
        )));
    }
    let mut x = vec![0u8; model.n()];
    let mut sum = 0.0;
    for &code in &diag.support {
        if set_u.contains(&code) {
            continue;
        }
        diag.space.fill(code, &mut x);
        let y = f.classify(&x);
        if predictions[code as usize] == y.opposite() {
            sum += f64::from(y.sign()) * diag.l_weights[code as usize];
        }
    }
    Ok(sum)
}
