//! Stratified samples: `N_1` cases and `N_-1` controls collected from an
//! i.i.d. stream by label-dependent acceptance.
//!
//! Labels are inspected first; the factor vector of a draw is only
//! materialized when the draw fills an open slot of its class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{LabelFirstSource, XorModel, XorSource};
use crate::error::{invalid, Error, Result};
use crate::model::class_conditional_law;
use crate::rng::SeededStream;
use crate::types::{projection_code, state_count, FactorVector, Label};

/// Default hard cap on raw draws per build.
pub const DEFAULT_DRAW_CAP: u64 = 1_000_000_000;

/// `(N_1, N_-1)` with `N_1 = max(floor(a N), 1)` and `N_-1 = N - N_1`.
pub fn class_sizes(n: usize, a: f64) -> Result<(usize, usize)> {
    if n < 2 {
        return Err(invalid(format!("stratified sample size {n} is below 2")));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("case ratio {a} is outside (0, 1)")));
    }
    let cases = ((a * n as f64).floor() as usize).clamp(1, n - 1);
    Ok((cases, n - cases))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSample {
    cases: Vec<FactorVector>,
    controls: Vec<FactorVector>,
    a: f64,
    n_tilde: u64,
    /// Label counts over the first `n_tilde` raw draws, indexed by [`Label::index`].
    y_counts: [u64; 2],
}

impl StratifiedSample {
    /// Assembles a sample from its parts, checking the bookkeeping invariants.
    pub fn from_parts(
        cases: Vec<FactorVector>,
        controls: Vec<FactorVector>,
        a: f64,
        n_tilde: u64,
        y_counts: [u64; 2],
    ) -> Result<Self> {
        if y_counts[0] + y_counts[1] != n_tilde {
            return Err(invalid("label counts do not add up to the draw count"));
        }
        if y_counts[Label::Case.index()] < cases.len() as u64
            || y_counts[Label::Control.index()] < controls.len() as u64
        {
            return Err(invalid("label counts are smaller than the accepted class sizes"));
        }
        let n = cases.first().or(controls.first()).map_or(0, |x| x.len());
        if cases.iter().chain(&controls).any(|x| x.len() != n) {
            return Err(invalid("factor vectors have different lengths"));
        }
        Ok(StratifiedSample {
            cases,
            controls,
            a,
            n_tilde,
            y_counts,
        })
    }

    /// A sample whose draws were all accepted (`n_tilde = N`).
    pub fn from_classes(cases: Vec<FactorVector>, controls: Vec<FactorVector>) -> Result<Self> {
        let (c1, c0) = (cases.len() as u64, controls.len() as u64);
        let n = c1 + c0;
        if n == 0 {
            return Err(invalid("sample is empty"));
        }
        Self::from_parts(cases, controls, c1 as f64 / n as f64, n, [c0, c1])
    }

    pub fn cases(&self) -> &[FactorVector] {
        &self.cases
    }

    pub fn controls(&self) -> &[FactorVector] {
        &self.controls
    }

    pub fn class(&self, label: Label) -> &[FactorVector] {
        match label {
            Label::Case => &self.cases,
            Label::Control => &self.controls,
        }
    }

    /// `N = N_1 + N_-1`.
    pub fn len(&self) -> usize {
        self.cases.len() + self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn factor_count(&self) -> usize {
        self.cases.first().or(self.controls.first()).map_or(0, |x| x.len())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Raw draws consumed, `max(j_1^{N_1}, j_-1^{N_-1})`.
    pub fn n_tilde(&self) -> u64 {
        self.n_tilde
    }

    pub fn y_counts(&self) -> [u64; 2] {
        self.y_counts
    }
}

/// Builds a stratified sample of size `n` with case ratio `a`, capped at
/// [`DEFAULT_DRAW_CAP`] raw draws.
pub fn build_stratified<S: LabelFirstSource + ?Sized>(
    source: &mut S,
    n: usize,
    a: f64,
) -> Result<StratifiedSample> {
    build_stratified_capped(source, n, a, DEFAULT_DRAW_CAP)
}

pub fn build_stratified_capped<S: LabelFirstSource + ?Sized>(
    source: &mut S,
    n: usize,
    a: f64,
    cap: u64,
) -> Result<StratifiedSample> {
    let (n1, n0) = class_sizes(n, a)?;
    let mut cases = Vec::with_capacity(n1);
    let mut controls = Vec::with_capacity(n0);
    let mut y_counts = [0u64; 2];
    let mut drawn = 0u64;
    while cases.len() < n1 || controls.len() < n0 {
        if drawn == cap {
            return Err(Error::DrawBudgetExceeded { cap });
        }
        let y = source.next_label();
        drawn += 1;
        y_counts[y.index()] += 1;
        let (bucket, quota) = match y {
            Label::Case => (&mut cases, n1),
            Label::Control => (&mut controls, n0),
        };
        if bucket.len() < quota {
            bucket.push(source.materialize());
        }
    }
    Ok(StratifiedSample {
        cases,
        controls,
        a,
        n_tilde: drawn,
        y_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrevalenceSource {
    Known,
    StreamFrequency,
    ExternalSample,
}

/// An estimate (or the true value) of `P(Y = 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub p_hat: f64,
    pub source: PrevalenceSource,
}

impl PrevalenceEstimate {
    pub fn known(p: f64) -> Result<Self> {
        Self::with_source(p, PrevalenceSource::Known)
    }

    /// A frequency taken from a separate sample.
    pub fn external(p_hat: f64) -> Result<Self> {
        Self::with_source(p_hat, PrevalenceSource::ExternalSample)
    }

    fn with_source(p_hat: f64, source: PrevalenceSource) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_hat) {
            return Err(invalid(format!("prevalence {p_hat} is outside [0, 1]")));
        }
        Ok(PrevalenceEstimate { p_hat, source })
    }
}

/// Case frequency among the raw draws that produced `sample`.
pub fn estimate_prevalence(sample: &StratifiedSample) -> PrevalenceEstimate {
    PrevalenceEstimate {
        p_hat: sample.y_counts[Label::Case.index()] as f64 / sample.n_tilde as f64,
        source: PrevalenceSource::StreamFrequency,
    }
}

const LAW_CHECK_MAX_FACTORS: usize = 4;

fn law_check_states(model: &XorModel) -> Result<(Vec<usize>, u32)> {
    if model.n() > LAW_CHECK_MAX_FACTORS {
        return Err(Error::StateSpaceTooLarge {
            coords: model.n(),
            limit: LAW_CHECK_MAX_FACTORS,
        });
    }
    let coords: Vec<usize> = (0..model.n()).collect();
    let states = state_count(coords.len()).expect("small state space");
    Ok((coords, states))
}

fn build_with_cases(model: &XorModel, stream: SeededStream, cases: usize) -> Result<StratifiedSample> {
    let mut source = XorSource::new(model.clone(), stream);
    // a = 1/2 and N = 2 * cases give exactly `cases` cases
    build_stratified(&mut source, 2 * cases, 0.5)
}

/// Total-variation distance between the empirical law of accepted case
/// vectors and the exact law of `X | Y = 1`. Runs `builds` independent
/// builds with `cases_per_build` cases each, on substreams of `seed`.
pub fn case_law_check(model: &XorModel, cases_per_build: usize, builds: usize, seed: u64) -> Result<f64> {
    let (coords, states) = law_check_states(model)?;
    let law = class_conditional_law(model, Label::Case, &coords)?;
    let root = SeededStream::new(seed);
    let counts = (0..builds as u64)
        .into_par_iter()
        .map(|b| -> Result<Vec<u64>> {
            let sample = build_with_cases(model, root.substream(&[b]), cases_per_build)?;
            let mut c = vec![0u64; states as usize];
            for x in sample.cases() {
                c[projection_code(x, &coords) as usize] += 1;
            }
            Ok(c)
        })
        .try_reduce(|| vec![0u64; states as usize], |a, b| Ok(add(a, b)))?;
    Ok(tv_distance(&counts, &law))
}

/// Total-variation distance between the empirical joint law of the first two
/// accepted cases of each build and the product of the exact case laws.
pub fn case_pair_law_check(model: &XorModel, builds: usize, seed: u64) -> Result<f64> {
    let (coords, states) = law_check_states(model)?;
    let law = class_conditional_law(model, Label::Case, &coords)?;
    let product: Vec<f64> = law.iter().flat_map(|&p| law.iter().map(move |&q| p * q)).collect();
    let cells = (states * states) as usize;
    let root = SeededStream::new(seed);
    let counts = (0..builds as u64)
        .into_par_iter()
        .map(|b| -> Result<Vec<u64>> {
            let sample = build_with_cases(model, root.substream(&[b]), 2)?;
            let first = projection_code(&sample.cases()[0], &coords);
            let second = projection_code(&sample.cases()[1], &coords);
            let mut c = vec![0u64; cells];
            c[(first * states + second) as usize] += 1;
            Ok(c)
        })
        .try_reduce(|| vec![0u64; cells], |a, b| Ok(add(a, b)))?;
    Ok(tv_distance(&counts, &product))
}

fn add(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// `0.5 * sum |count / total - law|`.
pub fn tv_distance(counts: &[u64], law: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 1.0;
    }
    0.5 * counts
        .iter()
        .zip(law)
        .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
}
