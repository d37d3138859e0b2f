//! Synthetic genotype/response law: independent SNPs in Hardy-Weinberg
//! proportions and a parity (XOR) response on a set of relevant SNPs.
//!
//! Factor indices are 0-based throughout the library; only the `relevant`
//! list of an experiment configuration file is 1-based.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::SeededStream;
use crate::types::{FactorVector, Label, Observation};

/// Lower end of the MAF range used for non-relevant factors.
pub const MAF_LOW: f64 = 0.05;
/// Upper end of the MAF range used for non-relevant factors.
pub const MAF_HIGH: f64 = 0.5;

fn check_maf(p: f64) -> Result<()> {
    if p > 0.0 && p <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidMaf(p))
    }
}

/// `P(X_i = v)` for a SNP with minor allele frequency `p`.
pub fn genotype_pmf(p: f64, v: u8) -> Result<f64> {
    check_maf(p)?;
    match v {
        0 => Ok((1.0 - p) * (1.0 - p)),
        1 => Ok(2.0 * p * (1.0 - p)),
        2 => Ok(p * p),
        _ => Err(invalid(format!("genotype value {v} is not in {{0, 1, 2}}"))),
    }
}

/// Inverse-CDF genotype draw from a uniform `u` in `[0, 1)`.
pub(crate) fn genotype_from_unit(p: f64, u: f64) -> u8 {
    let p0 = (1.0 - p) * (1.0 - p);
    if u < p0 {
        0
    } else if u < p0 + 2.0 * p * (1.0 - p) {
        1
    } else {
        2
    }
}

/// Uniform MAF on `[0.05, 0.5]`; one draw.
pub fn draw_maf(stream: &mut SeededStream) -> f64 {
    MAF_LOW + (MAF_HIGH - MAF_LOW) * stream.next_unit()
}

/// Joint law of `(X, Y)`: independent genotypes with per-factor MAFs and
/// `P(Y = 1 | X = x) = gamma` iff the relevant coordinates sum to an odd
/// number, `0` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XorModel {
    mafs: Vec<f64>,
    relevant: Vec<usize>,
    gamma: f64,
}

impl XorModel {
    /// Strict model: every relevant factor must have MAF exactly 0.5.
    pub fn new(mafs: Vec<f64>, relevant: Vec<usize>, gamma: f64) -> Result<Self> {
        let model = Self::with_free_relevant_mafs(mafs, relevant, gamma)?;
        if let Some(&k) = model.relevant.iter().find(|&&k| model.mafs[k] != 0.5) {
            return Err(invalid(format!(
                "relevant factor {k} has MAF {} but the XOR model requires 0.5",
                model.mafs[k]
            )));
        }
        Ok(model)
    }

    /// Like [`XorModel::new`] but allows any MAF in `(0, 0.5]` on relevant
    /// factors. The prevalence is then no longer `gamma / 2`.
    pub fn with_free_relevant_mafs(mafs: Vec<f64>, relevant: Vec<usize>, gamma: f64) -> Result<Self> {
        let n = mafs.len();
        if n == 0 {
            return Err(invalid("model needs at least one factor"));
        }
        for &p in &mafs {
            check_maf(p)?;
        }
        if relevant.is_empty() {
            return Err(invalid("relevant set must be non-empty"));
        }
        if relevant.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("relevant indices must be sorted and duplicate-free"));
        }
        if let Some(&k) = relevant.iter().find(|&&k| k >= n) {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        // gamma = 1 gives a deterministic parity response and is kept for sanity runs
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(invalid(format!("gamma = {gamma} is outside (0, 1]")));
        }
        Ok(XorModel { mafs, relevant, gamma })
    }

    /// All MAFs set to 0.5.
    pub fn uniform(n: usize, relevant: Vec<usize>, gamma: f64) -> Result<Self> {
        Self::new(vec![0.5; n], relevant, gamma)
    }

    pub fn n(&self) -> usize {
        self.mafs.len()
    }

    pub fn mafs(&self) -> &[f64] {
        &self.mafs
    }

    pub fn relevant(&self) -> &[usize] {
        &self.relevant
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn parity_odd(&self, x: &[u8]) -> bool {
        self.relevant.iter().map(|&k| u32::from(x[k])).sum::<u32>() % 2 == 1
    }

    /// `P(Y = 1 | X = x)`: `gamma` on odd relevant parity, else `0`.
    pub fn response_prob(&self, x: &[u8]) -> f64 {
        if self.parity_odd(x) {
            self.gamma
        } else {
            0.0
        }
    }

    /// Exact `P(Y = 1)`. Each relevant SNP is odd with probability
    /// `q = 2p(1-p)`, so the parity is odd with probability
    /// `(1 - prod(1 - 2q)) / 2`; with all relevant MAFs at 0.5 this is `gamma / 2`.
    pub fn case_prevalence(&self) -> f64 {
        let prod: f64 = self
            .relevant
            .iter()
            .map(|&k| {
                let p = self.mafs[k];
                1.0 - 4.0 * p * (1.0 - p)
            })
            .product();
        self.gamma * (1.0 - prod) / 2.0
    }

    /// Raw 64-bit draws consumed by one observation: one for the
    /// Bernoulli gate, then one per factor in index order.
    pub fn draws_per_observation(&self) -> u64 {
        self.mafs.len() as u64 + 1
    }

    /// Draws one full observation; consumes exactly
    /// [`draws_per_observation`](Self::draws_per_observation) draws.
    pub fn sample_observation(&self, stream: &mut SeededStream) -> Observation {
        let gate = stream.next_unit() < self.gamma;
        let x: Vec<u8> = self
            .mafs
            .iter()
            .map(|&p| genotype_from_unit(p, stream.next_unit()))
            .collect();
        let y = if gate && self.parity_odd(&x) {
            Label::Case
        } else {
            Label::Control
        };
        Observation {
            x: FactorVector::from_trusted(x),
            y,
        }
    }
}

/// An i.i.d. observation stream that can reveal `Y` before `X`.
///
/// `materialize` returns the factor vector of the observation whose label
/// was drawn last; observations that are never materialized cost no
/// genotype measurement.
pub trait LabelFirstSource {
    fn factor_count(&self) -> usize;

    fn next_label(&mut self) -> Label;

    fn materialize(&mut self) -> FactorVector;

    fn next_observation(&mut self) -> Observation {
        let y = self.next_label();
        Observation {
            x: self.materialize(),
            y,
        }
    }
}

/// [`LabelFirstSource`] over an [`XorModel`]. Observation `j` occupies draws
/// `j * (n + 1) .. (j + 1) * (n + 1)` of the stream, so lazy and eager
/// draws produce identical observations.
#[derive(Debug, Clone)]
pub struct XorSource {
    model: XorModel,
    stream: SeededStream,
    origin: u64,
    block: u64,
    // draws needed to evaluate the label: gate + factors up to the last relevant one
    label_span: u64,
}

impl XorSource {
    pub fn new(model: XorModel, stream: SeededStream) -> Self {
        let label_span = model.relevant.last().map_or(1, |&k| k as u64 + 2);
        let origin = stream.counter();
        XorSource {
            model,
            stream,
            origin,
            block: origin,
            label_span,
        }
    }

    pub fn model(&self) -> &XorModel {
        &self.model
    }

    /// Number of observations started so far.
    pub fn observations_drawn(&self) -> u64 {
        (self.stream.counter() - self.origin) / self.model.draws_per_observation()
    }

    pub fn stream(&self) -> &SeededStream {
        &self.stream
    }
}

impl LabelFirstSource for XorSource {
    fn factor_count(&self) -> usize {
        self.model.n()
    }

    fn next_label(&mut self) -> Label {
        let per = self.model.draws_per_observation();
        self.block = self.stream.counter();
        let gate = self.stream.next_unit() < self.model.gamma;
        let mut parity = 0u32;
        let mut next_rel = 0;
        for i in 0..(self.label_span - 1) as usize {
            let u = self.stream.next_unit();
            if self.model.relevant.get(next_rel) == Some(&i) {
                parity += u32::from(genotype_from_unit(self.model.mafs[i], u));
                next_rel += 1;
            }
        }
        if self.label_span < per {
            self.stream.seek(self.block + per);
        }
        if gate && parity % 2 == 1 {
            Label::Case
        } else {
            Label::Control
        }
    }

    fn materialize(&mut self) -> FactorVector {
        let end = self.stream.counter();
        self.stream.seek(self.block + 1);
        let x = self
            .model
            .mafs
            .iter()
            .map(|&p| genotype_from_unit(p, self.stream.next_unit()))
            .collect();
        debug_assert_eq!(self.stream.counter(), end);
        FactorVector::from_trusted(x)
    }
}

/// Label-only stream with `P(Y = 1) = p` and no factors; one draw per
/// observation. Used for cost simulations where only `Y` matters.
#[derive(Debug, Clone)]
pub struct BernoulliLabels {
    p: f64,
    stream: SeededStream,
}

impl BernoulliLabels {
    pub fn new(p: f64, stream: SeededStream) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("case probability {p} is outside (0, 1)")));
        }
        Ok(BernoulliLabels { p, stream })
    }
}

impl LabelFirstSource for BernoulliLabels {
    fn factor_count(&self) -> usize {
        0
    }

    fn next_label(&mut self) -> Label {
        if self.stream.next_unit() < self.p {
            Label::Case
        } else {
            Label::Control
        }
    }

    fn materialize(&mut self) -> FactorVector {
        FactorVector::default()
    }
}

/// Writes observations as CSV with columns `x_1..x_n,y` (`y` in `{-1, 1}`).
pub fn write_dataset_csv<W: Write>(mut out: W, observations: &[Observation]) -> Result<()> {
    let n = observations.first().map_or(0, |o| o.x.len());
    let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    header.push("y".into());
    writeln!(out, "{}", header.join(","))?;
    for o in observations {
        if o.x.len() != n {
            return Err(invalid("observations have different factor counts"));
        }
        let mut line = String::with_capacity(2 * n + 3);
        for v in o.x.iter() {
            line.push(char::from(b'0' + v));
            line.push(',');
        }
        line.push_str(&o.y.sign().to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}
