use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::PsiMode;

/// Parameters of the method comparison. Factor indices in `relevant` are
/// 1-based; the library converts them with [`Self::relevant_zero_based`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub r: usize,
    pub relevant: Vec<usize>,
    pub a: f64,
    pub gamma_levels: Vec<f64>,
    #[serde(rename = "C_levels", alias = "c_levels")]
    pub c_levels: Vec<u64>,
    pub w_levels: Vec<f64>,
    pub alpha: f64,
    #[serde(rename = "D", alias = "d")]
    pub d: usize,
    pub seed: u64,
    pub psi: PsiMode,
    /// MAF of the relevant factors. The XOR law needs 0.5; other values
    /// exercise the estimator off-model.
    pub relevant_maf: f64,
    /// Restrict planned stratified sizes to even numbers.
    pub even_sizes_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::table1()
    }
}

impl ExperimentConfig {
    /// The full 100-factor grid: 15 cells of 100 replicates each.
    pub fn table1() -> Self {
        ExperimentConfig {
            n: 100,
            k: 5,
            r: 3,
            relevant: vec![2, 3, 5],
            a: 0.5,
            gamma_levels: vec![0.05, 0.1, 0.2],
            c_levels: vec![100, 200, 300, 400, 500],
            w_levels: vec![0.0, 0.1],
            alpha: 0.05,
            d: 100,
            seed: 20_170_101,
            psi: PsiMode::Natural,
            relevant_maf: 0.5,
            even_sizes_only: false,
        }
    }

    /// A desk-scale grid that runs in minutes.
    pub fn desk() -> Self {
        ExperimentConfig {
            n: 20,
            r: 2,
            relevant: vec![2, 5],
            gamma_levels: vec![0.1, 0.2, 0.4],
            c_levels: vec![100, 200, 300],
            d: 50,
            ..Self::table1()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "table1" => Some(Self::table1()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// 0-based relevant indices.
    pub fn relevant_zero_based(&self) -> Vec<usize> {
        self.relevant.iter().map(|&k| k - 1).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.r == 0 || self.r >= self.n {
            return bad(format!("r = {} must satisfy 1 <= r < n = {}", self.r, self.n));
        }
        if self.relevant.len() != self.r {
            return bad(format!("relevant has {} entries but r = {}", self.relevant.len(), self.r));
        }
        if self.relevant.windows(2).any(|w| w[0] >= w[1]) {
            return bad("relevant indices must be strictly increasing".into());
        }
        if self.relevant.iter().any(|&k| k == 0 || k > self.n) {
            return bad(format!("relevant indices must lie in 1..={}", self.n));
        }
        if self.k < 2 {
            return bad(format!("K = {} must be at least 2", self.k));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad(format!("a = {} is outside (0, 1)", self.a));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} is outside (0, 1)", self.alpha));
        }
        if self.d == 0 {
            return bad("D must be positive".into());
        }
        if self.gamma_levels.is_empty() || self.c_levels.is_empty() || self.w_levels.is_empty() {
            return bad("gamma_levels, C_levels and w_levels must be non-empty".into());
        }
        if let Some(g) = self.gamma_levels.iter().find(|&&g| !(g > 0.0 && g <= 1.0)) {
            return bad(format!("gamma level {g} is outside (0, 1]"));
        }
        if let Some(c) = self.c_levels.iter().find(|&&c| (c as usize) < self.k) {
            return bad(format!("budget {c} is smaller than K = {}", self.k));
        }
        if let Some(w) = self.w_levels.iter().find(|&&w| !(w >= 0.0 && w.is_finite())) {
            return bad(format!("price ratio {w} must be finite and nonnegative"));
        }
        if !(self.relevant_maf > 0.0 && self.relevant_maf <= 0.5) {
            return bad(format!("relevant_maf = {} is outside (0, 0.5]", self.relevant_maf));
        }
        self.psi
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}
