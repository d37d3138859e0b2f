use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Failure, TmrReport, TmrRow};
use super::ExperimentConfig;
use crate::cost::{s_str, CostParams};
use crate::datagen::{draw_maf, LabelFirstSource, XorModel, XorSource};
use crate::error::{Error, Result};
use crate::estimator::{select_relevant, select_relevant_iid, IidPrevalence, IidSample, Selection};
use crate::rng::{derive_seed, SeededStream};
use crate::stratify::{build_stratified, estimate_prevalence};

/// The five compared ways of collecting and analyzing a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodVariant {
    /// i.i.d. sample of size `C`, prevalence estimated from the training folds.
    #[serde(rename = "iMDR-unknown-p")]
    IidUnknownP,
    /// i.i.d. sample of size `C`, true prevalence.
    #[serde(rename = "iMDR-known-p")]
    IidKnownP,
    /// Stratified sample of the planned size for a positive price ratio, true prevalence.
    #[serde(rename = "sMDR-planned-N-known-p")]
    StratPlannedKnownP,
    /// Stratified sample of size `C`, prevalence estimated from the raw draws.
    #[serde(rename = "sMDR-sizeC-estimated-p")]
    StratSizeCEstimatedP,
    /// Stratified sample of size `C`, true prevalence.
    #[serde(rename = "sMDR-sizeC-known-p")]
    StratSizeCKnownP,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 5] = [
        MethodVariant::IidUnknownP,
        MethodVariant::IidKnownP,
        MethodVariant::StratPlannedKnownP,
        MethodVariant::StratSizeCEstimatedP,
        MethodVariant::StratSizeCKnownP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::IidUnknownP => "iMDR-unknown-p",
            MethodVariant::IidKnownP => "iMDR-known-p",
            MethodVariant::StratPlannedKnownP => "sMDR-planned-N-known-p",
            MethodVariant::StratSizeCEstimatedP => "sMDR-sizeC-estimated-p",
            MethodVariant::StratSizeCKnownP => "sMDR-sizeC-known-p",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn is_stratified(self) -> bool {
        !matches!(self, MethodVariant::IidUnknownP | MethodVariant::IidKnownP)
    }

    pub fn known_prevalence(self) -> bool {
        !matches!(self, MethodVariant::IidUnknownP | MethodVariant::StratSizeCEstimatedP)
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One analyzed sample within a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub variant: MethodVariant,
    /// Price ratio the sample size was planned for (`0` for size-`C` samples).
    pub w: f64,
    /// Sample size, or `None` when no size fits the budget.
    pub size: Option<u64>,
}

/// A `(gamma, C)` combination and its arms, in report order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub gamma_index: usize,
    pub budget_index: usize,
    pub gamma: f64,
    pub budget: u64,
    /// True `P(Y = 1)` of the cell's model.
    pub prevalence: f64,
    pub arms: Vec<Arm>,
}

/// Outcome of one arm in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub hit: bool,
    /// Selected subset (0-based), if the analysis ran.
    pub selected: Option<Vec<usize>>,
    pub failure: Option<String>,
}

/// `true` iff `selected` is exactly the relevant set.
pub fn is_true_model(selected: &[usize], relevant: &[usize]) -> bool {
    let mut s = selected.to_vec();
    s.sort_unstable();
    s == relevant
}

/// Planned experiment: a validated configuration and its cells.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    relevant: Vec<usize>,
    cells: Vec<Cell>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let relevant = config.relevant_zero_based();
        let mut cells = Vec::new();
        for (gi, &gamma) in config.gamma_levels.iter().enumerate() {
            // the prevalence depends only on gamma and the relevant MAFs
            let model = XorModel::with_free_relevant_mafs(vec![config.relevant_maf; config.n], relevant.clone(), gamma)?;
            let p = model.case_prevalence();
            for (ci, &budget) in config.c_levels.iter().enumerate() {
                let arms = plan_arms(&config, budget, p)?;
                cells.push(Cell {
                    gamma_index: gi,
                    budget_index: ci,
                    gamma,
                    budget,
                    prevalence: p,
                    arms,
                });
            }
        }
        Ok(Experiment {
            config,
            relevant,
            cells,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Seed of replicate `d` of `cell`.
    pub fn replicate_seed(&self, cell: &Cell, d: usize) -> u64 {
        derive_seed(
            self.config.seed,
            &[cell.gamma_index as u64, cell.budget_index as u64, d as u64],
        )
    }

    /// Generates the replicate's data and runs every arm of `cell`.
    ///
    /// Factor MAFs come from substream `[0]` of the replicate seed and
    /// observations from substream `[1]`. The samples are drawn from that one
    /// stream in arm order: the i.i.d. sample first, then the planned
    /// stratified samples, then the size-`C` stratified sample.
    pub fn run_replicate(&self, cell: &Cell, d: usize) -> Result<Vec<ArmOutcome>> {
        let cfg = &self.config;
        let root = SeededStream::new(self.replicate_seed(cell, d));
        let mut maf_stream = root.substream(&[0]);
        let mafs = (0..cfg.n)
            .map(|i| {
                if self.relevant.contains(&i) {
                    cfg.relevant_maf
                } else {
                    draw_maf(&mut maf_stream)
                }
            })
            .collect();
        let model = XorModel::with_free_relevant_mafs(mafs, self.relevant.clone(), cell.gamma)?;
        let p = cell.prevalence;
        let mut source = XorSource::new(model, root.substream(&[1]));

        let iid = IidSample::new(
            (0..cell.budget)
                .map(|_| source.next_observation())
                .collect(),
        )?;
        let mut outcomes = Vec::with_capacity(cell.arms.len());
        let mut size_c = None;
        for arm in &cell.arms {
            let result: Result<Selection> = match arm.variant {
                MethodVariant::IidUnknownP => {
                    select_relevant_iid(&iid, cfg.k, cfg.r, IidPrevalence::TrainingFolds, cfg.psi)
                }
                MethodVariant::IidKnownP => {
                    select_relevant_iid(&iid, cfg.k, cfg.r, IidPrevalence::Known(p), cfg.psi)
                }
                MethodVariant::StratPlannedKnownP => match arm.size {
                    None => Err(Error::NoFeasibleSize { budget: cell.budget }),
                    Some(n) => build_stratified(&mut source, n as usize, cfg.a)
                        .and_then(|s| select_relevant(&s, cfg.k, cfg.r, p, cfg.psi)),
                },
                MethodVariant::StratSizeCEstimatedP | MethodVariant::StratSizeCKnownP => {
                    if size_c.is_none() {
                        size_c = Some(build_stratified(&mut source, cell.budget as usize, cfg.a));
                    }
                    match size_c.as_ref().expect("just built") {
                        Err(e) => Err(Error::InvalidParameter(e.to_string())),
                        Ok(s) => {
                            let p_used = if arm.variant == MethodVariant::StratSizeCKnownP {
                                p
                            } else {
                                estimate_prevalence(s).p_hat
                            };
                            select_relevant(s, cfg.k, cfg.r, p_used, cfg.psi)
                        }
                    }
                }
            };
            outcomes.push(match result {
                Ok(sel) => ArmOutcome {
                    hit: is_true_model(&sel.subset, &self.relevant),
                    selected: Some(sel.subset),
                    failure: None,
                },
                Err(e) => ArmOutcome {
                    hit: false,
                    selected: None,
                    failure: Some(e.to_string()),
                },
            });
        }
        Ok(outcomes)
    }

    /// Runs the `D` replicates of `cell` (in parallel) and aggregates them.
    pub fn run_cell(&self, cell: &Cell) -> Result<(Vec<TmrRow>, Vec<Failure>)> {
        let outcomes: Vec<Vec<ArmOutcome>> = (0..self.config.d)
            .into_par_iter()
            .map(|d| self.run_replicate(cell, d))
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(cell.arms.len());
        let mut failures = Vec::new();
        for (i, arm) in cell.arms.iter().enumerate() {
            let hits = outcomes.iter().filter(|o| o[i].hit).count();
            for (d, o) in outcomes.iter().enumerate() {
                if let Some(reason) = &o[i].failure {
                    failures.push(Failure {
                        variant: arm.variant,
                        gamma: cell.gamma,
                        budget: cell.budget,
                        w: arm.w,
                        replicate: d,
                        reason: reason.clone(),
                    });
                }
            }
            rows.push(TmrRow {
                variant: arm.variant,
                gamma: cell.gamma,
                budget: cell.budget,
                w: arm.w,
                known_p: arm.variant.known_prevalence(),
                n_used: arm.size.unwrap_or(0),
                tmr: hits as f64 / self.config.d as f64,
                d: self.config.d,
                seed: self.config.seed,
            });
        }
        Ok((rows, failures))
    }

    pub fn run(&self) -> Result<TmrReport> {
        let mut report = TmrReport::default();
        for cell in &self.cells {
            let (rows, failures) = self.run_cell(cell)?;
            report.rows.extend(rows);
            report.failures.extend(failures);
        }
        Ok(report)
    }
}

fn plan_arms(config: &ExperimentConfig, budget: u64, p: f64) -> Result<Vec<Arm>> {
    let mut arms = vec![
        Arm {
            variant: MethodVariant::IidUnknownP,
            w: 0.0,
            size: Some(budget),
        },
        Arm {
            variant: MethodVariant::IidKnownP,
            w: 0.0,
            size: Some(budget),
        },
    ];
    for &w in config.w_levels.iter().filter(|&&w| w > 0.0) {
        let params = CostParams::new(budget, w, config.a, config.alpha)?;
        let size = match s_str(&params, p) {
            Ok(n) if config.even_sizes_only => Some(n - n % 2).filter(|&n| n > 0),
            Ok(n) => Some(n),
            Err(Error::NoFeasibleSize { .. }) => None,
            Err(e) => return Err(e),
        };
        arms.push(Arm {
            variant: MethodVariant::StratPlannedKnownP,
            w,
            size,
        });
    }
    if config.w_levels.contains(&0.0) {
        for variant in [MethodVariant::StratSizeCEstimatedP, MethodVariant::StratSizeCKnownP] {
            arms.push(Arm {
                variant,
                w: 0.0,
                size: Some(budget),
            });
        }
    }
    Ok(arms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n: 5,
            k: 3,
            r: 2,
            relevant: vec![1, 4],
            gamma_levels: vec![0.4],
            c_levels: vec![60],
            d: 4,
            seed: 7,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn arms_follow_w_levels() {
        let exp = Experiment::new(tiny()).unwrap();
        let names: Vec<_> = exp.cells()[0].arms.iter().map(|a| a.variant).collect();
        assert_eq!(names, MethodVariant::ALL.to_vec());
        let mut cfg = tiny();
        cfg.w_levels = vec![0.1, 0.2];
        let exp = Experiment::new(cfg).unwrap();
        assert_eq!(exp.cells()[0].arms.len(), 4);
    }

    #[test]
    fn replicate_is_deterministic() {
        let exp = Experiment::new(tiny()).unwrap();
        let cell = &exp.cells()[0];
        let a = exp.run_replicate(cell, 2).unwrap();
        let b = exp.run_replicate(cell, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn wrong_truth_never_matches() {
        assert!(is_true_model(&[4, 1], &[1, 4]));
        assert!(!is_true_model(&[1, 4], &[1, 3]));
        assert!(!is_true_model(&[1], &[1, 4]));
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in MethodVariant::ALL {
            assert_eq!(MethodVariant::from_name(v.name()), Some(v));
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
    }
}
