//! Executable statistical checks of the sampling laws, the planner and the
//! estimator. Each check reports the measured statistic next to its tolerance.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{feasibility_probability, lambda0, s_str, simulate_n_tilde, CostParams, NTildeLaw};
use crate::datagen::{LabelFirstSource, XorModel, XorSource};
use crate::error::Result;
use crate::estimator::{err_hat_k, partition_folds, train_rule, PsiMode};
use crate::harness::{Experiment, ExperimentConfig, TmrReport};
use crate::model::{error_exact, optimal_restricted_classifier, PenaltySpec};
use crate::rng::{derive_seed, SeededStream};
use crate::stratify::{build_stratified, case_law_check, StratifiedSample};
use crate::types::{FactorVector, Label};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult { name, passed, detail }
    }
}

/// `lambda0(0.5, 0.1, gamma / 2)` for `gamma` in `{0.05, 0.1, 0.2}`.
pub fn lambda0_golden() -> [f64; 3] {
    [0.05, 0.1, 0.2].map(|g| lambda0(0.5, 0.1, g / 2.0))
}

/// Budgets on the 27-point `(C, alpha, p)` grid where a free-draw plan is not `C`.
pub fn free_draw_plan_mismatches() -> Result<Vec<(u64, f64, f64)>> {
    let mut bad = Vec::new();
    for c in [10u64, 137, 1000] {
        for alpha in [0.01, 0.05, 0.5] {
            for p in [0.025, 0.1, 0.5] {
                if s_str(&CostParams::new(c, 0.0, 0.5, alpha)?, p)? != c {
                    bad.push((c, alpha, p));
                }
            }
        }
    }
    Ok(bad)
}

/// Largest gap between the exact and simulated laws of the raw draw count,
/// and the total mass of the exact law over the simulated support's range.
pub fn n_tilde_law_gap(cases: u64, controls: u64, p: f64, builds: usize, seed: u64) -> Result<(f64, f64)> {
    let law = NTildeLaw::new(cases, controls, p)?;
    let n = cases + controls;
    let a = cases as f64 / n as f64;
    let draws = simulate_n_tilde(p, n, a, builds, seed)?;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for d in draws {
        *counts.entry(d).or_insert(0) += 1;
    }
    let top = counts.keys().next_back().copied().unwrap_or(n).max(n + 200);
    let mut sup: f64 = 0.0;
    let mut mass = 0.0;
    for m in n..=top {
        let exact = law.pmf(m);
        mass += exact;
        let empirical = counts.get(&m).copied().unwrap_or(0) as f64 / builds as f64;
        sup = sup.max((exact - empirical).abs());
    }
    Ok((sup, mass))
}

/// Total-variation distance of accepted case vectors from the exact case law
/// for `n = 2`, one relevant factor, `gamma = 0.5`, MAFs `0.5`.
pub fn case_law_distance(cases: usize, seed: u64) -> Result<f64> {
    let model = XorModel::uniform(2, vec![0], 0.5)?;
    let builds = 100;
    case_law_check(&model, cases / builds, builds, seed)
}

/// Case frequency among `draws` raw XOR observations at `gamma`, and its
/// target `gamma / 2`.
pub fn case_frequency(gamma: f64, draws: usize, seed: u64) -> Result<(f64, f64)> {
    let model = XorModel::uniform(4, vec![0, 1], gamma)?;
    let target = model.case_prevalence();
    let root = SeededStream::new(seed);
    let chunks = 64usize;
    let cases: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut source = XorSource::new(model.clone(), root.substream(&[c as u64]));
            let len = draws / chunks + usize::from(c < draws % chunks);
            (0..len).filter(|_| source.next_label() == Label::Case).count()
        })
        .sum();
    Ok((cases as f64 / draws as f64, target))
}

/// Disagreements between the fast error counts and per-fold trained rules,
/// over `samples` random small stratified samples.
pub fn estimator_disagreements(samples: usize, seed: u64) -> Result<usize> {
    let root = SeededStream::new(seed);
    let mut bad = 0;
    for s in 0..samples as u64 {
        let mut stream = root.substream(&[s]);
        let n = 1 + (stream.next_u64() % 4) as usize;
        let k = 2 + (stream.next_u64() % 2) as usize;
        let size = 2 * k + (stream.next_u64() % (25 - 2 * k as u64)) as usize;
        let cases = k + (stream.next_u64() % (size - 2 * k + 1) as u64) as usize;
        let mut draw = |len| -> Vec<FactorVector> {
            (0..len)
                .map(|_| FactorVector::new((0..n).map(|_| (stream.next_u64() % 3) as u8).collect()).expect("ternary"))
                .collect()
        };
        let case_x = draw(cases);
        let control_x = draw(size - cases);
        let sample = StratifiedSample::from_classes(case_x, control_x)?;
        let subset: Vec<usize> = (0..n).filter(|i| i % 2 == 0 || n == 1).collect();
        let p_hat = [0.1, 0.5, 0.7][s as usize % 3];
        let psi = if s % 2 == 0 {
            PsiMode::Natural
        } else {
            PsiMode::Fixed {
                psi_minus: 1.0,
                psi_plus: 3.0,
            }
        };
        let fast = err_hat_k(&sample, k, &subset, p_hat, psi)?;
        let partition = partition_folds(&sample, k)?;
        for fold in 0..k {
            let rule = train_rule(&sample, &partition, fold, &subset, p_hat, psi)?;
            for label in Label::BOTH {
                let class = sample.class(label);
                let wrong = partition
                    .block(label, fold)
                    .filter(|&i| rule.predict(&class[i]) != label)
                    .count() as u64;
                if wrong != fast.errors[fold][label.index()] {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}

/// `|Err_K - Err(optimal rule)|` on the relevant pair for `seeds` stratified
/// samples (`gamma = 0.2`, `N = 2000`, `a = 0.5`, `K = 5`, `n = 6`), and the
/// exact error.
pub fn consistency_deviations(seeds: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let relevant = vec![0, 1];
    let model = XorModel::uniform(6, relevant.clone(), 0.2)?;
    let p = model.case_prevalence();
    let penalty = PenaltySpec::natural(&model);
    let best = optimal_restricted_classifier(&model, &penalty, &relevant)?;
    let exact = error_exact(&model, &best, &penalty)?;
    let root = SeededStream::new(seed);
    let deviations = (0..seeds as u64)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let mut source = XorSource::new(model.clone(), root.substream(&[s]));
            let sample = build_stratified(&mut source, 2000, 0.5)?;
            let est = err_hat_k(&sample, 5, &relevant, p, PsiMode::Natural)?;
            Ok((est.value - exact).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((deviations, exact))
}

/// Inversion and dominance counts of a method-comparison report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    /// Most decreases along any single TMR-versus-budget curve.
    pub max_inversions: usize,
    /// Cells where the best stratified TMR is at least the best i.i.d. TMR.
    pub stratified_wins: usize,
    pub cells: usize,
}

pub fn trend_summary(report: &TmrReport) -> TrendSummary {
    let mut curves: BTreeMap<(String, u64, u64), Vec<(u64, f64)>> = BTreeMap::new();
    let mut cells: BTreeMap<(u64, u64), [f64; 2]> = BTreeMap::new();
    for row in &report.rows {
        curves
            .entry((row.variant.name().to_string(), row.gamma.to_bits(), row.w.to_bits()))
            .or_default()
            .push((row.budget, row.tmr));
        let best = cells.entry((row.gamma.to_bits(), row.budget)).or_insert([f64::MIN; 2]);
        let slot = usize::from(row.variant.is_stratified());
        best[slot] = best[slot].max(row.tmr);
    }
    let max_inversions = curves
        .values_mut()
        .map(|c| {
            c.sort_by_key(|&(budget, _)| budget);
            c.windows(2).filter(|w| w[1].1 < w[0].1).count()
        })
        .max()
        .unwrap_or(0);
    TrendSummary {
        max_inversions,
        stratified_wins: cells.values().filter(|b| b[1] >= b[0]).count(),
        cells: cells.len(),
    }
}

/// Feasibility probabilities at `0.9 lambda0` and `1.1 lambda0` for
/// `C = 5000`, `p = 0.1`, `a = 0.5`, `w = 0.1`.
pub fn feasibility_around_boundary(trials: usize, seed: u64) -> Result<(f64, f64)> {
    let params = CostParams::new(5000, 0.1, 0.5, 0.05)?;
    let l0 = lambda0(0.5, 0.1, 0.1);
    let below = feasibility_probability(&params, 0.1, 0.9 * l0, trials, seed)?;
    let above = feasibility_probability(&params, 0.1, 1.1 * l0, trials, derive_seed(seed, &[1]))?;
    Ok((below, above))
}

/// A small experiment run twice; `true` iff both CSV outputs are identical.
pub fn small_run_is_deterministic() -> Result<bool> {
    let config = ExperimentConfig {
        n: 6,
        r: 2,
        relevant: vec![1, 4],
        gamma_levels: vec![0.4],
        c_levels: vec![60, 90],
        d: 6,
        ..ExperimentConfig::desk()
    };
    let a = Experiment::new(config.clone())?.run()?.to_csv_string();
    let b = Experiment::new(config)?.run()?.to_csv_string();
    Ok(a == b)
}

/// Runs every check. The desk-scale method comparison takes minutes and only
/// runs with `include_trend`.
pub fn run_checks(include_trend: bool) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    let golden = lambda0_golden();
    let want = [11.0 / 30.0, 11.0 / 20.0, 11.0 / 15.0];
    let gap = golden.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    out.push(CheckResult::new(
        "lambda0-golden",
        gap < 1e-12,
        format!("values {golden:?}, max error {gap:.2e} (tol 1e-12)"),
    ));

    let bad = free_draw_plan_mismatches()?;
    out.push(CheckResult::new(
        "free-draw-plan",
        bad.is_empty(),
        format!("{} of 27 grid points differ from C", bad.len()),
    ));

    let (sup, mass) = n_tilde_law_gap(3, 3, 0.5, 100_000, 11)?;
    out.push(CheckResult::new(
        "draw-count-law",
        sup < 0.01 && (mass - 1.0).abs() < 1e-10,
        format!("sup gap {sup:.4} (tol 0.01), mass {mass:.12} (tol 1e-10)"),
    ));

    let tv = case_law_distance(100_000, 12)?;
    out.push(CheckResult::new("case-law", tv < 0.02, format!("TV {tv:.4} (tol 0.02)")));

    for gamma in [0.1, 0.4] {
        let draws = 100_000;
        let (freq, p) = case_frequency(gamma, draws, 13)?;
        let tol = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        out.push(CheckResult::new(
            "prevalence",
            (freq - p).abs() < tol,
            format!("gamma {gamma}: frequency {freq:.5} vs {p} (tol {tol:.5})"),
        ));
    }

    let bad = estimator_disagreements(100, 14)?;
    out.push(CheckResult::new(
        "estimator-counts",
        bad == 0,
        format!("{bad} fold/class error counts differ from trained rules"),
    ));

    let (dev, exact) = consistency_deviations(50, 15)?;
    let close = dev.iter().filter(|&&d| d < 0.05).count();
    out.push(CheckResult::new(
        "consistency",
        close * 10 >= dev.len() * 9,
        format!("{close}/{} estimates within 0.05 of {exact:.6}", dev.len()),
    ));

    if include_trend {
        let report = Experiment::new(ExperimentConfig::desk())?.run()?;
        let t = trend_summary(&report);
        out.push(CheckResult::new(
            "desk-trend",
            t.max_inversions <= 1 && t.stratified_wins >= 6,
            format!(
                "max inversions per curve {} (tol 1), stratified best in {}/{} cells (need 6)",
                t.max_inversions, t.stratified_wins, t.cells
            ),
        ));
    }

    let (lo, hi) = feasibility_around_boundary(10_000, 16)?;
    out.push(CheckResult::new(
        "feasibility-boundary",
        lo > 0.95 && hi < 0.05,
        format!("P(fit) {lo:.4} at 0.9 lambda0 (need > 0.95), {hi:.4} at 1.1 lambda0 (need < 0.05)"),
    ));

    let same = small_run_is_deterministic()?;
    out.push(CheckResult::new(
        "determinism",
        same,
        format!("repeated run output {}", if same { "identical" } else { "differs" }),
    ));
    Ok(out)
}
