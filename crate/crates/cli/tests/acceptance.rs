//! Acceptance suite: one line per criterion, tolerances pinned below.
//! Exits non-zero if any criterion fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::process::Command;
use std::time::Instant;

use mdr_core::cost::feasibility_probability;
use mdr_core::datagen::genotype_pmf;
use mdr_core::harness::Experiment;
use mdr_core::model::{error_exact, optimal_restricted_classifier};
use mdr_core::types::projection_code;
use mdr_core::{
    build_stratified, err_hat_k, lambda0, s_str, CostParams, ExperimentConfig, FactorVector, Label,
    LabelFirstSource, MethodVariant, NTildeLaw, PenaltySpec, PsiMode, SeededStream, StratifiedSample, XorModel,
    XorSource,
};
use oracle::{OraclePsi, OracleSample};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const LAMBDA0_TOL: f64 = 1e-12;
const LAW_SUP_TOL: f64 = 0.01;
const MASS_TOL: f64 = 1e-10;
const TV_TOL: f64 = 0.02;
const PREVALENCE_SIGMAS: f64 = 3.0;
const CONSISTENCY_TOL: f64 = 0.05;
const CONSISTENCY_SHARE: f64 = 0.9;
const MAX_INVERSIONS: usize = 1;
const MIN_STRATIFIED_WINS: usize = 6;
const FEASIBLE_ABOVE: f64 = 0.95;
const INFEASIBLE_BELOW: f64 = 0.05;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn lambda0_golden() -> Outcome {
    let want = [(0.05, 11.0 / 30.0), (0.1, 11.0 / 20.0), (0.2, 11.0 / 15.0)];
    let mut worst: f64 = 0.0;
    let mut got = Vec::new();
    for (gamma, target) in want {
        let v = lambda0(0.5, 0.1, gamma / 2.0);
        worst = worst.max((v - target).abs());
        got.push(format!("{v:.6}"));
    }
    outcome(
        worst < LAMBDA0_TOL,
        format!("[{}], max error {worst:.1e} (tol {LAMBDA0_TOL:.0e})", got.join(", ")),
    )
}

fn free_draw_plan() -> Outcome {
    let mut bad = Vec::new();
    for c in [7u64, 250, 5000] {
        for alpha in [0.01, 0.05, 0.3] {
            for p in [0.025, 0.2, 0.5] {
                let params = CostParams::new(c, 0.0, 0.5, alpha).unwrap();
                let got = s_str(&params, p).unwrap();
                if got != c {
                    bad.push(format!("C={c} alpha={alpha} p={p} -> {got}"));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("27 grid points, {} mismatches {bad:?}", bad.len()))
}

fn draw_count_law() -> Outcome {
    // gamma = 1 on one relevant factor gives P(Y = 1) = 1/2
    let model = XorModel::uniform(2, vec![0], 1.0).unwrap();
    assert_eq!(model.case_prevalence(), 0.5);
    let builds = 100_000u64;
    let root = SeededStream::new(0xacce_0002);
    let mut counts = vec![0u64; 80];
    for b in 0..builds {
        let mut source = XorSource::new(model.clone(), root.substream(&[b]));
        let s = build_stratified(&mut source, 6, 0.5).unwrap();
        assert_eq!((s.cases().len(), s.controls().len()), (3, 3));
        let m = s.n_tilde() as usize;
        if m < counts.len() {
            counts[m] += 1;
        }
    }
    let law = NTildeLaw::new(3, 3, 0.5).unwrap();
    // the m-th draw completes one class after exactly 2 of the other kind: 2 C(m-1, 2) / 2^m
    let direct = |m: u64| if m < 6 { 0.0 } else { ((m - 1) * (m - 2)) as f64 / 2f64.powi(m as i32) };
    let mut sup: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    let mut mass = 0.0;
    for m in 0..200u64 {
        let pm = law.pmf(m);
        mass += pm;
        oracle_gap = oracle_gap.max((pm - direct(m)).abs() / direct(m).max(f64::MIN_POSITIVE));
        let empirical = counts.get(m as usize).map_or(0.0, |&c| c as f64 / builds as f64);
        sup = sup.max((pm - empirical).abs());
    }
    outcome(
        sup < LAW_SUP_TOL && (mass - 1.0).abs() < MASS_TOL && oracle_gap < 1e-12,
        format!(
            "sup |pmf - empirical| {sup:.4} (tol {LAW_SUP_TOL}), |sum pmf - 1| {:.1e} (tol {MASS_TOL:.0e}), \
             closed-form relative gap {oracle_gap:.1e} (tol 1e-12)",
            (mass - 1.0).abs()
        ),
    )
}

fn case_law() -> Outcome {
    let gamma = 0.5;
    let model = XorModel::uniform(2, vec![0], gamma).unwrap();
    // Bayes over the 9 states: P(x | Y = 1) = P(x) P(Y = 1 | x) / P(Y = 1)
    let mut law = vec![0.0; 9];
    for code in 0..9u32 {
        let x = [(code % 3) as u8, (code / 3) as u8];
        let px = genotype_pmf(0.5, x[0]).unwrap() * genotype_pmf(0.5, x[1]).unwrap();
        law[code as usize] = px * if x[0] % 2 == 1 { gamma } else { 0.0 };
    }
    let z: f64 = law.iter().sum();
    law.iter_mut().for_each(|v| *v /= z);

    let (builds, per_build) = (100u64, 1000usize);
    let root = SeededStream::new(0xacce_0001);
    let mut counts = [0u64; 9];
    for b in 0..builds {
        let mut source = XorSource::new(model.clone(), root.substream(&[b]));
        let s = build_stratified(&mut source, 2 * per_build, 0.5).unwrap();
        for x in s.cases() {
            counts[projection_code(x, &[0, 1]) as usize] += 1;
        }
    }
    let total = counts.iter().sum::<u64>() as f64;
    let tv = 0.5 * counts.iter().zip(&law).map(|(&c, &p)| (c as f64 / total - p).abs()).sum::<f64>();
    outcome(tv < TV_TOL, format!("{total} cases, TV {tv:.4} (tol {TV_TOL})"))
}

fn prevalence() -> Outcome {
    let draws = 100_000u64;
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, gamma) in [0.1, 0.4].into_iter().enumerate() {
        let model = XorModel::uniform(5, vec![1, 2, 4], gamma).unwrap();
        let mut source = XorSource::new(model, SeededStream::new(0xacce_0003 + i as u64));
        let cases = (0..draws).filter(|_| source.next_label() == Label::Case).count();
        let p = gamma / 2.0;
        let freq = cases as f64 / draws as f64;
        let tol = PREVALENCE_SIGMAS * (p * (1.0 - p) / draws as f64).sqrt();
        ok &= (freq - p).abs() < tol;
        parts.push(format!("gamma {gamma}: {freq:.5} vs {p} (tol {tol:.5})"));
    }
    outcome(ok, parts.join("; "))
}

fn estimator_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xacce_0004);
    let mut mismatches = 0;
    let mut compared = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=4usize);
        let k = rng.random_range(2..=3usize);
        let size = rng.random_range(2 * k..=24);
        let cases = rng.random_range(k..=size - k);
        let mut rows = |len: usize| -> Vec<Vec<u8>> {
            (0..len).map(|_| (0..n).map(|_| rng.random_range(0..3u8)).collect()).collect()
        };
        let case_x = rows(cases);
        let control_x = rows(size - cases);
        let sample = StratifiedSample::from_classes(
            case_x.iter().map(|v| FactorVector::new(v.clone()).unwrap()).collect(),
            control_x.iter().map(|v| FactorVector::new(v.clone()).unwrap()).collect(),
        )
        .unwrap();
        let reference = OracleSample {
            classes: [control_x, case_x],
        };
        let p = [0.5, 0.1, 0.9, rng.random::<f64>()][i % 4];
        let (psi, opsi) = if i % 3 == 2 {
            let (m, q) = (rng.random_range(0.2..4.0), rng.random_range(0.2..4.0));
            (
                PsiMode::Fixed {
                    psi_minus: m,
                    psi_plus: q,
                },
                OraclePsi::Fixed(m, q),
            )
        } else {
            (PsiMode::Natural, OraclePsi::Natural)
        };
        for mask in 1u32..(1 << n) {
            let subset: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).collect();
            let got = err_hat_k(&sample, k, &subset, p, psi).unwrap().value;
            let want = oracle::err_est(&reference, k, &subset, p, opsi);
            compared += 1;
            if got.to_bits() != want.to_bits() {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("100 samples, {compared} subsets, {mismatches} not bit-identical"),
    )
}

fn consistency() -> Outcome {
    let relevant = vec![0, 1];
    let model = XorModel::uniform(6, relevant.clone(), 0.2).unwrap();
    let penalty = PenaltySpec::natural(&model);
    let best = optimal_restricted_classifier(&model, &penalty, &relevant).unwrap();
    let exact = error_exact(&model, &best, &penalty).unwrap();
    let p = model.case_prevalence();
    let seeds = 50u64;
    let root = SeededStream::new(0xacce_0005);
    let mut close = 0;
    let mut worst: f64 = 0.0;
    for s in 0..seeds {
        let mut source = XorSource::new(model.clone(), root.substream(&[s]));
        let sample = build_stratified(&mut source, 2000, 0.5).unwrap();
        let est = err_hat_k(&sample, 5, &relevant, p, PsiMode::Natural).unwrap().value;
        let dev = (est - exact).abs();
        worst = worst.max(dev);
        if dev < CONSISTENCY_TOL {
            close += 1;
        }
    }
    let share = close as f64 / seeds as f64;
    outcome(
        (exact - 8.0 / 9.0).abs() < 1e-12 && share >= CONSISTENCY_SHARE,
        format!(
            "exact error {exact:.6} (8/9), {close}/{seeds} within {CONSISTENCY_TOL} (need {:.0}%), worst {worst:.4}",
            100.0 * CONSISTENCY_SHARE
        ),
    )
}

fn desk_trend() -> Outcome {
    let config = ExperimentConfig::desk();
    let report = Experiment::new(config.clone()).unwrap().run().unwrap();
    let mut worst = 0;
    for variant in MethodVariant::ALL {
        for &gamma in &config.gamma_levels {
            let w = if variant == MethodVariant::StratPlannedKnownP { 0.1 } else { 0.0 };
            let curve: Vec<f64> = config
                .c_levels
                .iter()
                .map(|&c| report.tmr(variant, gamma, c, w).expect("row present"))
                .collect();
            worst = worst.max(curve.windows(2).filter(|p| p[1] < p[0]).count());
        }
    }
    let mut wins = 0;
    for &gamma in &config.gamma_levels {
        for &c in &config.c_levels {
            let best = |strat: bool| {
                report
                    .rows
                    .iter()
                    .filter(|r| r.gamma == gamma && r.budget == c && r.variant.is_stratified() == strat)
                    .map(|r| r.tmr)
                    .fold(f64::MIN, f64::max)
            };
            if best(true) >= best(false) {
                wins += 1;
            }
        }
    }
    outcome(
        worst <= MAX_INVERSIONS && wins >= MIN_STRATIFIED_WINS,
        format!(
            "max inversions per curve {worst} (tol {MAX_INVERSIONS}), best sMDR >= best iMDR in {wins}/9 cells \
             (need {MIN_STRATIFIED_WINS})"
        ),
    )
}

/// Fraction of simulated designs whose cost `(N + 0.1 Ñ) / 1.1` stays within `C`.
fn simulated_fit(n: u64, budget: u64, p: f64, trials: u32, rng: &mut StdRng) -> f64 {
    let (cases, controls) = (n / 2, n - n / 2);
    let mut fits = 0;
    for _ in 0..trials {
        let (mut c, mut k, mut draws) = (0u64, 0u64, 0u64);
        while c < cases || k < controls {
            draws += 1;
            if rng.random::<f64>() < p {
                c += 1;
            } else {
                k += 1;
            }
        }
        // 10 N + Ñ <= 11 C, in integers
        if 10 * n + draws <= 11 * budget {
            fits += 1;
        }
    }
    fits as f64 / trials as f64
}

fn feasibility_boundary() -> Outcome {
    let (budget, p, w) = (5000u64, 0.1, 0.1);
    let l0 = lambda0(0.5, w, p);
    let params = CostParams::new(budget, w, 0.5, 0.05).unwrap();
    let trials = 10_000;
    let mut rng = StdRng::seed_from_u64(0xacce_0006);
    let below_n = (0.9 * l0 * budget as f64).floor() as u64;
    let above_n = (1.1 * l0 * budget as f64).floor() as u64;
    let below = simulated_fit(below_n, budget, p, trials, &mut rng);
    let above = simulated_fit(above_n, budget, p, trials, &mut rng);
    let lib_below = feasibility_probability(&params, p, 0.9 * l0, trials as usize, 61).unwrap();
    let lib_above = feasibility_probability(&params, p, 1.1 * l0, trials as usize, 62).unwrap();
    outcome(
        below > FEASIBLE_ABOVE && above < INFEASIBLE_BELOW && lib_below > FEASIBLE_ABOVE && lib_above < INFEASIBLE_BELOW,
        format!(
            "lambda0 {l0:.4}: P(fit) {below:.4} at N={below_n} (need > {FEASIBLE_ABOVE}), {above:.4} at N={above_n} \
             (need < {INFEASIBLE_BELOW}); library simulation {lib_below:.4} / {lib_above:.4}"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mdr-efe"))
            .args(["run", "--preset", "desk", "--seed", "424242", "--quiet", "--out"])
            .arg(&out)
            .status()
            .expect("binary runs");
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    outcome(
        a == b && !a.is_empty(),
        format!("two desk runs with seed 424242: {} and {} bytes, identical: {}", a.len(), b.len(), a == b),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("lambda0-golden-values", lambda0_golden),
        ("free-draw-plan-is-budget", free_draw_plan),
        ("draw-count-law", draw_count_law),
        ("stratified-case-law", case_law),
        ("xor-prevalence", prevalence),
        ("estimator-oracle", estimator_oracle),
        ("estimator-consistency", consistency),
        ("desk-trend", desk_trend),
        ("feasibility-boundary", feasibility_boundary),
        ("run-determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
