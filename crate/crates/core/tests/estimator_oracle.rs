mod oracle;

use mdr_core::estimator::binomial;
use mdr_core::{err_hat_k, select_relevant, FactorVector, PsiMode, StratifiedSample};
use oracle::{OraclePsi, OracleSample};
use proptest::prelude::*;

fn arb_case() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<Vec<u8>>, usize)> {
    (1usize..=4, 2usize..=3).prop_flat_map(|(n, k)| {
        let row = prop::collection::vec(0u8..3, n);
        (
            prop::collection::vec(row.clone(), k..=12),
            prop::collection::vec(row, k..=12),
            Just(k),
        )
    })
}

fn arb_psi() -> impl Strategy<Value = (PsiMode, OraclePsi)> {
    prop_oneof![
        Just((PsiMode::Natural, OraclePsi::Natural)),
        (0.1f64..5.0, 0.1f64..5.0).prop_map(|(m, p)| (
            PsiMode::Fixed {
                psi_minus: m,
                psi_plus: p
            },
            OraclePsi::Fixed(m, p)
        )),
        Just((
            PsiMode::Fixed {
                psi_minus: 1.0,
                psi_plus: 1.0
            },
            OraclePsi::Fixed(1.0, 1.0)
        )),
    ]
}

fn arb_prevalence() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), Just(0.5), Just(0.1), 0.0f64..=1.0]
}

fn build(cases: &[Vec<u8>], controls: &[Vec<u8>]) -> StratifiedSample {
    let fv = |v: &Vec<u8>| FactorVector::new(v.clone()).unwrap();
    StratifiedSample::from_classes(cases.iter().map(fv).collect(), controls.iter().map(fv).collect()).unwrap()
}

fn subsets(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimate_is_bit_identical_to_direct_summation(
        (cases, controls, k) in arb_case(),
        (psi, opsi) in arb_psi(),
        p in arb_prevalence(),
    ) {
        let sample = build(&cases, &controls);
        let reference = OracleSample { classes: [controls.clone(), cases.clone()] };
        for subset in subsets(cases[0].len()) {
            let est = err_hat_k(&sample, k, &subset, p, psi).unwrap();
            let want_counts = oracle::error_counts(&reference, k, &subset, p, opsi);
            prop_assert_eq!(&est.errors, &want_counts);
            let want = oracle::err_est(&reference, k, &subset, p, opsi);
            prop_assert_eq!(est.value.to_bits(), want.to_bits(), "{} vs {}", est.value, want);
        }
    }

    #[test]
    fn selection_is_the_lexicographic_argmin(
        (cases, controls, k) in arb_case(),
        (psi, opsi) in arb_psi(),
        p in arb_prevalence(),
        r in 1usize..=4,
    ) {
        let n = cases[0].len();
        prop_assume!(r <= n);
        let sample = build(&cases, &controls);
        let reference = OracleSample { classes: [controls.clone(), cases.clone()] };
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut count = 0;
        for subset in subsets(n).into_iter().filter(|s| s.len() == r) {
            count += 1;
            let v = oracle::err_est(&reference, k, &subset, p, opsi);
            let better = match &best {
                None => true,
                Some((bv, bs)) => v < *bv || (v == *bv && subset < *bs),
            };
            if better {
                best = Some((v, subset));
            }
        }
        let sel = select_relevant(&sample, k, r, p, psi).unwrap();
        let (bv, bs) = best.unwrap();
        prop_assert_eq!(sel.subset, bs);
        prop_assert_eq!(sel.estimate.value.to_bits(), bv.to_bits());
        prop_assert_eq!(sel.candidates, count as u64);
        prop_assert_eq!(sel.candidates, binomial(n as u64, r as u64));
    }
}
