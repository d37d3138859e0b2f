//! Budget planning for stratified designs.
//!
//! Every observation costs 1 (normalized so that measuring `X` and `Y`
//! together costs `1`) and measuring `Y` alone costs a fraction `w / (w + 1)`.
//! A stratified sample of size `N` that consumed `Ñ` raw draws costs
//! `(N + w Ñ) / (w + 1)`, so it fits a budget `C` iff
//! `Ñ <= ((w + 1) C - N) / w`.
//!
//! `Ñ = max(j_1, j_-1)` where `j_y` is the draw index of the `N_y`-th
//! observation of class `y`. `j_-1 - N_-1 ~ NB(N_-1, p)` counts the cases seen
//! before the last needed control, and symmetrically for `j_1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::datagen::BernoulliLabels;
use crate::error::{invalid, Error, Result};
use crate::rng::SeededStream;
use crate::stratify::build_stratified;

const TAIL_REL: f64 = 1e-14;

/// `C(k + r - 1, k) q^k (1 - q)^r`: the probability of `k` failures (each with
/// probability `q`) before the `r`-th success.
pub fn nb_pmf(r: u64, q: f64, k: u64) -> Result<f64> {
    if r == 0 {
        return Err(invalid("negative binomial needs r >= 1"));
    }
    check_unit_open(q, "negative binomial parameter")?;
    Ok(ln_nb_pmf(r, q, k).exp())
}

fn ln_nb_pmf(r: u64, q: f64, k: u64) -> f64 {
    let (r, k) = (r as f64, k as f64);
    ln_gamma(k + r) - ln_gamma(k + 1.0) - ln_gamma(r) + k * q.ln() + r * (-q).ln_1p()
}

fn check_unit_open(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} {v} is outside (0, 1)")))
    }
}

/// `(P(lo <= eta <= hi), E[eta; lo <= eta <= hi])` for `eta ~ NB(r, q)`;
/// `hi = u64::MAX` means no upper limit. `r = 0` is the point mass at 0.
///
/// Terms are generated by the ratio recurrence outward from the mode (clamped
/// to the range), relative to the anchor term, and scaled once at the end so
/// that far-tail probabilities keep their relative precision.
fn nb_range(r: u64, q: f64, lo: u64, hi: u64) -> (f64, f64) {
    if lo > hi {
        return (0.0, 0.0);
    }
    if r == 0 {
        return if lo == 0 { (1.0, 0.0) } else { (0.0, 0.0) };
    }
    let rf = r as f64;
    let mode = if r > 1 {
        ((rf - 1.0) * q / (1.0 - q)).floor() as u64
    } else {
        0
    };
    let anchor = mode.clamp(lo, hi);
    let (mut mass, mut moment) = (1.0, anchor as f64);

    // upward: t(k + 1) = t(k) q (k + r) / (k + 1)
    let (mut k, mut t) = (anchor, 1.0);
    while k < hi {
        let ratio = q * (k as f64 + rf) / (k as f64 + 1.0);
        t *= ratio;
        k += 1;
        mass += t;
        moment += t * k as f64;
        if k > mode && ratio < 1.0 {
            let next = q * (k as f64 + rf) / (k as f64 + 1.0);
            // the remaining terms shrink at least geometrically with `next`
            if t * next / (1.0 - next) < TAIL_REL * mass || t == 0.0 {
                break;
            }
        }
    }

    // downward: t(k - 1) = t(k) k / (q (k - 1 + r))
    let (mut k, mut t) = (anchor, 1.0);
    while k > lo {
        let ratio = k as f64 / (q * (k as f64 - 1.0 + rf));
        t *= ratio;
        k -= 1;
        mass += t;
        moment += t * k as f64;
        if ratio < 1.0 {
            let bound = t * ((k - lo) as f64).min(1.0 / (1.0 - ratio));
            if bound < TAIL_REL * mass || t == 0.0 {
                break;
            }
        }
    }

    let scale = ln_nb_pmf(r, q, anchor).exp();
    (mass * scale, moment * scale)
}

/// `(N_1, N_-1)` for a design of size `n >= 1`.
fn split(n: u64, a: f64) -> (u64, u64) {
    let cases = ((a * n as f64).floor() as u64).clamp(1, n);
    (cases, n - cases)
}

/// Law of the number of raw draws `Ñ` needed to fill both strata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NTildeLaw {
    cases: u64,
    controls: u64,
    p: f64,
}

impl NTildeLaw {
    /// `cases >= 1`, `controls >= 0`, `p = P(Y = 1)` in `(0, 1)`.
    pub fn new(cases: u64, controls: u64, p: f64) -> Result<Self> {
        if cases == 0 {
            return Err(invalid("the design needs at least one case"));
        }
        check_unit_open(p, "prevalence")?;
        Ok(NTildeLaw { cases, controls, p })
    }

    /// Law for a design of size `n` with case ratio `a`.
    pub fn for_design(n: u64, a: f64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("design size must be positive"));
        }
        check_unit_open(a, "case ratio")?;
        let (cases, controls) = split(n, a);
        Self::new(cases, controls, p)
    }

    pub fn cases(&self) -> u64 {
        self.cases
    }

    pub fn controls(&self) -> u64 {
        self.controls
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn size(&self) -> u64 {
        self.cases + self.controls
    }

    /// `P(Ñ = m)`.
    pub fn pmf(&self, m: u64) -> f64 {
        let n = self.size();
        if m < n {
            return 0.0;
        }
        let last_control = if self.controls == 0 {
            0.0
        } else {
            ln_nb_pmf(self.controls, self.p, m - self.controls).exp()
        };
        let last_case = ln_nb_pmf(self.cases, 1.0 - self.p, m - self.cases).exp();
        last_control + last_case
    }

    /// Sums of `(1, Ñ)` over the event `Ñ <= limit` (`u64::MAX` for no limit).
    fn sums_up_to(&self, limit: u64) -> (f64, f64) {
        let n = self.size();
        if limit < n {
            return (0.0, 0.0);
        }
        // control finishes last: cases seen before it lie in [N_1, limit - N_-1]
        let (m0, e0) = nb_range(self.controls, self.p, self.cases, limit - self.controls);
        // case finishes last: controls seen before it lie in [N_-1, limit - N_1]
        let (m1, e1) = nb_range(self.cases, 1.0 - self.p, self.controls, limit - self.cases);
        (
            m0 + m1,
            e0 + self.controls as f64 * m0 + e1 + self.cases as f64 * m1,
        )
    }

    /// `P(Ñ <= m)`.
    pub fn cdf(&self, m: u64) -> f64 {
        self.sums_up_to(m).0
    }

    /// `E[Ñ]`.
    pub fn mean(&self) -> f64 {
        self.sums_up_to(u64::MAX).1
    }

    /// Smallest `m` with `P(Ñ <= m) >= level`.
    pub fn quantile(&self, level: f64) -> u64 {
        let mut m = self.size();
        let mut acc = self.pmf(m);
        while acc < level && acc < 1.0 - 1e-15 {
            m += 1;
            acc += self.pmf(m);
        }
        m
    }
}

/// Budget parameters of a stratified design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Total budget `C`, in units of one fully measured observation.
    pub budget: u64,
    /// Price ratio of measuring `Y` to measuring `X`.
    pub w: f64,
    /// Case ratio.
    pub a: f64,
    /// Allowed probability of overrunning the budget.
    pub alpha: f64,
}

impl CostParams {
    pub fn new(budget: u64, w: f64, a: f64, alpha: f64) -> Result<Self> {
        let params = CostParams { budget, w, a, alpha };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(invalid(format!("price ratio {} must be finite and nonnegative", self.w)));
        }
        check_unit_open(self.a, "case ratio")?;
        check_unit_open(self.alpha, "alpha")
    }

    /// Largest raw draw count that keeps a design of size `n` within budget,
    /// `floor(((w + 1) C - n) / w)`, or `None` if even `Ñ = n` overruns.
    /// Values within `1e-9` (relative) of an integer are snapped to it so that
    /// exact-arithmetic boundaries are not lost to rounding.
    pub fn draw_limit(&self, n: u64) -> Option<u64> {
        if n > self.budget {
            return None;
        }
        if self.w == 0.0 {
            return Some(u64::MAX);
        }
        let t = ((self.w + 1.0) * self.budget as f64 - n as f64) / self.w;
        let nearest = t.round();
        let t = if (t - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
            nearest
        } else {
            t.floor()
        };
        let limit = if t >= u64::MAX as f64 { u64::MAX } else { t as u64 };
        (limit >= n).then_some(limit)
    }
}

/// `P(cost of a size-n design <= C)` when `P(Y = 1) = p`.
pub fn prob_cost_within(n: u64, params: &CostParams, p: f64) -> Result<f64> {
    params.validate()?;
    check_unit_open(p, "prevalence")?;
    if n == 0 {
        return Err(invalid("design size must be positive"));
    }
    if params.w == 0.0 {
        return Ok(if n <= params.budget { 1.0 } else { 0.0 });
    }
    match params.draw_limit(n) {
        None => Ok(0.0),
        Some(limit) => Ok(NTildeLaw::for_design(n, params.a, p)?.cdf(limit).min(1.0)),
    }
}

/// Largest `N` in `1..=C` whose cost stays within budget with probability at
/// least `1 - alpha`; `C` itself when `w = 0`.
pub fn s_str(params: &CostParams, p: f64) -> Result<u64> {
    params.validate()?;
    check_unit_open(p, "prevalence")?;
    if params.w == 0.0 {
        return Ok(params.budget);
    }
    let level = 1.0 - params.alpha;
    // the success probability is nonincreasing in N, so the first hit from
    // above is the maximum; sizes whose draw limit is below N are skipped
    let mut n = params.budget;
    while n >= 1 {
        if params.draw_limit(n).is_some() && prob_cost_within(n, params, p)? >= level {
            return Ok(n);
        }
        n -= 1;
    }
    Err(Error::NoFeasibleSize {
        budget: params.budget,
    })
}

/// [`s_str`] with an estimated prevalence plugged into the law of `Ñ`.
pub fn s_str_estimated(params: &CostParams, p_hat: f64) -> Result<u64> {
    check_unit_open(p_hat, "estimated prevalence")?;
    s_str(params, p_hat)
}

/// Asymptotic boundary of the size-to-budget ratio:
/// `(1 + w) / (1 + w max(a / p, (1 - a) / (1 - p)))`.
pub fn lambda0(a: f64, w: f64, p: f64) -> f64 {
    (1.0 + w) / (1.0 + w * (a / p).max((1.0 - a) / (1.0 - p)))
}

/// Simulated `Ñ` of `trials` independent designs of size `n`, one substream of
/// `seed` per trial.
pub fn simulate_n_tilde(p: f64, n: u64, a: f64, trials: usize, seed: u64) -> Result<Vec<u64>> {
    let root = SeededStream::new(seed);
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut labels = BernoulliLabels::new(p, root.substream(&[t]))?;
            Ok(build_stratified(&mut labels, n as usize, a)?.n_tilde())
        })
        .collect()
}

/// Monte Carlo probability that a design of size `floor(lambda C)` fits the budget.
pub fn feasibility_probability(
    params: &CostParams,
    p: f64,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    params.validate()?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(invalid(format!("size ratio {lambda} is outside (0, 1]")));
    }
    let n = (lambda * params.budget as f64).floor() as u64;
    let Some(limit) = params.draw_limit(n) else {
        return Ok(0.0);
    };
    let draws = simulate_n_tilde(p, n, params.a, trials, seed)?;
    Ok(draws.iter().filter(|&&d| d <= limit).count() as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nb_special_cases() {
        for &(r, q) in &[(1u64, 0.3), (4, 0.5), (10, 0.05)] {
            let p0 = nb_pmf(r, q, 0).unwrap();
            assert!((p0 - (1.0 - q).powi(r as i32)).abs() < 1e-14);
        }
        for k in 0..20u64 {
            let geo = 0.3f64.powi(k as i32) * 0.7;
            assert!((nb_pmf(1, 0.3, k).unwrap() - geo).abs() < 1e-14 * geo.max(1e-300) + 1e-300);
        }
        assert!(nb_pmf(0, 0.3, 1).is_err());
        assert!(nb_pmf(2, 1.0, 1).is_err());
    }

    #[test]
    fn nb_range_matches_direct_sum() {
        let (r, q) = (7u64, 0.35);
        let direct: f64 = (2..=15).map(|k| nb_pmf(r, q, k).unwrap()).sum();
        let (mass, _) = nb_range(r, q, 2, 15);
        assert!((mass - direct).abs() < 1e-14);
        let (total, mean) = nb_range(r, q, 0, u64::MAX);
        assert!((total - 1.0).abs() < 1e-13);
        assert!((mean - r as f64 * q / (1.0 - q)).abs() < 1e-11);
    }

    #[test]
    fn ntilde_small_examples() {
        let law = NTildeLaw::new(1, 1, 0.5).unwrap();
        assert_eq!(law.pmf(1), 0.0);
        assert!((law.pmf(2) - 0.5).abs() < 1e-15);
        assert!((law.pmf(3) - 0.25).abs() < 1e-15);
        assert!((law.mean() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lambda0_golden() {
        assert!((lambda0(0.5, 0.1, 0.025) - 11.0 / 30.0).abs() < 1e-12);
        assert!((lambda0(0.5, 0.1, 0.05) - 11.0 / 20.0).abs() < 1e-12);
        assert!((lambda0(0.5, 0.1, 0.1) - 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(lambda0(0.3, 0.0, 0.2), 1.0);
    }

    #[test]
    fn budget_edges() {
        let params = CostParams::new(20, 0.1, 0.5, 0.05).unwrap();
        assert_eq!(prob_cost_within(21, &params, 0.5).unwrap(), 0.0);
        // N = C needs Ñ = N exactly
        let p_exact = prob_cost_within(20, &params, 0.5).unwrap();
        let law = NTildeLaw::for_design(20, 0.5, 0.5).unwrap();
        assert!((p_exact - law.pmf(20)).abs() < 1e-15);
        assert_eq!(params.draw_limit(20), Some(20));
        assert_eq!(params.draw_limit(10), Some(120));
        // (1.05 * 19 - 1) / 0.05 is 378.99999999999994 in floating point
        let tight = CostParams::new(19, 0.05, 0.5, 0.05).unwrap();
        assert_eq!(tight.draw_limit(1), Some(379));
    }

    #[test]
    fn zero_price_returns_budget() {
        let params = CostParams::new(137, 0.0, 0.5, 0.05).unwrap();
        assert_eq!(s_str(&params, 0.01).unwrap(), 137);
    }

    #[test]
    fn infeasible_plan_is_an_error() {
        // every size overruns: the case quota alone needs ~1/p draws
        let params = CostParams::new(2, 5.0, 0.5, 0.01).unwrap();
        assert!(matches!(s_str(&params, 1e-4), Err(Error::NoFeasibleSize { budget: 2 })));
    }

    #[test]
    fn quantile_brackets_level() {
        let law = NTildeLaw::for_design(30, 0.5, 0.2).unwrap();
        let m = law.quantile(0.9);
        assert!(law.cdf(m) >= 0.9 - 1e-12);
        assert!(law.cdf(m - 1) < 0.9);
    }
}
