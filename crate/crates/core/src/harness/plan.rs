use std::io::Write;

use serde::{Deserialize, Serialize};

use super::report::format_g;
use super::ExperimentConfig;
use crate::cost::{lambda0, s_str, CostParams, NTildeLaw};
use crate::datagen::XorModel;
use crate::error::{Error, Result};

pub const PLAN_HEADER: &str = "gamma,p,C,w,alpha,a,s_str,s_ind,expected_n_tilde,lambda0";

/// Planned stratified size for one `(gamma, C, w)` combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub gamma: f64,
    /// Case prevalence implied by `gamma`.
    pub p: f64,
    pub budget: u64,
    pub w: f64,
    pub alpha: f64,
    pub a: f64,
    /// Largest stratified size meeting the budget with probability `1 - alpha`
    /// (`0` when none does).
    pub s_str: u64,
    /// i.i.d. size with the same cost, which is the budget itself.
    pub s_ind: u64,
    /// Mean number of raw draws at size `s_str`.
    pub expected_n_tilde: f64,
    pub lambda0: f64,
}

impl PlanRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            format_g(self.gamma),
            format_g(self.p),
            self.budget,
            format_g(self.w),
            format_g(self.alpha),
            format_g(self.a),
            self.s_str,
            self.s_ind,
            format_g(self.expected_n_tilde),
            format_g(self.lambda0)
        )
    }
}

/// Planned sizes for every `(gamma, C, w)` of `config`.
pub fn planning_table(config: &ExperimentConfig) -> Result<Vec<PlanRow>> {
    config.validate()?;
    let relevant = config.relevant_zero_based();
    let mut rows = Vec::new();
    for &gamma in &config.gamma_levels {
        let model = XorModel::with_free_relevant_mafs(vec![config.relevant_maf; config.n], relevant.clone(), gamma)?;
        let p = model.case_prevalence();
        for &budget in &config.c_levels {
            for &w in &config.w_levels {
                let params = CostParams::new(budget, w, config.a, config.alpha)?;
                let s = match s_str(&params, p) {
                    Ok(s) => s,
                    Err(Error::NoFeasibleSize { .. }) => 0,
                    Err(e) => return Err(e),
                };
                let expected_n_tilde = if s == 0 {
                    0.0
                } else {
                    NTildeLaw::for_design(s, config.a, p)?.mean()
                };
                rows.push(PlanRow {
                    gamma,
                    p,
                    budget,
                    w,
                    alpha: config.alpha,
                    a: config.a,
                    s_str: s,
                    s_ind: budget,
                    expected_n_tilde,
                    lambda0: lambda0(config.a, w, p),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_plan_csv<W: Write>(mut out: W, rows: &[PlanRow]) -> Result<()> {
    writeln!(out, "{PLAN_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}
