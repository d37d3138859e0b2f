use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{Experiment, MethodVariant};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "variant,gamma,C,w,p_mode,N_used,TMR,D,seed";

/// `printf("%g")`-style formatting with 6 significant digits.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmrRow {
    pub variant: MethodVariant,
    pub gamma: f64,
    pub budget: u64,
    pub w: f64,
    pub known_p: bool,
    /// Sample size analyzed (`0` when no size fit the budget).
    pub n_used: u64,
    pub tmr: f64,
    pub d: usize,
    pub seed: u64,
}

impl TmrRow {
    pub fn p_mode(&self) -> &'static str {
        if self.known_p {
            "known"
        } else {
            "estimated"
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.variant.name(),
            format_g(self.gamma),
            self.budget,
            format_g(self.w),
            self.p_mode(),
            self.n_used,
            format_g(self.tmr),
            self.d,
            self.seed
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("malformed report line: {line}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
        Ok(TmrRow {
            variant: MethodVariant::from_name(f[0]).ok_or_else(bad)?,
            gamma: num(f[1])?,
            budget: int(f[2])?,
            w: num(f[3])?,
            known_p: match f[4] {
                "known" => true,
                "estimated" => false,
                _ => return Err(bad()),
            },
            n_used: int(f[5])?,
            tmr: num(f[6])?,
            d: int(f[7])? as usize,
            seed: int(f[8])?,
        })
    }
}

/// An arm that could not be analyzed in one replicate (counted as a miss).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub variant: MethodVariant,
    pub gamma: f64,
    pub budget: u64,
    pub w: f64,
    pub replicate: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TmrReport {
    pub rows: Vec<TmrRow>,
    pub failures: Vec<Failure>,
}

impl TmrReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(out, "{}", row.to_csv_line())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn parse_csv(text: &str) -> Result<Vec<TmrRow>> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::InvalidConfig("report header does not match".into()));
        }
        lines.map(TmrRow::parse_csv_line).collect()
    }

    /// TMR of `variant` at `(gamma, budget)` for price ratio `w`.
    pub fn tmr(&self, variant: MethodVariant, gamma: f64, budget: u64, w: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.gamma == gamma && r.budget == budget && r.w == w)
            .map(|r| r.tmr)
    }
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

/// Runs `experiment` cell by cell, appending each finished cell to
/// `<out>.partial` and renaming it to `out` at the end. With `resume`, cells
/// already present in the partial file are not recomputed; a trailing
/// incomplete cell is discarded.
pub fn run_to_csv(experiment: &Experiment, out: &Path, resume: bool, mut on_cell: impl FnMut(usize, usize)) -> Result<TmrReport> {
    let partial = partial_path(out);
    let mut report = TmrReport::default();
    let mut done_rows: Vec<String> = Vec::new();
    if resume && partial.exists() {
        let reader = BufReader::new(File::open(&partial)?);
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h == CSV_HEADER => {}
            _ => return Err(Error::InvalidConfig(format!("{} is not a report file", partial.display()))),
        }
        for line in lines {
            let line = line?;
            match TmrRow::parse_csv_line(&line) {
                Ok(row) => done_rows.push(row.to_csv_line()),
                Err(_) => break,
            }
        }
    }

    let cells = experiment.cells();
    // keep only whole cells whose rows match what this experiment would write
    let mut done_cells = 0;
    let mut pos = 0;
    for cell in cells {
        let arms = cell.arms.len();
        if pos + arms > done_rows.len() {
            break;
        }
        let rows: Vec<_> = done_rows[pos..pos + arms]
            .iter()
            .map(|l| TmrRow::parse_csv_line(l).expect("validated above"))
            .collect();
        let matches = rows.iter().zip(&cell.arms).all(|(r, a)| {
            r.variant == a.variant
                && r.gamma == cell.gamma
                && r.budget == cell.budget
                && r.seed == experiment.config().seed
                && r.d == experiment.config().d
        });
        if !matches {
            break;
        }
        report.rows.extend(rows);
        pos += arms;
        done_cells += 1;
    }

    let mut file = File::create(&partial)?;
    writeln!(file, "{CSV_HEADER}")?;
    for row in &report.rows {
        writeln!(file, "{}", row.to_csv_line())?;
    }
    file.flush()?;
    for (i, cell) in cells.iter().enumerate().skip(done_cells) {
        let (rows, failures) = experiment.run_cell(cell)?;
        for row in &rows {
            writeln!(file, "{}", row.to_csv_line())?;
        }
        file.flush()?;
        report.rows.extend(rows);
        report.failures.extend(failures);
        on_cell(i + 1, cells.len());
    }
    drop(file);
    fs::rename(&partial, out)?;
    Ok(report)
}
