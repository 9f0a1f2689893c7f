//! Output files: solution tables, comparison tables, figure series and the
//! run manifest. Every writer has a matching reader so emitted files can
//! be re-parsed by the tool itself.
//!
//! Solution and figure values are written in shortest-roundtrip form (they
//! parse back to the exact float); table wealth metrics are fixed to six
//! decimals and percentages to four, and those files are documentation
//! outputs rather than inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use robustmsd::solver::HorizonSolution;

use crate::config::RunConfig;
use crate::CliError;

/// One row of a comparison table, already formatted metric by metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Gaussian scenario: the mean scale; skew scenario: the shift percent.
    pub scenario_param: f64,
    pub eta: f64,
    /// Skew scenario only: the calibrated skewness vector.
    pub xi_bar: Option<Vec<f64>>,
    pub outperform_count: u64,
    pub outperform_pct: f64,
    pub mean_wealth_robust: f64,
    pub mean_wealth_nonrobust: f64,
    pub ratio_robust: f64,
    pub ratio_nonrobust: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Writes a per-period solution file:
/// `period,theta,value_coeff,risk_scale,kl_achieved,positivity_prob,gate_pass,weight_*`.
pub fn write_solution(
    path: &Path,
    solution: &HorizonSolution,
    asset_names: &[String],
    kappa: f64,
) -> Result<(), CliError> {
    let mut out = String::from("period,theta,value_coeff,risk_scale,kl_achieved,positivity_prob,gate_pass");
    for name in asset_names {
        write!(out, ",weight_{name}").expect("string write");
    }
    out.push('\n');
    let threshold = 1.0 - (-kappa).exp();
    for (n, period) in solution.periods.iter().enumerate() {
        let prob = solution.positivity_probs[n];
        write!(
            out,
            "{n},{},{},{},{},{},{}",
            period.theta,
            period.value_coeff,
            period.risk_scale,
            period.kl_achieved,
            prob,
            prob > threshold
        )
        .expect("string write");
        for w in &period.weights {
            write!(out, ",{w}").expect("string write");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Minimal parsed view of a solution file, for round-trips and checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub asset_names: Vec<String>,
    pub theta: Vec<f64>,
    pub value_coeff: Vec<f64>,
    pub risk_scale: Vec<f64>,
    pub kl_achieved: Vec<f64>,
    pub positivity_prob: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

pub fn read_solution(path: &Path) -> Result<SolutionFile, CliError> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Parse(format!("{}: empty", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 8 {
        return Err(CliError::Parse(format!("{}: short header", path.display())));
    }
    let asset_names: Vec<String> = columns[7..]
        .iter()
        .map(|c| c.trim_start_matches("weight_").to_string())
        .collect();
    let mut file = SolutionFile {
        asset_names,
        theta: vec![],
        value_coeff: vec![],
        risk_scale: vec![],
        kl_achieved: vec![],
        positivity_prob: vec![],
        weights: vec![],
    };
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::Parse(format!("{}: ragged row", path.display())));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| CliError::Parse(format!("{}: bad number {}", path.display(), fields[i])))
        };
        file.theta.push(num(1)?);
        file.value_coeff.push(num(2)?);
        file.risk_scale.push(num(3)?);
        file.kl_achieved.push(num(4)?);
        file.positivity_prob.push(num(5)?);
        let mut row = Vec::new();
        for i in 7..fields.len() {
            row.push(num(i)?);
        }
        file.weights.push(row);
    }
    Ok(file)
}

/// Writes the sweep table with the comparison column layout: scenario
/// parameter, radius, outperformance and the two wealth/ratio column
/// groups with their differences.
pub fn write_sweep_table(path: &Path, rows: &[SweepRow], skew: bool) -> Result<(), CliError> {
    let mut out = String::new();
    let param = if skew { "beta_pct" } else { "gamma" };
    write!(out, "{param},eta").expect("string write");
    if skew {
        let width = rows
            .first()
            .and_then(|r| r.xi_bar.as_ref())
            .map_or(0, |x| x.len());
        for j in 1..=width {
            write!(out, ",xi_{j}").expect("string write");
        }
    }
    out.push_str(
        ",outperform_count,outperform_pct,mean_wealth_robust,mean_wealth_nonrobust,\
         mean_wealth_difference,ratio_robust,ratio_nonrobust,ratio_difference\n",
    );
    for row in rows {
        write!(out, "{:.4},{:.4}", row.scenario_param, row.eta).expect("string write");
        if skew {
            for x in row.xi_bar.as_deref().unwrap_or(&[]) {
                write!(out, ",{x:.4}").expect("string write");
            }
        }
        writeln!(
            out,
            ",{},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.outperform_count,
            row.outperform_pct,
            row.mean_wealth_robust,
            row.mean_wealth_nonrobust,
            row.mean_wealth_robust - row.mean_wealth_nonrobust,
            row.ratio_robust,
            row.ratio_nonrobust,
            row.ratio_robust - row.ratio_nonrobust,
        )
        .expect("string write");
    }
    write_file(path, &out)
}

/// Reads back the numeric cells of any of the CSV outputs (header plus
/// uniform numeric rows; boolean cells parse as errors and are skipped by
/// callers that know better).
pub fn read_csv_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Parse(format!("{}: empty", path.display())))?
        .split(',')
        .map(|c| c.to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, CliError> = line
            .split(',')
            .map(|f| {
                match f {
                    "true" => Ok(1.0),
                    "false" => Ok(0.0),
                    other => other.parse::<f64>().map_err(|_| {
                        CliError::Parse(format!("{}: bad number {other}", path.display()))
                    }),
                }
            })
            .collect();
        rows.push(row?);
    }
    Ok((header, rows))
}

/// Writes a small two-or-more column numeric series, shortest-roundtrip.
pub fn write_series(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            write!(out, "{v}").expect("string write");
            first = false;
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// The run manifest: command, library version, resolved configuration,
/// resolved master seed, outcome flags and the list of written files.
/// Feeding the manifest back through `--config` reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_robust: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_nonrobust: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_risk: Option<f64>,
}

impl Manifest {
    pub fn new(command: &str, master_seed: u64, config: &RunConfig) -> Manifest {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config: config.clone(),
            outputs: Vec::new(),
            accepted_robust: None,
            accepted_nonrobust: None,
            estimated_eta: None,
            model_risk: None,
        }
    }

    pub fn record(&mut self, path: &Path) {
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            self.outputs.push(name.to_string());
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
        write_file(&path, &text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Manifest, CliError> {
        let text = read_file(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }
}
