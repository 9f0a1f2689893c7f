//! Command implementations. Each command resolves the model, derives its
//! seed substreams from the master seed, runs the library and writes its
//! artifacts plus a manifest into the output directory.

use std::path::Path;

use robustmsd::divergence::KnnConfig;
use robustmsd::experiments::{
    gamma_for_eta, gaussian_scenario, skew_scenario, study_baseline, study_row, ScenarioSpec,
    StudySettings,
};
use robustmsd::modelrisk::{diff_histogram, estimate_divergence_repeated, model_risk_quantile};
use robustmsd::numerics::{sample_mean_cov, Matrix};
use robustmsd::sampling::{sample_mvn, substream_seed};
use robustmsd::solver::{solve_horizon, HorizonSolution, Mode, SolverOptions};
use robustmsd::types::{NominalModel, PortfolioSpec, ReturnSample, RiskProfile};

use crate::config::{Command, Invocation, RunConfig, ScenarioKind};
use crate::ingest::ingest_prices;
use crate::report::{
    write_series, write_solution, write_sweep_table, Manifest, SweepRow,
};
use crate::CliError;

/// Exit status: 0 success, 2 when the positivity gate says to abandon the
/// investment, 1 on errors (mapped by the caller).
pub fn execute(invocation: &Invocation) -> Result<i32, CliError> {
    let config = &invocation.config;
    let seed = config.resolve_seed()?;
    match invocation.command {
        Command::Solve => run_solve(config, seed),
        Command::Compare => run_compare(config, seed),
        Command::Sweep => run_sweep(config, seed),
        Command::EstimateKl => run_estimate_kl(config, seed),
        Command::ModelRisk => run_model_risk(config, seed),
    }
}

/// The nominal model plus asset names, from a price file or inline values.
fn resolve_model(config: &RunConfig) -> Result<(NominalModel, Vec<String>), CliError> {
    if let Some(path) = &config.prices {
        let table = ingest_prices(path)?;
        let (mu, sigma) = sample_mean_cov(&table.returns)?;
        let model = NominalModel::new(mu, sigma)?;
        return Ok((model, table.asset_names));
    }
    match (&config.mu, &config.sigma) {
        (Some(mu), Some(sigma)) => {
            let matrix = Matrix::from_rows(sigma)?;
            let names = (1..=mu.len()).map(|i| format!("{i}")).collect();
            Ok((NominalModel::new(mu.clone(), matrix)?, names))
        }
        _ => Err(CliError::Invalid(
            "no model: give --prices or put mu and sigma in the config".into(),
        )),
    }
}

fn spec_for(config: &RunConfig, model: &NominalModel) -> Result<PortfolioSpec, CliError> {
    Ok(PortfolioSpec::new(model.dim(), config.horizon, config.w0)?)
}

fn profile_for(config: &RunConfig, eta: f64) -> Result<RiskProfile, CliError> {
    Ok(RiskProfile::constant(
        config.horizon,
        config.kappa,
        eta,
        config.penalties.clone(),
    )?)
}

fn solver_options(config: &RunConfig) -> SolverOptions {
    SolverOptions { multi_start: config.multi_start, ..SolverOptions::default() }
}

/// Per-period solver samples; both solve modes share them so the eta -> 0
/// limit produces identical files.
fn solver_samples(
    config: &RunConfig,
    model: &NominalModel,
    seed: u64,
    tag: &str,
) -> Result<Vec<ReturnSample>, CliError> {
    (0..config.horizon)
        .map(|n| {
            Ok(sample_mvn(
                &model.gross_mean(),
                model.sigma(),
                config.mc_samples,
                substream_seed(seed, &format!("{tag}-period-{n}")),
            )?)
        })
        .collect()
}

fn solve_both(
    config: &RunConfig,
    model: &NominalModel,
    eta: f64,
    seed: u64,
    tag: &str,
) -> Result<(HorizonSolution, HorizonSolution), CliError> {
    let spec = spec_for(config, model)?;
    let profile = profile_for(config, eta)?;
    let samples = solver_samples(config, model, seed, tag)?;
    let options = solver_options(config);
    let robust = solve_horizon(&spec, model, &profile, &samples, Mode::Robust, &options)?;
    let nonrobust = solve_horizon(&spec, model, &profile, &samples, Mode::NonRobust, &options)?;
    Ok((robust, nonrobust))
}

fn run_solve(config: &RunConfig, seed: u64) -> Result<i32, CliError> {
    let (model, asset_names) = resolve_model(config)?;
    let (robust, nonrobust) = solve_both(config, &model, config.eta, seed, "solver")?;

    let out_dir = Path::new(&config.out_dir);
    let mut manifest = Manifest::new("solve", seed, config);
    let robust_path = out_dir.join("solution_robust.csv");
    write_solution(&robust_path, &robust, &asset_names, config.kappa)?;
    manifest.record(&robust_path);
    let nonrobust_path = out_dir.join("solution_nonrobust.csv");
    write_solution(&nonrobust_path, &nonrobust, &asset_names, config.kappa)?;
    manifest.record(&nonrobust_path);
    manifest.accepted_robust = Some(robust.accepted);
    manifest.accepted_nonrobust = Some(nonrobust.accepted);
    manifest.write(out_dir)?;

    Ok(if robust.accepted { 0 } else { 2 })
}

fn scenario_for(
    config: &RunConfig,
    model: &NominalModel,
    eta: f64,
    seed: u64,
) -> Result<ScenarioSpec, CliError> {
    match config.scenario {
        ScenarioKind::Gaussian => Ok(gaussian_scenario(model, eta)?),
        ScenarioKind::SkewNormal => Ok(skew_scenario(
            model,
            config.beta_pct,
            config.mc_samples,
            substream_seed(seed, "scenario-kl"),
        )?),
    }
}

fn study_settings(config: &RunConfig) -> StudySettings {
    StudySettings {
        kappa: config.kappa,
        penalties: config.penalties.clone(),
        mc_samples: config.mc_samples,
        path_count: config.path_count,
        solver: solver_options(config),
    }
}

fn sweep_row_from(
    scenario: &ScenarioSpec,
    report: &robustmsd::experiments::ComparisonReport,
) -> SweepRow {
    let (scenario_param, xi_bar) = match scenario {
        ScenarioSpec::GaussianScaledMean { gamma, .. } => (*gamma, None),
        ScenarioSpec::SkewNormal { beta_pct, xi_bar, .. } => (*beta_pct, Some(xi_bar.clone())),
    };
    SweepRow {
        scenario_param,
        eta: scenario.eta(),
        xi_bar,
        outperform_count: report.outperform_count,
        outperform_pct: report.outperform_pct,
        mean_wealth_robust: report.mean_wealth_robust,
        mean_wealth_nonrobust: report.mean_wealth_nonrobust,
        ratio_robust: report.ratio_robust,
        ratio_nonrobust: report.ratio_nonrobust,
    }
}

fn run_compare(config: &RunConfig, seed: u64) -> Result<i32, CliError> {
    let (model, _) = resolve_model(config)?;
    let spec = spec_for(config, &model)?;
    let scenario = scenario_for(config, &model, config.eta, seed)?;
    let settings = study_settings(config);
    let baseline = study_baseline(&spec, &model, &settings, seed)?.strategy()?;
    let report = study_row(
        &spec,
        &model,
        &scenario,
        &settings,
        &baseline,
        substream_seed(seed, "compare-row-0"),
    )?;
    let row = sweep_row_from(&scenario, &report);

    let out_dir = Path::new(&config.out_dir);
    let mut manifest = Manifest::new("compare", seed, config);
    let table_path = out_dir.join("comparison.csv");
    write_sweep_table(
        &table_path,
        std::slice::from_ref(&row),
        matches!(config.scenario, ScenarioKind::SkewNormal),
    )?;
    manifest.record(&table_path);
    manifest.write(out_dir)?;
    Ok(0)
}

fn run_sweep(config: &RunConfig, seed: u64) -> Result<i32, CliError> {
    let (model, _) = resolve_model(config)?;
    let skew = matches!(config.scenario, ScenarioKind::SkewNormal);
    let spec = spec_for(config, &model)?;
    let settings = study_settings(config);
    // The non-robust baseline does not depend on the radius; solve once.
    let baseline = study_baseline(&spec, &model, &settings, seed)?.strategy()?;

    let scenarios: Vec<ScenarioSpec> = if skew {
        config
            .betas
            .iter()
            .enumerate()
            .map(|(i, beta)| {
                Ok(skew_scenario(
                    &model,
                    *beta,
                    config.mc_samples,
                    substream_seed(seed, &format!("scenario-kl-{i}")),
                )?)
            })
            .collect::<Result<_, CliError>>()?
    } else {
        config
            .etas
            .iter()
            .map(|eta| Ok(gaussian_scenario(&model, *eta)?))
            .collect::<Result<_, CliError>>()?
    };

    let mut rows = Vec::with_capacity(scenarios.len());
    for (i, scenario) in scenarios.iter().enumerate() {
        let report = study_row(
            &spec,
            &model,
            scenario,
            &settings,
            &baseline,
            substream_seed(seed, &format!("sweep-row-{i}")),
        )?;
        rows.push(sweep_row_from(scenario, &report));
    }

    let out_dir = Path::new(&config.out_dir);
    let mut manifest = Manifest::new("sweep", seed, config);
    let table_path = out_dir.join("sweep_table.csv");
    write_sweep_table(&table_path, &rows, skew)?;
    manifest.record(&table_path);

    let outperf: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.eta, r.outperform_pct])
        .collect();
    let outperf_path = out_dir.join("fig_outperformance.csv");
    write_series(&outperf_path, "eta,outperform_pct", &outperf)?;
    manifest.record(&outperf_path);

    let wealth: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.eta, r.mean_wealth_robust, r.mean_wealth_nonrobust])
        .collect();
    let wealth_path = out_dir.join("fig_mean_wealth.csv");
    write_series(
        &wealth_path,
        "eta,mean_wealth_robust,mean_wealth_nonrobust",
        &wealth,
    )?;
    manifest.record(&wealth_path);

    let ratio: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.eta, r.ratio_robust, r.ratio_nonrobust])
        .collect();
    let ratio_path = out_dir.join("fig_ratio.csv");
    write_series(&ratio_path, "eta,ratio_robust,ratio_nonrobust", &ratio)?;
    manifest.record(&ratio_path);

    manifest.write(out_dir)?;
    Ok(0)
}

/// Splits ingested returns into the estimation window and the held-out
/// empirical alternative (the last `dataset2_size` rows).
fn split_datasets(config: &RunConfig) -> Result<(NominalModel, Matrix), CliError> {
    let path = config
        .prices
        .as_ref()
        .ok_or_else(|| CliError::Invalid("this command needs --prices".into()))?;
    let table = ingest_prices(path)?;
    let total = table.returns.rows();
    if total <= config.dataset2_size + 1 {
        return Err(CliError::Invalid(format!(
            "need more than {} return rows to hold out {}, got {total}",
            config.dataset2_size + 1,
            config.dataset2_size
        )));
    }
    let split = total - config.dataset2_size;
    let mut first = Vec::with_capacity(split);
    let mut second = Vec::with_capacity(config.dataset2_size);
    for i in 0..total {
        let row = table.returns.row(i).to_vec();
        if i < split {
            first.push(row);
        } else {
            second.push(row);
        }
    }
    let (mu, sigma) = sample_mean_cov(&Matrix::from_rows(&first)?)?;
    Ok((NominalModel::new(mu, sigma)?, Matrix::from_rows(&second)?))
}

fn run_estimate_kl(config: &RunConfig, seed: u64) -> Result<i32, CliError> {
    let (model, dataset2) = split_datasets(config)?;
    let cfg = KnnConfig { k: config.knn_k, repeats: config.repeats };
    let estimate = estimate_divergence_repeated(
        model.mu(),
        model.sigma(),
        &dataset2,
        &cfg,
        substream_seed(seed, "estimate-kl"),
    )?;

    let out_dir = Path::new(&config.out_dir);
    let mut manifest = Manifest::new("estimate-kl", seed, config);
    let path = out_dir.join("divergence.csv");
    write_series(
        &path,
        "estimated_eta,repeats,knn_k,dataset2_size",
        &[vec![
            estimate,
            config.repeats as f64,
            config.knn_k as f64,
            dataset2.rows() as f64,
        ]],
    )?;
    manifest.record(&path);
    manifest.estimated_eta = Some(estimate);
    manifest.write(out_dir)?;
    Ok(0)
}

fn run_model_risk(config: &RunConfig, seed: u64) -> Result<i32, CliError> {
    let (model, dataset2) = split_datasets(config)?;
    let cfg = KnnConfig { k: config.knn_k, repeats: config.repeats };
    let estimated_eta = estimate_divergence_repeated(
        model.mu(),
        model.sigma(),
        &dataset2,
        &cfg,
        substream_seed(seed, "estimate-kl"),
    )?;

    let (robust, nonrobust) = solve_both(config, &model, estimated_eta, seed, "model-risk-solver")?;
    let result = model_risk_quantile(
        &robust.strategy()?,
        &nonrobust.strategy()?,
        &dataset2,
        estimated_eta,
        config.boot_count,
        config.q,
        substream_seed(seed, "model-risk"),
    )?;

    let out_dir = Path::new(&config.out_dir);
    let mut manifest = Manifest::new("model-risk", seed, config);
    let summary_path = out_dir.join("model_risk.csv");
    let mean_diff =
        result.diff_sample.iter().sum::<f64>() / result.diff_sample.len() as f64;
    write_series(
        &summary_path,
        "estimated_eta,model_risk,confidence,boot_count,mean_diff",
        &[vec![
            result.estimated_eta,
            result.model_risk,
            result.confidence,
            config.boot_count as f64,
            mean_diff,
        ]],
    )?;
    manifest.record(&summary_path);

    let hist = diff_histogram(&result.diff_sample, 80)?;
    let hist_rows: Vec<Vec<f64>> = hist
        .iter()
        .map(|(lo, hi, count)| vec![*lo, *hi, *count as f64])
        .collect();
    let hist_path = out_dir.join("diff_histogram.csv");
    write_series(&hist_path, "bin_left,bin_right,count", &hist_rows)?;
    manifest.record(&hist_path);

    manifest.estimated_eta = Some(estimated_eta);
    manifest.model_risk = Some(result.model_risk);
    manifest.write(out_dir)?;
    Ok(0)
}

/// Gamma lookup for the Gaussian scenario; exposed for the CLI tests.
pub fn scenario_gamma(model: &NominalModel, eta: f64) -> Result<f64, CliError> {
    Ok(gamma_for_eta(model.mu(), model.sigma(), eta)?)
}
