//! Run configuration: a single JSON file plus command-line flag overrides,
//! with flags winning. The resolved configuration is embedded verbatim in
//! the run manifest, so a manifest alone reproduces the run.

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Worst-case scenario family used by `compare` and `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Gaussian,
    SkewNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV; mutually exclusive with an inline model.
    pub prices: Option<String>,
    /// Inline expected net returns, when no price file is given.
    pub mu: Option<Vec<f64>>,
    /// Inline return covariance, row-major.
    pub sigma: Option<Vec<Vec<f64>>>,
    pub horizon: usize,
    pub w0: f64,
    /// Constant per-period risk aversion.
    pub kappa: f64,
    /// Constant per-period KL radius.
    pub eta: f64,
    /// Future-payoff penalty products, one per period after the first.
    pub penalties: Vec<f64>,
    /// Radii swept by `sweep` under the Gaussian scenario.
    pub etas: Vec<f64>,
    /// Mean-shift percentages swept by `sweep` under the skew scenario.
    pub betas: Vec<f64>,
    pub scenario: ScenarioKind,
    /// Mean shift for a single skew-scenario `compare`.
    pub beta_pct: f64,
    pub mc_samples: usize,
    pub path_count: usize,
    /// Repeats of the nearest-neighbor divergence estimate.
    pub repeats: usize,
    pub boot_count: usize,
    pub knn_k: usize,
    /// Rows held out as the empirical alternative dataset.
    pub dataset2_size: usize,
    /// Confidence level of the model-risk quantile.
    pub q: f64,
    pub master_seed: Option<u64>,
    pub threads: usize,
    pub out_dir: String,
    /// Re-solve each period from a second warm start and flag mismatches.
    pub multi_start: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prices: None,
            mu: None,
            sigma: None,
            horizon: 5,
            w0: 1.0,
            kappa: 3.0,
            eta: 0.05,
            penalties: vec![7.5, 8.0, 8.5, 9.0],
            etas: vec![0.005, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            betas: vec![-78.30, -242.54, -334.61, -449.99, -523.30, -572.42, -604.20],
            scenario: ScenarioKind::Gaussian,
            beta_pct: -242.54,
            mc_samples: 200_000,
            path_count: 100_000,
            repeats: 1_000,
            boot_count: 20_000,
            knn_k: 5,
            dataset2_size: 60,
            q: 0.95,
            master_seed: None,
            threads: 1,
            out_dir: "out".to_string(),
            multi_start: false,
        }
    }
}

impl RunConfig {
    /// Loads a config from a JSON file. A run manifest is accepted too:
    /// its embedded `config` object is taken.
    pub fn from_file(path: &str) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {path}: {e}")))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("config {path}: {e}")))?;
        let config_value = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(config_value)
            .map_err(|e| CliError::Parse(format!("config {path}: {e}")))
    }

    /// Sanity checks shared by all commands.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.horizon == 0 {
            return Err(CliError::Invalid("horizon must be at least 1".into()));
        }
        if self.penalties.len() + 1 != self.horizon {
            return Err(CliError::Invalid(format!(
                "penalties must list {} products for horizon {}, got {}",
                self.horizon - 1,
                self.horizon,
                self.penalties.len()
            )));
        }
        if !(self.w0 > 0.0) {
            return Err(CliError::Invalid("w0 must be positive".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(CliError::Invalid("kappa must be positive".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(CliError::Invalid("eta must be nonnegative".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(CliError::Invalid("q must lie strictly between 0 and 1".into()));
        }
        for (name, count) in [
            ("mc_samples", self.mc_samples),
            ("path_count", self.path_count),
            ("repeats", self.repeats),
            ("boot_count", self.boot_count),
            ("knn_k", self.knn_k),
            ("dataset2_size", self.dataset2_size),
            ("threads", self.threads),
        ] {
            if count == 0 {
                return Err(CliError::Invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Seed resolution order: explicit config/flag value, then the
    /// ROBUSTMSD_SEED environment variable, then zero.
    pub fn resolve_seed(&self) -> Result<u64, CliError> {
        if let Some(seed) = self.master_seed {
            return Ok(seed);
        }
        match std::env::var("ROBUSTMSD_SEED") {
            Ok(text) => text
                .trim()
                .parse::<u64>()
                .map_err(|_| CliError::Invalid(format!("ROBUSTMSD_SEED is not a u64: {text}"))),
            Err(_) => Ok(0),
        }
    }
}

/// Parsed command line: a subcommand plus overrides applied on top of the
/// config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Compare,
    Sweep,
    EstimateKl,
    ModelRisk,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::EstimateKl => "estimate-kl",
            Command::ModelRisk => "model-risk",
        }
    }
}

pub const USAGE: &str = "usage: robustmsd <solve|compare|sweep|estimate-kl|model-risk> [flags]
flags:
  --config <path>      JSON config file (a run manifest is accepted)
  --prices <csv>       price file: date,asset1,asset2,...
  --eta <f>            KL radius (constant across periods)
  --kappa <f>          risk aversion (constant across periods)
  --penalties <list>   comma list of future-payoff penalty products
  --horizon <n>        number of periods
  --mc-samples <n>     Monte Carlo draws per period for the solver
  --paths <n>          comparison path count
  --seed <n>           master seed (fallback: ROBUSTMSD_SEED, then 0)
  --threads <n>        worker cap; never changes results
  --out <dir>          output directory
  --q <f>              confidence level of the model-risk quantile";

/// Parses the command line into a command plus a resolved config.
pub fn parse_args(args: &[String]) -> Result<Invocation, CliError> {
    let mut iter = args.iter();
    let command = match iter.next().map(String::as_str) {
        Some("solve") => Command::Solve,
        Some("compare") => Command::Compare,
        Some("sweep") => Command::Sweep,
        Some("estimate-kl") => Command::EstimateKl,
        Some("model-risk") => Command::ModelRisk,
        Some(other) => {
            return Err(CliError::Invalid(format!("unknown command '{other}'\n{USAGE}")))
        }
        None => return Err(CliError::Invalid(format!("missing command\n{USAGE}"))),
    };

    // First pass: find --config so flags can override it.
    let rest: Vec<&String> = iter.collect();
    let mut config = RunConfig::default();
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == "--config" {
            let path = rest
                .get(i + 1)
                .ok_or_else(|| CliError::Invalid("--config needs a path".into()))?;
            config = RunConfig::from_file(path)?;
            break;
        }
        i += 1;
    }

    let mut i = 0;
    while i < rest.len() {
        let flag = rest[i].as_str();
        let take = |what: &str| -> Result<&String, CliError> {
            rest.get(i + 1)
                .copied()
                .ok_or_else(|| CliError::Invalid(format!("{what} needs a value")))
        };
        match flag {
            "--config" => {
                take("--config")?;
            }
            "--prices" => config.prices = Some(take("--prices")?.clone()),
            "--eta" => config.eta = parse_f64(take("--eta")?, "--eta")?,
            "--kappa" => config.kappa = parse_f64(take("--kappa")?, "--kappa")?,
            "--penalties" => {
                let list = take("--penalties")?;
                config.penalties = list
                    .split(',')
                    .map(|p| parse_f64(p.trim(), "--penalties"))
                    .collect::<Result<Vec<f64>, CliError>>()?;
            }
            "--horizon" => config.horizon = parse_usize(take("--horizon")?, "--horizon")?,
            "--mc-samples" => {
                config.mc_samples = parse_usize(take("--mc-samples")?, "--mc-samples")?
            }
            "--paths" => config.path_count = parse_usize(take("--paths")?, "--paths")?,
            "--seed" => {
                config.master_seed = Some(
                    take("--seed")?
                        .parse::<u64>()
                        .map_err(|_| CliError::Invalid("--seed must be a u64".into()))?,
                )
            }
            "--threads" => config.threads = parse_usize(take("--threads")?, "--threads")?,
            "--out" => config.out_dir = take("--out")?.clone(),
            "--q" => config.q = parse_f64(take("--q")?, "--q")?,
            other => {
                return Err(CliError::Invalid(format!("unknown flag '{other}'\n{USAGE}")));
            }
        }
        i += 2;
    }

    config.validate()?;
    Ok(Invocation { command, config })
}

fn parse_f64(text: &str, what: &str) -> Result<f64, CliError> {
    text.parse::<f64>()
        .map_err(|_| CliError::Invalid(format!("{what} must be a number, got '{text}'")))
}

fn parse_usize(text: &str, what: &str) -> Result<usize, CliError> {
    text.parse::<usize>()
        .map_err(|_| CliError::Invalid(format!("{what} must be a count, got '{text}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_command_and_overrides() {
        let inv = parse_args(&args(&[
            "sweep",
            "--eta",
            "0.1",
            "--mc-samples",
            "5000",
            "--seed",
            "7",
            "--out",
            "results",
        ]))
        .unwrap();
        assert_eq!(inv.command, Command::Sweep);
        assert_eq!(inv.config.eta, 0.1);
        assert_eq!(inv.config.mc_samples, 5000);
        assert_eq!(inv.config.master_seed, Some(7));
        assert_eq!(inv.config.out_dir, "results");
    }

    #[test]
    fn rejects_unknown_flags_and_commands() {
        assert!(parse_args(&args(&["fly"])).is_err());
        assert!(parse_args(&args(&["solve", "--warp", "9"])).is_err());
        assert!(parse_args(&args(&[])).is_err());
    }

    #[test]
    fn penalties_parse_as_comma_list() {
        let inv = parse_args(&args(&[
            "solve",
            "--horizon",
            "3",
            "--penalties",
            "1.5, 2.5",
        ]))
        .unwrap();
        assert_eq!(inv.config.penalties, vec![1.5, 2.5]);
    }

    #[test]
    fn penalty_length_must_match_horizon() {
        assert!(parse_args(&args(&["solve", "--horizon", "3"])).is_err());
        assert!(parse_args(&args(&["solve", "--horizon", "5"])).is_ok());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let config = RunConfig { eta: 0.42, ..RunConfig::default() };
        let text = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }
}
