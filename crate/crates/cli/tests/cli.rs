//! End-to-end command tests against temporary directories, at small Monte
//! Carlo scale; numerical quality is the acceptance suite's job.

use std::path::{Path, PathBuf};

use robustmsd_cli::report::{read_csv_numeric, read_solution, Manifest};

fn temp_base(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("robustmsd-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_prices(path: &Path, rows: usize) {
    let mut text = String::from("date,a,b,c\n");
    let mut p = [100.0f64, 40.0, 60.0];
    for day in 0..rows {
        let t = day as f64;
        p[0] *= 1.0 + 0.002 * (t * 0.9).sin() + 0.0003;
        p[1] *= 1.0 + 0.0015 * (t * 1.7).cos() + 0.0002;
        p[2] *= 1.0 + 0.0018 * (t * 0.3).sin() + 0.0001;
        text.push_str(&format!(
            "2015-{:02}-{:02},{:.6},{:.6},{:.6}\n",
            1 + day / 28,
            1 + day % 28,
            p[0],
            p[1],
            p[2]
        ));
    }
    std::fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> i32 {
    let owned: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    robustmsd_cli::run(&owned)
}

#[test]
fn solve_at_zero_radius_matches_nonrobust_output() {
    let base = temp_base("zero-eta");
    let prices = base.join("prices.csv");
    write_prices(&prices, 60);
    let out = base.join("out");
    let code = run(&[
        "solve",
        "--prices",
        prices.to_str().unwrap(),
        "--eta",
        "0",
        "--penalties",
        "0,0,0,0",
        "--mc-samples",
        "3000",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let robust = read_solution(&out.join("solution_robust.csv")).unwrap();
    let nonrobust = read_solution(&out.join("solution_nonrobust.csv")).unwrap();
    for (wr, wn) in robust.weights.iter().zip(nonrobust.weights.iter()) {
        for (a, b) in wr.iter().zip(wn.iter()) {
            assert!((a - b).abs() <= 1e-6, "weights differ: {a} vs {b}");
        }
    }
    for (a, b) in robust.value_coeff.iter().zip(nonrobust.value_coeff.iter()) {
        assert!((a - b).abs() <= 1e-6);
    }
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn sweep_emits_table_and_figure_series() {
    let base = temp_base("sweep");
    let prices = base.join("prices.csv");
    write_prices(&prices, 60);
    let out = base.join("out");
    // two-radius sweep via config file to keep the test quick
    let config = serde_json::json!({
        "prices": prices.to_str().unwrap(),
        "etas": [0.01, 0.05],
        "mc_samples": 3000,
        "path_count": 2000,
        "master_seed": 9,
        "out_dir": out.to_str().unwrap(),
    });
    let config_path = base.join("config.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let code = run(&["sweep", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code, 0);

    let (header, rows) = read_csv_numeric(&out.join("sweep_table.csv")).unwrap();
    assert_eq!(
        header,
        vec![
            "gamma",
            "eta",
            "outperform_count",
            "outperform_pct",
            "mean_wealth_robust",
            "mean_wealth_nonrobust",
            "mean_wealth_difference",
            "ratio_robust",
            "ratio_nonrobust",
            "ratio_difference"
        ]
    );
    assert_eq!(rows.len(), 2);
    for row in &rows {
        // count and percentage are consistent
        let count = row[2];
        let pct = row[3];
        assert!((pct - 100.0 * count / 2000.0).abs() < 0.01);
        // difference columns are consistent with the value columns
        assert!((row[6] - (row[4] - row[5])).abs() <= 2e-6);
        assert!((row[9] - (row[7] - row[8])).abs() <= 2e-6);
    }

    for series in ["fig_outperformance.csv", "fig_mean_wealth.csv", "fig_ratio.csv"] {
        let (_, rows) = read_csv_numeric(&out.join(series)).unwrap();
        assert_eq!(rows.len(), 2, "{series}");
    }

    let manifest = Manifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "sweep");
    assert_eq!(manifest.outputs.len(), 4);
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn estimate_and_model_risk_pipeline() {
    let base = temp_base("modelrisk");
    let prices = base.join("prices.csv");
    write_prices(&prices, 120);
    let out = base.join("out");
    let config = serde_json::json!({
        "prices": prices.to_str().unwrap(),
        "dataset2_size": 30,
        "repeats": 40,
        "knn_k": 5,
        "mc_samples": 3000,
        "boot_count": 5000,
        "q": 0.95,
        "master_seed": 11,
        "out_dir": out.to_str().unwrap(),
    });
    let config_path = base.join("config.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();

    let code = run(&["estimate-kl", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (_, rows) = read_csv_numeric(&out.join("divergence.csv")).unwrap();
    let estimated = rows[0][0];
    assert!(estimated.is_finite() && estimated >= 0.0);

    let code = run(&["model-risk", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let manifest = Manifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "model-risk");
    // the model-risk run re-estimates the divergence with the same seed
    assert_eq!(manifest.estimated_eta, Some(estimated));
    let (_, rows) = read_csv_numeric(&out.join("model_risk.csv")).unwrap();
    assert_eq!(rows[0][0], estimated);
    assert!(rows[0][1].is_finite());
    let (_, hist) = read_csv_numeric(&out.join("diff_histogram.csv")).unwrap();
    let total: f64 = hist.iter().map(|r| r[2]).sum();
    assert_eq!(total, 5000.0);
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn errors_exit_with_code_one_and_no_outputs() {
    let base = temp_base("errors");
    let out = base.join("out");
    // unknown command
    assert_eq!(run(&["transmogrify"]), 1);
    // missing model
    assert_eq!(run(&["solve", "--out", out.to_str().unwrap()]), 1);
    // malformed prices
    let bad = base.join("bad.csv");
    std::fs::write(&bad, "date,a\n2015-01-01,10\n2015-01-01,11\n").unwrap();
    assert_eq!(
        run(&["solve", "--prices", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        1
    );
    assert!(!out.exists());
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn env_seed_is_used_as_fallback() {
    // resolve_seed order: config value, then environment, then zero
    let config = robustmsd_cli::config::RunConfig::default();
    std::env::set_var("ROBUSTMSD_SEED", "31415");
    assert_eq!(config.resolve_seed().unwrap(), 31415);
    let explicit = robustmsd_cli::config::RunConfig {
        master_seed: Some(7),
        ..robustmsd_cli::config::RunConfig::default()
    };
    assert_eq!(explicit.resolve_seed().unwrap(), 7);
    std::env::set_var("ROBUSTMSD_SEED", "not-a-number");
    assert!(config.resolve_seed().is_err());
    std::env::remove_var("ROBUSTMSD_SEED");
    assert_eq!(config.resolve_seed().unwrap(), 0);
}
