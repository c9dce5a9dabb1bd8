//! `cpperturb`: run seeded trial suites or measure a map stored on disk.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use cpperturb::cbnorm::{cb_norm, inverse_cb_lower, map_norm, NormOptions};
use cpperturb::io::read_map;
use cpperturb::par::init_threads_from_env;
use cpperturb::trials::{run_suite, Suite, TrialConfig};

#[derive(Parser, Debug)]
#[command(name = "cpperturb", version, about = "Trial harness for perturbing almost complete order embeddings")]
struct Args {
    /// Suite: samerange, cutdown, crux, amplified, approx-inverse, rank1,
    /// counterexample, splitting, norms.
    #[arg(long, required_unless_present = "map")]
    suite: Option<String>,

    /// Domain size (default: cycle through the suite's sizes).
    #[arg(long)]
    n: Option<usize>,

    /// Codomain size; family size for the counterexample suite.
    #[arg(long = "N")]
    big_n: Option<usize>,

    /// Comma-separated δ levels; an empty string runs no trials.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,

    #[arg(long, default_value_t = 100)]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Slack added to each published bound when deciding pass/fail.
    #[arg(long)]
    tol: Option<f64>,

    /// CSV output path; the summary goes to `<out>.json`. Without it the CSV is printed.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Measure a map file instead of running a suite.
    #[arg(long, conflicts_with = "suite")]
    map: Option<PathBuf>,
}

fn parse_deltas(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("bad delta '{s}': {e}")))
        .collect()
}

fn config(args: &Args, suite: &str) -> Result<TrialConfig, String> {
    let suite: Suite = suite.parse().map_err(|e: cpperturb::Error| e.to_string())?;
    let mut cfg = TrialConfig::new(suite);
    cfg.n = args.n;
    cfg.big_n = args.big_n;
    if let Some(d) = &args.delta {
        cfg.deltas = parse_deltas(d)?;
    }
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    cfg.out = args.out.clone();
    Ok(cfg)
}

fn measure_map(path: &Path) -> Result<bool, cpperturb::Error> {
    let map = read_map(path)?;
    let opts = NormOptions::default();
    let cp = map.is_cp(1e-10);
    let norm = map_norm(&map, &opts)?;
    let cb = cb_norm(&map, &opts)?;
    let inverse = if map.cod_dim() >= map.dom_dim() {
        inverse_cb_lower(&map, None, &opts).ok().map(|e| e.lower)
    } else {
        None
    };
    let out = json!({
        "n": map.dom_dim(),
        "k": map.cod_dim(),
        "blocks": map.blocks(),
        "is_cp": cp.is_cp,
        "choi_min_eigenvalue": cp.min_eigenvalue,
        "norm": {"lower": norm.lower, "upper": norm.upper},
        "cb_norm": {"lower": cb.lower, "upper": cb.upper, "method": cb.method},
        "inverse_cb_lower": inverse,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(true)
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_threads_from_env();
    if let Some(path) = &args.map {
        return match measure_map(path) {
            Ok(_) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }
    let suite = args.suite.as_deref().expect("clap enforces --suite");
    let cfg = match config(&args, suite) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("usage error: {msg}");
            return ExitCode::from(2);
        }
    };
    let report = match run_suite(&cfg) {
        Ok(r) => r,
        Err(cpperturb::Error::OutOfRange(msg)) => {
            eprintln!("usage error: {msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match &cfg.out {
        Some(out) => match report.write(out) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => print!("{}", report.to_csv()),
    }
    let passed = report.rows.iter().filter(|r| r.pass).count();
    eprintln!(
        "{}: {passed}/{} trials passed{}",
        cfg.suite,
        report.row_count,
        if report.errors.is_empty() {
            String::new()
        } else {
            format!(", {} errors", report.errors.len())
        }
    );
    for e in report.errors.iter().take(5) {
        eprintln!("  trial {}: {}", e.trial, e.message);
    }
    if report.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
