use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use goodhart::harness::{
    aggregate, gen_goldilocks_instance, log_lambda_grid, run_experiment, ExperimentConfig, Family, RunSummary,
};
use goodhart::theorems::{goldilocks_search, safe_set_information_demo, GoldilocksResult};
use goodhart::world::instance_digest;
use goodhart::Result;

#[derive(Parser)]
#[command(
    name = "goodhart",
    version,
    about = "Exact checks of reward-misspecification bounds on finite worlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyFamily {
    Thm1,
    Thm2,
    Lemmas,
    Protocols,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveFamily {
    Goldilocks,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoKind {
    SafeSet,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded checks and write CSV and JSON results.
    Verify {
        family: VerifyFamily,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the pressure λ (natural units) on generated instances and plot V̂_λ.
    Curve {
        family: CurveFamily,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-2)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1e4)]
        lambda_max: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a low-information proxy that beats V₀; λ is in natural units.
    Search {
        family: CurveFamily,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k_bits: Option<f64>,
    },
    /// Information carried by a random safe set.
    Demo {
        kind: DemoKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        safe_prob: f64,
        #[arg(long)]
        v_dagger: f64,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Aggregate the summaries found in a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn load(path: Option<&PathBuf>, family: Family) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(family, 0, if family == Family::Goldilocks { 1 } else { 100 }),
    };
    config.family = family;
    Ok(config)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn print_summary(s: &RunSummary) -> Result<()> {
    print_json(s)?;
    eprintln!(
        "{}: {}/{} applicable checks passed ({} rows) in {:.2?}",
        s.family.name(),
        s.passed,
        s.applicable,
        s.checks,
        s.wall_time
    );
    Ok(())
}

#[derive(Serialize)]
struct SearchEntry {
    trial: u64,
    digest: String,
    result: GoldilocksResult,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify {
            family,
            config,
            trials,
            seed,
            out,
        } => {
            let family = match family {
                VerifyFamily::Thm1 => Family::Thm1,
                VerifyFamily::Thm2 => Family::Thm2,
                VerifyFamily::Lemmas => Family::Lemmas,
                VerifyFamily::Protocols => Family::Protocols,
            };
            let mut c = load(config.as_ref(), family)?;
            c.trials = trials.unwrap_or(c.trials);
            c.seed = seed.unwrap_or(c.seed);
            c.out_dir = out.or(c.out_dir);
            let s = run_experiment(&c)?;
            print_summary(&s)?;
            Ok(s.all_passed())
        }
        Command::Curve {
            config,
            lambda_min,
            lambda_max,
            points,
            out,
            ..
        } => {
            let mut c = load(config.as_ref(), Family::Goldilocks)?;
            c.lambdas = log_lambda_grid(lambda_min, lambda_max, points)?;
            c.out_dir = Some(out);
            let s = run_experiment(&c)?;
            print_summary(&s)?;
            Ok(s.all_passed())
        }
        Command::Search { config, k_bits, .. } => {
            let c = load(config.as_ref(), Family::Goldilocks)?;
            let g = &c.goldilocks;
            let k = k_bits.unwrap_or(g.k_bits);
            let mut entries = Vec::new();
            for trial in 0..c.trials as u64 {
                let prior = gen_goldilocks_instance(c.seed, trial, g)?;
                let result = goldilocks_search(&prior, k, &g.eta_grid, &c.lambdas, &g.families)?;
                entries.push(SearchEntry {
                    trial,
                    digest: instance_digest(&prior),
                    result,
                });
            }
            print_json(&entries)?;
            Ok(entries.iter().all(|e| !e.result.applicable || e.result.found))
        }
        Command::Demo {
            n,
            safe_prob,
            v_dagger,
            epsilon,
            ..
        } => {
            let d = safe_set_information_demo(n, safe_prob, v_dagger, epsilon)?;
            print_json(&d)?;
            Ok((d.mutual_information - d.expected_log_ratio).abs() <= 1e-9)
        }
        Command::Report { input } => {
            let r = aggregate(&input)?;
            print_json(&r)?;
            Ok(r.all_passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
