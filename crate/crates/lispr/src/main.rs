use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use lispr::experiment::{
    compare_curves, export_heatmap, run, sweep, HeatmapTable, LearningCurve, RunConfig,
    SweepConfig,
};
use lispr::oracle::checks::{all_asserted_pass, run_suite, OracleReport, Suite};
use lispr::proxy::ProxyKind;

#[derive(Parser)]
#[command(name = "lispr", version, about = "Tabular laboratory for policy transfer via learned initiation sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured training run and write its artifacts.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's proxy reward
        /// (oracle, diff, scaled-g, scaled-next-g, indicator).
        #[arg(long, value_parser = ProxyKind::from_str)]
        proxy: Option<ProxyKind>,
    },
    /// Expand a parameter grid and run every point.
    Sweep {
        /// JSON sweep configuration: a base run plus per-field value lists.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; each point lands under runs/<label>/.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact numerical checks and report pass/fail per property.
    Verify {
        /// core, proxies, diagnostics, or all.
        #[arg(long, default_value = "all", value_parser = Suite::from_str)]
        suite: Suite,
        /// Seed range a..b for the randomized tasks.
        #[arg(long, default_value = "0..100", value_parser = parse_range)]
        mdp_seed_range: Range<u64>,
        /// Also write the reports as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a run's learned tables onto the layout as CSV grids.
    Heatmap {
        /// Run directory holding meta.json and the learned tables.
        #[arg(long)]
        run: PathBuf,
        /// g (success predictor), v (behavior value), or qmax (learner).
        #[arg(long, value_parser = HeatmapTable::from_str)]
        table: HeatmapTable,
    },
    /// Summarize one learning curve against another.
    Compare {
        /// curve.csv of the first run (the numerator).
        curve_a: PathBuf,
        /// curve.csv of the second run.
        curve_b: PathBuf,
        /// Return level for the first-step-to-threshold readout.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
    },
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected 'a..b', got '{s}'"))?;
    let start: u64 = a.parse().map_err(|_| format!("bad range start '{a}'"))?;
    let end: u64 = b.parse().map_err(|_| format!("bad range end '{b}'"))?;
    if end < start {
        return Err(format!("range '{s}' runs backwards"));
    }
    Ok(start..end)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, out, seed, proxy } => {
            let mut config = RunConfig::from_file(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(proxy) = proxy {
                config.proxy = proxy;
            }
            let artifacts = run(&config, &out)?;
            let last = artifacts.curve.rows.last().expect("curve has a final row");
            println!(
                "{} {} on {}/{}: final mean return {:.4} (ci [{:.4}, {:.4}]) over {} repeats",
                config.algorithm,
                config.proxy,
                config.env,
                config.variant,
                last.mean_return,
                last.ci95_lo,
                last.ci95_hi,
                config.repeats
            );
            println!(
                "per-repeat finals: {}",
                artifacts
                    .meta
                    .final_returns
                    .iter()
                    .map(|r| format!("{r:.3}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            println!("artifacts in {}", artifacts.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out } => {
            let config = SweepConfig::from_file(&config)?;
            let outcome = sweep(&config, Some(&out))?;
            print!("{}", outcome.summary_csv);
            println!("artifacts in {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, mdp_seed_range, report } => {
            let reports = run_suite(suite, mdp_seed_range)?;
            print_reports(&reports);
            if let Some(path) = report {
                let mut file = fs::File::create(&path)?;
                for r in &reports {
                    writeln!(file, "{}", serde_json::to_string(r)?)?;
                }
                println!("wrote {} report lines to {}", reports.len(), path.display());
            }
            let failed_asserted =
                reports.iter().filter(|r| r.asserted && !r.pass).count();
            if all_asserted_pass(&reports) {
                println!("all asserted checks pass ({} reports)", reports.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{failed_asserted} asserted check(s) failed");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Heatmap { run, table } => {
            let export = export_heatmap(&run, table)?;
            println!("wrote {}", export.value_path.display());
            if let Some(path) = export.membership_path {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { curve_a, curve_b, threshold } => {
            let a = LearningCurve::read_csv(&curve_a)?;
            let b = LearningCurve::read_csv(&curve_b)?;
            let summary = compare_curves(&a, &b, threshold)?;
            let show = |step: Option<u64>| {
                step.map_or("never".to_string(), |s| s.to_string())
            };
            println!(
                "A {}: auc {:.2}, first step to {:.2}: {}",
                curve_a.display(),
                summary.auc_a,
                threshold,
                show(summary.first_step_a)
            );
            println!(
                "B {}: auc {:.2}, first step to {:.2}: {}",
                curve_b.display(),
                summary.auc_b,
                threshold,
                show(summary.first_step_b)
            );
            println!("auc ratio A/B: {:.4}", summary.auc_ratio);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &d in &summary.mean_diff {
                lo = lo.min(d);
                hi = hi.max(d);
            }
            println!(
                "mean-return difference A-B across {} steps: min {:.4}, max {:.4}, max abs {:.4}",
                summary.steps.len(),
                lo,
                hi,
                summary.max_abs_diff()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_reports(reports: &[OracleReport]) {
    println!(
        "{:<26} {:<16} {:>6} {:>6} {:>12} {:>10}  note",
        "check", "task", "gamma", "status", "violation", "tolerance"
    );
    for r in reports {
        let status = if r.pass { "pass" } else { "FAIL" };
        let note = if r.asserted { "" } else { "diagnostic" };
        println!(
            "{:<26} {:<16} {:>6.3} {:>6} {:>12.3e} {:>10.1e}  {}",
            r.check, r.mdp, r.gamma, status, r.max_violation, r.tolerance, note
        );
    }
}
