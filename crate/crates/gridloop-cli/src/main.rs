//! gridloop command line: full scenarios and single loop families.
//!
//! Exit codes: 0 success, 1 infeasibility, 2 configuration or usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridloop_core::harness::{load_scenario, run_scenario, HarnessError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "gridloop",
    version,
    about = "Multi-timescale grid control-loop simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario configuration file (TOML sections).
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    /// Output directory for trace and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the run summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full scenario with every enabled loop.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Parallel worker threads for multi-scenario batches.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Economic dispatch / unit commitment / scenario dispatch only.
    Dispatch(CommonArgs),
    /// Two-area AGC with watermark detection only.
    Agc(CommonArgs),
    /// Battery regulation-market participation only.
    Bes(CommonArgs),
    /// EV charging coordination only.
    Ev(CommonArgs),
    /// EV charging-station placement only.
    Evcs(CommonArgs),
    /// Two-layer thermal load control only.
    Demand(CommonArgs),
    /// Hierarchical microgrid control only.
    Microgrid(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { common, jobs } => run_batch(&common, jobs, None),
        Command::Dispatch(c) => run_batch(&c, 1, Some("dispatch")),
        Command::Agc(c) => run_batch(&c, 1, Some("agc")),
        Command::Bes(c) => run_batch(&c, 1, Some("bes")),
        Command::Ev(c) => run_batch(&c, 1, Some("ev")),
        Command::Evcs(c) => run_batch(&c, 1, Some("evcs")),
        Command::Demand(c) => run_batch(&c, 1, Some("demand")),
        Command::Microgrid(c) => run_batch(&c, 1, Some("microgrid")),
    };
    ExitCode::from(code)
}

/// Keeps only the requested loop family enabled.
fn filter_family(cfg: &mut ScenarioConfig, family: &str) {
    let loops = &mut cfg.loops;
    if family != "agc" {
        loops.agc = None;
    }
    if family != "dispatch" {
        loops.dispatch = None;
    }
    if family != "bes" {
        loops.bes = None;
    }
    if family != "ev" {
        loops.ev = None;
    }
    if family != "evcs" {
        loops.evcs = None;
    }
    if family != "demand" {
        loops.demand = None;
    }
    if family != "microgrid" {
        loops.microgrid = None;
    }
}

fn family_present(cfg: &ScenarioConfig, family: &str) -> bool {
    match family {
        "agc" => cfg.loops.agc.is_some(),
        "dispatch" => cfg.loops.dispatch.is_some(),
        "bes" => cfg.loops.bes.is_some(),
        "ev" => cfg.loops.ev.is_some(),
        "evcs" => cfg.loops.evcs.is_some(),
        "demand" => cfg.loops.demand.is_some(),
        "microgrid" => cfg.loops.microgrid.is_some(),
        _ => false,
    }
}

fn exit_code_for(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Config(_) | HarnessError::Io(_) => 2,
        HarnessError::Loop { .. } | HarnessError::Infeasible(_) => 1,
    }
}

fn run_one(
    path: &Path,
    common: &CommonArgs,
    family: Option<&str>,
    subdir: bool,
) -> Result<String, (u8, String)> {
    let mut cfg = load_scenario(path).map_err(|e| (exit_code_for(&e), e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seeds.override_all(seed);
    }
    if let Some(family) = family {
        filter_family(&mut cfg, family);
        if !family_present(&cfg, family) {
            return Err((
                2,
                format!(
                    "scenario {} has no [loops.{family}] section",
                    path.display()
                ),
            ));
        }
    }

    let artifacts = run_scenario(&cfg).map_err(|e| (exit_code_for(&e), e.to_string()))?;

    if let Some(out) = &common.out {
        let dir = if subdir {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "scenario".to_string());
            out.join(stem)
        } else {
            out.clone()
        };
        artifacts
            .write_to(&dir)
            .map_err(|e| (exit_code_for(&e), e.to_string()))?;
    }

    let mut text = artifacts.summary.render();
    for headline in headlines(&artifacts.files) {
        text.push_str(&headline);
        text.push('\n');
    }
    Ok(text)
}

/// One-line highlights pulled from the family CSVs.
fn headlines(files: &[gridloop_core::harness::OutputFile]) -> Vec<String> {
    let mut out = Vec::new();
    for f in files {
        match f.name.as_str() {
            "dispatch.csv" => {
                if let Some(cost) = f
                    .contents
                    .lines()
                    .nth(1)
                    .and_then(|l| l.split(',').nth(5))
                    .and_then(|s| s.parse::<f64>().ok())
                {
                    out.push(format!("dispatch: total cost {cost:.2} $"));
                }
            }
            "bes.csv" => {
                if let Some(line) = f.contents.lines().last() {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.first() == Some(&"summary") && fields.len() == 4 {
                        let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
                        out.push(format!(
                            "bes: capacity {:.4} MW, score {:.4}, revenue {:.2} $",
                            parse(fields[1]),
                            parse(fields[2]),
                            parse(fields[3])
                        ));
                    }
                }
            }
            "evcs.csv" => {
                if let Some(line) = f.contents.lines().last() {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.first() == Some(&"total_cost") && fields.len() >= 2 {
                        if let Ok(v) = fields[1].parse::<f64>() {
                            out.push(format!("evcs: total cost {v:.2} $"));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn run_batch(common: &CommonArgs, jobs: usize, family: Option<&str>) -> u8 {
    let multi = common.scenario.len() > 1;
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<String, (u8, String)>>> =
        (0..common.scenario.len()).map(|_| None).collect();

    std::thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> =
            (0..common.scenario.len()).fold(vec![Vec::new(); jobs], |mut acc, i| {
                acc[i % jobs].push(i);
                acc
            });
        let mut handles = Vec::new();
        for chunk in chunks {
            let paths = &common.scenario;
            handles.push(scope.spawn(move || {
                chunk
                    .into_iter()
                    .map(|i| (i, run_one(&paths[i], common, family, multi)))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });

    let mut worst = 0u8;
    for (path, result) in common.scenario.iter().zip(results) {
        match result.expect("every scenario ran") {
            Ok(summary) => {
                if !common.quiet {
                    if multi {
                        println!("=== {} ===", path.display());
                    }
                    print!("{summary}");
                }
            }
            Err((code, message)) => {
                eprintln!("{}: {message}", path.display());
                worst = worst.max(code);
            }
        }
    }
    worst
}
