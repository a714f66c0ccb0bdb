//! `acvsim`: scenario runner for the attack-resilient following controller.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acvsim_core::detection_prior::AttackSearch;
use acvsim_core::harness::config::seed_override;
use acvsim_core::harness::experiments::{attack_search, mab_eval, mab_eval_csv, reproduce};
use acvsim_core::harness::output::{
    arm_frequency_csv, mab_csv, summary_json, trace_csv, write_file,
};
use acvsim_core::harness::{run_scenario, Scenario, ScenarioConfig};
use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "acvsim",
    version,
    about = "Car-following simulator with sensor-attack detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace CSV and summary JSON.
    Simulate {
        file: PathBuf,
        /// Output directory for files not named in the scenario.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Strongest stealthy constant injection on the spacing and speed sensors.
    AttackSearch {
        file: PathBuf,
        /// Per-sensor probability of passing the prior filter.
        #[arg(long)]
        min_stealth: f64,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Bandit statistics over several seeds.
    MabEval {
        file: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a shipped preset and write plot-ready CSV.
    Reproduce {
        #[arg(value_enum)]
        name: Preset,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse and check a scenario file without running it.
    Validate { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig3,
    Fig5,
    Fig6,
    ResidualStats,
    Fig7,
    Fig9,
    Fig10,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::ResidualStats => "residual-stats",
            Preset::Fig7 => "fig7",
            Preset::Fig9 => "fig9",
            Preset::Fig10 => "fig10",
        }
    }
}

fn load(file: &Path) -> Result<(ScenarioConfig, Scenario)> {
    let cfg = ScenarioConfig::load(file)?;
    let s = cfg
        .resolve_with_env()
        .with_context(|| format!("{}", file.display()))?;
    Ok((cfg, s))
}

fn stem(s: &Scenario) -> String {
    if s.name.is_empty() {
        "run".into()
    } else {
        s.name.clone()
    }
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<()> {
    write_file(&path, bytes)?;
    log::info!("wrote {}", path.display());
    println!("{}", path.display());
    Ok(())
}

fn simulate(file: &Path, out: &Path) -> Result<()> {
    let (cfg, s) = load(file)?;
    let tr = run_scenario(&s)?;
    let stem = stem(&s);
    let o = &cfg.output;
    write(
        o.trace_csv
            .clone()
            .unwrap_or_else(|| out.join(format!("{stem}.csv"))),
        &trace_csv(&tr),
    )?;
    write(
        o.summary_json
            .clone()
            .unwrap_or_else(|| out.join(format!("{stem}.json"))),
        &summary_json(&tr),
    )?;
    if !tr.mab.is_empty() {
        let p = o
            .mab_csv
            .clone()
            .unwrap_or_else(|| out.join(format!("{stem}_mab.csv")));
        write(p, &mab_csv(&tr.mab, tr.n_l))?;
    }
    Ok(())
}

fn search(file: &Path, min_stealth: f64, restarts: usize) -> Result<()> {
    let (_, s) = load(file)?;
    let settings = AttackSearch {
        restarts,
        seed: s.seed,
        ..AttackSearch::default()
    };
    let a = attack_search(&s, min_stealth, &settings)?;
    println!("{}", serde_json::to_string_pretty(&a)?);
    Ok(())
}

fn eval(file: &Path, runs: usize, out: &Path) -> Result<()> {
    let (_, s) = load(file)?;
    let (e, _) = mab_eval(&s, runs)?;
    let stem = stem(&s);
    let plays: Vec<(String, u64)> = e.arm_plays.iter().map(|(k, v)| (k.clone(), *v)).collect();
    write(
        out.join(format!("{stem}_regret_curve.csv")),
        &mab_eval_csv(&e),
    )?;
    write(
        out.join(format!("{stem}_arm_frequency.csv")),
        &arm_frequency_csv(&plays),
    )?;
    let mut json = serde_json::to_vec_pretty(&e)?;
    json.push(b'\n');
    write(out.join(format!("{stem}_mab_eval.json")), &json)?;
    eprintln!(
        "modal arms {:?}, growth ratio {:.4}, {}/{} runs under bound",
        e.modal_histogram,
        e.growth_ratio(),
        e.runs_under_bound(),
        e.runs
    );
    Ok(())
}

fn repro(name: Preset, out: &Path) -> Result<()> {
    let r = reproduce(name.name(), seed_override()?)?;
    for (file, bytes) in &r.files {
        write(out.join(file), bytes)?;
    }
    for n in &r.notes {
        eprintln!("{n}");
    }
    Ok(())
}

fn validate(file: &Path) -> Result<()> {
    let (_, s) = load(file)?;
    println!(
        "{}: ok ({} steps, {} injections)",
        file.display(),
        s.steps(),
        s.attack.injections.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    let res = match &cli.command {
        Command::Simulate { file, out } => simulate(file, out),
        Command::AttackSearch {
            file,
            min_stealth,
            restarts,
        } => search(file, *min_stealth, *restarts),
        Command::MabEval { file, runs, out } => eval(file, *runs, out),
        Command::Reproduce { name, out } => repro(*name, out),
        Command::Validate { file } => validate(file),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
