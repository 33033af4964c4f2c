use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inflap_cli::{parse_config, preset, run, write_manifest, ExperimentConfig, Status, OUT_DIR_ENV, PRESETS};

#[derive(Parser)]
#[command(name = "inflap", version, about = "Run infinity-Laplacian growth experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Inspect the bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run a bundled preset and apply its verdicts.
    Check {
        preset: String,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names with a one-line description.
    List,
}

#[derive(Args)]
struct RunOpts {
    /// Output directory; overrides the config and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the solver and the analysis.
    #[arg(long)]
    threads: Option<usize>,
    /// Force solver.deterministic = true.
    #[arg(long)]
    deterministic: bool,
}

fn out_dir(opts: &RunOpts, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.directory.clone()))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| Path::new("inflap-out").join(fallback))
}

fn fail_early(opts: &RunOpts, fallback: &str, reason: &str) -> ExitCode {
    eprintln!("error: {reason}");
    let dir = out_dir(opts, None, fallback);
    if let Err(err) = write_manifest(&dir, None, Status::Error, Some(reason), &[], &[]) {
        eprintln!("error: cannot write manifest in {}: {err}", dir.display());
    }
    ExitCode::from(1)
}

fn execute(text: &str, label: &str, opts: &RunOpts) -> ExitCode {
    if let Some(n) = opts.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail_early(opts, label, &format!("cannot configure {n} threads: {err}"));
        }
    }
    let mut cfg = match parse_config(text) {
        Ok(cfg) => cfg,
        Err(err) => return fail_early(opts, label, &err.to_string()),
    };
    if opts.deterministic {
        cfg.solver.deterministic = true;
    }
    let dir = out_dir(opts, Some(&cfg), &cfg.name);
    let outcome = run(&cfg, &dir);
    if let Some(res) = &outcome.results {
        for check in &cfg.analysis.checks {
            let v = res.verdict(*check).map_or("n/a", |v| if v { "pass" } else { "FAIL" });
            println!("{:<14} {v}", check.name());
        }
    }
    match &outcome.failure {
        Some(reason) if outcome.status == Status::Error => eprintln!("error: {reason}"),
        Some(reason) => println!("{reason}"),
        None => {}
    }
    println!("reports in {}", dir.display());
    ExitCode::from(outcome.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, opts } => match std::fs::read_to_string(&config) {
            Ok(text) => {
                let label = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
                execute(&text, &label, &opts)
            }
            Err(err) => fail_early(&opts, "run", &format!("cannot read {}: {err}", config.display())),
        },
        Command::Presets { action: PresetAction::List } => {
            for p in PRESETS {
                println!("{:<22} {}", p.name, p.description());
            }
            ExitCode::SUCCESS
        }
        Command::Check { preset: name, opts } => match preset(&name) {
            Some(p) => execute(p.text, p.name, &opts),
            None => {
                let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                fail_early(&opts, &name, &format!("unknown preset `{name}` (known: {})", known.join(", ")))
            }
        },
    }
}
