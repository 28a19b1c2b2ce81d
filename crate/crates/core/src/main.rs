use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coop_bandit::experiment::{describe, run_experiment, write_outputs, ExperimentConfig, Mode};
use coop_bandit::Error;

#[derive(Parser)]
#[command(name = "coop-bandit", version, about = "Cooperative multi-agent bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config describes and write its CSV outputs.
    Run(Common),
    /// Print graph statistics, bound preconditions and bound values.
    Describe(Common),
    /// Run the config in gamma-sweep mode.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<u32>,
    /// 200 agents and 100 replicates.
    #[arg(long)]
    paper_scale: bool,
}

fn load(args: &Common) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if args.paper_scale {
        cfg.apply_large_scale();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<(), Error> {
    let out = run_experiment(cfg)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    for path in write_outputs(&out, Path::new(&dir))? {
        println!("wrote {}", path.display());
    }
    for alg in out.table.algorithms() {
        let row = out.table.last(alg).expect("non-empty series");
        println!(
            "{alg}: {}={} mean_regret={:.3} ci=[{:.3}, {:.3}]",
            out.table.axis.column(),
            row.x,
            row.mean_regret,
            row.ci_lo,
            row.ci_hi
        );
    }
    let violations = out.bounds.iter().filter(|b| b.contained() == Some(false)).count();
    if violations > 0 {
        println!("warning: {violations} runs exceed their upper bound");
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => run(&load(&args)?),
        Command::Sweep(args) => {
            let mut cfg = load(&args)?;
            cfg.mode = Mode::GammaSweep;
            for a in &mut cfg.algorithms {
                a.gamma = None;
            }
            run(&cfg)
        }
        Command::Describe(args) => {
            print!("{}", describe(&load(&args)?)?.text);
            Ok(())
        }
    }
}

/// One line, `error kind=<kind> [key=<key>] message="<text>"`.
fn error_line(err: &Error) -> String {
    let (kind, key) = match err {
        Error::Config { key, .. } => ("config", Some(key.as_str())),
        Error::Parse { .. } => ("parse", None),
        Error::InvalidParameter { name, .. } => ("parameter", Some(*name)),
        Error::Precondition(_) => ("precondition", None),
        Error::Io(_) | Error::Csv(_) => ("io", None),
        _ => ("runtime", None),
    };
    let message = err.to_string().replace('"', "'");
    match key {
        Some(k) => format!("error kind={kind} key={k} message=\"{message}\""),
        None => format!("error kind={kind} message=\"{message}\""),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            match err {
                Error::Config { .. } | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
