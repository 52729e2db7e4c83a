//! `liouville-lab`: build, classify, integrate and compare metrics with
//! quadratic integrals from JSON family configs.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Common, Failure, FlowArgs, Outcome};

#[derive(Parser, Debug)]
#[command(name = "liouville-lab", version, about = "Metrics with integrable geodesic flows on the torus")]
struct Cli {
    /// Bracket-residual tolerance (overrides the config).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Grid size per axis (overrides the config).
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the JSON report and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave timestamp and timing out of the report.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct the family and run its certificates.
    Build { config: String },
    /// Classify the integral on a grid.
    Classify { config: String },
    /// Integrate the geodesic flow and report drifts.
    Flow {
        config: String,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        /// End time.
        #[arg(long = "T")]
        t_end: Option<f64>,
        /// CSV file of x,y,px,py rows.
        #[arg(long, conflicts_with = "random")]
        ic: Option<String>,
        /// Number of seeded random initial conditions.
        #[arg(long)]
        random: Option<usize>,
    },
    /// Build a Riemannian metric geodesically equivalent to a Liouville metric.
    Equivalent { config: String },
    /// Rank of the candidate integrals and curvature statistics.
    Super { config: String },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Build { .. } => "build",
            Command::Classify { .. } => "classify",
            Command::Flow { .. } => "flow",
            Command::Equivalent { .. } => "equivalent",
            Command::Super { .. } => "super",
        }
    }

    fn config(&self) -> &str {
        match self {
            Command::Build { config }
            | Command::Classify { config }
            | Command::Flow { config, .. }
            | Command::Equivalent { config }
            | Command::Super { config } => config,
        }
    }
}

fn workers() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("LIOUVILLE_LAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n.min(available),
        _ => available,
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let common = Common { tol: cli.tol, grid: cli.grid, seed: cli.seed, workers: workers() };
    let cfg = commands::load_config(cli.command.config(), &common)?;
    match &cli.command {
        Command::Build { .. } => commands::build(&cfg, &common),
        Command::Classify { .. } => commands::classify(&cfg, &common),
        Command::Flow { t0, t_end, ic, random, .. } => {
            commands::flow(&cfg, &common, &FlowArgs { t0: *t0, t_end: *t_end, ic: ic.clone(), random: *random })
        }
        Command::Equivalent { .. } => commands::equivalent(&cfg, &common),
        Command::Super { .. } => commands::superintegrability(&cfg, &common),
    }
}

fn write_outputs(dir: &PathBuf, name: &str, text: &str, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{name}_report.json")), text)?;
    for (file, contents) in files {
        std::fs::write(dir.join(file), contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    let mut outcome = match run(&cli) {
        Ok(o) => o,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    outcome.report.insert("passed".into(), json!(outcome.passed));
    if !cli.no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        outcome.report.insert("timestamp".into(), json!(secs));
        outcome.report.insert("timing_seconds".into(), report::num(start.elapsed().as_secs_f64()));
    }
    let text = report::to_json(&Value::Object(outcome.report));
    print!("{text}");
    if let Some(dir) = &cli.out {
        if let Err(e) = write_outputs(dir, cli.command.name(), &text, &outcome.files) {
            eprintln!("error: {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
