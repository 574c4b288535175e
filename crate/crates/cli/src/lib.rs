//! Command-line front end for `microswim-core`.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use commands::{Options, Outcome, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "microswim", version, about = "Path-following simulations for dipole-driven microswimmers")]
pub struct Cli {
    /// Directory for CSV, manifest and plot files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_plots: bool,

    /// Run every input file in this directory (`*.cfg`, or `*.trs` for `trs`).
    #[arg(long, global = true, value_name = "DIR")]
    pub batch: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write the trajectory.
    Simulate { config: Option<PathBuf> },
    /// Evaluate the stability conditions for a scenario's gains.
    StabilityCheck { config: Option<PathBuf> },
    /// Solve `min ½uᵀdiag(q1,q2)u + gᵀu s.t. |u| ≤ radius`.
    #[command(allow_negative_numbers = true)]
    Trs {
        /// Compare against a brute-force polar grid.
        #[arg(long)]
        oracle: bool,
        #[arg(value_names = ["Q1", "Q2", "G1", "G2", "RADIUS"])]
        values: Vec<f64>,
    },
    /// Sweep initial-position offsets and report trajectory deviations.
    Continuity {
        config: Option<PathBuf>,
        /// Comma-separated offsets in meters.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
}

fn inputs(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn run_one(cli: &Cli, opts: &Options, input: Option<&Path>) -> Outcome {
    let need = |what: &str| Outcome {
        code: EXIT_CONFIG,
        stdout: String::new(),
        stderr: format!("missing {what} (or use --batch DIR)\n"),
    };
    match &cli.command {
        Command::Simulate { config } => match input.or(config.as_deref()) {
            Some(c) => commands::simulate(c, opts),
            None => need("config file"),
        },
        Command::StabilityCheck { config } => match input.or(config.as_deref()) {
            Some(c) => commands::stability_check(c),
            None => need("config file"),
        },
        Command::Continuity { config, deltas } => match input.or(config.as_deref()) {
            Some(c) => commands::continuity(c, deltas.as_deref(), opts),
            None => need("config file"),
        },
        Command::Trs { oracle, values } => match input {
            Some(file) => match commands::read_trs_file(file) {
                Ok(v) => commands::trs(&v, *oracle),
                Err(e) => Outcome {
                    code: EXIT_CONFIG,
                    stdout: String::new(),
                    stderr: e + "\n",
                },
            },
            None => commands::trs(values, *oracle),
        },
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate { .. } => "simulate",
        Command::StabilityCheck { .. } => "stability",
        Command::Trs { .. } => "trs",
        Command::Continuity { .. } => "continuity",
    }
}

/// Run the parsed command; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let opts = Options {
        out: cli.out.clone(),
        plots: !cli.no_plots,
    };
    let Some(dir) = &cli.batch else {
        let o = run_one(cli, &opts, None);
        print!("{}", o.stdout);
        eprint!("{}", o.stderr);
        return o.code;
    };

    let ext = if matches!(cli.command, Command::Trs { .. }) { "trs" } else { "cfg" };
    let files = match inputs(dir, ext) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("cannot create {}: {e}", cli.out.display());
        return commands::EXIT_ABORTED;
    }
    let results: Vec<(PathBuf, Outcome)> = files
        .par_iter()
        .map(|f| (f.clone(), run_one(cli, &opts, Some(f))))
        .collect();
    let mut worst = 0;
    for (file, o) in &results {
        let report = cli.out.join(format!("{}_{}.txt", commands::stem(file), command_name(&cli.command)));
        let _ = fs::write(&report, format!("{}{}", o.stdout, o.stderr));
        println!("{}: exit {} ({})", file.display(), o.code, report.display());
        eprint!("{}", o.stderr);
        worst = worst.max(o.code);
    }
    worst
}
