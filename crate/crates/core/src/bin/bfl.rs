use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bfl_core::config::ExperimentConfig;
use bfl_core::experiment::{cmd_convergence, cmd_identities, cmd_run, cmd_stability};
use bfl_core::report::{RunReport, Status};
use bfl_core::speed::SamplingOffset;
use bfl_core::BflError;

#[derive(Parser)]
#[command(name = "bfl", version, about = "Semi-discrete binormal curvature flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Offset {
    Node,
    Mid,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized check of the lattice identities.
    Identities {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evolve one experiment and write NAME.csv and NAME.json.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Spatial convergence study over dyadic refinements.
    Converge {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        levels: u32,
        #[arg(long, value_enum)]
        offset: Option<Offset>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// H¹ amplification of small perturbations.
    Stability {
        #[arg(short, long)]
        config: PathBuf,
        /// Comma-separated perturbation sizes, e.g. 1e-2,1e-3,1e-4.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn print_report(r: &RunReport) {
    if let Some(ids) = &r.identities {
        for i in &ids.results {
            println!(
                "{:<26} {:>5} trials  worst {:.3e}  {}",
                i.name,
                i.trials,
                i.worst,
                if i.pass { "ok" } else { "FAIL" }
            );
        }
    }
    if let Some(s) = &r.summary {
        println!("t = {}  steps = {}  dt = {:e}", s.final_time, s.steps, s.dt);
        println!("max unit drift   {:e}", s.max_unit_drift);
        println!("energy drift     {:e}", s.energy_drift);
        println!("min grad margin  {:e}", s.min_grad_margin);
        println!("min dual margin  {:e}", s.min_dual_margin);
        if let Some(e) = s.final_oracle_error {
            println!("oracle error     {e:e}");
        }
        if let Some(v) = s.peak_speed {
            println!("peak speed       {v}");
        }
        if let Some(d) = s.anchor_dispersion {
            println!("anchor dispersion {d:e}");
        }
        if let Some(d) = s.arc_length_drift {
            println!("arc-length drift {d:e}");
        }
    }
    for t in &r.convergence {
        println!("offset {:?} ({})", t.offset, t.reference);
        println!("{:>6} {:>12} {:>12} {:>8}", "nodes", "h", "error", "order");
        for row in &t.rows {
            let order = row.order.map(|o| format!("{o:.3}")).unwrap_or_default();
            println!("{:>6} {:>12.4e} {:>12.4e} {:>8}", row.nodes, row.h, row.error, order);
        }
    }
    if let Some(t) = &r.stability {
        println!("{:>10} {:>12} {:>12} {:>10}", "eps", "initial", "final", "ratio");
        for row in &t.rows {
            println!("{:>10.1e} {:>12.4e} {:>12.4e} {:>10.5}", row.eps, row.initial_distance, row.final_distance, row.ratio);
        }
        println!("spread {:.4}", t.spread);
    }
    for n in &r.notes {
        eprintln!("note: {n}");
    }
    if let Some(e) = &r.error {
        eprintln!("error: {e}");
    }
}

fn execute(cli: Cli) -> Result<RunReport, BflError> {
    let load = |p: &PathBuf| ExperimentConfig::load(p);
    match cli.command {
        Command::Identities { seed } => cmd_identities(seed),
        Command::Run { config, output } => cmd_run(&load(&config)?, output.as_deref()),
        Command::Converge {
            config,
            levels,
            offset,
            output,
        } => {
            let offset = offset.map(|o| match o {
                Offset::Node => SamplingOffset::Node,
                Offset::Mid => SamplingOffset::Midpoint,
            });
            cmd_convergence(&load(&config)?, levels, offset, output.as_deref())
        }
        Command::Stability { config, eps, output } => cmd_stability(&load(&config)?, &eps, output.as_deref()),
    }
}

fn main() -> ExitCode {
    // Usage errors share the configuration-error status so that 2 keeps meaning divergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::ConfigError.exit_code() as u8 } else { 0 });
        }
    };
    let code = match execute(cli) {
        Ok(report) => {
            print_report(&report);
            report.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            Status::of_error(&e).exit_code()
        }
    };
    ExitCode::from(code as u8)
}
