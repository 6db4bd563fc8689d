use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use clickdyn_cli::{execute, Command, Invocation, Overrides};

/// Static and dynamic analyses of the click-mechanism oscillator.
#[derive(Parser, Debug)]
#[command(name = "clickdyn", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    m0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega0: Option<f64>,
    /// Output directory [default: clickdyn-out/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set hbm.epsilon=0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Keep files written before a failure.
    #[arg(long)]
    keep_partial: bool,
    /// Write a gnuplot script next to every CSV.
    #[arg(long)]
    plot_scripts: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let inv = Invocation {
        command: args.command,
        config_file: args.config,
        overrides: Overrides {
            alpha: args.alpha,
            beta: args.beta,
            gamma: args.gamma,
            kappa: args.kappa,
            xi: args.xi,
            m0: args.m0,
            omega0: args.omega0,
            seed: args.seed,
            set: args.set,
        },
        out: args.out,
        jobs: args.jobs,
        keep_partial: args.keep_partial,
        plot_scripts: args.plot_scripts,
    };
    match execute(&inv) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
