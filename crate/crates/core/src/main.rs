use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use delay_heat::cli_io::{parse_config, resolve_output_dir, run, Experiment, Subcommand, OUT_DIR_ENV};
use delay_heat::Error;

#[derive(Parser, Debug)]
#[command(
    name = "delay-heat",
    version,
    about = "Solvers and experiments for heat equations with constant delay"
)]
enum Cli {
    /// Delayed exponential curves.
    DelayedExp(Common),
    /// Scalar delay ODE, closed form against the method of steps.
    Ode(Common),
    /// Modal solution of the delayed heat equation.
    Heat(Common),
    /// Decay certificate and optional energy simulation.
    Stability(Common),
    /// Characteristic roots of the regularized problems.
    Illposed(Common),
    /// Laser heating of a thin gold film.
    Laser {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        modes: Option<usize>,
        /// Horizon in seconds.
        #[arg(long)]
        horizon: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (sub, common) = match &cli {
        Cli::DelayedExp(c) => (Subcommand::DelayedExp, c),
        Cli::Ode(c) => (Subcommand::Ode, c),
        Cli::Heat(c) => (Subcommand::Heat, c),
        Cli::Stability(c) => (Subcommand::Stability, c),
        Cli::Illposed(c) => (Subcommand::Illposed, c),
        Cli::Laser { common, .. } => (Subcommand::Laser, common),
    };
    let text =
        fs::read_to_string(&common.config).map_err(|e| Error::Config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text, sub)?;
    cfg.output_dir = resolve_output_dir(common.out.as_deref());
    if let (
        Cli::Laser {
            eps, modes, horizon, ..
        },
        Experiment::Laser(s),
    ) = (&cli, &mut cfg.experiment)
    {
        if eps.is_some() {
            s.eps = *eps;
        }
        if let Some(m) = modes {
            s.modes = *m;
        }
        if let Some(h) = horizon {
            s.horizon = *h;
        }
    }
    for path in run(&cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
