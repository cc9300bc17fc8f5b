use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaussify_cli::commands::{cmd_predict, cmd_run, cmd_sweep, cmd_wigner, Output};
use gaussify_cli::config::Format;
use gaussify_cli::{CliError, ProtocolConfig};

#[derive(Parser)]
#[command(name = "gaussify", version, about = "Iterated Gaussification of two-mode states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate one input state and tabulate measures per step.
    Run(Common),
    /// Repeat `run` over a parameter axis.
    Sweep(Common),
    /// Wigner function of a reduced iterate on a grid.
    Wigner(Common),
    /// Predicted Gaussian limit and the pure-convergence verdict.
    Predict(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load(common: &Common) -> Result<ProtocolConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ProtocolConfig::from_text(&text)?
        }
        None => ProtocolConfig::default(),
    };
    for pair in &common.set {
        cfg.set_pair(pair)?;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(f) = common.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    Ok(cfg)
}

fn execute(command: &Command) -> Result<(), CliError> {
    let (common, f): (_, fn(&ProtocolConfig) -> Result<Output, CliError>) = match command {
        Command::Run(c) => (c, cmd_run),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Wigner(c) => (c, cmd_wigner),
        Command::Predict(c) => (c, cmd_predict),
    };
    let cfg = load(common)?;
    let output = f(&cfg)?;
    // Render fully before touching the destination so failures leave no file.
    let mut buf = Vec::new();
    output.table.write(&cfg, &mut buf)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    if output.unphysical {
        return Err(CliError::Unphysical(
            "the B matrix yields a covariance violating the uncertainty relation".into(),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
