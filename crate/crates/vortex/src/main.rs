use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vortex::{commands, default_output_dir, parse_config, CliError};
use vortex_core::grid::FarFieldFlow;

#[derive(Parser)]
#[command(name = "vortex", version, about = "Exterior-domain vorticity simulations")]
struct Cli {
    /// Worker threads for mode-parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress and warnings to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario; outputs go below --output or $VORTEX_OUTPUT_DIR.
    Run {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Relative L² discrepancy of snapshot B against snapshot A.
    Compare { a: PathBuf, b: PathBuf },
    /// Project a snapshot onto the no-slip manifold.
    Project {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vx: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vy: f64,
    },
    /// Print the moment vector and manifold residual of a snapshot.
    Moments {
        snapshot: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vx: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vy: f64,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, output } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(&config, e))?;
            let cfg = parse_config(&text)?;
            let dir = output.unwrap_or_else(default_output_dir);
            let report = vortex::run(&cfg, &dir)?;
            println!(
                "{} steps to t = {}; diagnostics {}; {} snapshots; manifold residual {:.3e}",
                report.steps,
                report.final_time,
                report.diagnostics_path.display(),
                report.snapshots.len(),
                report.final_diagnostics.manifold_residual
            );
        }
        Command::Compare { a, b } => {
            print!(
                "{}",
                commands::format_discrepancy(&commands::compare_snapshots(&a, &b)?)
            );
        }
        Command::Project { input, output, vx, vy } => {
            let r = commands::project(&input, &output, FarFieldFlow::new(vx, vy))?;
            println!("manifold_residual,{r:.16e}");
        }
        Command::Moments { snapshot, vx, vy } => {
            print!("{}", commands::moments_report(&snapshot, FarFieldFlow::new(vx, vy))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
