use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use periodic_dividends::simulator::RNG_NAME;
use periodic_dividends_cli::commands::{self, Report, SweepOver};
use periodic_dividends_cli::config::{ExperimentConfig, Loaded};
use periodic_dividends_cli::error::{CliError, Result};
use periodic_dividends_cli::output::{plot_script, write_csv};
use serde_json::json;

/// Optimal periodic dividend barriers for phase-type jump diffusions.
#[derive(Debug, Parser)]
#[command(name = "pdiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration; omitted blocks take Case 1 defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for `<command>.csv` and `meta.json`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Override `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write a gnuplot script next to the CSV.
    #[arg(long, global = true)]
    plot: bool,

    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Over {
    R,
    Rho,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the optimal barrier and print a summary.
    Solve,
    /// Optimal value curve and barrier-strategy values at alternative barriers.
    Curve,
    /// The barrier equation `f` (or `f̂`) over a grid of barriers.
    Fcurve,
    /// Verify the HJB variational inequality on a grid; exit 4 if it fails.
    Hjb,
    /// Compare analytic values with Monte Carlo estimates.
    Simulate,
    /// Optimal barriers and value curves over the decision rate or terminal payoff.
    Sweep {
        #[arg(long, value_enum, default_value_t = Over::R)]
        over: Over,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Curve => "curve",
            Command::Fcurve => "fcurve",
            Command::Hjb => "hjb",
            Command::Simulate => "simulate",
            Command::Sweep { .. } => "sweep",
        }
    }
}

fn load(cli: &Cli) -> Result<Loaded> {
    let mut loaded = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::load_str("", Path::new("<defaults>"))?,
    };
    if let Some(seed) = cli.seed {
        loaded.mc.seed = seed;
        loaded.config.mc.seed = seed;
    }
    Ok(loaded)
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(cli: &Cli, loaded: &Loaded, report: &Report) -> Result<()> {
    let name = cli.command.name();
    std::fs::create_dir_all(&cli.out).map_err(write_err(&cli.out))?;
    let csv_name = format!("{name}.csv");
    let csv_path = cli.out.join(&csv_name);
    let meta = vec![
        ("tool".to_string(), format!("pdiv {}", env!("CARGO_PKG_VERSION"))),
        ("command".to_string(), name.to_string()),
        ("config".to_string(), loaded.path.display().to_string()),
        ("config_sha256".to_string(), loaded.hash.clone()),
        ("seed".to_string(), loaded.mc.seed.to_string()),
    ];
    write_csv(&csv_path, &meta, &report.table)?;
    let mut outputs = vec![csv_name.clone()];
    if cli.plot {
        let gp = cli.out.join(format!("{name}.gp"));
        std::fs::write(&gp, plot_script(&csv_name, &report.table)).map_err(write_err(&gp))?;
        outputs.push(format!("{name}.gp"));
    }
    let manifest = json!({
        "tool": "pdiv",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": loaded.path.display().to_string(),
        "config_sha256": loaded.hash,
        "resolved_config": loaded.config,
        "seed": loaded.mc.seed,
        "rng": RNG_NAME,
        "outputs": outputs,
        "rows": report.table.rows.len(),
        "certified": report.certification_failure.is_none(),
        "results": report.results,
    });
    let meta_path = cli.out.join("meta.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&meta_path, text + "\n").map_err(write_err(&meta_path))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let Format::Csv = cli.format;
    let loaded = load(cli)?;
    let report = match cli.command {
        Command::Solve => commands::solve(&loaded)?,
        Command::Curve => commands::curve(&loaded)?,
        Command::Fcurve => commands::fcurve(&loaded)?,
        Command::Hjb => commands::hjb(&loaded)?,
        Command::Simulate => commands::simulate_cmd(&loaded)?,
        Command::Sweep { over } => commands::sweep(
            &loaded,
            match over {
                Over::R => SweepOver::R,
                Over::Rho => SweepOver::Rho,
            },
        )?,
    };
    emit(cli, &loaded, &report)?;
    if !cli.quiet {
        let mut stdout = std::io::stdout().lock();
        for line in &report.summary {
            if writeln!(stdout, "{line}").is_err() {
                break;
            }
        }
    }
    match report.certification_failure {
        Some(msg) => Err(CliError::Certification(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdiv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
