use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use raman_battery_cli::config::{format_report, RunConfig};
use raman_battery_cli::figures::{self, Fig2Options, OpenFigOptions};
use raman_battery_cli::sweep::SweepConfig;
use raman_battery_cli::table::{self, Table};
use raman_battery_cli::CliResult;

#[derive(Parser)]
#[command(name = "raman-battery", version, about = "Quantum battery charging through a Raman transition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol from a JSON config and print the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter of a base config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output`; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gain and efficiency against xi at two temperatures.
    Fig2 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 121)]
        points: usize,
    },
    /// Gain against temperature for several decay rates.
    Fig3 {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        open: OpenArgs,
    },
    /// Efficiency against temperature for several decay rates.
    Fig4 {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        open: OpenArgs,
    },
    /// Print the default run config as JSON.
    PrintConfig,
}

#[derive(clap::Args)]
struct OpenArgs {
    /// Decay rates in 1/s (comma separated).
    #[arg(long, value_delimiter = ',')]
    gamma0: Option<Vec<f64>>,
    /// Reduced temperatures (comma separated).
    #[arg(long, value_delimiter = ',')]
    tbar: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
}

impl OpenArgs {
    fn options(&self) -> OpenFigOptions {
        let mut o = OpenFigOptions { n_max: self.n_max, ..OpenFigOptions::default() };
        if let Some(g) = &self.gamma0 {
            o.gamma0 = g.clone();
        }
        if let Some(t) = &self.tbar {
            o.tbars = t.clone();
        }
        o
    }
}

fn emit(t: &Table, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => t.write_path(path),
        None => t.write_to(std::io::stdout().lock()),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let run = cfg.protocol_run()?;
            let report = cfg.execute()?;
            print!("{}", format_report(&cfg, &run, &report));
            if let Some(path) = out {
                let mut t = Table::new(&table::REPORT_COLUMNS);
                t.rows.push(table::report_cells(&report, table::DEFAULT_PRECISION));
                t.write_path(&path)?;
            }
        }
        Command::Sweep { config, out } => {
            let sweep = SweepConfig::from_path(&config)?;
            let rows = sweep.run()?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            emit(&sweep.table(&rows), out.as_ref().or(sweep.output.as_ref()))?;
            if failed > 0 {
                eprintln!("{failed} of {} sweep points did not pass; see the status column", rows.len());
            }
        }
        Command::Fig2 { out, points } => {
            let opts = Fig2Options { points, ..Fig2Options::default() };
            let rows = figures::fig2_rows(&opts);
            figures::fig2_table(&rows, opts.precision).write_path(&out)?;
        }
        Command::Fig3 { out, open } => {
            let opts = open.options();
            figures::fig3_table(&figures::open_rows(&opts), opts.precision).write_path(&out)?;
        }
        Command::Fig4 { out, open } => {
            let opts = open.options();
            figures::fig4_table(&figures::open_rows(&opts), opts.precision).write_path(&out)?;
        }
        Command::PrintConfig => {
            let json = serde_json::to_string_pretty(&RunConfig::resolved_defaults()).expect("config serialises");
            writeln!(std::io::stdout(), "{json}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(1);
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
