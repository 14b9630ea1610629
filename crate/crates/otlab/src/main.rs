use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otlab::{render_artifact, run, sweep, thread_cap, CliError, ExperimentConfig, Param};

/// Optimal-transport regularity experiments.
///
/// Exit codes: 0 success, 2 parameter error, 3 solver failure, 4 I/O error.
#[derive(Parser, Debug)]
#[command(name = "otlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment described by a flat JSON config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render `diagram.json` or `samples.json` from a run as SVG.
    Render {
        artifact: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Sweep members run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cap = thread_cap()?;
    if let Some(k) = cap {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match cli.command {
        Command::Run { config, out_dir } => {
            let mut c = ExperimentConfig::load(&config)?;
            if out_dir.is_some() {
                c.output_dir = out_dir;
            }
            let m = run(&c)?;
            println!("{}: {} files in {}", m.experiment, m.files.len(), c.resolved()?.output_dir().display());
            println!("{}", serde_json::to_string_pretty(&m.summary).unwrap_or_default());
        }
        Command::Render { artifact, out } => {
            let svg = render_artifact(&artifact)?;
            std::fs::write(&out, svg).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        }
        Command::Sweep {
            config,
            param,
            values,
            jobs,
        } => {
            let c = ExperimentConfig::load(&config)?;
            let p = Param::parse(&param)?;
            let jobs = cap.map_or(jobs, |k| jobs.min(k));
            let m = sweep(&c, p, &values, jobs)?;
            for member in &m.members {
                println!("{}={} -> {}", m.param, member.value, member.output_dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
