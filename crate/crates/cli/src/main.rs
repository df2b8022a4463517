use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use kbmano::agents::PolicyKind;
use kbmano::exec::Execution;
use kbmano::harness::{
    run_experiment, run_kbmano_scenario, sweep_csv, sweep_group_size, ExperimentConfig,
    SweepConfig,
};
use kbmano::mano::write_event_log;

#[derive(Parser)]
#[command(name = "kbmano", version, about = "Semantic-aware medium access and knowledge-base orchestration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Probability that a group member carries the group's semantic.
    #[arg(long)]
    p_share: Option<f64>,
    /// Slots per run.
    #[arg(long)]
    horizon: Option<u64>,
    /// Comma-separated policies (SAMA-D3QL, MA-D3QL, RND).
    #[arg(long, value_delimiter = ',')]
    policy: Option<Vec<PolicyKind>>,
    /// Run jobs one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl Overrides {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate policies on a built-in scenario or a TOML config.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Assisted efficiency ratio across sharing-group sizes and cell sizes.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        group_sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "6,8,10")]
        users: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Replay an orchestration scenario file and print its event log.
    Kbmano {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the log here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(out: Option<&PathBuf>, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
        }
        None => Ok(std::io::stdout().write_all(contents)?),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            seeds,
            out,
            overrides,
        } => {
            let mut config = ExperimentConfig::resolve(&scenario)?;
            if let Some(s) = seeds {
                config.seeds = s;
            }
            if let Some(p) = overrides.p_share {
                config.env.p_share = p;
            }
            if let Some(h) = overrides.horizon {
                config.env.horizon = h;
            }
            if let Some(p) = overrides.policy.clone() {
                config.policies = p;
            }
            config.execution = overrides.execution();
            config.out_dir = Some(out);
            let report = run_experiment(&config)?;
            for path in &report.files {
                println!("{}", path.display());
            }
        }
        Command::Sweep {
            group_sizes,
            users,
            seeds,
            out,
            overrides,
        } => {
            let mut config = SweepConfig::default();
            if let Some(s) = seeds {
                config.seeds = s;
            }
            if let Some(p) = overrides.p_share {
                config.p_share = p;
            }
            if let Some(h) = overrides.horizon {
                config.horizon = h;
            }
            match overrides.policy.as_deref() {
                None => {}
                Some([p]) => config.policy = *p,
                Some(_) => bail!("sweep takes a single --policy"),
            }
            config.execution = overrides.execution();
            let rows = sweep_group_size(&config, &group_sizes, &users)?;
            write_or_print(out.as_ref(), sweep_csv(&rows).as_bytes())?;
        }
        Command::Kbmano { scenario, out } => {
            let events = run_kbmano_scenario(&scenario)
                .with_context(|| format!("scenario {}", scenario.display()))?;
            let mut buf = Vec::new();
            write_event_log(&mut buf, &events)?;
            write_or_print(out.as_ref(), &buf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
