use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use mmshare::harness::{
    ccdf, cell_rates, compare_to_baseline, format_ratio, read_summary, report_dir, run_experiment, ExperimentGrid,
    Preset, RunOptions,
};
use mmshare::ProblemId;

#[derive(Parser)]
#[command(name = "mmshare", version, about = "Multi-operator mmWave spectrum sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a grid file over a number of topologies.
    Run {
        grid: PathBuf,
        /// Output directory; defaults to the grid's `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Topologies per cell (default: the scenario's n_topologies).
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value = "desk")]
        preset: Preset,
        /// Worker threads (default: all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Print the rate CCDF of one cell as `rate,probability` lines.
    Ccdf {
        report: PathBuf,
        #[arg(long)]
        cell: String,
    },
    /// Percentile ratios of every cell against a baseline problem.
    Compare {
        report: PathBuf,
        #[arg(long)]
        baseline: ProblemId,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            grid,
            out,
            seeds,
            preset,
            jobs,
            quiet,
        } => {
            let g = ExperimentGrid::load(&grid, preset).with_context(|| format!("loading {}", grid.display()))?;
            let Some(out) = out.or_else(|| g.output_path.clone()) else {
                bail!("no output directory: pass --out or set `output` in the grid file");
            };
            let res = run_experiment(&g, &RunOptions { out: out.clone(), seeds, jobs, quiet })?;
            let failed = res.rows.iter().filter(|r| r.status != mmshare::harness::Status::Ok).count();
            eprintln!(
                "{} cells, {} tasks ({} run now, {failed} failed); report in {}",
                res.cells.len(),
                res.rows.len(),
                res.executed,
                out.display()
            );
            Ok(res.all_ok())
        }
        Command::Ccdf { report, cell } => {
            let rates = cell_rates(&report_dir(&report), &cell)?;
            println!("rate,probability");
            for (x, p) in ccdf(&rates)? {
                println!("{x},{p}");
            }
            Ok(true)
        }
        Command::Compare { report, baseline } => {
            let rows = read_summary(&report_dir(&report))?;
            println!("cell,baseline_cell,ratio_p5,ratio_p50,ratio_p95,ratio_mean");
            for c in compare_to_baseline(&rows, baseline)? {
                println!(
                    "{},{},{},{},{},{}",
                    c.cell,
                    c.baseline_cell,
                    format_ratio(c.p5),
                    format_ratio(c.p50),
                    format_ratio(c.p95),
                    format_ratio(c.mean)
                );
            }
            Ok(true)
        }
    }
}
