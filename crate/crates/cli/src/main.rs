use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use asm_cli::config::RunConfig;
use asm_cli::verify::{custom_case, failures, run_suite, Suite};
use asm_cli::{exit_code, run, sweep, CheckFailed};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asm", version, about = "Adaptive scaling Metropolis experiments and checks")]
struct Cli {
    /// Worker threads for replicas, sweep cells and multi-seed checks.
    #[arg(long, global = true, env = "ASM_JOBS", default_value_t = default_jobs())]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured chain (and its replicas), writing trace and summary files.
    Run {
        config: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a verification suite: fast, full or proposition:<name>.
    Verify {
        suite: Suite,
        /// Write the JSONL report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run the target-dependent checks on this config's target and proposal.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the cross product of the config's [sweep] axes.
    Sweep { config: PathBuf },
}

fn cmd_run(path: &PathBuf, seed: Option<u64>, jobs: usize) -> Result<()> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for out in run::cmd_run(&cfg, jobs)? {
        let s = &out.summary;
        eprintln!(
            "replica {} seed {}: {} trace rows, summary {}",
            s.replica,
            s.seed,
            s.trace_rows,
            out.summary_path.display()
        );
    }
    Ok(())
}

fn cmd_verify(suite: &Suite, report: Option<&PathBuf>, config: Option<&PathBuf>, jobs: usize) -> Result<()> {
    let custom = match config {
        Some(p) => Some(custom_case(&RunConfig::load(p)?)?),
        None => None,
    };
    let mut sink: Box<dyn Write> = match report {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    // multi-seed checks run on rayon's global pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    let mut io_error = None;
    let records = run_suite(suite, custom, |r| {
        let tag = match (r.skipped, r.pass, r.gated) {
            (true, _, _) => "SKIP",
            (_, true, _) => "PASS",
            (_, false, true) => "FAIL",
            (_, false, false) => "WARN",
        };
        eprintln!("[{tag}] {} {} ({:.2}s){}", r.check, r.case, r.elapsed_s, r.notice.as_ref().map(|n| format!(" {n}")).unwrap_or_default());
        let line = serde_json::to_string(r).map_err(anyhow::Error::from);
        if let Err(e) = line.and_then(|l| Ok(writeln!(sink, "{l}")?)) {
            io_error.get_or_insert(e);
        }
    });
    sink.flush()?;
    if let Some(e) = io_error {
        return Err(e.context("writing the report"));
    }
    let failed = failures(&records);
    let skipped = records.iter().filter(|r| r.skipped).count();
    eprintln!("verify: {} records, {} failed, {} skipped", records.len(), failed.len(), skipped);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed::new(format!("verify ({})", failed.join(", "))))
    }
}

fn cmd_sweep(path: &PathBuf, jobs: usize) -> Result<()> {
    let cfg = RunConfig::load(path)?;
    let out = sweep::cmd_sweep(&cfg, jobs)?;
    match &out.csv {
        None => eprintln!("sweep: empty grid, nothing to run"),
        Some(p) => eprintln!("sweep: {} cells, {} failed, rows in {}", out.cells, out.failed, p.display()),
    }
    if out.failed > 0 {
        return Err(CheckFailed::new(format!("{} sweep cells", out.failed)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run { config, seed } => cmd_run(config, *seed, cli.jobs),
        Command::Verify { suite, report, config } => cmd_verify(suite, report.as_ref(), config.as_ref(), cli.jobs),
        Command::Sweep { config } => cmd_sweep(config, cli.jobs),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
