use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use asm_core::adapt::{
    am_asm_step, AdaptConfig, run_asm, run_truncated, AmAsmState, ChainSummary, FunctionalAverage, NullSink, TraceRecord, TraceSink,
};
use asm_core::analysis::{slln_report, SllnEntry};
use asm_core::proposal::ProposalModel;
use asm_core::stats::BatchMeans;
use asm_core::target::{BuiltinTarget, TargetDensity};
use asm_core::{derive_seed, rng::seeded};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CheckFailed;

/// Replica `k` runs on `derive_seed(seed, k)`, so adding replicas leaves the
/// earlier streams untouched.
pub fn replica_seed(seed: u64, replica: u32) -> u64 {
    derive_seed(seed, replica as u64)
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Serialize)]
pub struct AmReport {
    pub steps: u64,
    pub final_x: Vec<f64>,
    pub final_s: f64,
    pub final_theta: f64,
    pub mean_alpha: f64,
    pub acceptance_rate: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
    pub shape: Vec<f64>,
    pub functionals: Vec<FunctionalAverage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub version: &'static str,
    pub replica: u32,
    pub seed: u64,
    pub target: &'static str,
    pub dim: usize,
    pub trace_rows: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub am: Option<AmReport>,
    /// Ergodic averages against exact expectations, where the target provides them.
    pub slln: Vec<SllnEntry>,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub trace_path: Option<PathBuf>,
    pub summary_path: PathBuf,
}

struct CsvTrace {
    w: csv::Writer<BufWriter<File>>,
    thinning: u64,
    rows: u64,
    row: csv::ByteRecord,
}

impl CsvTrace {
    fn create(path: &Path, d: usize, thinning: u64) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
        let mut header = vec!["n".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.extend(["s", "theta", "alpha", "accepted", "eta"].map(String::from));
        w.write_record(&header)?;
        Ok(Self { w, thinning, rows: 0, row: csv::ByteRecord::new() })
    }

    fn push(&mut self, r: &TraceRecord<'_>) -> csv::Result<()> {
        // r.n − 1 steps have been taken
        if (r.n - 1) % self.thinning != 0 {
            return Ok(());
        }
        self.row.clear();
        self.row.push_field(r.n.to_string().as_bytes());
        for v in r.x {
            self.row.push_field(fmt_f64(*v).as_bytes());
        }
        for v in [r.s, r.theta, r.alpha] {
            self.row.push_field(fmt_f64(v).as_bytes());
        }
        self.row.push_field(if r.accepted { b"1" } else { b"0" });
        self.row.push_field(fmt_f64(r.eta).as_bytes());
        self.rows += 1;
        self.w.write_byte_record(&self.row)
    }

    fn finish(mut self) -> Result<u64> {
        self.w.flush()?;
        Ok(self.rows)
    }
}

impl TraceSink for CsvTrace {
    fn record(&mut self, record: &TraceRecord<'_>) -> Result<(), String> {
        self.push(record).map_err(|e| e.to_string())
    }
}

fn file_stem(cfg: &RunConfig, replica: u32) -> String {
    format!("{}_r{replica}", cfg.output.prefix)
}

fn run_am(
    cfg: &RunConfig,
    target: &BuiltinTarget,
    model: &ProposalModel,
    adapt: &AdaptConfig,
    seed: u64,
    sink: &mut dyn TraceSink,
) -> Result<AmReport> {
    let am = cfg.am.as_ref().expect("am section");
    let scaling = model.scaling();
    let mut rng = seeded(seed);
    let mut st = AmAsmState::initial(adapt, am)?;
    let mut alpha = BatchMeans::for_length(adapt.n_steps);
    let mut accepted = 0u64;
    let mut fs: Vec<BatchMeans> = cfg.functionals.iter().map(|_| BatchMeans::for_length(adapt.n_steps)).collect();
    let mut violations = vec![0u64; cfg.functionals.len()];
    for _ in 0..adapt.n_steps {
        let (next, out) = am_asm_step(target, model, &st, adapt, am, &mut rng).map_err(|e| CheckFailed::wrap(e.into(), "run"))?;
        st = next;
        alpha.push(out.alpha);
        accepted += out.accepted as u64;
        for (k, f) in cfg.functionals.iter().enumerate() {
            let v = f.eval(&st.state.x);
            violations[k] += !f.natural_growth().admits(v, &st.state.x) as u64;
            fs[k].push(v);
        }
        let n = st.state.n;
        let rec = TraceRecord {
            n,
            x: &st.state.x,
            s: st.state.s,
            theta: scaling.eval(st.state.s),
            alpha: out.alpha,
            accepted: out.accepted,
            eta: adapt.schedule.eta(n),
        };
        sink.record(&rec).map_err(|m| anyhow::anyhow!("writing trace at step {n}: {m}"))?;
    }
    let functionals = cfg
        .functionals
        .iter()
        .zip(&fs)
        .zip(&violations)
        .map(|((f, b), &growth_violations)| FunctionalAverage {
            name: f.name(),
            mean: b.mean(),
            std_error: b.std_error(),
            batches: b.batch_count(),
            growth_violations,
        })
        .collect();
    Ok(AmReport {
        steps: adapt.n_steps,
        final_x: st.state.x.clone(),
        final_s: st.state.s,
        final_theta: scaling.eval(st.state.s),
        mean_alpha: alpha.mean(),
        acceptance_rate: accepted as f64 / adapt.n_steps.max(1) as f64,
        mean: st.mean.clone(),
        covariance: st.covariance.clone(),
        shape: st.shape.matrix().to_vec(),
        functionals,
    })
}

/// Runs the chain of replica `replica`, feeding every step to `sink`.
pub fn execute(
    cfg: &RunConfig,
    target: &BuiltinTarget,
    model: &ProposalModel,
    adapt: &AdaptConfig,
    replica: u32,
    sink: &mut dyn TraceSink,
) -> Result<(Option<ChainSummary>, Option<AmReport>)> {
    let seed = replica_seed(cfg.seed, replica);
    if cfg.am.is_some() {
        return Ok((None, Some(run_am(cfg, target, model, adapt, seed, sink)?)));
    }
    let mut rng = seeded(seed);
    let fs = &cfg.functionals;
    let res = match &cfg.restriction {
        Some(r) => run_truncated(target, model, adapt, r, fs, &mut rng, sink),
        None => run_asm(target, model, adapt, fs, &mut rng, sink),
    };
    match res {
        Ok(c) => Ok((Some(c), None)),
        Err(e @ asm_core::Error::Sink { .. }) => Err(e.into()),
        Err(e) => Err(CheckFailed::wrap(e.into(), "run")),
    }
}

/// Runs one replica and writes its trace and summary files.
pub fn run_replica(cfg: &RunConfig, replica: u32) -> Result<RunOutput> {
    let (target, model, adapt) = cfg.build()?;
    let stem = file_stem(cfg, replica);
    let trace_path = cfg.output.trace.then(|| cfg.output.dir.join(format!("{stem}.trace.csv")));
    let mut trace = match &trace_path {
        Some(p) => Some(CsvTrace::create(p, target.dim(), cfg.output.thinning)?),
        None => None,
    };
    let mut null = NullSink;
    let sink: &mut dyn TraceSink = match trace.as_mut() {
        Some(t) => t,
        None => &mut null,
    };
    let (chain, am) = execute(cfg, &target, &model, &adapt, replica, sink)?;
    let trace_rows = match trace {
        Some(t) => t.finish()?,
        None => 0,
    };
    let averages = chain.as_ref().map(|c| c.functionals.clone()).or_else(|| am.as_ref().map(|a| a.functionals.clone()));
    let mut slln = Vec::new();
    for (f, a) in cfg.functionals.iter().zip(averages.unwrap_or_default()) {
        if let Some(truth) = target.expectation(f) {
            slln.extend(slln_report(&[a], &[truth], 4.0)?);
        }
    }
    let summary = RunSummary {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION"),
        replica,
        seed: replica_seed(cfg.seed, replica),
        target: target.name(),
        dim: target.dim(),
        trace_rows,
        chain,
        am,
        slln,
    };
    let summary_path = cfg.output.dir.join(format!("{stem}.summary.json"));
    let mut w = BufWriter::new(File::create(&summary_path).with_context(|| format!("creating {}", summary_path.display()))?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(RunOutput { summary, trace_path, summary_path })
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

/// Runs every replica of `cfg` on up to `jobs` threads, in replica order.
pub fn cmd_run(cfg: &RunConfig, jobs: usize) -> Result<Vec<RunOutput>> {
    cfg.build()?;
    std::fs::create_dir_all(&cfg.output.dir).with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    let pool = thread_pool(jobs)?;
    let results: Vec<Result<RunOutput>> =
        pool.install(|| (0..cfg.replicas).into_par_iter().map(|k| run_replica(cfg, k)).collect());
    results.into_iter().collect()
}
