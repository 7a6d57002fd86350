use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use asm_core::adapt::{ChainSummary, NullSink};
use asm_core::analysis::{stability_report, StabilityReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::run::{execute, fmt_f64, replica_seed, thread_pool, AmReport};

/// Last-half band and trend level used for the per-cell stability report.
pub const STABILITY_BAND: f64 = 0.1;
pub const TREND_LEVEL: f64 = 0.01;

pub struct Cell {
    pub index: usize,
    pub values: Vec<(String, f64)>,
    pub config: RunConfig,
}

/// The cross product of the non-empty axes, the last axis varying fastest.
pub fn cells(base: &RunConfig) -> Result<Vec<Cell>> {
    let grid = match &base.sweep {
        Some(g) if !g.is_empty() => g,
        _ => return Ok(Vec::new()),
    };
    let axes = grid.axes();
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut values = vec![(String::new(), 0.0); axes.len()];
        for (k, (name, v)) in axes.iter().enumerate().rev() {
            values[k] = (name.clone(), v[rem % v.len()]);
            rem /= v.len();
        }
        let mut config = base.clone();
        config.sweep = None;
        for (name, v) in &values {
            match name.as_str() {
                "alpha_star" => config.adapt.alpha_star = *v,
                "gamma" => config.adapt.gamma = *v,
                "c" => config.adapt.c = *v,
                other => {
                    let key = other.strip_prefix("target.").expect("target axis");
                    config.target = config.target.with_param(key, *v)?;
                }
            }
        }
        // a swept dimension invalidates an explicit start
        if values.iter().any(|(n, _)| n == "target.dim") {
            config.adapt.x0 = None;
        }
        out.push(Cell { index, values, config });
    }
    Ok(out)
}

struct Row {
    cell: usize,
    replica: u32,
    seed: u64,
    outcome: Result<(Option<ChainSummary>, Option<AmReport>), String>,
}

#[derive(Serialize)]
struct CellStability<'a> {
    cell: usize,
    values: &'a [(String, f64)],
    report: StabilityReport,
}

pub struct SweepOutcome {
    pub cells: usize,
    pub failed: usize,
    pub csv: Option<PathBuf>,
}

fn run_row(cell: &Cell, replica: u32) -> Row {
    let outcome = cell
        .config
        .build()
        .and_then(|(t, m, a)| execute(&cell.config, &t, &m, &a, replica, &mut NullSink))
        .map_err(|e| format!("{e:#}"));
    Row { cell: cell.index, replica, seed: replica_seed(cell.config.seed, replica), outcome }
}

const SUMMARY_COLUMNS: [&str; 13] = [
    "steps",
    "final_s",
    "final_theta",
    "mean_alpha",
    "mean_alpha_last_half",
    "acceptance_rate",
    "s_min_last_half",
    "s_max_last_half",
    "trend_p_value",
    "theta_min",
    "max_theta_growth",
    "increment_violations",
    "truncations",
];

fn summary_fields(chain: &Option<ChainSummary>, am: &Option<AmReport>) -> Vec<String> {
    let f = |v: f64| fmt_f64(v);
    match (chain, am) {
        (Some(c), _) => vec![
            c.steps.to_string(),
            f(c.final_s),
            f(c.final_theta),
            f(c.mean_alpha),
            f(c.mean_alpha_last_half),
            f(c.acceptance_rate),
            f(c.s_min_last_half),
            f(c.s_max_last_half),
            c.trend.as_ref().map(|t| f(t.p_value)).unwrap_or_default(),
            f(c.theta_min),
            f(c.max_theta_growth),
            c.increment_violations.to_string(),
            c.truncations.to_string(),
        ],
        (None, Some(a)) => {
            let mut v = vec![a.steps.to_string(), f(a.final_s), f(a.final_theta), f(a.mean_alpha), String::new()];
            v.push(f(a.acceptance_rate));
            v.resize(SUMMARY_COLUMNS.len(), String::new());
            v
        }
        (None, None) => vec![String::new(); SUMMARY_COLUMNS.len()],
    }
}

/// Runs every (cell, replica) pair on up to `jobs` threads and writes one CSV
/// row per pair, plus a stability line per cell when there are enough replicas.
pub fn cmd_sweep(base: &RunConfig, jobs: usize) -> Result<SweepOutcome> {
    let cells = cells(base)?;
    if cells.is_empty() {
        return Ok(SweepOutcome { cells: 0, failed: 0, csv: None });
    }
    std::fs::create_dir_all(&base.output.dir).with_context(|| format!("creating {}", base.output.dir.display()))?;
    let jobs_list: Vec<(usize, u32)> =
        cells.iter().flat_map(|c| (0..base.replicas).map(move |r| (c.index, r))).collect();
    let pool = thread_pool(jobs)?;
    let rows: Vec<Row> = pool.install(|| jobs_list.par_iter().map(|&(c, r)| run_row(&cells[c], r)).collect());

    let csv_path = base.output.dir.join(format!("{}_sweep.csv", base.output.prefix));
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    let axis_names: Vec<String> = cells[0].values.iter().map(|(n, _)| n.clone()).collect();
    let fnames: Vec<String> = base.functionals.iter().map(|f| f.name()).collect();
    let mut header = vec!["cell".to_string(), "replica".into(), "seed".into(), "config_hash".into()];
    header.extend(axis_names.iter().cloned());
    header.extend(["status".to_string(), "error".into()]);
    header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
    for n in &fnames {
        header.push(format!("mean[{n}]"));
        header.push(format!("se[{n}]"));
    }
    w.write_record(&header)?;
    let mut failed_cells = std::collections::BTreeSet::new();
    for row in &rows {
        let cell = &cells[row.cell];
        let mut rec = vec![row.cell.to_string(), row.replica.to_string(), row.seed.to_string(), cell.config.hash()];
        rec.extend(cell.values.iter().map(|(_, v)| fmt_f64(*v)));
        match &row.outcome {
            Ok((chain, am)) => {
                rec.extend(["ok".to_string(), String::new()]);
                rec.extend(summary_fields(chain, am));
                let avgs = chain.as_ref().map(|c| &c.functionals).or(am.as_ref().map(|a| &a.functionals));
                for k in 0..fnames.len() {
                    match avgs.and_then(|a| a.get(k)) {
                        Some(a) => rec.extend([fmt_f64(a.mean), fmt_f64(a.std_error)]),
                        None => rec.extend([String::new(), String::new()]),
                    }
                }
            }
            Err(e) => {
                failed_cells.insert(row.cell);
                rec.extend(["error".to_string(), e.clone()]);
                rec.extend(vec![String::new(); SUMMARY_COLUMNS.len() + 2 * fnames.len()]);
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    if base.replicas >= 8 {
        let path = base.output.dir.join(format!("{}_sweep_stability.jsonl", base.output.prefix));
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        for cell in &cells {
            let summaries: Vec<ChainSummary> = rows
                .iter()
                .filter(|r| r.cell == cell.index)
                .filter_map(|r| r.outcome.as_ref().ok().and_then(|(c, _)| c.clone()))
                .collect();
            if summaries.len() < base.replicas as usize {
                continue;
            }
            let required = summaries.len() - summaries.len() / 32;
            let report = stability_report(&summaries, STABILITY_BAND, TREND_LEVEL, required, None)?;
            serde_json::to_writer(&mut out, &CellStability { cell: cell.index, values: &cell.values, report })?;
            writeln!(out)?;
        }
        out.flush()?;
    }
    Ok(SweepOutcome { cells: cells.len(), failed: failed_cells.len(), csv: Some(csv_path) })
}
