use std::collections::HashSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use activesearch_core::acquisition::{AcquisitionKind, AcquisitionSpec};
use activesearch_core::boloop::{bench_rows, run_bo, BoConfig, Trace};
use activesearch_core::compliance::{aggregate, propose, ComplianceRecord, CountTable, Strategy};
use activesearch_core::gamestore::{read_traces, records_of, TRACE_FILE_EXTENSION};
use activesearch_core::testfns::{optimum, FunctionId};
use activesearch_service::ServiceConfig;
use rayon::prelude::*;

use crate::config::{Grid, GridArgs, Purpose};
use crate::output::{write_atomic, write_csv, IterationRow, RecordRow, TableRow};
use crate::CliError;

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

/// Every (function, surrogate, acquisition, seed) cell in grid order.
fn run_cells(grid: &Grid) -> Vec<(FunctionId, BoConfig)> {
    let mut cells = Vec::new();
    for &f in &grid.functions {
        for s in &grid.surrogates {
            for a in &grid.acquisitions {
                for &seed in &grid.seeds {
                    let mut cfg = BoConfig::new(*s, *a, seed);
                    cfg.init = grid.init;
                    cfg.budget = grid.budget;
                    cfg.focus = grid.focus;
                    cells.push((f, cfg));
                }
            }
        }
    }
    cells
}

fn run_grid(grid: &Grid) -> Result<(Vec<(FunctionId, BoConfig)>, Vec<Result<Trace, Trace>>), CliError> {
    let cells = run_cells(grid);
    let results = pool(grid.jobs)?.install(|| {
        cells
            .par_iter()
            .map(|(f, cfg)| {
                run_bo(*f, cfg).map_err(|e| {
                    eprintln!("error: {e}");
                    e.trace
                })
            })
            .collect()
    });
    Ok((cells, results))
}

fn failures(results: &[Result<Trace, Trace>]) -> Result<(), CliError> {
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} runs failed", results.len())));
    }
    Ok(())
}

const BENCH_HEADER: [&str; 10] = [
    "function",
    "surrogate",
    "kernel",
    "acquisition",
    "beta",
    "seed",
    "n",
    "best_y",
    "simple_regret",
    "cumulative_regret",
];

pub fn bench(args: &GridArgs, out: Option<&Path>) -> Result<(), CliError> {
    let grid = args.resolve(Purpose::Run)?;
    let (cells, results) = run_grid(&grid)?;
    let mut rows = Vec::new();
    for ((f, cfg), r) in cells.iter().zip(&results) {
        let trace = r.as_ref().unwrap_or_else(|t| t);
        rows.extend(bench_rows(trace, cfg, optimum(*f).1));
    }
    match out {
        Some(path) => write_atomic(path, |w| write_csv(w, &BENCH_HEADER, &rows))?,
        None => write_csv(&mut std::io::stdout().lock(), &BENCH_HEADER, &rows)?,
    }
    failures(&results)
}

/// File-name-safe form of a label: `UCB(beta=0.5)` becomes `UCB-beta-0.5`.
fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn trace_file_name(f: FunctionId, cfg: &BoConfig) -> String {
    format!(
        "{}_{}_{}_seed{}.{TRACE_FILE_EXTENSION}",
        cfg.surrogate.label(),
        slug(&cfg.acquisition.to_string()),
        f.name(),
        cfg.seed
    )
}

pub fn simulate(args: &GridArgs, out_dir: &Path) -> Result<(), CliError> {
    let grid = args.resolve(Purpose::Run)?;
    std::fs::create_dir_all(out_dir)?;
    let (cells, results) = run_grid(&grid)?;
    for ((f, cfg), r) in cells.iter().zip(&results) {
        // A failed run keeps the evaluations it completed.
        let trace = r.as_ref().unwrap_or_else(|t| t);
        if !trace.is_empty() {
            let path = out_dir.join(trace_file_name(*f, cfg));
            write_atomic(&path, |w| {
                for rec in records_of(trace) {
                    writeln!(w, "{}", rec.to_line())?;
                }
                Ok(())
            })?;
        }
    }
    failures(&results)
}

/// Trace files named by `inputs`: files as given, directories expanded to
/// their `.jsonl` entries in name order. Missing paths are warned about.
fn trace_files(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = match std::fs::read_dir(input) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("warning: skipping {}: {e}", input.display());
                    continue;
                }
            };
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == TRACE_FILE_EXTENSION))
                .collect();
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            eprintln!("warning: skipping {}: no such file or directory", input.display());
        }
    }
    files
}

fn load_traces(files: &[PathBuf]) -> Vec<Trace> {
    let mut seen = HashSet::new();
    let mut traces = Vec::new();
    for path in files {
        match read_traces(path) {
            Ok(ts) => {
                for t in ts {
                    if seen.insert(t.id()) {
                        traces.push(t);
                    } else {
                        eprintln!("warning: {}: game {} already loaded; skipped", path.display(), t.id());
                    }
                }
            }
            Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
        }
    }
    traces
}

/// Analysis results for one (threshold, β) grid cell.
struct GridCell {
    threshold: f64,
    beta: f64,
    records: Vec<(String, ComplianceRecord)>,
    table: CountTable,
}

fn acquisition_set(beta: f64) -> [AcquisitionSpec; 3] {
    [AcquisitionSpec::pi(), AcquisitionSpec::ei(), AcquisitionSpec::ucb(beta)]
}

pub fn analyze(args: &GridArgs, inputs: &[PathBuf], out_dir: Option<&Path>, iterations: bool) -> Result<(), CliError> {
    let grid = args.resolve(Purpose::Analyze)?;
    let traces = load_traces(&trace_files(inputs));

    let mut betas: Vec<f64> = Vec::new();
    for &b in &grid.betas {
        if !betas.contains(&b) {
            betas.push(b);
        }
    }
    let mut candidates = vec![AcquisitionSpec::pi(), AcquisitionSpec::ei()];
    candidates.extend(betas.iter().map(|&b| AcquisitionSpec::ucb(b)));

    let mut jobs = Vec::new();
    for t in &traces {
        for s in &grid.surrogates {
            jobs.push((t, s));
        }
    }
    let tables = pool(grid.jobs)?.install(|| {
        jobs.par_iter()
            .map(|(t, s)| match propose(t, s, &candidates, grid.min_fit_size, &grid.focus) {
                Ok(table) => Some((t.meta.function, table)),
                Err(e) => {
                    eprintln!("warning: skipping {} with {}: {e}", t.id(), s.label());
                    None
                }
            })
            .collect::<Vec<_>>()
    });

    let mut cells = Vec::new();
    for &threshold in &grid.thresholds {
        for &beta in &betas {
            let acqs = acquisition_set(beta);
            let mut records = Vec::new();
            for (f, table) in tables.iter().flatten() {
                records.push((f.name().to_string(), table.classify(&acqs, threshold)?));
            }
            let table = aggregate(records.iter().map(|r| &r.1));
            cells.push(GridCell {
                threshold,
                beta,
                records,
                table,
            });
        }
    }

    let mut stdout = std::io::stdout().lock();
    for c in &cells {
        print_table(&mut stdout, c.threshold, c.beta, &c.table)?;
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_analysis(dir, &cells, iterations)?;
    }
    Ok(())
}

fn print_table(w: &mut dyn Write, threshold: f64, beta: f64, table: &CountTable) -> Result<(), CliError> {
    writeln!(w, "threshold={threshold} beta={beta}")?;
    writeln!(w, "{table}")?;
    Ok(())
}

const RECORD_HEADER: [&str; 10] = [
    "threshold",
    "beta",
    "trace_id",
    "function",
    "surrogate",
    "strategy",
    "compliant_fraction",
    "scored_iterations",
    "compliant_iterations",
    "failed_iterations",
];

const TABLE_HEADER: [&str; 8] = [
    "threshold",
    "beta",
    "surrogate",
    "PI",
    "EI",
    "UCB",
    "NON_COMPLIANT",
    "total",
];

const ITERATION_HEADER: [&str; 10] = [
    "threshold",
    "beta",
    "trace_id",
    "surrogate",
    "n",
    "d_pi",
    "d_ei",
    "d_ucb",
    "label",
    "failure",
];

fn table_rows(threshold: f64, beta: f64, table: &CountTable) -> Vec<TableRow> {
    table
        .rows
        .iter()
        .map(|(surrogate, c)| TableRow {
            threshold,
            beta,
            surrogate: surrogate.clone(),
            pi: c[Strategy::Pi.column()],
            ei: c[Strategy::Ei.column()],
            ucb: c[Strategy::Ucb.column()],
            non_compliant: c[Strategy::NonCompliant.column()],
            total: c.iter().sum(),
        })
        .collect()
}

fn write_analysis(dir: &Path, cells: &[GridCell], iterations: bool) -> Result<(), CliError> {
    let mut records = Vec::new();
    let mut tables = Vec::new();
    let mut iters = Vec::new();
    for c in cells {
        for (function, r) in &c.records {
            records.push(RecordRow {
                threshold: c.threshold,
                beta: c.beta,
                trace_id: r.trace_id.clone(),
                function: function.clone(),
                surrogate: r.surrogate.clone(),
                strategy: r.strategy.name().to_string(),
                compliant_fraction: r.compliant_fraction,
                scored_iterations: r.verdicts.len(),
                compliant_iterations: r.compliant_iterations().len(),
                failed_iterations: r.verdicts.iter().filter(|v| v.failure.is_some()).count(),
            });
            if iterations {
                for v in &r.verdicts {
                    iters.push(IterationRow {
                        threshold: c.threshold,
                        beta: c.beta,
                        trace_id: r.trace_id.clone(),
                        surrogate: r.surrogate.clone(),
                        n: v.n,
                        d_pi: v.distance_of(AcquisitionKind::Pi),
                        d_ei: v.distance_of(AcquisitionKind::Ei),
                        d_ucb: v.distance_of(AcquisitionKind::Ucb),
                        label: v.label.map_or("NONE", |k| k.name()).to_string(),
                        failure: v.failure.clone().unwrap_or_default(),
                    });
                }
            }
        }
        tables.extend(table_rows(c.threshold, c.beta, &c.table));
    }
    write_atomic(&dir.join("records.csv"), |w| write_csv(w, &RECORD_HEADER, &records))?;
    write_atomic(&dir.join("tables.csv"), |w| write_csv(w, &TABLE_HEADER, &tables))?;
    if iterations {
        write_atomic(&dir.join("iterations.csv"), |w| write_csv(w, &ITERATION_HEADER, &iters))?;
    }
    Ok(())
}

/// Rebuilds the count tables of every (threshold, β) cell in `records`, in
/// order of first appearance.
pub fn tables_from_records(rows: &[RecordRow]) -> Result<Vec<(f64, f64, CountTable)>, CliError> {
    let mut cells: Vec<(f64, f64, CountTable)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let strategy: Strategy = r
            .strategy
            .parse()
            .map_err(|e| CliError::Runtime(format!("record {}: {e}", i + 1)))?;
        let pos = match cells.iter().position(|c| c.0 == r.threshold && c.1 == r.beta) {
            Some(p) => p,
            None => {
                cells.push((r.threshold, r.beta, CountTable::default()));
                cells.len() - 1
            }
        };
        cells[pos].2.rows.entry(r.surrogate.clone()).or_default()[strategy.column()] += 1;
    }
    Ok(cells)
}

pub fn report(path: &Path) -> Result<(), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<RecordRow>, _>>()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut stdout = std::io::stdout().lock();
    for (threshold, beta, table) in tables_from_records(&rows)? {
        print_table(&mut stdout, threshold, beta, &table)?;
    }
    Ok(())
}

pub fn serve(
    addr: SocketAddr,
    store: Option<PathBuf>,
    budget: usize,
    timeout_minutes: u64,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if budget == 0 {
        return Err(CliError::Usage("budget: must be at least 1".into()));
    }
    if timeout_minutes == 0 {
        return Err(CliError::Usage("timeout-minutes: must be at least 1".into()));
    }
    let config = ServiceConfig {
        budget,
        session_timeout: Duration::from_secs(timeout_minutes * 60),
        store_path: store,
        seed,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("listening on http://{addr}");
    runtime.block_on(activesearch_service::serve(addr, config))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("UCB(beta=0.5)"), "UCB-beta-0.5");
        assert_eq!(slug("EI"), "EI");
    }

    #[test]
    fn report_tables_count_records() {
        let row = |t: f64, s: &str, strat: &str| RecordRow {
            threshold: t,
            beta: 1.0,
            trace_id: "u@1".into(),
            function: "branin".into(),
            surrogate: s.into(),
            strategy: strat.into(),
            compliant_fraction: 0.5,
            scored_iterations: 2,
            compliant_iterations: 1,
            failed_iterations: 0,
        };
        let rows = [
            row(0.1, "gp-se", "EI"),
            row(0.1, "gp-se", "EI"),
            row(0.1, "rf", "NON_COMPLIANT"),
            row(0.15, "gp-se", "PI"),
        ];
        let cells = tables_from_records(&rows).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].2.count("gp-se", Strategy::Ei), 2);
        assert_eq!(cells[0].2.count("rf", Strategy::NonCompliant), 1);
        assert_eq!(cells[1].2.total(), 1);
        assert!(tables_from_records(&[row(0.1, "rf", "XX")]).is_err());
    }
}
