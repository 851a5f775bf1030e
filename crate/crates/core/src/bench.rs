//! Benchmark matrix over generated random 3-CNF instances.
//!
//! Each cell generates one formula per seed and solves it on every requested
//! backend. Rows are emitted in cell order whatever order the workers finish.

use rayon::prelude::*;

use crate::cnf::{gen_random, GenError};
use crate::perf::{
    effective_throughput, engine_throughput, speedup, time_breakdown, MetricError, PerfCounters, TimeBreakdown,
    BCP_EVENT_DEFINITION,
};
use crate::solver::{solve, BackendKind, SolveError, SolverConfig};

pub const BENCH_CSV_HEADER: &str = "formula_id,vars,clauses,backend,verdict,decisions,swaps,bcp_events,engine_cycles,swap_cycles,interface_cycles,total_time_ns,engine_bcps,effective_bcps,speedup,partitions,note";
pub const BREAKDOWN_CSV_HEADER: &str = "formula_id,vars,clauses,backend,engine,swap,interface,software";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchSpec {
    pub variable_sizes: Vec<u32>,
    pub clause_sizes: Vec<usize>,
    pub clause_len: usize,
    pub seeds: Vec<u64>,
    pub backends: Vec<BackendKind>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            variable_sizes: vec![63, 126, 252, 630],
            clause_sizes: vec![224, 448, 2240, 22400],
            clause_len: 3,
            seeds: vec![1],
            backends: vec![BackendKind::Software, BackendKind::HwSim],
        }
    }
}

/// Which axis a breakdown sweep holds fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    FixVars(u32),
    FixClauses(usize),
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.variable_sizes.is_empty() || self.clause_sizes.is_empty() || self.seeds.is_empty() {
            return Err(BenchError::EmptyAxis);
        }
        if self.backends.is_empty() {
            return Err(BenchError::NoBackend);
        }
        Ok(())
    }

    /// The default axes with one of them pinned.
    pub fn sweep(sweep: Sweep) -> Self {
        let mut spec = Self::default();
        match sweep {
            Sweep::FixVars(v) => spec.variable_sizes = vec![v],
            Sweep::FixClauses(c) => spec.clause_sizes = vec![c],
        }
        spec
    }

    /// Cells in row order (clauses outer, variables inner), split into runnable
    /// and skipped.
    pub fn cells(&self) -> (Vec<BenchCell>, Vec<BenchCell>) {
        let mut run = Vec::new();
        let mut skipped = Vec::new();
        for &clauses in &self.clause_sizes {
            for &vars in &self.variable_sizes {
                for &seed in &self.seeds {
                    let cell = BenchCell { vars, clauses, seed };
                    if is_infeasible(vars, clauses) || self.clause_len > vars as usize {
                        skipped.push(cell);
                    } else {
                        run.push(cell);
                    }
                }
            }
        }
        (run, skipped)
    }
}

/// Too few clauses to constrain that many variables.
pub fn is_infeasible(vars: u32, clauses: usize) -> bool {
    clauses * 2 < vars as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BenchCell {
    pub vars: u32,
    pub clauses: usize,
    pub seed: u64,
}

impl BenchCell {
    pub fn formula_id(&self, clause_len: usize) -> String {
        format!("rand{}-v{}-c{}-s{}", clause_len, self.vars, self.clauses, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("bench axes must be non-empty")]
    EmptyAxis,
    #[error("no backend selected")]
    NoBackend,
    #[error("generating {id}: {source}")]
    Generate { id: String, source: GenError },
    #[error("solving {id}: {source}")]
    Solve { id: String, source: SolveError },
    #[error("comparing {id}: {source}")]
    Metric { id: String, source: MetricError },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub formula_id: String,
    pub vars: u32,
    pub clauses: usize,
    pub backend: BackendKind,
    pub verdict: &'static str,
    pub decisions: u64,
    pub swaps: u64,
    pub partitions: usize,
    pub counters: PerfCounters,
    pub total_time_ns: f64,
    pub engine_bcps: Option<f64>,
    pub effective_bcps: Option<f64>,
    /// Software over hardware time; only on hw-sim rows with a software run.
    pub speedup: Option<f64>,
    pub breakdown: Option<TimeBreakdown>,
}

impl BenchRow {
    pub fn single_partition(&self) -> bool {
        self.backend == BackendKind::HwSim && self.partitions == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub skipped: Vec<BenchCell>,
}

/// Runs one cell on every backend in `backends`.
pub fn run_cell(
    cell: BenchCell,
    clause_len: usize,
    backends: &[BackendKind],
    base: &SolverConfig,
) -> Result<Vec<BenchRow>, BenchError> {
    let id = cell.formula_id(clause_len);
    let formula = gen_random(cell.vars, cell.clauses, clause_len, cell.seed).map_err(|source| BenchError::Generate {
        id: id.clone(),
        source,
    })?;
    let cm = &base.costs;
    let mut rows = Vec::with_capacity(backends.len());
    let mut sw_counters = None;
    for &backend in backends {
        let cfg = SolverConfig {
            backend,
            ..base.clone()
        };
        let report = solve(&formula, &cfg).map_err(|source| BenchError::Solve {
            id: id.clone(),
            source,
        })?;
        if backend == BackendKind::Software {
            sw_counters = Some(report.counters.clone());
        }
        rows.push(BenchRow {
            formula_id: id.clone(),
            vars: cell.vars,
            clauses: cell.clauses,
            backend,
            verdict: report.outcome.name(),
            decisions: report.decisions,
            swaps: report.swaps,
            partitions: report.partitions,
            total_time_ns: report.counters.total_time_ns(cm),
            engine_bcps: engine_throughput(&report.counters, cm).ok(),
            effective_bcps: effective_throughput(&report.counters, cm).ok(),
            speedup: None,
            breakdown: time_breakdown(&report.counters, cm).ok(),
            counters: report.counters,
        });
    }
    if let Some(sw) = sw_counters {
        for row in rows.iter_mut().filter(|r| r.backend == BackendKind::HwSim) {
            let s = speedup(&row.counters, &sw, cm).map_err(|source| BenchError::Metric {
                id: id.clone(),
                source,
            })?;
            row.speedup = Some(s);
        }
    }
    Ok(rows)
}

/// Runs every feasible cell, in parallel across cells.
pub fn run_bench(spec: &BenchSpec, base: &SolverConfig) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let (cells, skipped) = spec.cells();
    let per_cell: Vec<Result<Vec<BenchRow>, BenchError>> = cells
        .par_iter()
        .map(|&cell| run_cell(cell, spec.clause_len, &spec.backends, base))
        .collect();
    let mut rows = Vec::new();
    for r in per_cell {
        rows.extend(r?);
    }
    Ok(BenchReport { rows, skipped })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("# bcpsim bench v1\n# {BCP_EVENT_DEFINITION}\n{BENCH_CSV_HEADER}\n");
    for r in rows {
        let c = &r.counters;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3},{},{},{},{},{}\n",
            r.formula_id,
            r.vars,
            r.clauses,
            r.backend.name(),
            r.verdict,
            r.decisions,
            r.swaps,
            c.bcp_events,
            c.engine_cycles,
            c.swap_cycles,
            c.interface_cycles,
            r.total_time_ns,
            opt(r.engine_bcps, 3),
            opt(r.effective_bcps, 3),
            opt(r.speedup, 6),
            r.partitions,
            if r.single_partition() { "single-partition" } else { "" },
        ));
    }
    out
}

pub fn breakdown_to_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("# bcpsim breakdown v1\n{BREAKDOWN_CSV_HEADER}\n");
    for r in rows {
        let Some(b) = r.breakdown else { continue };
        out.push_str(&format!(
            "{},{},{},{},{:.12},{:.12},{:.12},{:.12}\n",
            r.formula_id,
            r.vars,
            r.clauses,
            r.backend.name(),
            b.engine,
            b.swap,
            b.interface,
            b.software
        ));
    }
    out
}
