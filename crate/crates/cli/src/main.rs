use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bcpsim::bench::{breakdown_to_csv, rows_to_csv, run_bench, BenchSpec, Sweep};
use bcpsim::cnf::{gen_random, parse_dimacs, serialize_dimacs, Formula, Verdict};
use bcpsim::engine::trace_to_csv;
use bcpsim::oracle::truth_table;
use bcpsim::partition::{dispersion_stats, greedy_partition, PartitionLimits};
use bcpsim::perf::{
    effective_throughput, engine_throughput, format_rate, render_throughput_table, time_breakdown, CostModel,
};
use bcpsim::solver::{calibrate_host_op_cost, calibrate_software_cost, solve, BackendKind, Outcome, SolverConfig};

const EXIT_SAT: u8 = 10;
const EXIT_UNSAT: u8 = 20;
const EXIT_ERROR: u8 = 1;

macro_rules! outln {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

#[derive(Parser, Debug)]
#[command(name = "bcpsim", version, about = "DPLL SAT solver with a simulated BCP accelerator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a DIMACS file. Exit code 10 = SAT, 20 = UNSAT, 1 = error.
    Solve {
        path: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Write the engine event trace as CSV (hw-sim backend).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the benchmark matrix on generated random formulas.
    Bench {
        #[command(flatten)]
        axes: Axes,
        #[command(flatten)]
        common: Common,
        /// Backends to run, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "software,hw-sim")]
        backends: Vec<BackendKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive truth-table verdict (at most 24 variables).
    Oracle {
        /// DIMACS file; omit to generate from --vars/--clauses/--seed.
        path: Option<PathBuf>,
        #[arg(long)]
        vars: Option<u32>,
        #[arg(long)]
        clauses: Option<usize>,
        #[arg(long, default_value_t = 3)]
        clause_len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Per-phase time fractions for a file or for a sweep of generated formulas.
    Breakdown {
        path: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["path", "fix_clauses"])]
        fix_vars: Option<u32>,
        #[arg(long, conflicts_with = "path")]
        fix_clauses: Option<usize>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition a DIMACS file and print the plan (or dispersion histogram).
    Plan {
        path: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dispersion: bool,
    },
    /// Print a generated random formula as DIMACS.
    Gen {
        #[arg(long)]
        vars: u32,
        #[arg(long)]
        clauses: usize,
        #[arg(long, default_value_t = 3)]
        clause_len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time the software propagator and print ns per clause visit.
    Calibrate,
    /// Engine-throughput comparison table, with a measured row for a file.
    Throughput {
        path: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
struct Axes {
    #[arg(long, value_delimiter = ',', default_value = "63,126,252,630")]
    vars: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "224,448,2240,22400")]
    clauses: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    clause_len: usize,
    /// Seeds, comma separated.
    #[arg(long = "seed", value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value = "software")]
    backend: BackendKind,
    #[arg(long, default_value_t = 224)]
    max_clauses: usize,
    #[arg(long, default_value_t = 63)]
    max_vars: usize,
    #[arg(long, default_value_t = 16)]
    max_literals: usize,
    #[arg(long)]
    clock_hz: Option<f64>,
    /// Cost model parameter, NAME=VALUE; also accepted as --cost.NAME=VALUE.
    #[arg(long = "cost", value_name = "NAME=VALUE")]
    cost: Vec<String>,
    #[arg(long)]
    timeout_decisions: Option<u64>,
    /// Replace the software costs with a fresh calibration on this machine.
    #[arg(long)]
    calibrate: bool,
}

impl Common {
    fn config(&self) -> Result<SolverConfig> {
        let mut costs = CostModel::default();
        if let Some(hz) = self.clock_hz {
            costs.clock_hz = hz;
        }
        for kv in &self.cost {
            let (name, value) = kv
                .split_once('=')
                .with_context(|| format!("cost parameter `{kv}` is not NAME=VALUE"))?;
            costs.set(name, value)?;
        }
        if self.calibrate {
            costs.software_ns_per_clause_visit = calibrate_software_cost();
            costs.software_ns_per_host_op = calibrate_host_op_cost();
        }
        costs.validate()?;
        let limits = PartitionLimits {
            max_clauses: self.max_clauses,
            max_vars: self.max_vars,
            max_literals_per_clause: self.max_literals,
        };
        limits.validate()?;
        Ok(SolverConfig {
            backend: self.backend,
            limits,
            costs,
            timeout_decisions: self.timeout_decisions,
            ..Default::default()
        })
    }
}

/// Rewrites `--cost.NAME=V` and `--cost.NAME V` into `--cost NAME=V`.
fn normalize_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = args.into_iter().peekable();
    while let Some(arg) = iter.next() {
        match arg.strip_prefix("--cost.") {
            Some(rest) => {
                out.push("--cost".to_string());
                if rest.contains('=') {
                    out.push(rest.to_string());
                } else {
                    let value = iter.next().unwrap_or_default();
                    out.push(format!("{rest}={value}"));
                }
            }
            None => out.push(arg),
        }
    }
    out
}

fn read_formula(path: &Path) -> Result<Formula> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn model_line(model: &[bool]) -> String {
    let mut line = String::from("v");
    for (i, &b) in model.iter().enumerate() {
        let v = i as i64 + 1;
        line.push_str(&format!(" {}", if b { v } else { -v }));
    }
    line.push_str(" 0");
    line
}

fn cmd_solve(path: &Path, common: &Common, trace: Option<&Path>) -> Result<u8> {
    let formula = read_formula(path)?;
    let mut cfg = common.config()?;
    cfg.trace = trace.is_some();
    let report = solve(&formula, &cfg)?;
    let cm = &cfg.costs;
    let pc = &report.counters;
    let code = match &report.outcome {
        Outcome::Sat(model) => {
            outln!("s SATISFIABLE");
            outln!("{}", model_line(model));
            EXIT_SAT
        }
        Outcome::Unsat => {
            outln!("s UNSATISFIABLE");
            EXIT_UNSAT
        }
        Outcome::Timeout => {
            outln!("s UNKNOWN");
            0
        }
    };
    eprintln!("c backend {}", cfg.backend.name());
    eprintln!(
        "c decisions {} backtracks {} implications {} swaps {} partitions {}",
        report.decisions, report.backtracks, report.implications, report.swaps, report.partitions
    );
    eprintln!(
        "c bcp_events {} engine_cycles {} swap_cycles {} interface_cycles {} clause_visits {} host_ops {}",
        pc.bcp_events, pc.engine_cycles, pc.swap_cycles, pc.interface_cycles, pc.clause_visits, pc.host_ops
    );
    eprintln!("c modeled_time_ns {:.3} wall_time_ns {}", pc.total_time_ns(cm), pc.wall_time.as_nanos());
    if let Ok(t) = engine_throughput(pc, cm) {
        eprintln!("c engine_throughput {} BCP/s", format_rate(t));
    }
    if let Ok(t) = effective_throughput(pc, cm) {
        eprintln!("c effective_throughput {} BCP/s", format_rate(t));
    }
    if let Some(p) = trace {
        fs::write(p, trace_to_csv(&report.trace)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(code)
}

fn cmd_bench(axes: &Axes, common: &Common, backends: Vec<BackendKind>, out: Option<&Path>) -> Result<()> {
    let spec = BenchSpec {
        variable_sizes: axes.vars.clone(),
        clause_sizes: axes.clauses.clone(),
        clause_len: axes.clause_len,
        seeds: axes.seeds.clone(),
        backends,
    };
    let report = run_bench(&spec, &common.config()?)?;
    for cell in &report.skipped {
        eprintln!(
            "c skipped v{} c{} s{}: too few clauses for the variable count",
            cell.vars, cell.clauses, cell.seed
        );
    }
    emit(out, &rows_to_csv(&report.rows))
}

fn cmd_oracle(path: Option<&Path>, vars: Option<u32>, clauses: Option<usize>, clause_len: usize, seed: u64) -> Result<u8> {
    let formula = match (path, vars, clauses) {
        (Some(p), None, None) => read_formula(p)?,
        (None, Some(v), Some(c)) => gen_random(v, c, clause_len, seed)?,
        _ => bail!("give either a DIMACS path or both --vars and --clauses"),
    };
    let result = truth_table(&formula)?;
    Ok(match result.verdict {
        Verdict::Sat => {
            outln!("s SATISFIABLE");
            outln!("{}", model_line(result.model.as_deref().unwrap_or_default()));
            EXIT_SAT
        }
        Verdict::Unsat => {
            outln!("s UNSATISFIABLE");
            EXIT_UNSAT
        }
    })
}

fn cmd_breakdown(
    path: Option<&Path>,
    fix_vars: Option<u32>,
    fix_clauses: Option<usize>,
    common: &Common,
    out: Option<&Path>,
) -> Result<()> {
    let base = common.config()?;
    match (path, fix_vars, fix_clauses) {
        (Some(p), None, None) => {
            let formula = read_formula(p)?;
            let report = solve(&formula, &base)?;
            let b = time_breakdown(&report.counters, &base.costs)?;
            let text = format!(
                "# bcpsim breakdown v1\nformula_id,vars,clauses,backend,engine,swap,interface,software\n{},{},{},{},{:.12},{:.12},{:.12},{:.12}\n",
                p.display(),
                formula.num_vars(),
                formula.num_clauses(),
                base.backend.name(),
                b.engine,
                b.swap,
                b.interface,
                b.software
            );
            emit(out, &text)
        }
        (None, v, c) => {
            let sweep = match (v, c) {
                (Some(v), None) => Sweep::FixVars(v),
                (None, Some(c)) => Sweep::FixClauses(c),
                _ => bail!("give a DIMACS path, --fix-vars or --fix-clauses"),
            };
            let spec = BenchSpec {
                backends: vec![BackendKind::HwSim],
                ..BenchSpec::sweep(sweep)
            };
            let report = run_bench(&spec, &base)?;
            emit(out, &breakdown_to_csv(&report.rows))
        }
        _ => bail!("a path cannot be combined with a sweep"),
    }
}

fn cmd_plan(path: &Path, common: &Common, dispersion: bool) -> Result<()> {
    let formula = read_formula(path)?;
    let plan = greedy_partition(&formula, &common.config()?.limits)?;
    let stats = dispersion_stats(&plan);
    eprintln!(
        "c partitions {} max_dispersion {} mean_dispersion {:.4} cross_vars {}",
        plan.len(),
        stats.max,
        *stats.mean.numer() as f64 / *stats.mean.denom() as f64,
        stats.total_cross_vars
    );
    let text = if dispersion {
        plan.dispersion_histogram_csv()
    } else {
        plan.to_csv()
    };
    emit(None, &text)
}

fn cmd_throughput(path: Option<&Path>, common: &Common) -> Result<()> {
    let measured = match path {
        Some(p) => {
            let formula = read_formula(p)?;
            let cfg = SolverConfig {
                backend: BackendKind::HwSim,
                ..common.config()?
            };
            let report = solve(&formula, &cfg)?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Some((name, engine_throughput(&report.counters, &cfg.costs)?))
        }
        None => None,
    };
    emit(None, &render_throughput_table(measured.as_ref().map(|(n, t)| (n.as_str(), *t))))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { path, common, trace } => cmd_solve(&path, &common, trace.as_deref()),
        Command::Bench {
            axes,
            common,
            backends,
            out,
        } => cmd_bench(&axes, &common, backends, out.as_deref()).map(|_| 0),
        Command::Oracle {
            path,
            vars,
            clauses,
            clause_len,
            seed,
        } => cmd_oracle(path.as_deref(), vars, clauses, clause_len, seed),
        Command::Breakdown {
            path,
            fix_vars,
            fix_clauses,
            common,
            out,
        } => cmd_breakdown(path.as_deref(), fix_vars, fix_clauses, &common, out.as_deref()).map(|_| 0),
        Command::Plan {
            path,
            common,
            dispersion,
        } => cmd_plan(&path, &common, dispersion).map(|_| 0),
        Command::Gen {
            vars,
            clauses,
            clause_len,
            seed,
        } => {
            emit(None, &serialize_dimacs(&gen_random(vars, clauses, clause_len, seed)?))?;
            Ok(0)
        }
        Command::Calibrate => {
            outln!("software_ns_per_clause_visit {:.4}", calibrate_software_cost());
            outln!("software_ns_per_host_op {:.4}", calibrate_host_op_cost());
            Ok(0)
        }
        Command::Throughput { path, common } => cmd_throughput(path.as_deref(), &common).map(|_| 0),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(normalize_args(std::env::args())) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if is_broken_pipe(&e) => ExitCode::from(EXIT_ERROR),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
