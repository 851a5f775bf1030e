//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bcpsim::bench::{rows_to_csv, run_bench, BenchRow, BenchSpec, Sweep};
use bcpsim::cnf::{gen_random, Formula, Literal};
use bcpsim::engine::{BcpOutcome, EngineConfig, EngineState};
use bcpsim::hwif::{Command, RegisterFile, STATUS_CONFLICT, STATUS_IMPLICATION};
use bcpsim::partition::{greedy_partition, Partition, PartitionLimits};
use bcpsim::perf::{engine_throughput, CostModel};
use bcpsim::solver::{
    software_bcp, solve, AssignmentTrail, BackendKind, HardwareBackend, Outcome, Propagation, SoftwareBcp,
    SoftwareStats, SolverConfig,
};
use common::{brute_force_sat, formula, satisfies, to_ints, unit_fixpoint, Fixpoint};

type Verdict = Result<String, String>;

fn random_3cnf(rng: &mut ChaCha8Rng) -> Formula {
    let n = rng.gen_range(8..=12u32);
    let m = rng.gen_range(n as usize..=6 * n as usize);
    gen_random(n, m, 3, rng.gen()).unwrap()
}

fn check_against_oracle(f: &Formula) -> Result<(), String> {
    let ints = to_ints(f);
    let expected = brute_force_sat(f.num_vars(), &ints);
    for backend in [BackendKind::Software, BackendKind::HwSim] {
        let r = solve(f, &SolverConfig::with_backend(backend)).map_err(|e| e.to_string())?;
        let ok = match &r.outcome {
            Outcome::Sat(model) => expected && satisfies(model, &ints),
            Outcome::Unsat => !expected,
            Outcome::Timeout => false,
        };
        if !ok {
            return Err(format!("{} gave {} on {:?}", backend.name(), r.outcome.name(), ints));
        }
    }
    Ok(())
}

/// Every non-tautological clause over variables 1..=3.
fn all_3var_clauses() -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for code in 1..27u32 {
        let mut c = Vec::new();
        let mut k = code;
        for v in 1..=3i64 {
            match k % 3 {
                1 => c.push(v),
                2 => c.push(-v),
                _ => {}
            }
            k /= 3;
        }
        out.push(c);
    }
    out
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    for _ in 0..500 {
        check_against_oracle(&random_3cnf(&mut rng))?;
    }
    let clauses = all_3var_clauses();
    let mut count = 0usize;
    let mut pick = Vec::new();
    fn rec(
        clauses: &[Vec<i64>],
        from: usize,
        pick: &mut Vec<Vec<i64>>,
        count: &mut usize,
    ) -> Result<(), String> {
        *count += 1;
        check_against_oracle(&formula(3, pick))?;
        if pick.len() == 4 {
            return Ok(());
        }
        for i in from..clauses.len() {
            pick.push(clauses[i].clone());
            rec(clauses, i + 1, pick, count)?;
            pick.pop();
        }
        Ok(())
    }
    rec(&clauses, 0, &mut pick, &mut count)?;
    let elapsed = started.elapsed();
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("500 random + {count} exhaustive 3-variable formulas agree, {elapsed:.1?}"))
}

fn random_partition_case(rng: &mut ChaCha8Rng) -> (Formula, Partition) {
    let n = rng.gen_range(3..=40u32);
    let m = rng.gen_range(1..=(3 * n as usize).min(224));
    let len = rng.gen_range(2..=3usize);
    let f = gen_random(n, m, len, rng.gen()).unwrap();
    let plan = greedy_partition(&f, &PartitionLimits::default()).unwrap();
    let p = plan.partitions()[rng.gen_range(0..plan.len())].clone();
    (f, p)
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0002);
    let mut conflicts = 0;
    for case in 0..500 {
        let (f, p) = random_partition_case(&mut rng);
        let clauses: Vec<Vec<i64>> = p.clause_indices.iter().map(|&i| to_ints(&f)[i].clone()).collect();
        let mut vars: Vec<u32> = p.local_vars.clone();
        let trigger_var = vars.swap_remove(rng.gen_range(0..vars.len()));
        let mut start = BTreeMap::new();
        for v in vars {
            if rng.gen_bool(0.15) {
                start.insert(v, rng.gen_bool(0.5));
            }
        }
        let trigger = Literal::new(trigger_var, rng.gen_bool(0.5));

        let mut e = EngineState::new(EngineConfig::default());
        e.load_partition(&f, &p).map_err(|err| err.to_string())?;
        for (&v, &b) in &start {
            e.broadcast_deferred(Literal::new(v, b), 0).map_err(|err| err.to_string())?;
        }
        let got = e.run_bcp(Some(trigger), 1).map_err(|err| err.to_string())?;

        let mut with_trigger = start.clone();
        with_trigger.insert(trigger_var, trigger.is_positive());
        let expected = unit_fixpoint(&clauses, &with_trigger);
        let same = match (&got, &expected) {
            (BcpOutcome::Conflict, Fixpoint::Conflict) => {
                conflicts += 1;
                true
            }
            (BcpOutcome::Quiescent(imps), Fixpoint::Implied(set)) => {
                let got: BTreeMap<u32, bool> = imps
                    .iter()
                    .map(|i| (i.literal.var(), i.literal.is_positive()))
                    .collect();
                got.len() == imps.len() && &got == set
            }
            _ => false,
        };
        if !same {
            return Err(format!("case {case}: engine {got:?}, oracle {expected:?}"));
        }
    }
    Ok(format!("500 cases agree ({conflicts} conflicts)"))
}

fn check_plan(f: &Formula, limits: &PartitionLimits) -> Result<usize, String> {
    let plan = greedy_partition(f, limits).map_err(|e| e.to_string())?;
    let mut next = 0usize;
    for (k, p) in plan.partitions().iter().enumerate() {
        if p.id != k {
            return Err(format!("partition {k} has id {}", p.id));
        }
        if p.clause_indices.is_empty() || p.clause_indices.len() > limits.max_clauses {
            return Err(format!("partition {k} holds {} clauses", p.clause_indices.len()));
        }
        for &ci in &p.clause_indices {
            if ci != next {
                return Err(format!("partition {k}: clause {ci} out of order, expected {next}"));
            }
            next += 1;
        }
        let vars: BTreeSet<u32> = p
            .clause_indices
            .iter()
            .flat_map(|&ci| f.clauses()[ci].literals().iter().map(|l| l.var()))
            .collect();
        if vars.len() > limits.max_vars {
            return Err(format!("partition {k} spans {} variables", vars.len()));
        }
        if vars.into_iter().collect::<Vec<_>>() != p.local_vars {
            return Err(format!("partition {k} local variables differ from its clauses"));
        }
        for v in &p.local_vars {
            if !plan.partitions_of(*v).contains(&k) {
                return Err(format!("variable {v} occurrence list misses partition {k}"));
            }
        }
    }
    if next != f.num_clauses() {
        return Err(format!("plan covers {next} of {} clauses", f.num_clauses()));
    }
    Ok(plan.len())
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0003);
    let limits = PartitionLimits::default();
    let mut max_parts = 0;
    for i in 0..1000 {
        let (n, m) = if i % 100 == 0 {
            (630, 22400)
        } else {
            (rng.gen_range(3..=630u32), rng.gen_range(0..=22400usize) / rng.gen_range(1..=20usize))
        };
        let f = gen_random(n, m, 3, rng.gen()).unwrap();
        max_parts = max_parts.max(check_plan(&f, &limits).map_err(|e| format!("formula {i} ({n}/{m}): {e}"))?);
    }
    Ok(format!("1000 plans valid (largest {max_parts} partitions)"))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    let limits = PartitionLimits::default();
    let costs = CostModel::default();
    let mut checked = 0usize;
    let mut formulas = 0usize;
    let mut attempts = 0usize;
    while formulas < 300 {
        attempts += 1;
        let n = rng.gen_range(64..=200u32);
        let m = rng.gen_range(450..=(4 * n as usize).max(700));
        let f = gen_random(n, m, 3, rng.gen()).unwrap();
        let mut hw = HardwareBackend::new(&f, &limits, &costs).map_err(|e| e.to_string())?;
        if hw.plan().len() < 3 {
            continue;
        }
        formulas += 1;
        let ints = to_ints(&f);
        let mut trail = AssignmentTrail::new(n);
        let mut from = 0;
        // Trail prefix fixed before propagation: everything up to and
        // including the latest decision.
        let mut base = 0;
        loop {
            let mut reference = trail.clone();
            let hw_result = hw.propagate_all_partitions(&mut trail, from).map_err(|e| e.to_string())?;
            let sw_result = software_bcp(&mut reference, &f, from, &mut SoftwareStats::default());
            let assigned: BTreeMap<u32, bool> = trail.entries()[..base]
                .iter()
                .map(|e| (e.literal.var(), e.literal.is_positive()))
                .collect();
            let oracle = unit_fixpoint(&ints, &assigned);
            checked += 1;
            match (hw_result, sw_result, &oracle) {
                (Propagation::Conflict, SoftwareBcp::Conflict, Fixpoint::Conflict) => break,
                (Propagation::Quiescent, SoftwareBcp::Quiescent(_), Fixpoint::Implied(set)) => {
                    let hw_set: BTreeMap<u32, bool> = trail.entries()[base..]
                        .iter()
                        .map(|e| (e.literal.var(), e.literal.is_positive()))
                        .collect();
                    let sw_set: BTreeMap<u32, bool> = reference.entries()[base..]
                        .iter()
                        .map(|e| (e.literal.var(), e.literal.is_positive()))
                        .collect();
                    if &hw_set != set || &sw_set != set {
                        return Err(format!(
                            "formula {formulas}: implied sets differ at level {}: hw {hw_set:?} sw {sw_set:?} oracle {set:?}",
                            trail.current_level()
                        ));
                    }
                }
                (h, s, o) => {
                    return Err(format!("formula {formulas}: hw {h:?}, sw {s:?}, oracle {o:?}"));
                }
            }
            let free = (1..=n).filter(|&v| !trail.value(v).is_assigned()).collect::<Vec<_>>();
            if free.is_empty() {
                break;
            }
            let v = free[rng.gen_range(0..free.len())];
            from = trail.len();
            trail.push_decision(Literal::new(v, rng.gen_bool(0.5)), false);
            base = trail.len();
        }
    }
    Ok(format!("300 formulas with >= 3 partitions, {checked} propagations agree ({attempts} drawn)"))
}

#[derive(Debug)]
enum Op {
    Load(usize),
    Broadcast(Literal, u32),
    Start(Option<Literal>, u32),
    Clear(u32),
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);
    let limits = PartitionLimits {
        max_clauses: 16,
        max_vars: 12,
        max_literals_per_clause: 4,
    };
    let cfg = EngineConfig {
        processors: 16,
        literals_per_processor: 4,
        costs: CostModel::default(),
    };
    let mut steps = 0;
    for script in 0..200 {
        let n = rng.gen_range(3..=20u32);
        let f = gen_random(n, rng.gen_range(1..=48usize), 3, rng.gen()).unwrap();
        let plan = greedy_partition(&f, &limits).unwrap();
        let mut direct = EngineState::new(cfg.clone());
        let mut via_regs = EngineState::new(cfg.clone());
        let mut regs = RegisterFile::new(cfg.costs.clone());
        let mut data = None;
        for step in 0..rng.gen_range(5..40) {
            let lit = |rng: &mut ChaCha8Rng| Literal::new(rng.gen_range(1..=n), rng.gen_bool(0.5));
            let op = match rng.gen_range(0..10) {
                0 | 1 => Op::Load(rng.gen_range(0..plan.len())),
                2..=4 => Op::Broadcast(lit(&mut rng), rng.gen_range(0..4)),
                5..=7 => {
                    let t = if rng.gen_bool(0.8) { Some(lit(&mut rng)) } else { None };
                    Op::Start(t, rng.gen_range(0..4))
                }
                _ => Op::Clear(rng.gen_range(0..4)),
            };
            let mut set_level = |regs: &mut RegisterFile, e: &mut EngineState, level: u32| {
                if data != Some(level) {
                    regs.write_data(e, level);
                    data = Some(level);
                }
            };
            let (d, r): (Result<Vec<Literal>, String>, Result<Vec<Literal>, String>) = match op {
                Op::Load(pid) => {
                    let p = &plan.partitions()[pid];
                    (
                        direct.load_partition(&f, p).map(|_| vec![]).map_err(|e| e.to_string()),
                        regs.load_partition(&mut via_regs, &f, p).map(|_| vec![]).map_err(|e| e.to_string()),
                    )
                }
                Op::Broadcast(l, lvl) => {
                    set_level(&mut regs, &mut via_regs, lvl);
                    (
                        direct.broadcast_deferred(l, lvl).map(|_| vec![]).map_err(|e| e.to_string()),
                        regs.write_command(&mut via_regs, Command::broadcast(l))
                            .map(|_| vec![])
                            .map_err(|e| e.to_string()),
                    )
                }
                Op::Start(t, lvl) => {
                    set_level(&mut regs, &mut via_regs, lvl);
                    let d = direct.run_bcp(t, lvl).map_err(|e| e.to_string()).map(|o| match o {
                        BcpOutcome::Quiescent(imps) => imps.iter().map(|i| i.literal).collect(),
                        BcpOutcome::Conflict => vec![],
                    });
                    let r = regs
                        .write_command(&mut via_regs, Command::start(t))
                        .map_err(|e| e.to_string())
                        .and_then(|_| {
                            let status = regs.wait(&mut via_regs);
                            let mut out = vec![];
                            if status & STATUS_CONFLICT == 0 && status & STATUS_IMPLICATION != 0 {
                                while regs.peek_status() & STATUS_IMPLICATION != 0 {
                                    out.push(regs.read_implication(&mut via_regs).map_err(|e| e.to_string())?);
                                }
                            }
                            Ok(out)
                        });
                    (d, r)
                }
                Op::Clear(lvl) => (
                    direct.clear_above(lvl).map(|_| vec![]).map_err(|e| e.to_string()),
                    regs.write_command(&mut via_regs, Command::clear_above(lvl))
                        .map(|_| vec![])
                        .map_err(|e| e.to_string()),
                ),
            };
            steps += 1;
            if d.is_ok() != r.is_ok() || d.as_ref().ok() != r.as_ref().ok() {
                return Err(format!("script {script} step {step}: direct {d:?}, registers {r:?}"));
            }
            if direct != via_regs {
                return Err(format!("script {script} step {step}: engine states diverge"));
            }
        }
    }
    Ok(format!("200 scripts, {steps} operations, identical engine states"))
}

fn criterion_6() -> Verdict {
    let cm = CostModel {
        clock_hz: 106.66e6,
        cycles_broadcast: 1,
        cycles_evaluate: 1,
        cycles_select: 1,
        cycles_load_per_literal: 0,
        axi_write_cycles: 0,
        axi_read_cycles: 0,
        ..CostModel::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let f = gen_random(63, 224, 3, seed).unwrap();
        let cfg = SolverConfig {
            backend: BackendKind::HwSim,
            costs: cm.clone(),
            ..Default::default()
        };
        let r = solve(&f, &cfg).map_err(|e| e.to_string())?;
        let pc = &r.counters;
        if pc.swap_cycles != 0 || pc.interface_cycles != 0 {
            return Err("swap or interface cycles charged under a zero-cost model".into());
        }
        let got = engine_throughput(pc, &cm).map_err(|e| e.to_string())?;
        let hand = pc.bcp_events as f64 * 106.66e6 / pc.engine_cycles as f64;
        worst = worst.max(((got - hand) / hand).abs());
    }
    let hand_example = engine_throughput(
        &bcpsim::PerfCounters {
            bcp_events: 1000,
            engine_cycles: 1000,
            ..Default::default()
        },
        &cm,
    )
    .unwrap();
    if (hand_example - 106.66e6).abs() > 106.66e6 * 1e-12 {
        return Err(format!("1000 events in 1000 cycles gave {hand_example}"));
    }
    if worst > 1e-12 {
        return Err(format!("relative error {worst:e}"));
    }
    Ok(format!("20 runs within {worst:e} of hand arithmetic"))
}

struct Sweeps {
    fix_vars: (Vec<BenchRow>, Duration),
    fix_clauses: (Vec<BenchRow>, Duration),
}

fn run_sweep(sweep: Sweep) -> Result<(Vec<BenchRow>, Duration), String> {
    let spec = BenchSpec::sweep(sweep);
    let started = Instant::now();
    let report = run_bench(&spec, &SolverConfig::default()).map_err(|e| e.to_string())?;
    Ok((report.rows, started.elapsed()))
}

fn sweeps() -> Result<Sweeps, String> {
    Ok(Sweeps {
        fix_vars: run_sweep(Sweep::FixVars(63))?,
        fix_clauses: run_sweep(Sweep::FixClauses(22400))?,
    })
}

fn hw_speedup(rows: &[BenchRow], vars: u32, clauses: usize) -> Result<f64, String> {
    rows.iter()
        .find(|r| r.backend == BackendKind::HwSim && r.vars == vars && r.clauses == clauses)
        .and_then(|r| r.speedup)
        .ok_or_else(|| format!("no hw-sim speedup for {vars}/{clauses}"))
}

fn criterion_7(s: &Sweeps) -> Verdict {
    let limit = Duration::from_secs(600);
    for (name, (_, t)) in [("fixed-variables", &s.fix_vars), ("fixed-clauses", &s.fix_clauses)] {
        if *t >= limit {
            return Err(format!("{name} sweep took {t:?}"));
        }
    }
    let a224 = hw_speedup(&s.fix_vars.0, 63, 224)?;
    let a22400 = hw_speedup(&s.fix_vars.0, 63, 22400)?;
    let b63 = hw_speedup(&s.fix_clauses.0, 63, 22400)?;
    let b630 = hw_speedup(&s.fix_clauses.0, 630, 22400)?;
    let summary = format!(
        "63 vars: {a224:.3}x at 224 vs {a22400:.3}x at 22400 clauses; 22400 clauses: {b63:.3}x at 63 vs {b630:.3}x at 630 vars; sweeps {:.1?} / {:.1?}",
        s.fix_vars.1, s.fix_clauses.1
    );
    if a22400 > a224 && b63 > b630 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn criterion_8(s: &Sweeps) -> Verdict {
    let mut cells = 0;
    for row in s.fix_vars.0.iter().chain(&s.fix_clauses.0) {
        let b = row.breakdown.ok_or_else(|| format!("{} has no breakdown", row.formula_id))?;
        if (b.sum() - 1.0).abs() > 1e-9 {
            return Err(format!("{} fractions sum to {}", row.formula_id, b.sum()));
        }
        cells += 1;
    }
    let mut hw: Vec<&BenchRow> = s.fix_clauses.0.iter().filter(|r| r.backend == BackendKind::HwSim).collect();
    hw.sort_by_key(|r| r.vars);
    let swap: Vec<f64> = hw.iter().map(|r| r.breakdown.unwrap().swap).collect();
    let shown = swap.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(" ");
    if swap.windows(2).all(|w| w[1] >= w[0]) {
        Ok(format!("{cells} rows sum to 1; swap fraction over 63..630 vars: {shown}"))
    } else {
        Err(format!("swap fraction not monotone over 63..630 vars: {shown}"))
    }
}

fn criterion_9() -> Verdict {
    let spec = BenchSpec {
        variable_sizes: vec![63, 126],
        clause_sizes: vec![224, 448, 2240],
        seeds: vec![1, 2],
        ..Default::default()
    };
    let cfg = SolverConfig {
        timeout_decisions: Some(20_000),
        ..Default::default()
    };
    let a = rows_to_csv(&run_bench(&spec, &cfg).map_err(|e| e.to_string())?.rows);
    let b = rows_to_csv(&run_bench(&spec, &cfg).map_err(|e| e.to_string())?.rows);
    if a == b {
        Ok(format!("{} CSV lines identical across runs", a.lines().count()))
    } else {
        Err("CSV differs between runs".into())
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, v: Verdict| match v {
        Ok(detail) => println!("PASS {id} {name}: {detail}"),
        Err(detail) => {
            failed += 1;
            println!("FAIL {id} {name}: {detail}");
        }
    };
    report(1, "oracle soundness", criterion_1());
    report(2, "parallel/sequential BCP equivalence", criterion_2());
    report(3, "partitioning correctness", criterion_3());
    report(4, "multi-partition fixpoint equivalence", criterion_4());
    report(5, "interface transparency", criterion_5());
    report(6, "throughput arithmetic", criterion_6());
    match sweeps() {
        Ok(s) => {
            report(7, "speedup trend", criterion_7(&s));
            report(8, "breakdown coherence", criterion_8(&s));
        }
        Err(e) => {
            report(7, "speedup trend", Err(e.clone()));
            report(8, "breakdown coherence", Err(e));
        }
    }
    report(9, "determinism", criterion_9());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
