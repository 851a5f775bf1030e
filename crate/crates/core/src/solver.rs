//! Plain DPLL search with a pluggable propagation backend.
//!
//! The search is chronological: decide, propagate, and on conflict flip the
//! most recent decision that has not been flipped yet. Propagation is
//! delegated to a [`BcpBackend`]: either [`SoftwareBackend`], which scans the
//! whole formula on the host, or [`HardwareBackend`], which drives the
//! simulated accelerator through its register interface and hot-swaps
//! partitions as needed.

use std::time::Instant;

use crate::cnf::{eval_clause, eval_formula, eval_literals, Assignment, Formula, Literal, TruthValue, Var, Verdict};
use crate::engine::{EngineConfig, EngineState, Level, TraceEvent};
use crate::hwif::{Command, InterfaceError, RegisterFile, STATUS_CONFLICT, STATUS_IMPLICATION};
use crate::partition::{greedy_partition, PartitionError, PartitionLimits, PartitionPlan};
use crate::perf::{CostModel, PerfCounters};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    Decision { flipped: bool },
    /// Forced by unit propagation; carries the partition that produced it on
    /// the accelerator path.
    Implied(Option<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrailEntry {
    pub literal: Literal,
    pub level: Level,
    pub reason: Reason,
}

/// Variable values plus the chronological trail they were assigned in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentTrail {
    values: Vec<Option<(bool, Level)>>,
    entries: Vec<TrailEntry>,
    /// `level_starts[k - 1]` is the trail index of the decision opening level `k`.
    level_starts: Vec<usize>,
}

impl AssignmentTrail {
    pub fn new(num_vars: u32) -> Self {
        Self {
            values: vec![None; num_vars as usize + 1],
            entries: Vec::new(),
            level_starts: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        (self.values.len() - 1) as u32
    }

    pub fn current_level(&self) -> Level {
        self.level_starts.len() as Level
    }

    pub fn entries(&self) -> &[TrailEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, var: Var) -> TruthValue {
        match self.values.get(var as usize).copied().flatten() {
            Some((b, _)) => TruthValue::from_bool(b),
            None => TruthValue::Unassigned,
        }
    }

    pub fn level_of(&self, var: Var) -> Option<Level> {
        self.values.get(var as usize).copied().flatten().map(|(_, l)| l)
    }

    pub fn literal_value(&self, lit: Literal) -> TruthValue {
        match self.values.get(lit.var() as usize).copied().flatten() {
            Some((b, _)) => TruthValue::from_bool(lit.value_under(b)),
            None => TruthValue::Unassigned,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.entries.len() == self.num_vars() as usize
    }

    fn push(&mut self, literal: Literal, reason: Reason) {
        let slot = &mut self.values[literal.var() as usize];
        assert!(slot.is_none(), "variable {} assigned twice", literal.var());
        let level = self.level_starts.len() as Level;
        *slot = Some((literal.is_positive(), level));
        self.entries.push(TrailEntry { literal, level, reason });
    }

    /// Opens a new decision level with `literal`.
    pub fn push_decision(&mut self, literal: Literal, flipped: bool) {
        self.level_starts.push(self.entries.len());
        self.push(literal, Reason::Decision { flipped });
    }

    /// Records an implication at the current level. Panics if already assigned.
    pub fn push_implied(&mut self, literal: Literal, partition: Option<usize>) {
        self.push(literal, Reason::Implied(partition));
    }

    /// The decision entry that opened `level` (1-based).
    pub fn decision_at(&self, level: Level) -> Option<&TrailEntry> {
        let start = *self.level_starts.get(level.checked_sub(1)? as usize)?;
        self.entries.get(start)
    }

    /// Drops every entry with level above `level`.
    pub fn backtrack_to(&mut self, level: Level) {
        if level >= self.current_level() {
            return;
        }
        let cut = self.level_starts[level as usize];
        for e in self.entries.drain(cut..) {
            self.values[e.literal.var() as usize] = None;
        }
        self.level_starts.truncate(level as usize);
    }

    pub fn assignment(&self) -> Assignment {
        let mut a = Assignment::new(self.num_vars());
        for e in &self.entries {
            a.assign(e.literal);
        }
        a
    }

    /// `model[i]` is the value of variable `i + 1`; unassigned reads false.
    pub fn model(&self) -> Vec<bool> {
        (1..=self.num_vars())
            .map(|v| self.value(v) == TruthValue::True)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Propagation {
    Quiescent,
    Conflict,
}

/// Where unit propagation runs.
pub trait BcpBackend {
    /// Propagates trail entries from index `from` on (all of the formula when
    /// `from == trail.len()`) to a fixpoint, appending implications.
    fn propagate(&mut self, trail: &mut AssignmentTrail, from: usize) -> Result<Propagation, SolveError>;

    /// Called after `trail` was cut back to `level`.
    fn backtrack_to(&mut self, trail: &AssignmentTrail, level: Level) -> Result<(), SolveError>;

    fn counters(&self) -> PerfCounters;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SoftwareBcp {
    Quiescent(Vec<Literal>),
    Conflict,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SoftwareStats {
    pub clause_visits: u64,
    pub bcp_events: u64,
}

/// Sequential unit propagation over the whole formula.
///
/// Each newly assigned literal triggers one scan over every clause; a unit
/// clause assigns its literal at once and queues it. With nothing queued a
/// single scan is made, which catches unit clauses of the input.
pub fn software_bcp(
    trail: &mut AssignmentTrail,
    formula: &Formula,
    from: usize,
    stats: &mut SoftwareStats,
) -> SoftwareBcp {
    let mut implied = Vec::new();
    let mut qhead = from;
    let mut bare_scan = qhead >= trail.len();
    loop {
        if bare_scan {
            bare_scan = false;
        } else if qhead < trail.len() {
            qhead += 1;
            stats.bcp_events += 1;
        } else {
            return SoftwareBcp::Quiescent(implied);
        }
        for clause in formula.clauses() {
            stats.clause_visits += 1;
            match eval_literals(clause.literals(), |l| trail.literal_value(l)) {
                crate::cnf::ClauseStatus::Falsified => return SoftwareBcp::Conflict,
                crate::cnf::ClauseStatus::Unit(lit) => {
                    trail.push_implied(lit, None);
                    implied.push(lit);
                }
                _ => {}
            }
        }
    }
}

pub struct SoftwareBackend<'f> {
    formula: &'f Formula,
    stats: SoftwareStats,
}

impl<'f> SoftwareBackend<'f> {
    pub fn new(formula: &'f Formula) -> Self {
        Self {
            formula,
            stats: SoftwareStats::default(),
        }
    }
}

impl BcpBackend for SoftwareBackend<'_> {
    fn propagate(&mut self, trail: &mut AssignmentTrail, from: usize) -> Result<Propagation, SolveError> {
        Ok(match software_bcp(trail, self.formula, from, &mut self.stats) {
            SoftwareBcp::Quiescent(_) => Propagation::Quiescent,
            SoftwareBcp::Conflict => Propagation::Conflict,
        })
    }

    fn backtrack_to(&mut self, _trail: &AssignmentTrail, _level: Level) -> Result<(), SolveError> {
        Ok(())
    }

    fn counters(&self) -> PerfCounters {
        PerfCounters {
            bcp_events: self.stats.bcp_events,
            clause_visits: self.stats.clause_visits,
            ..Default::default()
        }
    }
}

/// Drives the simulated accelerator through its registers.
///
/// One partition is resident at a time. A partition is visited when it
/// mentions a variable assigned since its last visit; a visit swaps it in
/// if needed, replays the trail entries it has not seen (only those over its
/// own variables), starts BCP and reads back the implications. New
/// implications mark every other partition mentioning them for a visit.
/// Visits go round-robin from the partition after the resident one.
pub struct HardwareBackend<'f> {
    formula: &'f Formula,
    plan: PartitionPlan,
    engine: EngineState,
    regs: RegisterFile,
    resident: Option<usize>,
    /// Trail prefix the resident partition has seen.
    delivered: usize,
    dirty: Vec<bool>,
    level_register: Option<u32>,
    swaps: u64,
    visits: u64,
}

impl<'f> HardwareBackend<'f> {
    pub fn new(
        formula: &'f Formula,
        limits: &PartitionLimits,
        costs: &CostModel,
    ) -> Result<Self, SolveError> {
        let plan = greedy_partition(formula, limits)?;
        Ok(Self::with_plan(formula, plan, limits, costs))
    }

    pub fn with_plan(formula: &'f Formula, plan: PartitionPlan, limits: &PartitionLimits, costs: &CostModel) -> Self {
        let engine = EngineState::new(EngineConfig {
            processors: limits.max_clauses,
            literals_per_processor: limits.max_literals_per_clause,
            costs: costs.clone(),
        });
        let dirty = vec![false; plan.len()];
        Self {
            formula,
            plan,
            engine,
            regs: RegisterFile::new(costs.clone()),
            resident: None,
            delivered: 0,
            dirty,
            level_register: None,
            swaps: 0,
            visits: 0,
        }
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    pub fn engine(&self) -> &EngineState {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut EngineState {
        &mut self.engine
    }

    pub fn swaps(&self) -> u64 {
        self.swaps
    }

    pub fn visits(&self) -> u64 {
        self.visits
    }

    pub fn resident(&self) -> Option<usize> {
        self.resident
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.engine.trace()
    }

    fn set_level(&mut self, level: Level) {
        if self.level_register != Some(level) {
            self.regs.write_data(&mut self.engine, level);
            self.level_register = Some(level);
        }
    }

    fn next_dirty(&self) -> Option<usize> {
        let n = self.plan.len();
        let start = self.resident.map_or(0, |r| (r + 1) % n);
        (0..n).map(|k| (start + k) % n).find(|&p| self.dirty[p])
    }

    fn visit(&mut self, pid: usize, trail: &mut AssignmentTrail) -> Result<Option<Vec<Literal>>, InterfaceError> {
        self.visits += 1;
        if self.resident != Some(pid) {
            let partition = &self.plan.partitions()[pid];
            self.regs.load_partition(&mut self.engine, self.formula, partition)?;
            self.resident = Some(pid);
            self.delivered = 0;
            self.swaps += 1;
        }
        let partition = &self.plan.partitions()[pid];
        let mut to_send: Vec<(Literal, Level)> = trail.entries()[self.delivered..]
            .iter()
            .filter(|e| partition.contains_var(e.literal.var()))
            .map(|e| (e.literal, e.level))
            .collect();
        let current = trail.current_level();
        let trigger = match to_send.last() {
            Some(&(lit, lvl)) if lvl == current => {
                to_send.pop();
                Some(lit)
            }
            _ => None,
        };
        for (lit, lvl) in to_send {
            self.set_level(lvl);
            self.regs.write_command(&mut self.engine, Command::broadcast(lit))?;
        }
        self.set_level(current);
        self.regs.write_command(&mut self.engine, Command::start(trigger))?;
        let status = self.regs.wait(&mut self.engine);
        self.delivered = trail.len();
        if status & STATUS_CONFLICT != 0 {
            return Ok(None);
        }
        let mut implied = Vec::new();
        if status & STATUS_IMPLICATION != 0 {
            while self.regs.peek_status() & STATUS_IMPLICATION != 0 {
                implied.push(self.regs.read_implication(&mut self.engine)?);
            }
        }
        Ok(Some(implied))
    }

    /// Global propagation across partitions until no partition has unseen
    /// assignments, or one reports a conflict.
    pub fn propagate_all_partitions(
        &mut self,
        trail: &mut AssignmentTrail,
        from: usize,
    ) -> Result<Propagation, SolveError> {
        if from >= trail.len() {
            self.dirty.iter_mut().for_each(|d| *d = true);
        } else {
            for e in &trail.entries()[from..] {
                for &p in self.plan.partitions_of(e.literal.var()) {
                    self.dirty[p] = true;
                }
            }
        }
        while let Some(pid) = self.next_dirty() {
            self.dirty[pid] = false;
            match self.visit(pid, trail)? {
                None => {
                    self.dirty.iter_mut().for_each(|d| *d = false);
                    return Ok(Propagation::Conflict);
                }
                Some(implied) => {
                    for lit in implied {
                        trail.push_implied(lit, Some(pid));
                        for &p in self.plan.partitions_of(lit.var()) {
                            if p != pid {
                                self.dirty[p] = true;
                            }
                        }
                    }
                    self.delivered = trail.len();
                }
            }
        }
        Ok(Propagation::Quiescent)
    }
}

impl BcpBackend for HardwareBackend<'_> {
    fn propagate(&mut self, trail: &mut AssignmentTrail, from: usize) -> Result<Propagation, SolveError> {
        self.propagate_all_partitions(trail, from)
    }

    fn backtrack_to(&mut self, trail: &AssignmentTrail, level: Level) -> Result<(), SolveError> {
        self.dirty.iter_mut().for_each(|d| *d = false);
        if self.resident.is_some() {
            self.regs.write_command(&mut self.engine, Command::clear_above(level))?;
            self.delivered = self.delivered.min(trail.len());
        }
        Ok(())
    }

    fn counters(&self) -> PerfCounters {
        PerfCounters {
            bcp_events: self.engine.bcp_events(),
            engine_cycles: self.engine.engine_cycles(),
            swap_cycles: self.engine.swap_cycles(),
            interface_cycles: self.regs.counters().interface_cycles,
            host_ops: self.visits,
            ..Default::default()
        }
    }
}

/// Picks the next decision literal.
pub trait DecisionHeuristic {
    /// `None` when every variable is assigned.
    fn pick(&mut self, trail: &AssignmentTrail, formula: &Formula) -> Option<Literal>;
}

/// Lowest-index unassigned variable, positive polarity first.
#[derive(Clone, Copy, Debug, Default)]
pub struct LowestIndexPositive;

impl DecisionHeuristic for LowestIndexPositive {
    fn pick(&mut self, trail: &AssignmentTrail, _formula: &Formula) -> Option<Literal> {
        (1..=trail.num_vars())
            .find(|&v| !trail.value(v).is_assigned())
            .map(Literal::pos)
    }
}

/// Highest-index unassigned variable, negative polarity first.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighestIndexNegative;

impl DecisionHeuristic for HighestIndexNegative {
    fn pick(&mut self, trail: &AssignmentTrail, _formula: &Formula) -> Option<Literal> {
        (1..=trail.num_vars())
            .rev()
            .find(|&v| !trail.value(v).is_assigned())
            .map(Literal::neg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Branch(Literal),
    AllAssigned,
}

pub fn decide(trail: &AssignmentTrail, formula: &Formula, heuristic: &mut dyn DecisionHeuristic) -> Decision {
    match heuristic.pick(trail, formula) {
        Some(lit) => Decision::Branch(lit),
        None => Decision::AllAssigned,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backtrack {
    /// Retry with the flipped decision at the returned level.
    Retry(Literal),
    Exhausted,
}

/// Chronological backtracking: undoes levels down to the latest decision
/// whose other polarity is untried and returns that polarity. The trail is
/// left at the level below; the caller pushes the returned literal as a
/// flipped decision.
pub fn backtrack(trail: &mut AssignmentTrail, backend: &mut dyn BcpBackend) -> Result<Backtrack, SolveError> {
    let mut level = trail.current_level();
    while level > 0 {
        let d = *trail.decision_at(level).expect("every level has a decision");
        if d.reason == (Reason::Decision { flipped: false }) {
            trail.backtrack_to(level - 1);
            backend.backtrack_to(trail, level - 1)?;
            return Ok(Backtrack::Retry(!d.literal));
        }
        level -= 1;
    }
    Ok(Backtrack::Exhausted)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BackendKind {
    #[default]
    Software,
    HwSim,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Software => "software",
            BackendKind::HwSim => "hw-sim",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "software" | "sw" => Ok(BackendKind::Software),
            "hw-sim" | "hw" => Ok(BackendKind::HwSim),
            other => Err(format!("unknown backend `{other}` (expected software or hw-sim)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum HeuristicKind {
    #[default]
    LowestIndexPositive,
    HighestIndexNegative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub backend: BackendKind,
    pub limits: PartitionLimits,
    pub costs: CostModel,
    pub heuristic: HeuristicKind,
    pub timeout_decisions: Option<u64>,
    pub trace: bool,
    /// Check engine status coherence after every engine operation.
    pub checked: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Software,
            limits: PartitionLimits::default(),
            costs: CostModel::default(),
            heuristic: HeuristicKind::default(),
            timeout_decisions: None,
            trace: false,
            checked: false,
        }
    }
}

impl SolverConfig {
    pub fn with_backend(backend: BackendKind) -> Self {
        Self {
            backend,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// `model[i]` is the value of variable `i + 1`.
    Sat(Vec<bool>),
    Unsat,
    Timeout,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Sat(_) => "SAT",
            Outcome::Unsat => "UNSAT",
            Outcome::Timeout => "TIMEOUT",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub outcome: Outcome,
    pub decisions: u64,
    pub backtracks: u64,
    pub implications: u64,
    pub swaps: u64,
    pub partitions: usize,
    pub counters: PerfCounters,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("formula does not fit the accelerator: {0}")]
    Partition(#[from] PartitionError),
    #[error("accelerator interface fault: {0}")]
    Interface(#[from] InterfaceError),
}

struct Search {
    decisions: u64,
    backtracks: u64,
    host_ops: u64,
    counters: PerfCounters,
}

/// Solves `formula` with plain DPLL on the configured backend.
pub fn solve(formula: &Formula, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    let started = Instant::now();
    let mut heuristic: Box<dyn DecisionHeuristic> = match cfg.heuristic {
        HeuristicKind::LowestIndexPositive => Box::new(LowestIndexPositive),
        HeuristicKind::HighestIndexNegative => Box::new(HighestIndexNegative),
    };
    if formula.contains_empty_clause() {
        return Ok(SolveReport {
            outcome: Outcome::Unsat,
            decisions: 0,
            backtracks: 0,
            implications: 0,
            swaps: 0,
            partitions: 0,
            counters: PerfCounters {
                wall_time: started.elapsed(),
                ..Default::default()
            },
            trace: Vec::new(),
        });
    }
    match cfg.backend {
        BackendKind::Software => {
            let mut backend = SoftwareBackend::new(formula);
            let (outcome, search, trail_implied) = run_search(formula, cfg, &mut backend, heuristic.as_mut())?;
            Ok(finish(outcome, search, trail_implied, 0, 0, backend.counters(), Vec::new(), started))
        }
        BackendKind::HwSim => {
            let mut backend = HardwareBackend::new(formula, &cfg.limits, &cfg.costs)?;
            if cfg.trace {
                backend.engine_mut().enable_trace();
            }
            backend.engine_mut().set_checked(cfg.checked);
            let (outcome, search, trail_implied) = run_search(formula, cfg, &mut backend, heuristic.as_mut())?;
            let counters = backend.counters();
            let trace = backend.trace().to_vec();
            Ok(finish(
                outcome,
                search,
                trail_implied,
                backend.swaps(),
                backend.plan().len(),
                counters,
                trace,
                started,
            ))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    outcome: Outcome,
    search: Search,
    implications: u64,
    swaps: u64,
    partitions: usize,
    backend_counters: PerfCounters,
    trace: Vec<TraceEvent>,
    started: Instant,
) -> SolveReport {
    let mut counters = backend_counters;
    counters.host_ops += search.host_ops;
    counters.decisions = search.counters.decisions;
    counters.decision_digest = search.counters.decision_digest;
    counters.wall_time = started.elapsed();
    SolveReport {
        outcome,
        decisions: search.decisions,
        backtracks: search.backtracks,
        implications,
        swaps,
        partitions,
        counters,
        trace,
    }
}

fn run_search(
    formula: &Formula,
    cfg: &SolverConfig,
    backend: &mut dyn BcpBackend,
    heuristic: &mut dyn DecisionHeuristic,
) -> Result<(Outcome, Search, u64), SolveError> {
    let mut search = Search {
        decisions: 0,
        backtracks: 0,
        host_ops: 0,
        counters: PerfCounters::default(),
    };
    let mut implications = 0u64;
    let mut trail = AssignmentTrail::new(formula.num_vars());

    let mut count_implied = |trail: &AssignmentTrail, from: usize, search: &mut Search| {
        let n = trail.entries()[from..]
            .iter()
            .filter(|e| matches!(e.reason, Reason::Implied(_)))
            .count() as u64;
        implications += n;
        search.host_ops += n;
    };

    if backend.propagate(&mut trail, 0)? == Propagation::Conflict {
        return Ok((Outcome::Unsat, search, implications));
    }
    count_implied(&trail, 0, &mut search);

    loop {
        let lit = match decide(&trail, formula, heuristic) {
            Decision::AllAssigned => {
                let model = trail.model();
                assert_eq!(
                    eval_formula(formula, &Assignment::from_model(&model)),
                    Ok(Verdict::Sat),
                    "search produced a non-model"
                );
                return Ok((Outcome::Sat(model), search, implications));
            }
            Decision::Branch(lit) => lit,
        };
        if cfg.timeout_decisions.is_some_and(|limit| search.decisions >= limit) {
            return Ok((Outcome::Timeout, search, implications));
        }
        let mut next = lit;
        let mut flipped = false;
        loop {
            search.decisions += 1;
            search.host_ops += 1;
            search.counters.record_decision(next);
            let from = trail.len();
            trail.push_decision(next, flipped);
            let result = backend.propagate(&mut trail, from)?;
            count_implied(&trail, from, &mut search);
            if result == Propagation::Quiescent {
                break;
            }
            search.backtracks += 1;
            search.host_ops += 1;
            match backtrack(&mut trail, backend)? {
                Backtrack::Exhausted => return Ok((Outcome::Unsat, search, implications)),
                Backtrack::Retry(l) => {
                    next = l;
                    flipped = true;
                }
            }
        }
    }
}

/// True when no clause is unit or falsified under the trail.
pub fn is_global_fixpoint(formula: &Formula, trail: &AssignmentTrail) -> bool {
    let a = trail.assignment();
    formula.clauses().iter().all(|c| {
        matches!(
            eval_clause(c, &a),
            crate::cnf::ClauseStatus::Satisfied | crate::cnf::ClauseStatus::Unresolved
        )
    })
}

/// Measures the host's cost of one clause visit in the software propagator:
/// a fixed workload of 1,000 propagated literals over a 3-CNF formula.
pub fn calibrate_software_cost() -> f64 {
    let formula = crate::cnf::gen_random(200, 400, 3, 0x5eed).expect("valid parameters");
    let mut stats = SoftwareStats::default();
    let started = Instant::now();
    let mut var = 1;
    while stats.bcp_events < 1000 {
        let mut trail = AssignmentTrail::new(formula.num_vars());
        let lit = Literal::new(var, var % 2 == 0);
        trail.push_decision(lit, false);
        software_bcp(&mut trail, &formula, 0, &mut stats);
        var = var % formula.num_vars() + 1;
    }
    started.elapsed().as_nanos() as f64 / stats.clause_visits as f64
}

/// Measures one host bookkeeping operation: a trail assignment plus its
/// share of the backtrack that undoes it.
pub fn calibrate_host_op_cost() -> f64 {
    const VARS: u32 = 630;
    const ROUNDS: u32 = 2000;
    let mut trail = AssignmentTrail::new(VARS);
    let started = Instant::now();
    for round in 0..ROUNDS {
        trail.push_decision(Literal::new(1, round % 2 == 0), false);
        for v in 2..=VARS {
            trail.push_implied(Literal::new(v, (v + round) % 3 == 0), None);
        }
        trail.backtrack_to(0);
    }
    std::hint::black_box(&trail);
    started.elapsed().as_nanos() as f64 / (VARS as f64 * ROUNDS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::Clause;

    fn formula(n: u32, clauses: &[&[i64]]) -> Formula {
        Formula::new(n, clauses.iter().map(|c| Clause::from_dimacs(c)).collect()).unwrap()
    }

    #[test]
    fn trail_levels_and_backtrack() {
        let mut t = AssignmentTrail::new(5);
        t.push_implied(Literal::pos(5), None);
        t.push_decision(Literal::pos(1), false);
        t.push_implied(Literal::neg(2), None);
        t.push_decision(Literal::pos(3), false);
        assert_eq!(t.current_level(), 2);
        assert_eq!(t.level_of(2), Some(1));
        assert_eq!(t.decision_at(2).unwrap().literal, Literal::pos(3));
        t.backtrack_to(1);
        assert_eq!(t.len(), 3);
        assert_eq!(t.value(3), TruthValue::Unassigned);
        assert!(t.entries().iter().all(|e| e.level <= 1));
        t.backtrack_to(0);
        assert_eq!(t.entries().len(), 1);
        assert_eq!(t.current_level(), 0);
    }

    #[test]
    #[should_panic(expected = "assigned twice")]
    fn trail_rejects_reassignment() {
        let mut t = AssignmentTrail::new(2);
        t.push_decision(Literal::pos(1), false);
        t.push_implied(Literal::neg(1), None);
    }

    #[test]
    fn software_bcp_cases() {
        let f = formula(2, &[&[-1, 2]]);
        let mut t = AssignmentTrail::new(2);
        t.push_decision(Literal::pos(1), false);
        let mut stats = SoftwareStats::default();
        assert_eq!(
            software_bcp(&mut t, &f, 0, &mut stats),
            SoftwareBcp::Quiescent(vec![Literal::pos(2)])
        );

        let g = formula(1, &[&[1], &[-1]]);
        let mut t = AssignmentTrail::new(1);
        assert_eq!(software_bcp(&mut t, &g, 0, &mut stats), SoftwareBcp::Conflict);
        assert_eq!(t.current_level(), 0);
    }

    #[test]
    fn decide_default_heuristic() {
        let f = formula(2, &[&[1, 2]]);
        let mut t = AssignmentTrail::new(2);
        t.push_decision(Literal::pos(1), false);
        assert_eq!(decide(&t, &f, &mut LowestIndexPositive), Decision::Branch(Literal::pos(2)));
        t.push_decision(Literal::neg(2), false);
        assert_eq!(decide(&t, &f, &mut LowestIndexPositive), Decision::AllAssigned);
    }

    #[test]
    fn backtrack_flips_then_exhausts() {
        let f = formula(2, &[&[1, 2]]);
        let mut sw = SoftwareBackend::new(&f);
        let mut t = AssignmentTrail::new(2);
        t.push_decision(Literal::pos(1), false);
        assert_eq!(backtrack(&mut t, &mut sw).unwrap(), Backtrack::Retry(Literal::neg(1)));
        assert_eq!(t.current_level(), 0);
        t.push_decision(Literal::neg(1), true);
        assert_eq!(backtrack(&mut t, &mut sw).unwrap(), Backtrack::Exhausted);
    }

    #[test]
    fn backtrack_skips_flipped_levels() {
        let f = formula(3, &[&[1, 2, 3]]);
        let mut sw = SoftwareBackend::new(&f);
        let mut t = AssignmentTrail::new(3);
        t.push_decision(Literal::pos(1), false);
        t.push_decision(Literal::neg(2), true);
        t.push_implied(Literal::pos(3), None);
        assert_eq!(backtrack(&mut t, &mut sw).unwrap(), Backtrack::Retry(Literal::neg(1)));
        assert!(t.is_empty());
    }

    #[test]
    fn trivial_formulas_both_backends() {
        for backend in [BackendKind::Software, BackendKind::HwSim] {
            let cfg = SolverConfig::with_backend(backend);
            let unsat = formula(1, &[&[1], &[-1]]);
            assert_eq!(solve(&unsat, &cfg).unwrap().outcome, Outcome::Unsat);
            let sat = formula(2, &[&[1, 2]]);
            match solve(&sat, &cfg).unwrap().outcome {
                Outcome::Sat(m) => assert!(m[0] || m[1]),
                other => panic!("expected SAT, got {other:?}"),
            }
            let empty = formula(0, &[]);
            assert_eq!(solve(&empty, &cfg).unwrap().outcome, Outcome::Sat(vec![]));
        }
    }

    #[test]
    fn empty_clause_is_unsat() {
        let f = Formula::new(2, vec![Clause::from_dimacs(&[1, 2]), Clause::new([])]).unwrap();
        for backend in [BackendKind::Software, BackendKind::HwSim] {
            let r = solve(&f, &SolverConfig::with_backend(backend)).unwrap();
            assert_eq!(r.outcome, Outcome::Unsat);
        }
    }

    #[test]
    fn single_partition_one_visit_per_call() {
        let f = formula(4, &[&[-1, 2], &[-2, 3], &[1, 4]]);
        let mut hw = HardwareBackend::new(&f, &PartitionLimits::default(), &CostModel::default()).unwrap();
        let mut t = AssignmentTrail::new(4);
        assert_eq!(hw.propagate_all_partitions(&mut t, 0).unwrap(), Propagation::Quiescent);
        assert_eq!(hw.visits(), 1);
        t.push_decision(Literal::pos(1), false);
        hw.propagate_all_partitions(&mut t, 1).unwrap();
        assert_eq!(hw.visits(), 2);
        assert_eq!(hw.swaps(), 1);
        let lits: Vec<Literal> = t.entries().iter().map(|e| e.literal).collect();
        assert_eq!(lits, vec![Literal::pos(1), Literal::pos(2), Literal::pos(3)]);
    }

    #[test]
    fn chained_partitions_propagate() {
        // P0 = {(-1 5)}, P1 = {(-5 9)}: deciding x1 implies x5 in P0, which
        // implies x9 in P1.
        let f = formula(9, &[&[-1, 5], &[-5, 9]]);
        let limits = PartitionLimits {
            max_clauses: 1,
            ..Default::default()
        };
        let mut hw = HardwareBackend::new(&f, &limits, &CostModel::default()).unwrap();
        assert_eq!(hw.plan().len(), 2);
        let mut t = AssignmentTrail::new(9);
        hw.propagate_all_partitions(&mut t, 0).unwrap();
        let before = hw.visits();
        t.push_decision(Literal::pos(1), false);
        assert_eq!(hw.propagate_all_partitions(&mut t, 1).unwrap(), Propagation::Quiescent);
        assert!(hw.visits() - before >= 2);
        assert_eq!(t.value(5), TruthValue::True);
        assert_eq!(t.value(9), TruthValue::True);
        assert_eq!(t.entries()[2].reason, Reason::Implied(Some(1)));
        assert!(is_global_fixpoint(&f, &t));
    }

    #[test]
    fn hardware_backtrack_clears_resident() {
        let f = formula(3, &[&[-1, 2], &[-1, -2], &[1, 3]]);
        let mut hw = HardwareBackend::new(&f, &PartitionLimits::default(), &CostModel::default()).unwrap();
        let mut t = AssignmentTrail::new(3);
        hw.propagate_all_partitions(&mut t, 0).unwrap();
        t.push_decision(Literal::pos(1), false);
        assert_eq!(hw.propagate_all_partitions(&mut t, 0).unwrap(), Propagation::Conflict);
        assert_eq!(backtrack(&mut t, &mut hw).unwrap(), Backtrack::Retry(Literal::neg(1)));
        t.push_decision(Literal::neg(1), true);
        assert_eq!(hw.propagate_all_partitions(&mut t, 0).unwrap(), Propagation::Quiescent);
        assert_eq!(t.value(3), TruthValue::True);
    }

    #[test]
    fn timeout_in_decisions() {
        let f = crate::cnf::gen_random(30, 60, 3, 4).unwrap();
        let cfg = SolverConfig {
            timeout_decisions: Some(1),
            ..Default::default()
        };
        let r = solve(&f, &cfg).unwrap();
        assert!(matches!(r.outcome, Outcome::Timeout | Outcome::Sat(_) | Outcome::Unsat));
        assert!(r.decisions <= 1);
    }

    #[test]
    fn clause_longer_than_processor_is_error() {
        let f = formula(3, &[&[1, 2, 3]]);
        let cfg = SolverConfig {
            backend: BackendKind::HwSim,
            limits: PartitionLimits {
                max_literals_per_clause: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(solve(&f, &cfg), Err(SolveError::Partition(_))));
    }
}
