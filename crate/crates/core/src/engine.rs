//! Functional and cycle-costed model of the BCP accelerator.
//!
//! The engine is an array of clause processors driven by a control unit.
//! Each processor holds one clause as a small literal array together with
//! its own copy of the values of that clause's variables. A broadcast
//! updates every processor in the same cycle; evaluation collects the unit
//! clauses, and a fixed-priority selector (lowest slot wins) picks the next
//! implication to broadcast. There is no dedicated conflict detector:
//! conflicts show up during evaluation, either as a falsified clause or as
//! two unit clauses forcing opposite values.
//!
//! Control unit transitions:
//!
//! ```text
//! Idle/ReportDone/ReportConflict --load--> LoadClauses --last word--> Idle
//! Idle/ReportDone/ReportConflict --clear--> ClearAssignments --> Idle
//! Idle/ReportDone --broadcast--> Broadcast --> Evaluate | Idle (deferred)
//! Idle/ReportDone --start without trigger--> Evaluate
//! Evaluate --> ReportConflict | SelectImplication | ReportDone
//! SelectImplication --> Broadcast
//! ```

use std::fmt::Write as _;

use crate::cnf::{eval_clause, eval_literals, Assignment, Clause, ClauseStatus, Formula, Literal, TruthValue, Var};
use crate::partition::Partition;
use crate::perf::CostModel;

pub type Level = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControlState {
    Idle,
    LoadClauses,
    ClearAssignments,
    Broadcast,
    Evaluate,
    SelectImplication,
    ReportDone,
    ReportConflict,
}

impl ControlState {
    pub const ALL: [ControlState; 8] = [
        ControlState::Idle,
        ControlState::LoadClauses,
        ControlState::ClearAssignments,
        ControlState::Broadcast,
        ControlState::Evaluate,
        ControlState::SelectImplication,
        ControlState::ReportDone,
        ControlState::ReportConflict,
    ];

    pub fn successors(self) -> &'static [ControlState] {
        use ControlState::*;
        match self {
            Idle | ReportDone => &[LoadClauses, ClearAssignments, Broadcast, Evaluate],
            ReportConflict => &[LoadClauses, ClearAssignments],
            LoadClauses => &[LoadClauses, Idle],
            ClearAssignments => &[Idle],
            Broadcast => &[Evaluate, Idle],
            Evaluate => &[ReportConflict, SelectImplication, ReportDone],
            SelectImplication => &[Broadcast],
        }
    }

    pub fn can_transition(self, to: ControlState) -> bool {
        self.successors().contains(&to)
    }

    fn accepts_command(self) -> bool {
        matches!(self, ControlState::Idle | ControlState::ReportDone)
    }

    pub fn name(self) -> &'static str {
        match self {
            ControlState::Idle => "Idle",
            ControlState::LoadClauses => "LoadClauses",
            ControlState::ClearAssignments => "ClearAssignments",
            ControlState::Broadcast => "Broadcast",
            ControlState::Evaluate => "Evaluate",
            ControlState::SelectImplication => "SelectImplication",
            ControlState::ReportDone => "ReportDone",
            ControlState::ReportConflict => "ReportConflict",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProcessorStatus {
    Satisfied,
    Falsified,
    Unit(Literal),
    Unresolved,
    Empty,
}

impl From<ClauseStatus> for ProcessorStatus {
    fn from(s: ClauseStatus) -> Self {
        match s {
            ClauseStatus::Satisfied => ProcessorStatus::Satisfied,
            ClauseStatus::Falsified => ProcessorStatus::Falsified,
            ClauseStatus::Unit(l) => ProcessorStatus::Unit(l),
            ClauseStatus::Unresolved => ProcessorStatus::Unresolved,
        }
    }
}

/// One clause slot with its private copy of variable values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClauseProcessor {
    slot_id: usize,
    capacity: usize,
    literals: Vec<Literal>,
    /// Value and level of each literal's variable, slot-aligned with `literals`.
    values: Vec<Option<(bool, Level)>>,
    status: ProcessorStatus,
}

impl ClauseProcessor {
    fn new(slot_id: usize, capacity: usize) -> Self {
        Self {
            slot_id,
            capacity,
            literals: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            status: ProcessorStatus::Empty,
        }
    }

    pub fn slot_id(&self) -> usize {
        self.slot_id
    }

    pub fn occupancy(&self) -> usize {
        self.literals.len()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn status(&self) -> ProcessorStatus {
        self.status
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// The locally held value of `var`, with the level it was assigned at.
    pub fn local_value(&self, var: Var) -> (TruthValue, Option<Level>) {
        self.literals
            .iter()
            .zip(&self.values)
            .find(|(l, _)| l.var() == var)
            .and_then(|(_, v)| *v)
            .map_or((TruthValue::Unassigned, None), |(b, lvl)| (TruthValue::from_bool(b), Some(lvl)))
    }

    /// The processor's clause and local assignment in reference-model terms.
    pub fn as_reference(&self) -> (Clause, Assignment) {
        let mut a = Assignment::new(0);
        for (l, v) in self.literals.iter().zip(&self.values) {
            if let Some((b, _)) = v {
                a.set(l.var(), TruthValue::from_bool(*b));
            }
        }
        (Clause::new(self.literals.iter().copied()), a)
    }

    fn reset(&mut self) {
        self.literals.clear();
        self.values.clear();
        self.status = ProcessorStatus::Empty;
    }

    fn holds_opposite(&self, lit: Literal) -> bool {
        self.literals
            .iter()
            .zip(&self.values)
            .any(|(l, v)| l.var() == lit.var() && matches!(v, Some((b, _)) if *b != lit.is_positive()))
    }

    fn apply(&mut self, lit: Literal, level: Level) -> bool {
        let mut touched = false;
        for (l, v) in self.literals.iter().zip(self.values.iter_mut()) {
            if l.var() == lit.var() && v.is_none() {
                *v = Some((lit.is_positive(), level));
                touched = true;
            }
        }
        if touched {
            self.refresh();
        }
        touched
    }

    fn clear_above(&mut self, level: Level) {
        let mut touched = false;
        for v in self.values.iter_mut() {
            if matches!(v, Some((_, lvl)) if *lvl > level) {
                *v = None;
                touched = true;
            }
        }
        if touched {
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        self.status = if self.literals.is_empty() {
            ProcessorStatus::Empty
        } else {
            let lits = &self.literals;
            let vals = &self.values;
            eval_literals(lits, |lit| {
                let i = lits.iter().position(|l| *l == lit).expect("own literal");
                match vals[i] {
                    None => TruthValue::Unassigned,
                    Some((b, _)) => TruthValue::from_bool(lit.value_under(b)),
                }
            })
            .into()
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Implication {
    pub literal: Literal,
    pub source_slot: usize,
    pub decision_level: Level,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BcpOutcome {
    /// Implications in emission order.
    Quiescent(Vec<Implication>),
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineFault {
    #[error("command not accepted in control state {0:?}")]
    BadState(ControlState),
    #[error("variable {var} is already assigned the opposite value")]
    ConflictingAssignment { var: Var },
    #[error("partition has {clauses} clauses but the engine has {processors} processors")]
    TooManyClauses { clauses: usize, processors: usize },
    #[error("clause with {literals} literals exceeds processor capacity {capacity}")]
    ClauseTooLong { literals: usize, capacity: usize },
    #[error("empty clauses cannot be loaded")]
    EmptyClause,
    #[error("load word targets slot {slot} beyond the processor array")]
    SlotOutOfRange { slot: usize },
    #[error("no partition is loaded")]
    NothingLoaded,
    #[error("no pending implication to select")]
    NoPendingImplication,
}

/// One line of the optional event trace.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub cycle: u64,
    pub state: ControlState,
    pub action: String,
    pub slot: Option<usize>,
}

pub fn trace_to_csv(events: &[TraceEvent]) -> String {
    let mut out = String::from("# bcpsim trace v1\ncycle,state,action,slot\n");
    for e in events {
        let slot = e.slot.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", e.cycle, e.state.name(), e.action, slot).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub processors: usize,
    pub literals_per_processor: usize,
    pub costs: CostModel,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            processors: 224,
            literals_per_processor: 16,
            costs: CostModel::default(),
        }
    }
}

/// Complete accelerator state.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineState {
    control: ControlState,
    processors: Vec<ClauseProcessor>,
    pending: Vec<Implication>,
    conflict_flag: bool,
    loaded_partition: Option<usize>,
    /// Level attached to implications found by the next evaluation.
    level: Level,
    /// Next slot to receive a load word.
    load_cursor: usize,
    cycle_count: u64,
    engine_cycles: u64,
    swap_cycles: u64,
    bcp_events: u64,
    costs: CostModel,
    trace: Option<Vec<TraceEvent>>,
    checked: bool,
}

impl EngineState {
    pub fn new(config: EngineConfig) -> Self {
        assert!(config.processors > 0 && config.literals_per_processor > 0);
        let processors = (0..config.processors)
            .map(|i| ClauseProcessor::new(i, config.literals_per_processor))
            .collect();
        Self {
            control: ControlState::Idle,
            processors,
            pending: Vec::new(),
            conflict_flag: false,
            loaded_partition: None,
            level: 0,
            load_cursor: 0,
            cycle_count: 0,
            engine_cycles: 0,
            swap_cycles: 0,
            bcp_events: 0,
            costs: config.costs,
            trace: None,
            checked: false,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Check processor status coherence after every operation (panics on failure).
    pub fn set_checked(&mut self, on: bool) {
        self.checked = on;
    }

    pub fn control(&self) -> ControlState {
        self.control
    }

    pub fn processors(&self) -> &[ClauseProcessor] {
        &self.processors
    }

    pub fn pending_implications(&self) -> &[Implication] {
        &self.pending
    }

    pub fn conflict_flag(&self) -> bool {
        self.conflict_flag
    }

    pub fn loaded_partition(&self) -> Option<usize> {
        self.loaded_partition
    }

    /// Engine plus swap cycles since construction.
    pub fn cycle_count(&self) -> u64 {
        self.cycle_count
    }

    pub fn engine_cycles(&self) -> u64 {
        self.engine_cycles
    }

    pub fn swap_cycles(&self) -> u64 {
        self.swap_cycles
    }

    pub fn bcp_events(&self) -> u64 {
        self.bcp_events
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    pub fn literal_capacity(&self) -> usize {
        self.processors[0].capacity
    }

    /// Every occupied processor's status agrees with the reference evaluator.
    pub fn is_coherent(&self) -> bool {
        self.processors.iter().all(|p| {
            if p.is_empty() {
                return p.status == ProcessorStatus::Empty;
            }
            let (clause, assignment) = p.as_reference();
            p.status == eval_clause(&clause, &assignment).into()
        })
    }

    /// Records a free-form line in the trace (used for register transactions).
    pub fn trace_note(&mut self, action: &str, slot: Option<usize>) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                cycle: self.cycle_count,
                state: self.control,
                action: action.to_string(),
                slot,
            });
        }
    }

    pub fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    fn label(&self, f: impl FnOnce() -> String) -> String {
        if self.tracing() {
            f()
        } else {
            String::new()
        }
    }

    fn enter(&mut self, to: ControlState, action: &str, slot: Option<usize>) {
        debug_assert!(
            self.control.can_transition(to),
            "illegal transition {:?} -> {:?}",
            self.control,
            to
        );
        self.control = to;
        self.trace_note(action, slot);
    }

    /// Slots that may hold literals; every slot past these is empty.
    fn occupied(&self) -> usize {
        (self.load_cursor + 1).min(self.processors.len())
    }

    fn charge_engine(&mut self, cycles: u64) {
        self.engine_cycles += cycles;
        self.cycle_count += cycles;
    }

    fn charge_swap(&mut self, cycles: u64) {
        self.swap_cycles += cycles;
        self.cycle_count += cycles;
    }

    fn after_op(&self) {
        if self.checked {
            assert!(self.is_coherent(), "processor status diverged from reference evaluation");
        }
    }

    /// First word of a partition load: empties every processor and drops all
    /// local assignments. `last` ends the load immediately (empty partition).
    pub fn begin_load(&mut self, partition_id: usize, last: bool) -> Result<(), EngineFault> {
        if !matches!(
            self.control,
            ControlState::Idle | ControlState::ReportDone | ControlState::ReportConflict
        ) {
            return Err(EngineFault::BadState(self.control));
        }
        let occupied = self.occupied();
        for p in self.processors[..occupied].iter_mut() {
            p.reset();
        }
        self.pending.clear();
        self.conflict_flag = false;
        self.loaded_partition = Some(partition_id);
        self.load_cursor = 0;
        self.charge_swap(self.costs.cycles_load_per_literal);
        self.enter(ControlState::LoadClauses, "load-begin", None);
        if last {
            self.enter(ControlState::Idle, "load-end", None);
        }
        self.after_op();
        Ok(())
    }

    /// One literal word of a partition load.
    pub fn load_literal(&mut self, lit: Literal, end_of_clause: bool, last: bool) -> Result<(), EngineFault> {
        if self.control != ControlState::LoadClauses {
            return Err(EngineFault::BadState(self.control));
        }
        let slot = self.load_cursor;
        let capacity = self.literal_capacity();
        let proc = self
            .processors
            .get_mut(slot)
            .ok_or(EngineFault::SlotOutOfRange { slot })?;
        if proc.literals.len() >= capacity {
            return Err(EngineFault::ClauseTooLong {
                literals: proc.literals.len() + 1,
                capacity,
            });
        }
        proc.literals.push(lit);
        proc.values.push(None);
        proc.refresh();
        if end_of_clause {
            self.load_cursor += 1;
        }
        self.charge_swap(self.costs.cycles_load_per_literal);
        self.enter(ControlState::LoadClauses, "load-literal", Some(slot));
        if last {
            self.enter(ControlState::Idle, "load-end", None);
        }
        self.after_op();
        Ok(())
    }

    /// Hot-swaps `partition` of `formula` onto the processor array: slot `i`
    /// receives the partition's `i`-th clause, every other slot is emptied.
    pub fn load_partition(&mut self, formula: &Formula, partition: &Partition) -> Result<(), EngineFault> {
        let clauses: Vec<&Clause> = partition
            .clause_indices
            .iter()
            .map(|&i| &formula.clauses()[i])
            .collect();
        if clauses.len() > self.processors.len() {
            return Err(EngineFault::TooManyClauses {
                clauses: clauses.len(),
                processors: self.processors.len(),
            });
        }
        let capacity = self.literal_capacity();
        for c in &clauses {
            if c.is_empty() {
                return Err(EngineFault::EmptyClause);
            }
            if c.len() > capacity {
                return Err(EngineFault::ClauseTooLong {
                    literals: c.len(),
                    capacity,
                });
            }
        }
        for word in load_words(partition.id, &clauses) {
            match word {
                LoadWord::Begin { partition, last } => self.begin_load(partition, last)?,
                LoadWord::Literal { lit, end_of_clause, last } => self.load_literal(lit, end_of_clause, last)?,
            }
        }
        Ok(())
    }

    fn check_broadcast(&self, lit: Literal) -> Result<(), EngineFault> {
        if self.processors[..self.occupied()].iter().any(|p| p.holds_opposite(lit)) {
            return Err(EngineFault::ConflictingAssignment { var: lit.var() });
        }
        Ok(())
    }

    fn apply_broadcast(&mut self, lit: Literal, level: Level) {
        let occupied = self.occupied();
        for p in self.processors[..occupied].iter_mut() {
            p.apply(lit, level);
        }
        self.bcp_events += 1;
        self.charge_engine(self.costs.cycles_broadcast);
    }

    /// Delivers `lit` to every processor in one cycle; control moves to Evaluate.
    pub fn broadcast(&mut self, lit: Literal, level: Level) -> Result<(), EngineFault> {
        if !(self.control.accepts_command() || self.control == ControlState::Broadcast) {
            return Err(EngineFault::BadState(self.control));
        }
        if self.loaded_partition.is_none() {
            return Err(EngineFault::NothingLoaded);
        }
        self.check_broadcast(lit)?;
        if self.control != ControlState::Broadcast {
            self.enter(ControlState::Broadcast, "broadcast-start", None);
        }
        self.apply_broadcast(lit, level);
        self.level = level;
        let label = self.label(|| format!("broadcast {}@{}", lit, level));
        self.enter(ControlState::Evaluate, &label, None);
        self.after_op();
        Ok(())
    }

    /// Broadcast without evaluation: used to replay assignments into a freshly
    /// loaded partition. Control returns to Idle.
    pub fn broadcast_deferred(&mut self, lit: Literal, level: Level) -> Result<(), EngineFault> {
        if !self.control.accepts_command() {
            return Err(EngineFault::BadState(self.control));
        }
        if self.loaded_partition.is_none() {
            return Err(EngineFault::NothingLoaded);
        }
        self.check_broadcast(lit)?;
        self.enter(ControlState::Broadcast, "broadcast-start", None);
        self.apply_broadcast(lit, level);
        let label = self.label(|| format!("replay {}@{}", lit, level));
        self.enter(ControlState::Idle, &label, None);
        self.after_op();
        Ok(())
    }

    /// Collects unit clauses into the pending set and raises the conflict
    /// flag on a falsified clause or on two units forcing opposite values.
    pub fn evaluate(&mut self) -> Result<(), EngineFault> {
        if self.control != ControlState::Evaluate {
            return Err(EngineFault::BadState(self.control));
        }
        self.pending.clear();
        let mut conflict = false;
        for p in &self.processors[..self.occupied()] {
            match p.status {
                ProcessorStatus::Falsified => conflict = true,
                ProcessorStatus::Unit(lit) => {
                    if let Some(other) = self.pending.iter().find(|i| i.literal.var() == lit.var()) {
                        if other.literal != lit {
                            conflict = true;
                        }
                    } else {
                        self.pending.push(Implication {
                            literal: lit,
                            source_slot: p.slot_id,
                            decision_level: self.level,
                        });
                    }
                }
                _ => {}
            }
        }
        self.conflict_flag = conflict;
        self.charge_engine(self.costs.cycles_evaluate);
        let next = if conflict {
            ControlState::ReportConflict
        } else if self.pending.is_empty() {
            ControlState::ReportDone
        } else {
            ControlState::SelectImplication
        };
        self.enter(next, "evaluate", None);
        self.after_op();
        Ok(())
    }

    /// Fixed-priority selection: the pending implication from the lowest slot.
    pub fn select_implication(&mut self) -> Result<Implication, EngineFault> {
        if self.control != ControlState::SelectImplication {
            return Err(EngineFault::BadState(self.control));
        }
        let idx = self
            .pending
            .iter()
            .enumerate()
            .min_by_key(|(_, i)| i.source_slot)
            .map(|(i, _)| i)
            .ok_or(EngineFault::NoPendingImplication)?;
        let chosen = self.pending.remove(idx);
        self.charge_engine(self.costs.cycles_select);
        self.enter(ControlState::Broadcast, "select", Some(chosen.source_slot));
        self.after_op();
        Ok(chosen)
    }

    /// Backtracking: forgets every local assignment made above `level`.
    pub fn clear_above(&mut self, level: Level) -> Result<(), EngineFault> {
        if !matches!(
            self.control,
            ControlState::Idle | ControlState::ReportDone | ControlState::ReportConflict
        ) {
            return Err(EngineFault::BadState(self.control));
        }
        let occupied = self.occupied();
        for p in self.processors[..occupied].iter_mut() {
            p.clear_above(level);
        }
        self.pending.clear();
        self.conflict_flag = false;
        self.charge_engine(self.costs.cycles_broadcast);
        let label = self.label(|| format!("clear-above {}", level));
        self.enter(ControlState::ClearAssignments, &label, None);
        self.enter(ControlState::Idle, "clear-done", None);
        self.after_op();
        Ok(())
    }

    /// Runs propagation on the resident partition until quiescence or
    /// conflict. With a trigger, the trigger is broadcast first; without one
    /// the current local state is evaluated as is.
    pub fn run_bcp(&mut self, trigger: Option<Literal>, level: Level) -> Result<BcpOutcome, EngineFault> {
        if !self.control.accepts_command() {
            return Err(EngineFault::BadState(self.control));
        }
        if self.loaded_partition.is_none() {
            return Err(EngineFault::NothingLoaded);
        }
        match trigger {
            Some(lit) => self.broadcast(lit, level)?,
            None => {
                self.level = level;
                self.enter(ControlState::Evaluate, "start", None)
            }
        }
        let mut implied = Vec::new();
        loop {
            self.evaluate()?;
            match self.control {
                ControlState::ReportDone => return Ok(BcpOutcome::Quiescent(implied)),
                ControlState::ReportConflict => return Ok(BcpOutcome::Conflict),
                ControlState::SelectImplication => {
                    let imp = self.select_implication()?;
                    self.broadcast(imp.literal, level)?;
                    implied.push(imp);
                }
                other => unreachable!("evaluate left control in {:?}", other),
            }
        }
    }
}

/// One word of the partition load stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadWord {
    Begin { partition: usize, last: bool },
    Literal { lit: Literal, end_of_clause: bool, last: bool },
}

/// The word stream that loads `clauses` as partition `partition`.
pub fn load_words(partition: usize, clauses: &[&Clause]) -> Vec<LoadWord> {
    let total: usize = clauses.iter().map(|c| c.len()).sum();
    let mut words = Vec::with_capacity(total + 1);
    words.push(LoadWord::Begin {
        partition,
        last: total == 0,
    });
    let mut emitted = 0;
    for c in clauses {
        for (i, &lit) in c.literals().iter().enumerate() {
            emitted += 1;
            words.push(LoadWord::Literal {
                lit,
                end_of_clause: i + 1 == c.len(),
                last: emitted == total,
            });
        }
    }
    words
}
