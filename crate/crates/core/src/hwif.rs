//! Register-level host interface of the accelerator.
//!
//! The host drives the engine with single-word register writes and learns
//! about progress only by polling the status register, as over an
//! AXI-Lite style link. This is the only path the solver uses to reach the
//! engine, so a memory-mapped backend can replace it without touching the
//! layers above.
//!
//! # Wire ABI
//!
//! Command register word: `opcode << 28 | operand`, operand in bits 0..=27.
//!
//! | opcode | name              | operand                                              |
//! |--------|-------------------|------------------------------------------------------|
//! | 0x0    | NOP               | ignored                                              |
//! | 0x1    | LOAD_CLAUSE       | literal word, or `BEGIN` with partition id in 0..=23 |
//! | 0x2    | BROADCAST_LITERAL | literal word; level taken from the data register     |
//! | 0x3    | CLEAR_ABOVE       | decision level                                       |
//! | 0x4    | START_BCP         | trigger literal word, or `NO_TRIGGER`                |
//! | 0x5    | READ_IMPLICATION  | ignored; advances the implication queue              |
//!
//! Literal word (also the `impl_out` register): bits 0..=23 variable id,
//! bit 24 polarity (1 = positive), bits 25..=31 zero.
//!
//! LOAD_CLAUSE flags: bit 25 end of clause, bit 26 last word of the
//! partition, bit 27 begin a new partition.
//!
//! Status register: bit 0 done, bit 1 conflict, bit 2 implication available,
//! bit 3 sticky error, bit 4 busy. While busy, only the busy and error bits
//! are visible.

use std::collections::VecDeque;

use crate::cnf::{Clause, Formula, Literal};
use crate::engine::{load_words, BcpOutcome, EngineFault, EngineState, Level, LoadWord};
use crate::partition::Partition;
use crate::perf::CostModel;

pub const STATUS_DONE: u32 = 1 << 0;
pub const STATUS_CONFLICT: u32 = 1 << 1;
pub const STATUS_IMPLICATION: u32 = 1 << 2;
pub const STATUS_ERROR: u32 = 1 << 3;
pub const STATUS_BUSY: u32 = 1 << 4;

pub const VAR_MASK: u32 = (1 << 24) - 1;
pub const POLARITY_BIT: u32 = 1 << 24;
pub const OPERAND_MASK: u32 = (1 << 28) - 1;

pub const LOAD_END_OF_CLAUSE: u32 = 1 << 25;
pub const LOAD_LAST: u32 = 1 << 26;
pub const LOAD_BEGIN: u32 = 1 << 27;
pub const START_NO_TRIGGER: u32 = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Opcode {
    Nop = 0x0,
    LoadClause = 0x1,
    BroadcastLiteral = 0x2,
    ClearAbove = 0x3,
    StartBcp = 0x4,
    ReadImplication = 0x5,
}

impl Opcode {
    pub fn from_u32(v: u32) -> Option<Self> {
        Some(match v {
            0x0 => Opcode::Nop,
            0x1 => Opcode::LoadClause,
            0x2 => Opcode::BroadcastLiteral,
            0x3 => Opcode::ClearAbove,
            0x4 => Opcode::StartBcp,
            0x5 => Opcode::ReadImplication,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Command {
    pub opcode: Opcode,
    pub operand: u32,
}

impl Command {
    pub fn new(opcode: Opcode, operand: u32) -> Self {
        Self { opcode, operand }
    }

    pub fn encode(self) -> u32 {
        ((self.opcode as u32) << 28) | (self.operand & OPERAND_MASK)
    }

    pub fn decode(word: u32) -> Option<Self> {
        Opcode::from_u32(word >> 28).map(|opcode| Self {
            opcode,
            operand: word & OPERAND_MASK,
        })
    }

    pub fn load_begin(partition: usize, last: bool) -> Self {
        let mut operand = LOAD_BEGIN | (partition as u32 & VAR_MASK);
        if last {
            operand |= LOAD_LAST;
        }
        Self::new(Opcode::LoadClause, operand)
    }

    pub fn load_literal(lit: Literal, end_of_clause: bool, last: bool) -> Self {
        let mut operand = pack_literal(lit);
        if end_of_clause {
            operand |= LOAD_END_OF_CLAUSE;
        }
        if last {
            operand |= LOAD_LAST;
        }
        Self::new(Opcode::LoadClause, operand)
    }

    pub fn broadcast(lit: Literal) -> Self {
        Self::new(Opcode::BroadcastLiteral, pack_literal(lit))
    }

    pub fn start(trigger: Option<Literal>) -> Self {
        Self::new(Opcode::StartBcp, trigger.map_or(START_NO_TRIGGER, pack_literal))
    }

    pub fn clear_above(level: Level) -> Self {
        Self::new(Opcode::ClearAbove, level)
    }
}

impl From<LoadWord> for Command {
    fn from(w: LoadWord) -> Self {
        match w {
            LoadWord::Begin { partition, last } => Command::load_begin(partition, last),
            LoadWord::Literal { lit, end_of_clause, last } => Command::load_literal(lit, end_of_clause, last),
        }
    }
}

/// Packs a literal into a literal word. Panics if the variable id needs more
/// than 24 bits; [`pack_literal_checked`] is the fallible form.
pub fn pack_literal(lit: Literal) -> u32 {
    pack_literal_checked(lit).expect("variable id exceeds 24 bits")
}

pub fn pack_literal_checked(lit: Literal) -> Option<u32> {
    if lit.var() > VAR_MASK {
        return None;
    }
    Some(lit.var() | if lit.is_positive() { POLARITY_BIT } else { 0 })
}

/// Unpacks a literal word. Variable 0 and nonzero reserved bits are rejected.
pub fn unpack_literal(word: u32) -> Result<Literal, InterfaceError> {
    let var = word & VAR_MASK;
    if var == 0 || word >> 25 != 0 {
        return Err(InterfaceError::MalformedOperand(word));
    }
    Ok(Literal::new(var, word & POLARITY_BIT != 0))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterfaceError {
    #[error("malformed operand {0:#010x}")]
    MalformedOperand(u32),
    #[error("engine rejected command: {0}")]
    Engine(#[from] EngineFault),
    #[error("implication read while none is available")]
    NoImplication,
    #[error("command written while the engine is busy")]
    Busy,
}

/// Bus traffic tallies.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BusCounters {
    pub writes: u64,
    pub load_words: u64,
    pub reads: u64,
    pub polls: u64,
    pub interface_cycles: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisterFile {
    pub command: u32,
    pub data: u32,
    status: u32,
    pub impl_out: u32,
    queue: VecDeque<Literal>,
    /// Engine cycles still to elapse before the last command's result is visible.
    busy_remaining: u64,
    counters: BusCounters,
    costs: CostModel,
}

impl RegisterFile {
    pub fn new(costs: CostModel) -> Self {
        Self {
            command: 0,
            data: 0,
            status: 0,
            impl_out: 0,
            queue: VecDeque::new(),
            busy_remaining: 0,
            counters: BusCounters::default(),
            costs,
        }
    }

    pub fn counters(&self) -> &BusCounters {
        &self.counters
    }

    /// Raw status, ignoring the busy window. Does not cost a bus read.
    pub fn peek_status(&self) -> u32 {
        self.status
    }

    fn charge_write(&mut self, e: &mut EngineState, word: u32) {
        self.counters.writes += 1;
        self.counters.interface_cycles += self.costs.axi_write_cycles;
        if e.tracing() {
            e.trace_note(&format!("axi-write {:#010x}", word), None);
        }
    }

    fn charge_read(&mut self, e: &mut EngineState, what: &str) {
        self.counters.reads += 1;
        self.counters.interface_cycles += self.costs.axi_read_cycles;
        if e.tracing() {
            e.trace_note(&format!("axi-read {}", what), None);
        }
    }

    fn fail(&mut self, err: InterfaceError) -> InterfaceError {
        self.status |= STATUS_ERROR;
        err
    }

    /// Writes the data register (decision level for broadcasts and starts).
    pub fn write_data(&mut self, e: &mut EngineState, value: u32) {
        self.charge_write(e, value);
        self.data = value;
    }

    /// Writes one command and dispatches it to the engine. On error the
    /// sticky error bit is set and the engine is left untouched.
    pub fn write_command(&mut self, e: &mut EngineState, cmd: Command) -> Result<(), InterfaceError> {
        let word = cmd.encode();
        if cmd.opcode == Opcode::LoadClause {
            // The per-word load cost is charged by the engine to the swap bucket.
            self.counters.load_words += 1;
            if e.tracing() {
                e.trace_note(&format!("load-word {:#010x}", word), None);
            }
        } else {
            self.charge_write(e, word);
        }
        self.command = word;
        if self.busy_remaining > 0 {
            return Err(self.fail(InterfaceError::Busy));
        }
        if cmd.operand & !OPERAND_MASK != 0 {
            return Err(self.fail(InterfaceError::MalformedOperand(cmd.operand)));
        }
        if !matches!(cmd.opcode, Opcode::Nop | Opcode::ReadImplication) {
            self.status &= !(STATUS_DONE | STATUS_CONFLICT);
        }
        let level = self.data;
        let result = match cmd.opcode {
            Opcode::Nop => Ok(()),
            Opcode::LoadClause => {
                if cmd.operand & LOAD_BEGIN != 0 {
                    let last = cmd.operand & LOAD_LAST != 0;
                    e.begin_load((cmd.operand & VAR_MASK) as usize, last)
                        .map(|_| self.queue.clear())
                        .map_err(Into::into)
                } else {
                    let flags = LOAD_END_OF_CLAUSE | LOAD_LAST;
                    unpack_literal(cmd.operand & !flags).and_then(|lit| {
                        e.load_literal(
                            lit,
                            cmd.operand & LOAD_END_OF_CLAUSE != 0,
                            cmd.operand & LOAD_LAST != 0,
                        )
                        .map_err(Into::into)
                    })
                }
            }
            Opcode::BroadcastLiteral => {
                unpack_literal(cmd.operand).and_then(|lit| e.broadcast_deferred(lit, level).map_err(Into::into))
            }
            Opcode::ClearAbove => e.clear_above(cmd.operand).map(|_| self.queue.clear()).map_err(Into::into),
            Opcode::StartBcp => {
                let trigger = if cmd.operand == START_NO_TRIGGER {
                    Ok(None)
                } else {
                    unpack_literal(cmd.operand).map(Some)
                };
                trigger.and_then(|t| {
                    let before = e.cycle_count();
                    let outcome = e.run_bcp(t, level)?;
                    self.busy_remaining = e.cycle_count() - before;
                    match outcome {
                        BcpOutcome::Quiescent(implied) => {
                            self.queue.extend(implied.iter().map(|i| i.literal));
                            self.status |= STATUS_DONE;
                        }
                        BcpOutcome::Conflict => {
                            self.queue.clear();
                            self.status |= STATUS_CONFLICT;
                        }
                    }
                    Ok(())
                })
            }
            Opcode::ReadImplication => {
                if self.queue.pop_front().is_none() {
                    Err(InterfaceError::NoImplication)
                } else {
                    Ok(())
                }
            }
        };
        self.sync_outputs();
        result.map_err(|err| self.fail(err))
    }

    fn sync_outputs(&mut self) {
        match self.queue.front() {
            Some(&lit) => {
                self.impl_out = pack_literal(lit);
                self.status |= STATUS_IMPLICATION;
            }
            None => {
                self.impl_out = 0;
                self.status &= !STATUS_IMPLICATION;
            }
        }
    }

    /// One status poll. Each poll costs a bus read and lets one poll interval
    /// of engine time elapse.
    pub fn poll_status(&mut self, e: &mut EngineState) -> u32 {
        self.counters.polls += 1;
        self.charge_read(e, "status");
        self.busy_remaining = self.busy_remaining.saturating_sub(self.costs.poll_interval_cycles);
        if self.busy_remaining > 0 {
            STATUS_BUSY | (self.status & STATUS_ERROR)
        } else {
            self.status
        }
    }

    /// Polls until the busy window closes and returns the final status.
    pub fn wait(&mut self, e: &mut EngineState) -> u32 {
        loop {
            let s = self.poll_status(e);
            if s & STATUS_BUSY == 0 {
                return s;
            }
        }
    }

    /// Reads `impl_out` and acknowledges it, exposing the next queued
    /// implication. Reads come out in engine emission order.
    pub fn read_implication(&mut self, e: &mut EngineState) -> Result<Literal, InterfaceError> {
        if self.status & STATUS_IMPLICATION == 0 || self.busy_remaining > 0 {
            return Err(self.fail(InterfaceError::NoImplication));
        }
        self.charge_read(e, "impl_out");
        let lit = unpack_literal(self.impl_out)?;
        self.write_command(e, Command::new(Opcode::ReadImplication, 0))?;
        Ok(lit)
    }

    /// Streams a partition onto the engine, one LOAD_CLAUSE word per literal.
    pub fn load_partition(
        &mut self,
        e: &mut EngineState,
        formula: &Formula,
        partition: &Partition,
    ) -> Result<(), InterfaceError> {
        let clauses: Vec<&Clause> = partition
            .clause_indices
            .iter()
            .map(|&i| &formula.clauses()[i])
            .collect();
        for word in load_words(partition.id, &clauses) {
            self.write_command(e, word.into())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use proptest::prelude::*;

    fn setup(clauses: &[&[i64]]) -> (RegisterFile, EngineState, Formula, Partition) {
        let n = clauses
            .iter()
            .flat_map(|c| c.iter())
            .map(|l| l.unsigned_abs() as u32)
            .max()
            .unwrap_or(1);
        let f = Formula::new(n, clauses.iter().map(|c| Clause::from_dimacs(c)).collect()).unwrap();
        let p = Partition {
            id: 0,
            clause_indices: (0..clauses.len()).collect(),
            local_vars: (1..=n).collect(),
        };
        let mut e = EngineState::new(EngineConfig::default());
        e.set_checked(true);
        let mut r = RegisterFile::new(CostModel::default());
        r.load_partition(&mut e, &f, &p).unwrap();
        (r, e, f, p)
    }

    #[test]
    fn reset_status_is_zero() {
        let mut e = EngineState::new(EngineConfig::default());
        let mut r = RegisterFile::new(CostModel::default());
        assert_eq!(r.poll_status(&mut e), 0);
    }

    #[test]
    fn start_bcp_reports_done_and_implications() {
        let (mut r, mut e, _, _) = setup(&[&[-1, 3], &[2, 4]]);
        r.write_data(&mut e, 1);
        r.write_command(&mut e, Command::start(Some(Literal::pos(1)))).unwrap();
        let s = r.wait(&mut e);
        assert_eq!(s & STATUS_DONE, STATUS_DONE);
        assert_eq!(s & STATUS_IMPLICATION, STATUS_IMPLICATION);
        assert_eq!(r.read_implication(&mut e).unwrap(), Literal::pos(3));
        assert_eq!(r.peek_status() & STATUS_IMPLICATION, 0);
        // acknowledging an implication leaves done set
        assert_eq!(r.peek_status() & STATUS_DONE, STATUS_DONE);
        assert_eq!(r.read_implication(&mut e), Err(InterfaceError::NoImplication));
        assert_ne!(r.peek_status() & STATUS_ERROR, 0);
    }

    #[test]
    fn two_implications_read_in_emission_order() {
        let (mut r, mut e, _, _) = setup(&[&[-1, 2], &[-2, 3]]);
        r.write_command(&mut e, Command::start(Some(Literal::pos(1)))).unwrap();
        r.wait(&mut e);
        assert_eq!(r.read_implication(&mut e).unwrap(), Literal::pos(2));
        assert_ne!(r.peek_status() & STATUS_IMPLICATION, 0);
        assert_eq!(r.read_implication(&mut e).unwrap(), Literal::pos(3));
        assert_eq!(r.peek_status() & STATUS_IMPLICATION, 0);
    }

    #[test]
    fn conflict_sets_bit_and_excludes_done() {
        let (mut r, mut e, _, _) = setup(&[&[-1, 2], &[-1, -2]]);
        r.write_command(&mut e, Command::start(Some(Literal::pos(1)))).unwrap();
        let s = r.wait(&mut e);
        assert_eq!(s & (STATUS_CONFLICT | STATUS_DONE), STATUS_CONFLICT);
    }

    #[test]
    fn conflicting_broadcast_sets_sticky_error() {
        let (mut r, mut e, _, _) = setup(&[&[1, 2]]);
        r.write_command(&mut e, Command::broadcast(Literal::pos(1))).unwrap();
        let before = e.clone();
        let err = r.write_command(&mut e, Command::broadcast(Literal::neg(1))).unwrap_err();
        assert!(matches!(err, InterfaceError::Engine(EngineFault::ConflictingAssignment { var: 1 })));
        assert_eq!(e, before);
        assert_ne!(r.poll_status(&mut e) & STATUS_ERROR, 0);
        r.write_command(&mut e, Command::new(Opcode::Nop, 0)).unwrap();
        assert_ne!(r.poll_status(&mut e) & STATUS_ERROR, 0);
    }

    #[test]
    fn variable_zero_is_malformed() {
        let (mut r, mut e, _, _) = setup(&[&[1, 2]]);
        let before = e.clone();
        let err = r
            .write_command(&mut e, Command::new(Opcode::BroadcastLiteral, POLARITY_BIT))
            .unwrap_err();
        assert_eq!(err, InterfaceError::MalformedOperand(POLARITY_BIT));
        assert_eq!(e, before);
    }

    #[test]
    fn load_beyond_array_is_rejected() {
        let mut e = EngineState::new(EngineConfig {
            processors: 1,
            ..Default::default()
        });
        let mut r = RegisterFile::new(CostModel::default());
        r.write_command(&mut e, Command::load_begin(0, false)).unwrap();
        r.write_command(&mut e, Command::load_literal(Literal::pos(1), true, false))
            .unwrap();
        let err = r
            .write_command(&mut e, Command::load_literal(Literal::pos(2), true, true))
            .unwrap_err();
        assert_eq!(err, InterfaceError::Engine(EngineFault::SlotOutOfRange { slot: 1 }));
    }

    #[test]
    fn poll_count_follows_busy_window() {
        // Chain of 2 implications: 3 broadcasts + 3 evaluates + 2 selects = 8
        // engine cycles; with a poll every 4 cycles the host polls twice.
        let (mut r, mut e, _, _) = setup(&[&[-1, 2], &[-2, 3]]);
        let polls_before = r.counters().polls;
        r.write_command(&mut e, Command::start(Some(Literal::pos(1)))).unwrap();
        let first = r.poll_status(&mut e);
        assert_eq!(first, STATUS_BUSY);
        let second = r.poll_status(&mut e);
        assert_ne!(second & STATUS_DONE, 0);
        assert_eq!(r.counters().polls - polls_before, 2);
    }

    #[test]
    fn interface_cycles_accounting() {
        let cm = CostModel::default();
        let (mut r, mut e, _, _) = setup(&[&[-1, 2]]);
        assert_eq!(r.counters().interface_cycles, 0);
        assert_eq!(r.counters().load_words, 3);
        r.write_data(&mut e, 1);
        r.write_command(&mut e, Command::start(Some(Literal::pos(1)))).unwrap();
        r.wait(&mut e);
        r.read_implication(&mut e).unwrap();
        // data write, start write, two polls over the 5-cycle run, impl_out
        // read, acknowledge write
        let expected = 3 * cm.axi_write_cycles + 3 * cm.axi_read_cycles;
        assert_eq!(r.counters().interface_cycles, expected);
    }

    #[test]
    fn command_words_round_trip() {
        for op in [
            Opcode::Nop,
            Opcode::LoadClause,
            Opcode::BroadcastLiteral,
            Opcode::ClearAbove,
            Opcode::StartBcp,
            Opcode::ReadImplication,
        ] {
            let c = Command::new(op, 0x0abc_def1 & OPERAND_MASK);
            assert_eq!(Command::decode(c.encode()), Some(c));
        }
        assert_eq!(Command::decode(0xf000_0000), None);
    }

    #[test]
    fn oversized_variable_rejected() {
        assert_eq!(pack_literal_checked(Literal::pos(1 << 24)), None);
        assert!(pack_literal_checked(Literal::pos((1 << 24) - 1)).is_some());
    }

    proptest! {
        #[test]
        fn literal_word_bijective(var in 1u32..(1 << 24), pos in any::<bool>()) {
            let word = var | if pos { POLARITY_BIT } else { 0 };
            prop_assert_eq!(pack_literal(unpack_literal(word).unwrap()), word);
        }
    }
}
