//! CNF data model and reference evaluation semantics.
//!
//! Everything else in the crate (the simulated clause processors, the
//! software propagator, the brute-force oracle) is checked against
//! [`eval_clause`] and [`eval_formula`].

mod dimacs;
mod random;

pub use dimacs::{parse_dimacs, serialize_dimacs, ParseError};
pub use random::{gen_random, GenError};

use std::fmt;
use std::ops::Not;

/// A variable id, 1-based as in DIMACS.
pub type Var = u32;

/// A variable or its negation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: Var,
    positive: bool,
}

impl Literal {
    /// Panics if `var == 0`.
    pub fn new(var: Var, positive: bool) -> Self {
        assert!(var >= 1, "variable ids start at 1");
        Self { var, positive }
    }

    pub fn pos(var: Var) -> Self {
        Self::new(var, true)
    }

    pub fn neg(var: Var) -> Self {
        Self::new(var, false)
    }

    /// Builds a literal from a signed DIMACS integer. Returns `None` for 0.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > Var::MAX as u64 {
            return None;
        }
        Some(Self::new(value.unsigned_abs() as Var, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        self.var
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// The truth value this literal takes when its variable is set to `value`.
    #[inline]
    pub fn value_under(self, value: bool) -> bool {
        value == self.positive
    }
}

impl Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Three-valued truth state of a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum TruthValue {
    True,
    False,
    #[default]
    Unassigned,
}

impl TruthValue {
    pub fn from_bool(value: bool) -> Self {
        if value {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            TruthValue::True => Some(true),
            TruthValue::False => Some(false),
            TruthValue::Unassigned => None,
        }
    }

    pub fn is_assigned(self) -> bool {
        self != TruthValue::Unassigned
    }
}

/// A disjunction of literals.
///
/// Construction removes duplicate literals (keeping first occurrences) and
/// flags clauses that contain a literal together with its negation.
/// Tautologies are kept so that clause indices match the source file.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
    tautology: bool,
}

impl Clause {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        let mut out: Vec<Literal> = Vec::new();
        for lit in literals {
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        let tautology = out.iter().any(|&l| out.contains(&!l));
        Self {
            literals: out,
            tautology,
        }
    }

    /// Convenience constructor from signed DIMACS integers. Panics on 0.
    pub fn from_dimacs(values: &[i64]) -> Self {
        Self::new(
            values
                .iter()
                .map(|&v| Literal::from_dimacs(v).expect("0 is not a literal")),
        )
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    /// An empty clause can never be satisfied; a formula holding one is UNSAT.
    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_tautology(&self) -> bool {
        self.tautology
    }

    /// Distinct variables of this clause, in literal order.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        let lits = &self.literals;
        lits.iter()
            .enumerate()
            .filter(move |(i, l)| !lits[..*i].iter().any(|p| p.var() == l.var()))
            .map(|(_, l)| l.var())
    }
}

/// A CNF formula over variables `1..=num_vars`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error("clause {clause} mentions variable {var} but only {num_vars} are declared")]
    VarOutOfRange { clause: usize, var: Var, num_vars: u32 },
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        for (i, c) in clauses.iter().enumerate() {
            if let Some(l) = c.literals().iter().find(|l| l.var() > num_vars) {
                return Err(FormulaError::VarOutOfRange {
                    clause: i,
                    var: l.var(),
                    num_vars,
                });
            }
        }
        Ok(Self { num_vars, clauses })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// The explicit UNSAT marker produced by parsing a zero-length clause.
    pub fn contains_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }
}

/// Variable assignment indexed by variable id. Index 0 is unused.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<TruthValue>,
}

impl Assignment {
    pub fn new(num_vars: u32) -> Self {
        Self {
            values: vec![TruthValue::Unassigned; num_vars as usize + 1],
        }
    }

    /// Full assignment from `model[i]` = value of variable `i + 1`.
    pub fn from_model(model: &[bool]) -> Self {
        let mut a = Self::new(model.len() as u32);
        for (i, &v) in model.iter().enumerate() {
            a.set(i as Var + 1, TruthValue::from_bool(v));
        }
        a
    }

    pub fn num_vars(&self) -> u32 {
        (self.values.len() - 1) as u32
    }

    /// Variables beyond the declared range read as unassigned.
    pub fn get(&self, var: Var) -> TruthValue {
        self.values
            .get(var as usize)
            .copied()
            .unwrap_or(TruthValue::Unassigned)
    }

    pub fn set(&mut self, var: Var, value: TruthValue) {
        let idx = var as usize;
        if idx >= self.values.len() {
            self.values.resize(idx + 1, TruthValue::Unassigned);
        }
        self.values[idx] = value;
    }

    pub fn assign(&mut self, lit: Literal) {
        self.set(lit.var(), TruthValue::from_bool(lit.is_positive()));
    }

    pub fn literal_value(&self, lit: Literal) -> TruthValue {
        match self.get(lit.var()) {
            TruthValue::Unassigned => TruthValue::Unassigned,
            TruthValue::True => TruthValue::from_bool(lit.is_positive()),
            TruthValue::False => TruthValue::from_bool(!lit.is_positive()),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.values[1..].iter().all(|v| v.is_assigned())
    }
}

/// State of one clause under a partial assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClauseStatus {
    Satisfied,
    Falsified,
    Unit(Literal),
    Unresolved,
}

/// Evaluates a clause under a partial assignment: satisfied if some literal
/// is true, falsified if all are false, unit if exactly one is unassigned and
/// the rest false.
pub fn eval_clause(clause: &Clause, assignment: &Assignment) -> ClauseStatus {
    eval_literals(clause.literals(), |l| assignment.literal_value(l))
}

pub(crate) fn eval_literals(
    literals: &[Literal],
    mut value_of: impl FnMut(Literal) -> TruthValue,
) -> ClauseStatus {
    let mut unassigned = None;
    let mut unassigned_count = 0usize;
    for &lit in literals {
        match value_of(lit) {
            TruthValue::True => return ClauseStatus::Satisfied,
            TruthValue::False => {}
            TruthValue::Unassigned => {
                unassigned_count += 1;
                unassigned = Some(lit);
            }
        }
    }
    match (unassigned_count, unassigned) {
        (0, _) => ClauseStatus::Falsified,
        (1, Some(lit)) => ClauseStatus::Unit(lit),
        _ => ClauseStatus::Unresolved,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("variable {0} is unassigned; formula evaluation needs a full assignment")]
pub struct UnassignedVariable(pub Var);

/// Evaluates a formula under a full assignment.
pub fn eval_formula(formula: &Formula, assignment: &Assignment) -> Result<Verdict, UnassignedVariable> {
    if let Some(var) = (1..=formula.num_vars()).find(|&v| !assignment.get(v).is_assigned()) {
        return Err(UnassignedVariable(var));
    }
    let sat = formula
        .clauses()
        .iter()
        .all(|c| eval_clause(c, assignment) == ClauseStatus::Satisfied);
    Ok(if sat { Verdict::Sat } else { Verdict::Unsat })
}
