//! Splitting a formula into accelerator-sized partitions.
//!
//! The accelerator holds a fixed number of clause processors, each with a
//! fixed number of literal slots, and a bounded variable working set. A
//! formula that does not fit is cut into partitions that are hot-swapped onto
//! the accelerator at run time. How often a variable has to be shipped to a
//! different partition is governed by its *dispersion*: the number of
//! partitions whose clauses mention it.

use std::fmt::Write as _;

use num_rational::Ratio;

use crate::cnf::{Formula, Var};

/// Capacity of one accelerator load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PartitionLimits {
    pub max_clauses: usize,
    pub max_vars: usize,
    pub max_literals_per_clause: usize,
}

impl Default for PartitionLimits {
    fn default() -> Self {
        Self {
            max_clauses: 224,
            max_vars: 63,
            max_literals_per_clause: 16,
        }
    }
}

impl PartitionLimits {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.max_clauses == 0 || self.max_vars == 0 || self.max_literals_per_clause == 0 {
            return Err(PartitionError::ZeroLimit(*self));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    pub id: usize,
    /// Indices into `Formula::clauses`, strictly increasing.
    pub clause_indices: Vec<usize>,
    /// Sorted, deduplicated.
    pub local_vars: Vec<Var>,
}

impl Partition {
    pub fn contains_var(&self, var: Var) -> bool {
        self.local_vars.binary_search(&var).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    partitions: Vec<Partition>,
    /// `occurrences[v]` lists the partitions mentioning variable `v`, ascending.
    occurrences: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("clause {clause} has {literals} literals; a clause processor holds {capacity}")]
    ClauseTooLong {
        clause: usize,
        literals: usize,
        capacity: usize,
    },
    #[error("clause {clause} mentions {vars} variables; a partition holds {capacity}")]
    ClauseTooWide {
        clause: usize,
        vars: usize,
        capacity: usize,
    },
    #[error("partition limits must all be at least 1: {0:?}")]
    ZeroLimit(PartitionLimits),
}

impl PartitionPlan {
    /// Builds a plan from explicit partitions, deriving the dispersion index.
    pub fn from_partitions(num_vars: u32, partitions: Vec<Partition>) -> Self {
        let mut occurrences = vec![Vec::new(); num_vars as usize + 1];
        for p in &partitions {
            for &v in &p.local_vars {
                occurrences[v as usize].push(p.id);
            }
        }
        Self {
            partitions,
            occurrences,
        }
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Partitions mentioning `var`, ascending by id.
    pub fn partitions_of(&self, var: Var) -> &[usize] {
        self.occurrences
            .get(var as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Number of partitions in which `var` occurs.
    pub fn dispersion(&self, var: Var) -> usize {
        self.partitions_of(var).len()
    }

    /// One `partition_id,clause_index` row per clause.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# bcpsim partition-plan v1\npartition_id,clause_index\n");
        for p in &self.partitions {
            for &c in &p.clause_indices {
                writeln!(out, "{},{}", p.id, c).unwrap();
            }
        }
        out
    }

    /// `dispersion,variables` histogram over variables that occur at all.
    pub fn dispersion_histogram_csv(&self) -> String {
        let mut counts: Vec<usize> = Vec::new();
        for occ in self.occurrences.iter().skip(1).filter(|o| !o.is_empty()) {
            if counts.len() <= occ.len() {
                counts.resize(occ.len() + 1, 0);
            }
            counts[occ.len()] += 1;
        }
        let mut out = String::from("# bcpsim dispersion-histogram v1\ndispersion,variables\n");
        for (d, &n) in counts.iter().enumerate().filter(|(_, &n)| n > 0) {
            writeln!(out, "{},{}", d, n).unwrap();
        }
        out
    }
}

/// A way of cutting a formula into partitions.
pub trait PartitionStrategy {
    fn partition(&self, formula: &Formula, limits: &PartitionLimits) -> Result<PartitionPlan, PartitionError>;
}

/// Sequential first-fit: clauses are taken in source order and appended to
/// the open partition while it stays within the clause and variable budget.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedySequential;

impl PartitionStrategy for GreedySequential {
    fn partition(&self, formula: &Formula, limits: &PartitionLimits) -> Result<PartitionPlan, PartitionError> {
        greedy_partition(formula, limits)
    }
}

pub fn greedy_partition(formula: &Formula, limits: &PartitionLimits) -> Result<PartitionPlan, PartitionError> {
    limits.validate()?;
    let mut partitions = Vec::new();
    let mut in_current = vec![false; formula.num_vars() as usize + 1];
    let mut clauses: Vec<usize> = Vec::new();
    let mut vars: Vec<Var> = Vec::new();

    let seal = |clauses: &mut Vec<usize>, vars: &mut Vec<Var>, in_current: &mut Vec<bool>, partitions: &mut Vec<Partition>| {
        for &v in vars.iter() {
            in_current[v as usize] = false;
        }
        let mut local_vars = std::mem::take(vars);
        local_vars.sort_unstable();
        partitions.push(Partition {
            id: partitions.len(),
            clause_indices: std::mem::take(clauses),
            local_vars,
        });
    };

    for (idx, clause) in formula.clauses().iter().enumerate() {
        if clause.len() > limits.max_literals_per_clause {
            return Err(PartitionError::ClauseTooLong {
                clause: idx,
                literals: clause.len(),
                capacity: limits.max_literals_per_clause,
            });
        }
        let own_vars = clause.vars().count();
        if own_vars > limits.max_vars {
            return Err(PartitionError::ClauseTooWide {
                clause: idx,
                vars: own_vars,
                capacity: limits.max_vars,
            });
        }
        let fresh = clause.vars().filter(|&v| !in_current[v as usize]).count();
        if !clauses.is_empty()
            && (clauses.len() + 1 > limits.max_clauses || vars.len() + fresh > limits.max_vars)
        {
            seal(&mut clauses, &mut vars, &mut in_current, &mut partitions);
        }
        for v in clause.vars() {
            if !in_current[v as usize] {
                in_current[v as usize] = true;
                vars.push(v);
            }
        }
        clauses.push(idx);
    }
    if !clauses.is_empty() {
        seal(&mut clauses, &mut vars, &mut in_current, &mut partitions);
    }
    Ok(PartitionPlan::from_partitions(formula.num_vars(), partitions))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DispersionStats {
    pub max: usize,
    /// Mean over variables occurring in at least one partition.
    pub mean: Ratio<u64>,
    /// Variables occurring in two or more partitions.
    pub total_cross_vars: usize,
}

pub fn dispersion_stats(plan: &PartitionPlan) -> DispersionStats {
    let occurring: Vec<usize> = plan
        .occurrences
        .iter()
        .skip(1)
        .map(Vec::len)
        .filter(|&d| d > 0)
        .collect();
    let mean = if occurring.is_empty() {
        Ratio::from_integer(0)
    } else {
        Ratio::new(occurring.iter().sum::<usize>() as u64, occurring.len() as u64)
    };
    DispersionStats {
        max: occurring.iter().copied().max().unwrap_or(0),
        mean,
        total_cross_vars: occurring.iter().filter(|&&d| d >= 2).count(),
    }
}
