//! Reference implementations written independently of the crate, used as
//! test oracles. They work on plain DIMACS integers.
#![allow(dead_code)]

use std::collections::BTreeMap;

use bcpsim::cnf::{Clause, Formula};

pub fn formula(num_vars: u32, clauses: &[Vec<i64>]) -> Formula {
    Formula::new(num_vars, clauses.iter().map(|c| Clause::from_dimacs(c)).collect()).unwrap()
}

pub fn to_ints(f: &Formula) -> Vec<Vec<i64>> {
    f.clauses()
        .iter()
        .map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect())
        .collect()
}

fn holds(bits: u64, lit: i64) -> bool {
    let v = lit.unsigned_abs() - 1;
    let value = (bits >> v) & 1 == 1;
    if lit > 0 {
        value
    } else {
        !value
    }
}

/// Satisfiable iff some row of the truth table satisfies every clause.
pub fn brute_force_sat(num_vars: u32, clauses: &[Vec<i64>]) -> bool {
    assert!(num_vars <= 24);
    (0u64..1 << num_vars).any(|bits| clauses.iter().all(|c| c.iter().any(|&l| holds(bits, l))))
}

pub fn satisfies(model: &[bool], clauses: &[Vec<i64>]) -> bool {
    clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let v = model[l.unsigned_abs() as usize - 1];
            if l > 0 {
                v
            } else {
                !v
            }
        })
    })
}

#[derive(Debug, PartialEq, Eq)]
pub enum Fixpoint {
    /// Variables forced beyond the starting assignment.
    Implied(BTreeMap<u32, bool>),
    Conflict,
}

/// Textbook sequential unit propagation: sweep the clauses, assign the first
/// unit found, restart, until no clause is unit. A clause with every literal
/// false is a conflict.
pub fn unit_fixpoint(clauses: &[Vec<i64>], start: &BTreeMap<u32, bool>) -> Fixpoint {
    let mut values = start.clone();
    let mut implied = BTreeMap::new();
    'outer: loop {
        for c in clauses {
            let mut free = Vec::new();
            let mut sat = false;
            for &l in c {
                match values.get(&(l.unsigned_abs() as u32)) {
                    Some(&v) if v == (l > 0) => sat = true,
                    Some(_) => {}
                    None => free.push(l),
                }
            }
            if sat {
                continue;
            }
            free.sort_unstable();
            free.dedup();
            match free.as_slice() {
                [] => return Fixpoint::Conflict,
                [l] => {
                    let var = l.unsigned_abs() as u32;
                    values.insert(var, *l > 0);
                    implied.insert(var, *l > 0);
                    continue 'outer;
                }
                _ => {}
            }
        }
        return Fixpoint::Implied(implied);
    }
}
