//! Exhaustive truth-table oracle for small formulas.

use crate::cnf::{Formula, Literal, Verdict};

/// Hard cap on variables the oracle will enumerate.
pub const ORACLE_MAX_VARS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("formula has {num_vars} variables; the oracle enumerates at most {ORACLE_MAX_VARS}")]
pub struct OracleError {
    pub num_vars: u32,
}

/// Result of the exhaustive search: the verdict and the first model found in
/// counting order (bit `i` of the counter is variable `i + 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub verdict: Verdict,
    pub model: Option<Vec<bool>>,
}

fn lit_true(bits: u32, lit: Literal) -> bool {
    let value = (bits >> (lit.var() - 1)) & 1 == 1;
    lit.value_under(value)
}

pub fn truth_table(formula: &Formula) -> Result<OracleResult, OracleError> {
    let n = formula.num_vars();
    if n > ORACLE_MAX_VARS {
        return Err(OracleError { num_vars: n });
    }
    let found = (0..1u32 << n).find(|&bits| {
        formula
            .clauses()
            .iter()
            .all(|c| c.literals().iter().any(|&l| lit_true(bits, l)))
    });
    Ok(match found {
        Some(bits) => OracleResult {
            verdict: Verdict::Sat,
            model: Some((0..n).map(|i| (bits >> i) & 1 == 1).collect()),
        },
        None => OracleResult {
            verdict: Verdict::Unsat,
            model: None,
        },
    })
}
