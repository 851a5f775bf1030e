use std::fmt::Write as _;

use super::{Clause, Formula, Literal};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("missing `p cnf <vars> <clauses>` header")]
    MissingHeader,
    #[error("line {line}: malformed header `{text}`")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: invalid token `{token}`")]
    BadToken { line: usize, token: String },
    #[error("line {line}: literal {literal} exceeds declared variable count {num_vars}")]
    VarOutOfRange { line: usize, literal: i64, num_vars: u32 },
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
}

/// Parses DIMACS CNF text.
///
/// Comment lines (`c ...`) are skipped and a `%` line ends the input (SATLIB
/// convention). A bare `0` yields an empty clause, which is kept in place;
/// see [`Formula::contains_empty_clause`]. A final clause missing its `0`
/// terminator at end of input is accepted.
pub fn parse_dimacs(text: &str) -> Result<Formula, ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["p", "cnf", v, c] => v.parse::<u32>().ok().zip(c.parse::<usize>().ok()),
                _ => None,
            };
            match (parsed, header) {
                (Some(h), None) => header = Some(h),
                _ => {
                    return Err(ParseError::BadHeader {
                        line: line_no,
                        text: line.to_string(),
                    })
                }
            }
            continue;
        }
        let (num_vars, _) = header.ok_or(ParseError::MissingHeader)?;
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| ParseError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                clauses.push(Clause::new(current.drain(..)));
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(ParseError::VarOutOfRange {
                    line: line_no,
                    literal: value,
                    num_vars,
                });
            }
            current.push(Literal::from_dimacs(value).expect("nonzero"));
        }
    }

    let (num_vars, declared) = header.ok_or(ParseError::MissingHeader)?;
    if !current.is_empty() {
        clauses.push(Clause::new(current));
    }
    if clauses.len() != declared {
        return Err(ParseError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok(Formula::new(num_vars, clauses).expect("variable range checked while parsing"))
}

pub fn serialize_dimacs(formula: &Formula) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", formula.num_vars(), formula.num_clauses()).unwrap();
    for clause in formula.clauses() {
        for lit in clause.literals() {
            write!(out, "{} ", lit).unwrap();
        }
        out.push_str("0\n");
    }
    out
}
