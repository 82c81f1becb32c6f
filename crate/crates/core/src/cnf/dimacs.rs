//! DIMACS CNF reading and writing.
//!
//! The serializer emits the canonical form used throughout the toolkit:
//! a `p cnf <vars> <clauses>` header, one clause per line, literals
//! separated by single spaces, each clause terminated by `0`, LF endings.
//! The parser additionally tolerates comment lines, blank lines, and
//! clauses spanning multiple lines.

use thiserror::Error;

use super::{Clause, Formula, Literal};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("missing `p cnf <vars> <clauses>` header")]
    MissingHeader,
    #[error("line {line}: malformed header `{found}`")]
    MalformedHeader { line: usize, found: String },
    #[error("line {line}: unexpected token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        num_vars: u32,
    },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("line {line}: clause not terminated by 0")]
    MissingTerminator { line: usize },
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
}

pub fn parse_dimacs(text: &str) -> Result<Formula, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_content_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if header.is_none() {
            let fields: Vec<&str> = line.split_ascii_whitespace().collect();
            let parsed = match fields.as_slice() {
                ["p", "cnf", vars, count] => match (vars.parse::<u32>(), count.parse::<usize>()) {
                    (Ok(v), Ok(c)) if v >= 1 && c >= 1 => Some((v, c)),
                    _ => None,
                },
                _ => None,
            };
            header = Some(parsed.ok_or(DimacsError::MalformedHeader {
                line: line_no,
                found: raw.to_string(),
            })?);
            continue;
        }
        let (num_vars, _) = header.unwrap();
        last_content_line = line_no;
        for token in line.split_ascii_whitespace() {
            let code: i64 = token.parse().map_err(|_| DimacsError::InvalidToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if code == 0 {
                if current.is_empty() {
                    return Err(DimacsError::EmptyClause { line: line_no });
                }
                clauses.push(Clause::new(std::mem::take(&mut current)).expect("non-empty"));
                continue;
            }
            if code.unsigned_abs() > u64::from(num_vars) {
                return Err(DimacsError::LiteralOutOfRange {
                    line: line_no,
                    literal: code,
                    num_vars,
                });
            }
            current.push(Literal::from_dimacs(code).expect("non-zero in-range literal"));
        }
    }

    let (num_vars, declared) = header.ok_or(DimacsError::MissingHeader)?;
    if !current.is_empty() {
        return Err(DimacsError::MissingTerminator {
            line: last_content_line,
        });
    }
    if clauses.len() != declared {
        return Err(DimacsError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok(Formula::new(num_vars, clauses).expect("literal bounds already checked"))
}

pub fn serialize_dimacs(f: &Formula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars(), f.num_clauses());
    for clause in f.clauses() {
        for lit in clause.literals() {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}
