//! CNF data model and exact evaluation.
//!
//! Variables are 1-based indices; clause indices reported by evaluation
//! functions are also 1-based, matching the numbering used in DIMACS files
//! and in trace text ("Constraint 2").

use std::fmt;

use thiserror::Error;

pub mod dimacs;
pub mod generate;

pub use dimacs::{parse_dimacs, serialize_dimacs, DimacsError};
pub use generate::{generate_instance, random_formula, GenerateError};

/// Largest variable count accepted by [`brute_force_sat`].
pub const ENUMERATION_LIMIT: u32 = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("variable x{var} outside assignment domain 1..={num_vars}")]
    OutOfDomain { var: u32, num_vars: u32 },
    #[error("assignment is partial: x{var} is unassigned")]
    Unassigned { var: u32 },
    #[error("clause must contain at least one literal")]
    EmptyClause,
    #[error("formula must contain at least one clause")]
    NoClauses,
    #[error("formula must range over at least one variable")]
    NoVariables,
    #[error("{num_vars} variables exceeds the enumeration limit of {limit}")]
    TooManyVariables { num_vars: u32, limit: u32 },
}

/// A variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    /// Panics if `var` is zero; variable indices start at 1.
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variable indices start at 1");
        Literal { var, positive }
    }

    pub fn positive(var: u32) -> Self {
        Self::new(var, true)
    }

    pub fn negative(var: u32) -> Self {
        Self::new(var, false)
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// DIMACS integer encoding: `x3` is `3`, `¬x3` is `-3`. Zero is not a
    /// literal.
    pub fn from_dimacs(code: i64) -> Option<Self> {
        if code == 0 || code.unsigned_abs() > u64::from(u32::MAX) {
            return None;
        }
        Some(Literal {
            var: code.unsigned_abs() as u32,
            positive: code > 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var);
        if self.positive {
            v
        } else {
            -v
        }
    }

    /// Truth value under `a`, or `None` while the variable is unassigned.
    fn eval(self, a: &Assignment) -> Option<bool> {
        a.get(self.var).map(|v| v == self.positive)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "¬x{}", self.var)
        }
    }
}

/// Disjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Result<Self, CnfError> {
        if literals.is_empty() {
            return Err(CnfError::EmptyClause);
        }
        Ok(Clause { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.literals.contains(&lit)
    }

    /// First literal on `var`, if the clause mentions it.
    pub fn literal_on(&self, var: u32) -> Option<Literal> {
        self.literals.iter().copied().find(|l| l.var() == var)
    }

    /// True when some literal appears twice.
    pub fn has_duplicate(&self) -> bool {
        self.literals
            .iter()
            .enumerate()
            .any(|(i, l)| self.literals[..i].contains(l))
    }

    /// True when the clause contains both a variable and its negation.
    pub fn is_tautological(&self) -> bool {
        self.literals
            .iter()
            .any(|l| self.literals.contains(&l.negated()))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " ∨ ")?;
            }
            write!(f, "{lit}")?;
        }
        write!(f, ")")
    }
}

/// Conjunction of clauses over variables `x1..=x{num_vars}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        if num_vars == 0 {
            return Err(CnfError::NoVariables);
        }
        if clauses.is_empty() {
            return Err(CnfError::NoClauses);
        }
        for clause in &clauses {
            for lit in clause.literals() {
                if lit.var() > num_vars {
                    return Err(CnfError::OutOfDomain {
                        var: lit.var(),
                        num_vars,
                    });
                }
            }
        }
        Ok(Formula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause by 1-based index.
    pub fn clause(&self, index: usize) -> Option<&Clause> {
        if index == 0 {
            return None;
        }
        self.clauses.get(index - 1)
    }
}

/// Partial truth assignment over `x1..=x{num_vars}`; `None` is unassigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn new(num_vars: u32) -> Self {
        Assignment {
            values: vec![None; num_vars as usize],
        }
    }

    pub fn from_pairs(num_vars: u32, pairs: &[(u32, bool)]) -> Result<Self, CnfError> {
        let mut a = Assignment::new(num_vars);
        for &(var, value) in pairs {
            if var == 0 || var > num_vars {
                return Err(CnfError::OutOfDomain { var, num_vars });
            }
            a.values[var as usize - 1] = Some(value);
        }
        Ok(a)
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    /// Panics when `var` is outside `1..=num_vars`.
    pub fn get(&self, var: u32) -> Option<bool> {
        self.values[var as usize - 1]
    }

    /// Panics when `var` is outside `1..=num_vars`.
    pub fn set(&mut self, var: u32, value: bool) {
        self.values[var as usize - 1] = Some(value);
    }

    /// Panics when `var` is outside `1..=num_vars`.
    pub fn unset(&mut self, var: u32) {
        self.values[var as usize - 1] = None;
    }

    pub fn is_assigned(&self, var: u32) -> bool {
        self.get(var).is_some()
    }

    pub fn in_domain(&self, var: u32) -> bool {
        var >= 1 && var <= self.num_vars()
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn assigned_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Lowest-index unassigned variable.
    pub fn first_unassigned(&self) -> Option<u32> {
        self.values
            .iter()
            .position(Option::is_none)
            .map(|i| i as u32 + 1)
    }

    /// Assigned `(variable, value)` pairs in ascending variable order.
    pub fn assigned(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|value| (i as u32 + 1, value)))
    }
}

/// Clause truth status under a partial assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseStatus {
    Satisfied,
    /// Every literal evaluates to false and none is unassigned.
    Falsified,
    Undetermined,
}

/// Satisfied as soon as one literal is true; Falsified only when all
/// literals are false with none unassigned; Undetermined otherwise.
pub fn evaluate_clause(clause: &Clause, a: &Assignment) -> Result<ClauseStatus, CnfError> {
    let mut unassigned = 0usize;
    for lit in clause.literals() {
        if !a.in_domain(lit.var()) {
            return Err(CnfError::OutOfDomain {
                var: lit.var(),
                num_vars: a.num_vars(),
            });
        }
        match lit.eval(a) {
            Some(true) => return Ok(ClauseStatus::Satisfied),
            Some(false) => {}
            None => unassigned += 1,
        }
    }
    if unassigned == 0 {
        Ok(ClauseStatus::Falsified)
    } else {
        Ok(ClauseStatus::Undetermined)
    }
}

/// 1-based index of the lowest falsified clause, or `None` when no clause
/// is falsified under `a`.
pub fn detect_conflict(f: &Formula, a: &Assignment) -> Result<Option<usize>, CnfError> {
    for (i, clause) in f.clauses().iter().enumerate() {
        if evaluate_clause(clause, a)? == ClauseStatus::Falsified {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}

/// True iff the total assignment `a` satisfies every clause of `f`.
///
/// Errors when `a` leaves any variable unassigned.
pub fn evaluate_formula(f: &Formula, a: &Assignment) -> Result<bool, CnfError> {
    if let Some(var) = a.first_unassigned() {
        return Err(CnfError::Unassigned { var });
    }
    for clause in f.clauses() {
        if evaluate_clause(clause, a)? != ClauseStatus::Satisfied {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive satisfiability check, bounded by [`ENUMERATION_LIMIT`].
///
/// Returns the first satisfying assignment in lexicographic order of value
/// vectors (`x1` most significant, `False < True`), or `None` when the
/// formula is unsatisfiable.
pub fn brute_force_sat(f: &Formula) -> Result<Option<Assignment>, CnfError> {
    let n = f.num_vars();
    if n > ENUMERATION_LIMIT {
        return Err(CnfError::TooManyVariables {
            num_vars: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut a = Assignment::new(n);
    for bits in 0u64..(1u64 << n) {
        for var in 1..=n {
            a.set(var, (bits >> (n - var)) & 1 == 1);
        }
        if evaluate_formula(f, &a)? {
            return Ok(Some(a));
        }
    }
    Ok(None)
}
