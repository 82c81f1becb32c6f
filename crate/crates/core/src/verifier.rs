//! Symbolic judging of final assignments and full-trace auditing.
//!
//! Final-assignment verification is exact clause evaluation; a solver
//! query over a formula conjoined with a total assignment's unit literals
//! reduces to precisely that. Auditing additionally recomputes every
//! narrated clause status so hallucinated checks and conflicts surface as
//! step inconsistencies, while correctness is enforced only on the final
//! assignment.

use crate::cnf::{evaluate_clause, evaluate_formula, Assignment, ClauseStatus, CnfError, Formula};
use crate::trace::{Trace, TraceEvent};

/// Outcome of judging a final assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfying,
    Unsatisfying,
    /// The assignment leaves variables unassigned and cannot be judged.
    Incomplete,
}

/// Why a trace was excluded from the golden dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Unsatisfying,
    Incomplete,
    Unparseable,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Unsatisfying => "unsatisfying",
            RejectReason::Incomplete => "incomplete",
            RejectReason::Unparseable => "unparseable",
        }
    }
}

/// True iff the total assignment satisfies every clause.
///
/// A partial assignment is an error; use [`verdict`] when an incomplete
/// answer must be distinguished rather than refused.
pub fn verify_final(f: &Formula, a_star: &Assignment) -> Result<bool, CnfError> {
    evaluate_formula(f, a_star)
}

pub fn verdict(f: &Formula, a_star: &Assignment) -> Verdict {
    if !a_star.is_total() {
        return Verdict::Incomplete;
    }
    match evaluate_formula(f, a_star) {
        Ok(true) => Verdict::Satisfying,
        _ => Verdict::Unsatisfying,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepInconsistency {
    pub event_index: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    /// The recorded final assignment satisfies the formula.
    pub final_ok: bool,
    /// Every narrated status or conflict that disagrees with exact
    /// evaluation under the replayed assignment.
    pub step_inconsistencies: Vec<StepInconsistency>,
}

/// Recompute every narrated clause status and conflict attribution under a
/// tolerant replay. Always completes; inconsistent events are reported,
/// not fatal.
pub fn audit_trace(t: &Trace) -> AuditReport {
    let f = &t.formula;
    let mut state = Assignment::new(f.num_vars());
    let mut inconsistencies = Vec::new();
    let mut final_ok = false;
    let mut saw_final = false;
    let mut push = |index: usize, description: String| {
        inconsistencies.push(StepInconsistency {
            event_index: index,
            description,
        });
    };

    for (index, event) in t.events.iter().enumerate() {
        match event {
            TraceEvent::Decide { var, value, .. } => {
                if !state.in_domain(*var) {
                    push(
                        index,
                        format!("decision on x{var} outside the variable range"),
                    );
                    continue;
                }
                if state.is_assigned(*var) {
                    push(index, format!("x{var} re-decided without a backtrack"));
                }
                state.set(*var, *value);
            }
            TraceEvent::Verify { statuses } => {
                for (clause_index, stated) in statuses {
                    let Some(clause) = f.clause(*clause_index) else {
                        push(
                            index,
                            format!("check names unknown constraint {clause_index}"),
                        );
                        continue;
                    };
                    let actual = evaluate_clause(clause, &state)
                        .expect("clause literals are within the formula domain");
                    if actual != *stated {
                        push(
                            index,
                            format!(
                                "check states constraint {clause_index} {} but it is {}",
                                status_name(*stated),
                                status_name(actual)
                            ),
                        );
                    }
                }
            }
            TraceEvent::Conflict { violated_clause } => match f.clause(*violated_clause) {
                None => push(
                    index,
                    format!("conflict names unknown constraint {violated_clause}"),
                ),
                Some(clause) => {
                    let actual = evaluate_clause(clause, &state)
                        .expect("clause literals are within the formula domain");
                    if actual != ClauseStatus::Falsified {
                        push(
                            index,
                            format!(
                                "conflict names constraint {violated_clause} but it is {}",
                                status_name(actual)
                            ),
                        );
                    }
                }
            },
            TraceEvent::Backtrack { reverted } => {
                for &(var, recorded) in reverted {
                    if !state.in_domain(var) {
                        push(
                            index,
                            format!("revert of x{var} outside the variable range"),
                        );
                        continue;
                    }
                    match state.get(var) {
                        None => push(index, format!("revert of unassigned x{var}")),
                        Some(actual) => {
                            if actual != recorded {
                                push(
                                    index,
                                    format!(
                                        "revert of x{var} records {} but the state holds {}",
                                        recorded, actual
                                    ),
                                );
                            }
                            state.unset(var);
                        }
                    }
                }
            }
            TraceEvent::Final { assignment } => {
                saw_final = true;
                if *assignment != state {
                    push(
                        index,
                        "final assignment disagrees with the replayed state".into(),
                    );
                }
                final_ok = verdict(f, assignment) == Verdict::Satisfying;
            }
        }
    }

    if !saw_final {
        push(t.events.len(), "trace has no final assignment".into());
    }
    AuditReport {
        final_ok,
        step_inconsistencies: inconsistencies,
    }
}

fn status_name(status: ClauseStatus) -> &'static str {
    match status {
        ClauseStatus::Satisfied => "satisfied",
        ClauseStatus::Falsified => "violated",
        ClauseStatus::Undetermined => "undetermined",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub golden: Vec<Trace>,
    pub rejected: Vec<(Trace, RejectReason)>,
    /// `golden / corpus`, or `None` for an empty corpus.
    pub pass_rate: Option<f64>,
}

/// Partition traces by the verdict on their final assignments.
pub fn filter_golden(corpus: Vec<Trace>) -> FilterOutcome {
    let total = corpus.len();
    let mut golden = Vec::new();
    let mut rejected = Vec::new();
    for trace in corpus {
        let v = match trace.final_assignment() {
            Some(a) => verdict(&trace.formula, a),
            None => Verdict::Incomplete,
        };
        match v {
            Verdict::Satisfying => golden.push(trace),
            Verdict::Unsatisfying => rejected.push((trace, RejectReason::Unsatisfying)),
            Verdict::Incomplete => rejected.push((trace, RejectReason::Incomplete)),
        }
    }
    let pass_rate = if total == 0 {
        None
    } else {
        Some(golden.len() as f64 / total as f64)
    };
    FilterOutcome {
        golden,
        rejected,
        pass_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use crate::engine::{synthesize_trace, InjectionConfig};

    #[test]
    fn satisfying_final_assignment_verifies() {
        let f = parse_dimacs("p cnf 3 2\n-3 1 0\n3 0\n").unwrap();
        let a = Assignment::from_pairs(3, &[(1, true), (2, false), (3, true)]).unwrap();
        assert_eq!(verify_final(&f, &a), Ok(true));
        assert_eq!(verdict(&f, &a), Verdict::Satisfying);
    }

    #[test]
    fn contradiction_never_verifies() {
        let f = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap();
        for value in [false, true] {
            let a = Assignment::from_pairs(1, &[(1, value)]).unwrap();
            assert_eq!(verify_final(&f, &a), Ok(false));
        }
    }

    #[test]
    fn wrong_unit_value_fails() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let a = Assignment::from_pairs(1, &[(1, false)]).unwrap();
        assert_eq!(verify_final(&f, &a), Ok(false));
    }

    #[test]
    fn partial_assignment_is_an_error_and_a_distinct_verdict() {
        let f = parse_dimacs("p cnf 2 1\n1 2 0\n").unwrap();
        let a = Assignment::from_pairs(2, &[(1, true)]).unwrap();
        assert_eq!(verify_final(&f, &a), Err(CnfError::Unassigned { var: 2 }));
        assert_eq!(verdict(&f, &a), Verdict::Incomplete);
    }

    #[test]
    fn engine_traces_audit_clean() {
        let f = parse_dimacs("p cnf 4 3\n1 -2 3 0\n-1 2 4 0\n2 -3 -4 0\n").unwrap();
        let cfg = InjectionConfig {
            injection_probability: 1.0,
            seed: 3,
            ..InjectionConfig::default()
        };
        let result = synthesize_trace(&f, &cfg).unwrap();
        let report = audit_trace(&result.trace);
        assert!(report.final_ok);
        assert!(report.step_inconsistencies.is_empty());
    }

    #[test]
    fn misreported_check_is_flagged() {
        // claims constraint 2 satisfied while x3=False falsifies it
        let f = parse_dimacs("p cnf 3 2\n-3 1 0\n3 0\n").unwrap();
        let t = Trace::new(
            "bad",
            f,
            vec![
                TraceEvent::Decide {
                    var: 3,
                    value: false,
                    rationale_clause: Some(1),
                },
                TraceEvent::Verify {
                    statuses: vec![(1, ClauseStatus::Satisfied), (2, ClauseStatus::Satisfied)],
                },
            ],
        );
        let report = audit_trace(&t);
        assert_eq!(report.step_inconsistencies.len(), 2); // bad status + missing final
        assert!(report.step_inconsistencies[0]
            .description
            .contains("constraint 2 satisfied but it is violated"));
    }

    #[test]
    fn correct_steps_with_unsatisfying_final() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let t = Trace::new(
            "bad-final",
            f,
            vec![
                TraceEvent::Decide {
                    var: 1,
                    value: false,
                    rationale_clause: None,
                },
                TraceEvent::Final {
                    assignment: Assignment::from_pairs(1, &[(1, false)]).unwrap(),
                },
            ],
        );
        let report = audit_trace(&t);
        assert!(!report.final_ok);
        assert!(report.step_inconsistencies.is_empty());
    }

    #[test]
    fn filter_partitions_and_reports_rate() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let good = Trace::new(
            "g",
            f.clone(),
            vec![TraceEvent::Final {
                assignment: Assignment::from_pairs(1, &[(1, true)]).unwrap(),
            }],
        );
        let bad = Trace::new(
            "b",
            f.clone(),
            vec![TraceEvent::Final {
                assignment: Assignment::from_pairs(1, &[(1, false)]).unwrap(),
            }],
        );
        let corpus = vec![good.clone(), good.clone(), good.clone(), good, bad];
        let outcome = filter_golden(corpus);
        assert_eq!(outcome.golden.len(), 4);
        assert_eq!(outcome.rejected.len(), 1);
        assert_eq!(outcome.rejected[0].1, RejectReason::Unsatisfying);
        assert_eq!(outcome.pass_rate, Some(0.8));
    }

    #[test]
    fn empty_corpus_has_no_pass_rate() {
        let outcome = filter_golden(Vec::new());
        assert_eq!(outcome.pass_rate, None);
        assert!(outcome.golden.is_empty() && outcome.rejected.is_empty());
    }

    #[test]
    fn partial_final_is_rejected_as_incomplete() {
        let f = parse_dimacs("p cnf 2 1\n1 2 0\n").unwrap();
        let t = Trace::new(
            "p",
            f,
            vec![TraceEvent::Final {
                assignment: Assignment::from_pairs(2, &[(1, true)]).unwrap(),
            }],
        );
        let outcome = filter_golden(vec![t]);
        assert_eq!(outcome.rejected[0].1, RejectReason::Incomplete);
        assert_eq!(outcome.pass_rate, Some(0.0));
    }
}
