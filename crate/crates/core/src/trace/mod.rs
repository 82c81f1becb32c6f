//! Event-level reasoning traces over CNF instances.
//!
//! A [`Trace`] pairs a formula with an ordered event list: decisions,
//! clause checks, conflicts, backtracks, and a final assignment. The pair
//! (replayed assignment, events) captures the full solver state at every
//! step. The line-oriented text form lives in [`text`].

use thiserror::Error;

use crate::cnf::{Assignment, ClauseStatus, Formula};

pub mod text;

pub use text::{
    parse_trace, proxy_token_count, render_assignment, scan_trace, serialize_trace, ParseMode,
    ScanItem, ScanKind, TraceScan, TraceTextError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    /// Assign a value to an unassigned variable. `rationale_clause` is the
    /// 1-based index of the constraint narrated as motivating the choice;
    /// repair decisions after a backtrack carry no rationale and serialize
    /// as "New Proposal" blocks.
    Decide {
        var: u32,
        value: bool,
        rationale_clause: Option<usize>,
    },
    /// Clause statuses for every constraint, in ascending 1-based order.
    Verify {
        statuses: Vec<(usize, ClauseStatus)>,
    },
    /// A constraint (1-based) was falsified by the current assignment.
    Conflict { violated_clause: usize },
    /// Revert assignments, most recent first; old values are recorded.
    Backtrack { reverted: Vec<(u32, bool)> },
    /// Total assignment the trace commits to.
    Final { assignment: Assignment },
}

impl TraceEvent {
    pub fn is_conflict(&self) -> bool {
        matches!(self, TraceEvent::Conflict { .. })
    }

    pub fn is_backtrack(&self) -> bool {
        matches!(self, TraceEvent::Backtrack { .. })
    }

    pub fn final_assignment(&self) -> Option<&Assignment> {
        match self {
            TraceEvent::Final { assignment } => Some(assignment),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub instance_id: String,
    pub formula: Formula,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(instance_id: impl Into<String>, formula: Formula, events: Vec<TraceEvent>) -> Self {
        Trace {
            instance_id: instance_id.into(),
            formula,
            events,
        }
    }

    pub fn conflict_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_conflict()).count()
    }

    /// The recorded final assignment, when the trace has one.
    pub fn final_assignment(&self) -> Option<&Assignment> {
        self.events
            .iter()
            .rev()
            .find_map(TraceEvent::final_assignment)
    }

    /// Replay-validate the event list; see [`replay`].
    pub fn validate(&self) -> Result<(), ReplayError> {
        replay(self).map(|_| ())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("event {index}: x{var} decided while already assigned")]
    DoubleAssign { index: usize, var: u32 },
    #[error("event {index}: revert of unassigned variable x{var}")]
    RevertUnassigned { index: usize, var: u32 },
    #[error("event {index}: revert of x{var} records value {recorded} but replay holds {actual}")]
    RevertValueMismatch {
        index: usize,
        var: u32,
        recorded: bool,
        actual: bool,
    },
    #[error("event {index}: x{var} outside the formula's variable range")]
    OutOfDomain { index: usize, var: u32 },
    #[error("event {index}: conflict not immediately preceded by a check reporting a violation")]
    ConflictWithoutViolation { index: usize },
    #[error("event {index}: recorded final assignment disagrees with the replayed state")]
    FinalMismatch { index: usize },
    #[error("event {index}: recorded final assignment is not total")]
    FinalNotTotal { index: usize },
    #[error("event {index}: event after the final assignment")]
    EventAfterFinal { index: usize },
    #[error("trace has no final assignment")]
    MissingFinal,
}

/// Assignment snapshots after each event.
///
/// Validates that the event list is a consistent history: no double
/// assignment without an intervening backtrack, reverts only of currently
/// assigned variables with matching old values, conflicts immediately
/// preceded by a check reporting a violation, and exactly one final
/// assignment, in last position, equal to the replayed state.
pub fn replay(t: &Trace) -> Result<Vec<Assignment>, ReplayError> {
    let num_vars = t.formula.num_vars();
    let mut state = Assignment::new(num_vars);
    let mut snapshots = Vec::with_capacity(t.events.len());
    let mut finished = false;

    for (index, event) in t.events.iter().enumerate() {
        if finished {
            return Err(ReplayError::EventAfterFinal { index });
        }
        match event {
            TraceEvent::Decide { var, value, .. } => {
                if !state.in_domain(*var) {
                    return Err(ReplayError::OutOfDomain { index, var: *var });
                }
                if state.is_assigned(*var) {
                    return Err(ReplayError::DoubleAssign { index, var: *var });
                }
                state.set(*var, *value);
            }
            TraceEvent::Verify { .. } => {}
            TraceEvent::Conflict { .. } => {
                let violated_before = match index.checked_sub(1).map(|i| &t.events[i]) {
                    Some(TraceEvent::Verify { statuses }) => {
                        statuses.iter().any(|(_, s)| *s == ClauseStatus::Falsified)
                    }
                    _ => false,
                };
                if !violated_before {
                    return Err(ReplayError::ConflictWithoutViolation { index });
                }
            }
            TraceEvent::Backtrack { reverted } => {
                for &(var, recorded) in reverted {
                    if !state.in_domain(var) {
                        return Err(ReplayError::OutOfDomain { index, var });
                    }
                    match state.get(var) {
                        None => return Err(ReplayError::RevertUnassigned { index, var }),
                        Some(actual) if actual != recorded => {
                            return Err(ReplayError::RevertValueMismatch {
                                index,
                                var,
                                recorded,
                                actual,
                            })
                        }
                        Some(_) => state.unset(var),
                    }
                }
            }
            TraceEvent::Final { assignment } => {
                if !assignment.is_total() {
                    return Err(ReplayError::FinalNotTotal { index });
                }
                if *assignment != state {
                    return Err(ReplayError::FinalMismatch { index });
                }
                finished = true;
            }
        }
        snapshots.push(state.clone());
    }

    if !finished {
        return Err(ReplayError::MissingFinal);
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{parse_dimacs, Assignment};

    fn decide(var: u32, value: bool) -> TraceEvent {
        TraceEvent::Decide {
            var,
            value,
            rationale_clause: None,
        }
    }

    fn trace_over(dimacs: &str, events: Vec<TraceEvent>) -> Trace {
        Trace::new("t", parse_dimacs(dimacs).unwrap(), events)
    }

    #[test]
    fn replay_tracks_single_decide() {
        let t = trace_over(
            "p cnf 1 1\n1 0\n",
            vec![
                decide(1, true),
                TraceEvent::Final {
                    assignment: Assignment::from_pairs(1, &[(1, true)]).unwrap(),
                },
            ],
        );
        let snaps = replay(&t).unwrap();
        assert_eq!(snaps[0].get(1), Some(true));
        assert_eq!(snaps.len(), 2);
    }

    #[test]
    fn replay_applies_backtrack_then_reproposal() {
        let f = "p cnf 3 2\n-3 1 0\n3 0\n";
        let t = trace_over(
            f,
            vec![
                decide(3, false),
                TraceEvent::Verify {
                    statuses: vec![(1, ClauseStatus::Satisfied), (2, ClauseStatus::Falsified)],
                },
                TraceEvent::Conflict { violated_clause: 2 },
                TraceEvent::Backtrack {
                    reverted: vec![(3, false)],
                },
                decide(3, true),
                decide(1, true),
                decide(2, false),
                TraceEvent::Final {
                    assignment: Assignment::from_pairs(3, &[(1, true), (2, false), (3, true)])
                        .unwrap(),
                },
            ],
        );
        let snaps = replay(&t).unwrap();
        assert_eq!(snaps.last().unwrap().get(3), Some(true));
    }

    #[test]
    fn replay_rejects_revert_of_unassigned_variable() {
        let t = trace_over(
            "p cnf 2 1\n1 2 0\n",
            vec![TraceEvent::Backtrack {
                reverted: vec![(1, true)],
            }],
        );
        assert_eq!(
            replay(&t),
            Err(ReplayError::RevertUnassigned { index: 0, var: 1 })
        );
    }

    #[test]
    fn replay_rejects_double_assignment() {
        let t = trace_over("p cnf 1 1\n1 0\n", vec![decide(1, true), decide(1, false)]);
        assert_eq!(
            replay(&t),
            Err(ReplayError::DoubleAssign { index: 1, var: 1 })
        );
    }

    #[test]
    fn replay_rejects_conflict_without_violation() {
        let t = trace_over(
            "p cnf 1 1\n1 0\n",
            vec![decide(1, true), TraceEvent::Conflict { violated_clause: 1 }],
        );
        assert_eq!(
            replay(&t),
            Err(ReplayError::ConflictWithoutViolation { index: 1 })
        );
    }

    #[test]
    fn replay_requires_final() {
        let t = trace_over("p cnf 1 1\n1 0\n", vec![decide(1, true)]);
        assert_eq!(replay(&t), Err(ReplayError::MissingFinal));
    }
}
