//! Control-corpus construction: remove conflict and backtracking spans and
//! stitch a monotonic path to the same verified final assignment.
//!
//! Two transforms are provided. [`linearize`] works on events: it drops
//! every conflict, every backtrack, every decision that later gets
//! reverted, and every check inside a reverted span, then recomputes the
//! surviving checks against the linearized replay so a monotonic trace
//! never narrates a violated constraint. [`linearize_text`] is the
//! line-local text rule: skip from a `[CONFLICT]` line until the next
//! "New Proposal" (or "Revised") line, keeping that line. The text rule
//! cannot see that the proposal and check narrated *before* a conflict
//! marker belong to the reverted span, so on conflict traces its output
//! retains those blocks; the event-level output is exactly the text-level
//! output with reverted-span blocks removed (and steps renumbered), and
//! the two coincide on conflict-free traces.

use thiserror::Error;

use crate::cnf::evaluate_clause;
use crate::dataset::{render_prompt, Condition, DatasetRecord};
use crate::trace::{proxy_token_count, serialize_trace, Trace, TraceEvent};
use crate::verifier::{verdict, Verdict};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error("trace has no final assignment")]
    MissingFinal,
    #[error("final assignment does not satisfy the formula; refusing to build a control trace")]
    UnverifiedFinal,
}

/// Event-level linearization of a golden trace.
///
/// Refuses traces whose final assignment does not verify: the control
/// corpus must commit to the same verified assignment as the treatment.
pub fn linearize(t: &Trace) -> Result<Trace, LinearizeError> {
    let final_assignment = t.final_assignment().ok_or(LinearizeError::MissingFinal)?;
    if verdict(&t.formula, final_assignment) != Verdict::Satisfying {
        return Err(LinearizeError::UnverifiedFinal);
    }

    // Pass 1: decisions popped by a later backtrack are doomed, as are all
    // conflicts and backtracks themselves.
    let mut doomed = vec![false; t.events.len()];
    let mut stack: Vec<(usize, u32)> = Vec::new();
    for (index, event) in t.events.iter().enumerate() {
        match event {
            TraceEvent::Decide { var, .. } => stack.push((index, *var)),
            TraceEvent::Conflict { .. } => doomed[index] = true,
            TraceEvent::Backtrack { reverted } => {
                doomed[index] = true;
                for &(var, _) in reverted {
                    if let Some(pos) = stack.iter().rposition(|&(_, v)| v == var) {
                        let (decide_index, _) = stack.remove(pos);
                        doomed[decide_index] = true;
                    }
                }
            }
            _ => {}
        }
    }

    // Pass 2: keep surviving events; checks inside a reverted span (some
    // doomed decision still standing) are dropped, the rest recomputed
    // under the linearized replay.
    let mut events = Vec::with_capacity(t.events.len());
    let mut state = crate::cnf::Assignment::new(t.formula.num_vars());
    let mut active_doomed = 0usize;
    for (index, event) in t.events.iter().enumerate() {
        match event {
            TraceEvent::Decide { var, value, .. } => {
                if doomed[index] {
                    active_doomed += 1;
                } else {
                    if state.in_domain(*var) {
                        state.set(*var, *value);
                    }
                    events.push(event.clone());
                }
            }
            TraceEvent::Verify { statuses } => {
                if active_doomed == 0 {
                    let recomputed = statuses
                        .iter()
                        .map(|(i, stated)| {
                            let status = t
                                .formula
                                .clause(*i)
                                .map(|c| {
                                    evaluate_clause(c, &state)
                                        .expect("formula clauses stay in domain")
                                })
                                .unwrap_or(*stated);
                            (*i, status)
                        })
                        .collect();
                    events.push(TraceEvent::Verify {
                        statuses: recomputed,
                    });
                }
            }
            TraceEvent::Conflict { .. } => {}
            TraceEvent::Backtrack { reverted } => {
                active_doomed = active_doomed.saturating_sub(reverted.len());
            }
            TraceEvent::Final { .. } => events.push(event.clone()),
        }
    }

    Ok(Trace::new(t.instance_id.clone(), t.formula.clone(), events))
}

/// Line-local text linearization: on a line containing `[CONFLICT]` enter
/// skip state; while skipping, resume at a line containing "New Proposal"
/// or "Revised" (keeping that line); every other skipped line is dropped.
pub fn linearize_text(text: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut skip = false;
    for line in text.lines() {
        if line.contains("[CONFLICT]") {
            skip = true;
            continue;
        }
        if skip {
            if line.contains("New Proposal") || line.contains("Revised") {
                skip = false;
                out.push(line);
            }
            continue;
        }
        out.push(line);
    }
    let mut joined = out.join("\n");
    if text.ends_with('\n') && !joined.is_empty() {
        joined.push('\n');
    }
    joined
}

/// Replace the number of every `<n>. ` block header with `#` so trace
/// texts can be compared up to step renumbering.
pub fn normalize_step_numbers(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        match line.split_once(". ") {
            Some((num, rest)) if !num.is_empty() && num.bytes().all(|b| b.is_ascii_digit()) => {
                out.push_str("#. ");
                out.push_str(rest);
            }
            _ => out.push_str(line),
        }
        out.push('\n');
    }
    if !text.ends_with('\n') {
        out.pop();
    }
    out
}

/// Matched treatment/control records sharing instance, prompt, and final
/// assignment.
pub fn build_matched_pair(t: &Trace) -> Result<(DatasetRecord, DatasetRecord), LinearizeError> {
    let control_trace = linearize(t)?;
    let dimacs = crate::cnf::serialize_dimacs(&t.formula);
    let prompt = render_prompt(&t.formula);
    let record = |trace: &Trace, condition: Condition| {
        let completion = serialize_trace(trace);
        DatasetRecord {
            id: t.instance_id.clone(),
            dimacs: dimacs.clone(),
            prompt: prompt.clone(),
            token_count: proxy_token_count(&completion),
            conflict_count: trace.conflict_count(),
            completion,
            condition,
            verified: true,
        }
    };
    Ok((
        record(t, Condition::Treatment),
        record(&control_trace, Condition::Control),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{parse_dimacs, Assignment, ClauseStatus};
    use crate::engine::{synthesize_trace, InjectionConfig};
    use crate::trace::replay;

    fn injected_trace(seed: u64) -> Trace {
        let f = parse_dimacs("p cnf 4 3\n1 -2 3 0\n-1 2 4 0\n2 -3 -4 0\n").unwrap();
        let cfg = InjectionConfig {
            injection_probability: 1.0,
            seed,
            ..InjectionConfig::default()
        };
        synthesize_trace(&f, &cfg).unwrap().trace
    }

    #[test]
    fn drops_conflict_backtrack_and_reverted_decide() {
        let f = parse_dimacs("p cnf 3 2\n-3 1 0\n3 0\n").unwrap();
        let t = Trace::new(
            "episode",
            f,
            vec![
                TraceEvent::Decide {
                    var: 3,
                    value: false,
                    rationale_clause: Some(1),
                },
                TraceEvent::Verify {
                    statuses: vec![(1, ClauseStatus::Satisfied), (2, ClauseStatus::Falsified)],
                },
                TraceEvent::Conflict { violated_clause: 2 },
                TraceEvent::Backtrack {
                    reverted: vec![(3, false)],
                },
                TraceEvent::Decide {
                    var: 3,
                    value: true,
                    rationale_clause: None,
                },
                TraceEvent::Verify {
                    statuses: vec![
                        (1, ClauseStatus::Undetermined),
                        (2, ClauseStatus::Satisfied),
                    ],
                },
                TraceEvent::Decide {
                    var: 1,
                    value: true,
                    rationale_clause: Some(1),
                },
                TraceEvent::Verify {
                    statuses: vec![(1, ClauseStatus::Satisfied), (2, ClauseStatus::Satisfied)],
                },
                TraceEvent::Decide {
                    var: 2,
                    value: false,
                    rationale_clause: None,
                },
                TraceEvent::Verify {
                    statuses: vec![(1, ClauseStatus::Satisfied), (2, ClauseStatus::Satisfied)],
                },
                TraceEvent::Final {
                    assignment: Assignment::from_pairs(3, &[(1, true), (2, false), (3, true)])
                        .unwrap(),
                },
            ],
        );
        let lin = linearize(&t).unwrap();
        assert_eq!(lin.events.len(), 7);
        assert_eq!(
            lin.events[0],
            TraceEvent::Decide {
                var: 3,
                value: true,
                rationale_clause: None
            }
        );
        assert!(lin
            .events
            .iter()
            .all(|e| !e.is_conflict() && !e.is_backtrack()));
        assert_eq!(lin.final_assignment(), t.final_assignment());
        replay(&lin).unwrap();
    }

    #[test]
    fn conflict_free_trace_is_unchanged() {
        let f = parse_dimacs("p cnf 3 2\n-3 1 0\n3 0\n").unwrap();
        let cfg = InjectionConfig {
            injection_probability: 0.0,
            ..InjectionConfig::default()
        };
        let t = synthesize_trace(&f, &cfg).unwrap().trace;
        let lin = linearize(&t).unwrap();
        assert_eq!(lin.events, t.events);
        assert_eq!(linearize_text(&serialize_trace(&t)), serialize_trace(&t));
    }

    #[test]
    fn multi_variable_rollback_drops_whole_window() {
        // find an engine trace whose backtrack reverts several variables
        let mut checked = false;
        for seed in 0..60u64 {
            let t = injected_trace(seed);
            let Some(TraceEvent::Backtrack { reverted }) =
                t.events.iter().find(|e| e.is_backtrack())
            else {
                continue;
            };
            if reverted.len() < 2 {
                continue;
            }
            checked = true;
            let window_vars: Vec<u32> = reverted.iter().map(|&(v, _)| v).collect();
            let lin = linearize(&t).unwrap();
            replay(&lin).unwrap();
            // every surviving decision assigns the value that persists
            let final_a = lin.final_assignment().unwrap().clone();
            for event in &lin.events {
                if let TraceEvent::Decide { var, value, .. } = event {
                    assert_eq!(final_a.get(*var), Some(*value));
                }
            }
            // the reverted variables are re-proposed exactly once each
            for var in window_vars {
                let count = lin
                    .events
                    .iter()
                    .filter(|e| matches!(e, TraceEvent::Decide { var: v, .. } if *v == var))
                    .count();
                assert_eq!(count, 1);
            }
            break;
        }
        assert!(checked, "no multi-variable rollback among the seeds");
    }

    #[test]
    fn refuses_unverified_final() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let t = Trace::new(
            "bad",
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
        assert_eq!(linearize(&t), Err(LinearizeError::UnverifiedFinal));
    }

    #[test]
    fn text_rule_removes_conflict_block_and_keeps_new_proposal() {
        let t = injected_trace(1);
        let text = serialize_trace(&t);
        let lin = linearize_text(&text);
        assert!(!lin.contains("[CONFLICT]"));
        assert!(!lin.contains("Backtracking..."));
        assert!(!lin.contains("Reverting assignment"));
        if t.conflict_count() > 0 {
            assert!(lin.contains("New Proposal"));
        }
    }

    #[test]
    fn text_without_marker_is_unchanged() {
        let text = "line one\nline two\n";
        assert_eq!(linearize_text(text), text);
    }

    #[test]
    fn text_ending_mid_skip_drops_trailing_lines() {
        let text = "keep\n[CONFLICT] oops\ndropped\ndropped too";
        assert_eq!(linearize_text(text), "keep");
    }

    #[test]
    fn matched_pair_shares_identity_and_shrinks() {
        let t = {
            let mut t = injected_trace(2);
            t.instance_id = "inst-0002".into();
            t
        };
        let (treatment, control) = build_matched_pair(&t).unwrap();
        assert_eq!(treatment.id, control.id);
        assert_eq!(treatment.prompt, control.prompt);
        assert_eq!(treatment.dimacs, control.dimacs);
        assert_eq!(control.conflict_count, 0);
        assert!(treatment.verified && control.verified);
        if treatment.conflict_count > 0 {
            assert!(control.token_count < treatment.token_count);
        } else {
            assert_eq!(control.token_count, treatment.token_count);
        }
        assert!(!control.completion.contains("[CONFLICT]"));
    }
}
