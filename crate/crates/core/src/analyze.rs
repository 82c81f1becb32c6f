//! Behavioral measurement of arbitrary response text.
//!
//! Two detectors run side by side. The string heuristic decides the
//! backtracking-event indicator: the response must contain the literal
//! `[CONFLICT]` token, a backtracking phrase after it, and a later
//! proposal that flips a value stated earlier. The state-machine view is
//! built on the lenient scanner and tracks assignment diffs: retraction
//! and flip counts plus, for every emitted conflict, whether the named
//! constraint is genuinely falsified under the response's own stated
//! assignment at that point.

use thiserror::Error;

use crate::cnf::{evaluate_clause, Assignment, ClauseStatus, Formula};
use crate::trace::text::{scan_trace, ScanKind};
use crate::trace::TraceEvent;
use crate::verifier::{verdict, Verdict};

/// Phrases accepted as explicit backtracking narration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorConfig {
    pub backtracking_phrases: Vec<String>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            backtracking_phrases: vec![
                "Backtracking".into(),
                "Reverting state".into(),
                "Reverting assignment".into(),
            ],
        }
    }
}

/// Per-response detector output.
///
/// The string-heuristic fields are always computed; the state-machine
/// fields are absent when the scanner recognizes no trace structure at
/// all.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub has_conflict_token: bool,
    pub has_revision: bool,
    /// The backtracking-event indicator: conflict token plus explicit
    /// revision.
    pub backtracking_event: bool,
    /// Variables unassigned by backtracking narration.
    pub retractions: Option<usize>,
    /// Re-proposals that flip a previously stated value.
    pub flips: Option<usize>,
    pub conflicts_emitted: Option<usize>,
    /// Emitted conflicts whose named constraint is actually falsified
    /// under the stated assignment at that point.
    pub conflicts_genuine: Option<usize>,
    pub final_assignment: Option<Assignment>,
    /// The correctness indicator; absent when no total final assignment
    /// could be extracted.
    pub sat_correct: Option<bool>,
}

/// Corpus-level aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusMetrics {
    pub n: usize,
    /// Fraction of responses with a backtracking event.
    pub ber: f64,
    /// Genuine/emitted conflicts over the corpus; absent when nothing was
    /// emitted.
    pub conflict_precision: Option<f64>,
    /// Satisfying fraction among responses with a judgeable final
    /// assignment; absent when none have one.
    pub correctness_rate: Option<f64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyzeError {
    #[error("cannot aggregate an empty result list")]
    EmptyCorpus,
}

pub fn detect_backtracking(response: &str, f: &Formula) -> DetectionResult {
    detect_backtracking_with(response, f, &DetectorConfig::default())
}

pub fn detect_backtracking_with(
    response: &str,
    f: &Formula,
    config: &DetectorConfig,
) -> DetectionResult {
    let scan = scan_trace(response, f);

    // --- string heuristic ---------------------------------------------
    let lines: Vec<&str> = response.lines().collect();
    let token_line = lines
        .iter()
        .position(|l| l.contains("[CONFLICT]"))
        .map(|i| i + 1);
    let has_conflict_token = token_line.is_some();

    let decides: Vec<(usize, u32, bool)> = scan
        .events()
        .filter_map(|(line, event)| match event {
            TraceEvent::Decide { var, value, .. } => Some((line, *var, *value)),
            _ => None,
        })
        .collect();

    let has_revision = match token_line {
        None => false,
        Some(token) => {
            let phrase_after = lines.iter().enumerate().any(|(i, l)| {
                i + 1 >= token
                    && config
                        .backtracking_phrases
                        .iter()
                        .any(|p| l.contains(p.as_str()))
            });
            let flip_across_token = decides.iter().any(|&(before_line, var, before_value)| {
                before_line < token
                    && decides.iter().any(|&(after_line, v, after_value)| {
                        after_line > token && v == var && after_value == !before_value
                    })
            });
            phrase_after && flip_across_token
        }
    };
    let backtracking_event = has_conflict_token && has_revision;

    // --- state-machine fields ------------------------------------------
    let (retractions, flips, conflicts_emitted, conflicts_genuine) = if scan.recognized_any() {
        let mut state = Assignment::new(f.num_vars());
        let mut last_stated: Vec<Option<bool>> = vec![None; f.num_vars() as usize + 1];
        let mut retractions = 0usize;
        let mut flips = 0usize;
        let mut genuine = 0usize;
        for item in &scan.items {
            match &item.kind {
                ScanKind::Event(TraceEvent::Decide { var, value, .. }) => {
                    if let Some(previous) = last_stated.get(*var as usize).copied().flatten() {
                        if previous != *value {
                            flips += 1;
                        }
                    }
                    if (*var as usize) < last_stated.len() {
                        last_stated[*var as usize] = Some(*value);
                    }
                    if state.in_domain(*var) {
                        state.set(*var, *value);
                    }
                }
                ScanKind::Event(TraceEvent::Backtrack { reverted }) => {
                    retractions += reverted.len();
                    for &(var, _) in reverted {
                        if state.in_domain(var) && state.is_assigned(var) {
                            state.unset(var);
                        }
                    }
                }
                ScanKind::Event(TraceEvent::Conflict { violated_clause }) => {
                    let falsified = f
                        .clause(*violated_clause)
                        .map(|c| {
                            evaluate_clause(c, &state).expect("formula clauses stay in domain")
                                == ClauseStatus::Falsified
                        })
                        .unwrap_or(false);
                    if falsified {
                        genuine += 1;
                    }
                }
                _ => {}
            }
        }
        (
            Some(retractions),
            Some(flips),
            Some(scan.conflicts_emitted()),
            Some(genuine),
        )
    } else {
        (None, None, None, None)
    };

    let final_assignment = scan
        .events()
        .filter_map(|(_, e)| e.final_assignment())
        .last()
        .cloned();
    let sat_correct = final_assignment.as_ref().and_then(|a| match verdict(f, a) {
        Verdict::Satisfying => Some(true),
        Verdict::Unsatisfying => Some(false),
        Verdict::Incomplete => None,
    });

    DetectionResult {
        has_conflict_token,
        has_revision,
        backtracking_event,
        retractions,
        flips,
        conflicts_emitted,
        conflicts_genuine,
        final_assignment,
        sat_correct,
    }
}

/// Extract and judge the final assignment of a response; absent when the
/// response states none or leaves variables open.
pub fn check_correctness(response: &str, f: &Formula) -> Option<bool> {
    detect_backtracking(response, f).sat_correct
}

/// Fraction of emitted conflicts that are genuine, over the whole corpus;
/// absent when no conflicts were emitted.
pub fn conflict_precision(results: &[DetectionResult]) -> Option<f64> {
    let emitted: usize = results.iter().filter_map(|r| r.conflicts_emitted).sum();
    if emitted == 0 {
        return None;
    }
    let genuine: usize = results.iter().filter_map(|r| r.conflicts_genuine).sum();
    Some(genuine as f64 / emitted as f64)
}

/// Aggregate detector outputs into corpus metrics.
pub fn compute_ber(results: &[DetectionResult]) -> Result<CorpusMetrics, AnalyzeError> {
    if results.is_empty() {
        return Err(AnalyzeError::EmptyCorpus);
    }
    let n = results.len();
    let events = results.iter().filter(|r| r.backtracking_event).count();
    let judged = results.iter().filter(|r| r.sat_correct.is_some()).count();
    let correct = results
        .iter()
        .filter(|r| r.sat_correct == Some(true))
        .count();
    Ok(CorpusMetrics {
        n,
        ber: events as f64 / n as f64,
        conflict_precision: conflict_precision(results),
        correctness_rate: (judged > 0).then(|| correct as f64 / judged as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use crate::engine::{synthesize_trace, InjectionConfig};
    use crate::trace::serialize_trace;

    fn listing_formula() -> Formula {
        parse_dimacs("p cnf 3 2\n-3 1 0\n3 0\n").unwrap()
    }

    fn injected_text() -> (Formula, String) {
        let f = listing_formula();
        // deterministically find a seed whose injection produces a conflict
        for seed in 0..50u64 {
            let cfg = InjectionConfig {
                injection_probability: 1.0,
                seed,
                ..InjectionConfig::default()
            };
            let r = synthesize_trace(&f, &cfg).unwrap();
            if r.injected_conflicts > 0 {
                return (f, serialize_trace(&r.trace));
            }
        }
        panic!("no conflicting seed found");
    }

    #[test]
    fn conflicted_trace_counts_as_backtracking_event() {
        let (f, text) = injected_text();
        let result = detect_backtracking(&text, &f);
        assert!(result.has_conflict_token);
        assert!(result.has_revision);
        assert!(result.backtracking_event);
        assert!(result.flips.unwrap() >= 1);
        assert!(result.retractions.unwrap() >= 1);
        assert_eq!(result.conflicts_emitted, Some(1));
        assert_eq!(result.conflicts_genuine, Some(1));
        assert_eq!(result.sat_correct, Some(true));
    }

    #[test]
    fn monotonic_trace_is_not_an_event() {
        let f = listing_formula();
        let cfg = InjectionConfig {
            injection_probability: 0.0,
            ..InjectionConfig::default()
        };
        let text = serialize_trace(&synthesize_trace(&f, &cfg).unwrap().trace);
        let result = detect_backtracking(&text, &f);
        assert!(!result.has_conflict_token);
        assert!(!result.backtracking_event);
        assert_eq!(result.flips, Some(0));
        assert_eq!(result.conflicts_emitted, Some(0));
    }

    #[test]
    fn conflict_token_without_changed_assignment_is_not_an_event() {
        let f = listing_formula();
        let text = "assign x3 = False.\n[CONFLICT] Constraint violation detected.\nBacktracking...\nassign x3 = False.\nFinal Assignment: {x1: True, x2: True, x3: False}\n";
        let result = detect_backtracking(text, &f);
        assert!(result.has_conflict_token);
        assert!(!result.has_revision);
        assert!(!result.backtracking_event);
    }

    #[test]
    fn conflict_token_without_phrase_is_not_an_event() {
        let f = listing_formula();
        let text = "assign x3 = False.\n[CONFLICT] hm.\nassign x3 = True.\n";
        let result = detect_backtracking(text, &f);
        assert!(result.has_conflict_token);
        assert!(!result.has_revision);
    }

    #[test]
    fn phrase_list_is_configurable() {
        let f = listing_formula();
        let text =
            "assign x3 = False.\n[CONFLICT] issue.\nUndoing that choice.\nassign x3 = True.\n";
        let default = detect_backtracking(text, &f);
        assert!(!default.has_revision);
        let custom = DetectorConfig {
            backtracking_phrases: vec!["Undoing".into()],
        };
        let result = detect_backtracking_with(text, &f, &custom);
        assert!(result.has_revision);
        assert!(result.backtracking_event);
    }

    #[test]
    fn pure_prose_has_no_state_machine_fields() {
        let f = listing_formula();
        let result = detect_backtracking("I believe the answer is yes.\n", &f);
        assert_eq!(result.retractions, None);
        assert_eq!(result.flips, None);
        assert_eq!(result.conflicts_emitted, None);
        assert_eq!(result.sat_correct, None);
    }

    #[test]
    fn hallucinated_conflict_is_not_genuine() {
        let f = listing_formula();
        // constraint 1 is satisfied under the stated assignment
        let text = "assign x3 = True.\n- Constraint 1 violated.\n[CONFLICT] Constraint violation detected.\nBacktracking...\nReverting assignment x3 = True.\nassign x3 = False.\n";
        let result = detect_backtracking(text, &f);
        assert_eq!(result.conflicts_emitted, Some(1));
        assert_eq!(result.conflicts_genuine, Some(0));
        assert_eq!(conflict_precision(&[result]), Some(0.0));
    }

    #[test]
    fn correctness_extracts_inline_final_assignment() {
        let f = listing_formula();
        let text = "thinking...\nFinal Assignment: {x1: True, x2: False, x3: True}\n";
        assert_eq!(check_correctness(text, &f), Some(true));
        let text = "Final Assignment: {x1: False, x2: False, x3: False}\n";
        assert_eq!(check_correctness(text, &f), Some(false));
        assert_eq!(check_correctness("no answer here\n", &f), None);
        let partial = "Final Assignment: {x1: True}\n";
        assert_eq!(check_correctness(partial, &f), None);
    }

    #[test]
    fn ber_is_the_event_fraction() {
        let hit = DetectionResult {
            has_conflict_token: true,
            has_revision: true,
            backtracking_event: true,
            retractions: Some(1),
            flips: Some(1),
            conflicts_emitted: Some(1),
            conflicts_genuine: Some(1),
            final_assignment: None,
            sat_correct: None,
        };
        let miss = DetectionResult {
            has_conflict_token: false,
            has_revision: false,
            backtracking_event: false,
            retractions: Some(0),
            flips: Some(0),
            conflicts_emitted: Some(0),
            conflicts_genuine: Some(0),
            final_assignment: None,
            sat_correct: None,
        };

        let all_miss: Vec<_> = (0..40).map(|_| miss.clone()).collect();
        assert_eq!(compute_ber(&all_miss).unwrap().ber, 0.0);

        let mut two_hits = all_miss.clone();
        two_hits[3] = hit.clone();
        two_hits[17] = hit.clone();
        assert_eq!(compute_ber(&two_hits).unwrap().ber, 0.05);

        assert_eq!(compute_ber(&[hit]).unwrap().ber, 1.0);
        assert_eq!(compute_ber(&[]), Err(AnalyzeError::EmptyCorpus));
    }

    #[test]
    fn ber_is_permutation_invariant() {
        let hit = DetectionResult {
            has_conflict_token: true,
            has_revision: true,
            backtracking_event: true,
            retractions: None,
            flips: None,
            conflicts_emitted: None,
            conflicts_genuine: None,
            final_assignment: None,
            sat_correct: None,
        };
        let miss = DetectionResult {
            backtracking_event: false,
            has_conflict_token: false,
            has_revision: false,
            ..hit.clone()
        };
        let forward = vec![hit.clone(), miss.clone(), miss.clone(), hit.clone()];
        let backward: Vec<_> = forward.iter().rev().cloned().collect();
        assert_eq!(
            compute_ber(&forward).unwrap().ber,
            compute_ber(&backward).unwrap().ber
        );
    }

    #[test]
    fn precision_absent_without_emitted_conflicts() {
        let quiet = DetectionResult {
            has_conflict_token: false,
            has_revision: false,
            backtracking_event: false,
            retractions: Some(0),
            flips: Some(0),
            conflicts_emitted: Some(0),
            conflicts_genuine: Some(0),
            final_assignment: None,
            sat_correct: None,
        };
        assert_eq!(conflict_precision(&[quiet]), None);
    }
}
