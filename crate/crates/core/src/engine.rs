//! Symbolic trace synthesis.
//!
//! The witness-guided engine first computes a satisfying assignment, then
//! narrates a decision/check loop along it. Conflicts never arise on their
//! own on that path, so every conflict in the output comes from a seeded
//! injection: the engine flips one decision against the witness, keeps
//! deciding until a clause is genuinely falsified, emits the conflict, and
//! rolls the whole window back before re-proposing the witness value. The
//! alternative genuine-search mode runs plain chronological backtracking
//! and narrates whatever conflicts actually occur.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cnf::{
    brute_force_sat, detect_conflict, evaluate_clause, Assignment, ClauseStatus, CnfError, Formula,
    Literal,
};
use crate::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    /// Decide along a precomputed witness; conflicts only by injection.
    WitnessGuided,
    /// Chronological backtracking search; conflicts arise naturally.
    GenuineSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionConfig {
    /// Per-instance probability that any injection happens at all.
    pub injection_probability: f64,
    /// Upper bound on injection sites per trace.
    pub max_injections: u32,
    /// Upper bound on how many assignments one backtrack may revert.
    pub rollback_window: u32,
    pub mode: EngineMode,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig {
            injection_probability: 0.9,
            max_injections: 1,
            rollback_window: 3,
            mode: EngineMode::WitnessGuided,
            seed: 0,
        }
    }
}

impl InjectionConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !self.injection_probability.is_finite()
            || !(0.0..=1.0).contains(&self.injection_probability)
        {
            return Err(EngineError::InvalidConfig(format!(
                "injection probability {} outside [0, 1]",
                self.injection_probability
            )));
        }
        if self.injection_probability > 0.0 && self.max_injections == 0 {
            return Err(EngineError::InvalidConfig(
                "max_injections must be at least 1 when injection probability is positive".into(),
            ));
        }
        if self.rollback_window == 0 {
            return Err(EngineError::InvalidConfig(
                "rollback window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub trace: Trace,
    /// Conflicts manufactured by injection.
    pub injected_conflicts: u32,
    /// Conflicts that arose from genuine search.
    pub natural_conflicts: u32,
    /// Satisfying assignment the trace commits to.
    pub witness: Assignment,
    /// Injection sites that could not produce a bounded conflict and were
    /// skipped or never surfaced.
    pub abandoned_injections: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("formula is unsatisfiable")]
    Unsatisfiable,
    #[error("invalid injection config: {0}")]
    InvalidConfig(String),
    #[error("all variables are already assigned")]
    NothingToDecide,
    #[error("cannot revert unassigned variable x{var}")]
    RevertUnassigned { var: u32 },
    #[error(transparent)]
    Cnf(#[from] CnfError),
}

/// Lowest clause index whose literal on `var` matches `value`; the
/// narrated justification for deciding `var = value`.
fn supporting_clause(f: &Formula, var: u32, value: bool) -> Option<usize> {
    f.clauses()
        .iter()
        .position(|c| c.contains(Literal::new(var, value)))
        .map(|i| i + 1)
}

/// Next decision: lowest-index unassigned variable, witness value unless
/// `inject` flips it.
pub fn decide_next(
    f: &Formula,
    a: &Assignment,
    witness: &Assignment,
    inject: bool,
) -> Result<TraceEvent, EngineError> {
    let var = a.first_unassigned().ok_or(EngineError::NothingToDecide)?;
    let witness_value = witness.get(var).ok_or(CnfError::Unassigned { var })?;
    let value = witness_value ^ inject;
    Ok(TraceEvent::Decide {
        var,
        value,
        rationale_clause: supporting_clause(f, var, value),
    })
}

/// Check every clause under `a`: the verify event plus, when some clause
/// is falsified, a conflict event naming the lowest falsified index.
pub fn run_verify(
    f: &Formula,
    a: &Assignment,
) -> Result<(TraceEvent, Option<TraceEvent>), CnfError> {
    let mut statuses = Vec::with_capacity(f.num_clauses());
    let mut violated = None;
    for (i, clause) in f.clauses().iter().enumerate() {
        let status = evaluate_clause(clause, a)?;
        if status == ClauseStatus::Falsified && violated.is_none() {
            violated = Some(i + 1);
        }
        statuses.push((i + 1, status));
    }
    let conflict = violated.map(|violated_clause| TraceEvent::Conflict { violated_clause });
    Ok((TraceEvent::Verify { statuses }, conflict))
}

/// Revert `delta` (most recent decision first), recording old values.
pub fn backtrack(a: &mut Assignment, delta: &[u32]) -> Result<TraceEvent, EngineError> {
    let mut reverted = Vec::with_capacity(delta.len());
    for &var in delta {
        match a.get(var) {
            Some(old) => reverted.push((var, old)),
            None => return Err(EngineError::RevertUnassigned { var }),
        }
    }
    for &(var, _) in &reverted {
        a.unset(var);
    }
    Ok(TraceEvent::Backtrack { reverted })
}

/// How a flip of `var` against the witness plays out if decisions continue
/// along the witness in lowest-index order.
enum FlipOutcome {
    /// A clause falsifies after this many assignments get reverted
    /// (flipped variable included).
    Conflict { revert_len: u32 },
    /// The flipped value also completes into a satisfying assignment.
    NeverConflicts,
}

fn flip_outcome(f: &Formula, a: &Assignment, witness: &Assignment, var: u32) -> FlipOutcome {
    let mut sim = a.clone();
    sim.set(var, !witness.get(var).expect("witness is total"));
    let mut depth = 1u32;
    loop {
        if detect_conflict(f, &sim)
            .expect("simulation stays in domain")
            .is_some()
        {
            return FlipOutcome::Conflict { revert_len: depth };
        }
        match sim.first_unassigned() {
            Some(next) => {
                sim.set(next, witness.get(next).expect("witness is total"));
                depth += 1;
            }
            None => return FlipOutcome::NeverConflicts,
        }
    }
}

/// Synthesize one reasoning trace for a satisfiable formula.
///
/// Deterministic in `(f, cfg)`. The final assignment always satisfies `f`;
/// every emitted conflict names a clause genuinely falsified at that point,
/// and is followed by a backtrack through the injected variable and a
/// flipped re-proposal.
pub fn synthesize_trace(
    f: &Formula,
    cfg: &InjectionConfig,
) -> Result<SynthesisResult, EngineError> {
    cfg.validate()?;
    match cfg.mode {
        EngineMode::WitnessGuided => synthesize_witness_guided(f, cfg),
        EngineMode::GenuineSearch => synthesize_genuine_search(f, cfg),
    }
}

fn synthesize_witness_guided(
    f: &Formula,
    cfg: &InjectionConfig,
) -> Result<SynthesisResult, EngineError> {
    let witness = brute_force_sat(f)?.ok_or(EngineError::Unsatisfiable)?;
    let n = f.num_vars();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sites: Vec<u32> = Vec::new();
    if cfg.injection_probability > 0.0 && rng.gen_bool(cfg.injection_probability) {
        let count = cfg.max_injections.min(n) as usize;
        sites = rand::seq::index::sample(&mut rng, n as usize, count)
            .iter()
            .map(|i| i as u32)
            .collect();
        sites.sort_unstable();
    }

    let mut state = Assignment::new(n);
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut decision_stack: Vec<u32> = Vec::new();
    let mut scheduled_idx = 0u32;
    let mut injected_conflicts = 0u32;
    let mut abandoned = 0u32;
    // variable flipped by the active injection, when one is pending
    let mut active_flip: Option<u32> = None;
    let mut pending_repair: Option<u32> = None;

    while !state.is_total() {
        let event = if let Some(var) = pending_repair.take() {
            // repair re-proposal: witness value, narrated without rationale
            TraceEvent::Decide {
                var,
                value: witness.get(var).expect("witness is total"),
                rationale_clause: None,
            }
        } else {
            let wants_injection =
                active_flip.is_none() && sites.binary_search(&scheduled_idx).is_ok();
            let var = state.first_unassigned().expect("loop guard");
            let inject = wants_injection
                && match flip_outcome(f, &state, &witness, var) {
                    FlipOutcome::Conflict { revert_len } => {
                        if revert_len <= cfg.rollback_window {
                            true
                        } else {
                            // conflict would need a rollback beyond the
                            // window; skip the site
                            abandoned += 1;
                            false
                        }
                    }
                    // flip anyway: the alternative value also completes,
                    // so the trace stays conflict-free
                    FlipOutcome::NeverConflicts => true,
                };
            scheduled_idx += 1;
            if inject {
                active_flip = Some(var);
            }
            decide_next(f, &state, &witness, inject)?
        };

        if let TraceEvent::Decide { var, value, .. } = event {
            state.set(var, value);
            decision_stack.push(var);
        }
        events.push(event);

        let (verify, conflict) = run_verify(f, &state)?;
        events.push(verify);
        if let Some(conflict) = conflict {
            events.push(conflict);
            let flipped = active_flip
                .take()
                .expect("witness-guided decisions cannot falsify a clause without an active flip");
            let mut delta = Vec::new();
            while let Some(var) = decision_stack.pop() {
                delta.push(var);
                if var == flipped {
                    break;
                }
            }
            events.push(backtrack(&mut state, &delta)?);
            injected_conflicts += 1;
            pending_repair = Some(flipped);
        }
    }

    if active_flip.take().is_some() {
        // the flip completed into a satisfying assignment
        abandoned += 1;
    }

    events.push(TraceEvent::Final {
        assignment: state.clone(),
    });
    debug_assert_eq!(crate::cnf::evaluate_formula(f, &state), Ok(true));

    Ok(SynthesisResult {
        trace: Trace::new("", f.clone(), events),
        injected_conflicts,
        natural_conflicts: 0,
        witness,
        abandoned_injections: abandoned,
    })
}

fn synthesize_genuine_search(
    f: &Formula,
    cfg: &InjectionConfig,
) -> Result<SynthesisResult, EngineError> {
    let n = f.num_vars();
    let mut state = Assignment::new(n);
    let mut events: Vec<TraceEvent> = Vec::new();
    // (variable, second value already tried)
    let mut stack: Vec<(u32, bool)> = Vec::new();
    let mut natural_conflicts = 0u32;

    let _ = cfg; // injection settings do not apply to genuine search

    while !state.is_total() {
        let var = state.first_unassigned().expect("loop guard");
        state.set(var, true);
        stack.push((var, false));
        events.push(TraceEvent::Decide {
            var,
            value: true,
            rationale_clause: supporting_clause(f, var, true),
        });

        loop {
            let (verify, conflict) = run_verify(f, &state)?;
            events.push(verify);
            let Some(conflict) = conflict else { break };
            events.push(conflict);
            natural_conflicts += 1;

            let mut delta = Vec::new();
            let mut flip_target = None;
            while let Some((v, exhausted)) = stack.pop() {
                delta.push(v);
                if !exhausted {
                    flip_target = Some(v);
                    break;
                }
            }
            events.push(backtrack(&mut state, &delta)?);
            let Some(var) = flip_target else {
                return Err(EngineError::Unsatisfiable);
            };
            state.set(var, false);
            stack.push((var, true));
            events.push(TraceEvent::Decide {
                var,
                value: false,
                rationale_clause: None,
            });
        }
    }

    events.push(TraceEvent::Final {
        assignment: state.clone(),
    });
    Ok(SynthesisResult {
        trace: Trace::new("", f.clone(), events),
        injected_conflicts: 0,
        natural_conflicts,
        witness: state,
        abandoned_injections: 0,
    })
}
