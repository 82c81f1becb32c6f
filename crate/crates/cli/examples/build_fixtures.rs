//! Regenerates the committed `fixtures/` tree from fixed seeds.
//!
//! Run from the repository root:
//!
//! ```text
//! cargo run -p sattrace-cli --example build_fixtures
//! ```
//!
//! Layout produced:
//! - `fixtures/ber/instances/` — 40 DIMACS instances plus manifest
//! - `fixtures/ber/responses_monotonic.jsonl` — 40 conflict-free responses
//! - `fixtures/ber/responses_backtracking.jsonl` — the same 40 with exactly
//!   two responses containing a genuine conflict-and-repair episode
//! - `fixtures/corrupted/instances/` — one instance
//! - `fixtures/corrupted/response_hallucinated.jsonl` — one response whose
//!   conflict narration blames a constraint that is actually satisfied

use std::fs;
use std::path::Path;

use sattrace_cli::config::RunConfig;
use sattrace_cli::pipeline::{self, ResponseRecord};
use sattrace_core::cnf::{parse_dimacs, ClauseStatus};
use sattrace_core::engine::{synthesize_trace, InjectionConfig};
use sattrace_core::trace::{serialize_trace, TraceEvent};

const FIXTURE_SEED: u64 = 11;
const RESPONSES: usize = 40;
const BACKTRACKING_RESPONSES: usize = 2;

fn write_jsonl(path: &Path, records: &[ResponseRecord]) {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).unwrap());
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

fn main() {
    let repo_root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let ber_dir = repo_root.join("fixtures/ber");
    let corrupted_dir = repo_root.join("fixtures/corrupted");
    fs::create_dir_all(&ber_dir).unwrap();
    fs::create_dir_all(&corrupted_dir).unwrap();

    // --- 40 instances ----------------------------------------------------
    let config = RunConfig {
        count: RESPONSES,
        var_min: 5,
        var_max: 8,
        seed: FIXTURE_SEED,
        out_dir: ber_dir.clone(),
        ..RunConfig::default()
    };
    pipeline::generate(&config).unwrap();
    // the fixture tree keeps only instances + responses
    let _ = fs::remove_dir_all(ber_dir.join("reports"));

    let manifest: Vec<pipeline::ManifestRecord> =
        fs::read_to_string(ber_dir.join("instances/manifest.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();

    let monotonic_cfg = |seed: u64| InjectionConfig {
        injection_probability: 0.0,
        seed,
        ..InjectionConfig::default()
    };
    let forced_cfg = |seed: u64| InjectionConfig {
        injection_probability: 1.0,
        seed,
        ..InjectionConfig::default()
    };

    let mut monotonic = Vec::with_capacity(RESPONSES);
    let mut backtracking = Vec::with_capacity(RESPONSES);
    let mut hits = 0usize;
    for record in &manifest {
        let dimacs = fs::read_to_string(ber_dir.join("instances").join(&record.file)).unwrap();
        let formula = parse_dimacs(&dimacs).unwrap();
        let quiet = synthesize_trace(&formula, &monotonic_cfg(record.seed)).unwrap();
        assert_eq!(quiet.trace.conflict_count(), 0);
        let quiet_text = serialize_trace(&quiet.trace);
        monotonic.push(ResponseRecord {
            id: record.id.clone(),
            response: quiet_text.clone(),
        });

        // first two instances whose forced injection realizes a conflict
        let mut chosen = quiet_text;
        if hits < BACKTRACKING_RESPONSES {
            let forced = synthesize_trace(&formula, &forced_cfg(record.seed)).unwrap();
            if forced.injected_conflicts > 0 {
                chosen = serialize_trace(&forced.trace);
                hits += 1;
            }
        }
        backtracking.push(ResponseRecord {
            id: record.id.clone(),
            response: chosen,
        });
    }
    assert_eq!(hits, BACKTRACKING_RESPONSES, "not enough conflicting draws");
    write_jsonl(&ber_dir.join("responses_monotonic.jsonl"), &monotonic);
    write_jsonl(&ber_dir.join("responses_backtracking.jsonl"), &backtracking);

    // --- hallucinated-conflict fixture ------------------------------------
    let corrupted_config = RunConfig {
        count: 1,
        var_min: 5,
        var_max: 6,
        seed: FIXTURE_SEED ^ 0xc0ffee,
        out_dir: corrupted_dir.clone(),
        ..RunConfig::default()
    };
    pipeline::generate(&corrupted_config).unwrap();
    let _ = fs::remove_dir_all(corrupted_dir.join("reports"));
    let manifest: Vec<pipeline::ManifestRecord> =
        fs::read_to_string(corrupted_dir.join("instances/manifest.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
    let record = &manifest[0];
    let dimacs = fs::read_to_string(corrupted_dir.join("instances").join(&record.file)).unwrap();
    let formula = parse_dimacs(&dimacs).unwrap();
    let clean = synthesize_trace(&formula, &monotonic_cfg(record.seed)).unwrap();
    let corrupted = hallucinate_conflict(clean.trace.events, formula.num_vars());
    let trace = sattrace_core::Trace::new(record.id.clone(), formula, corrupted);
    write_jsonl(
        &corrupted_dir.join("response_hallucinated.jsonl"),
        &[ResponseRecord {
            id: record.id.clone(),
            response: serialize_trace(&trace),
        }],
    );

    println!(
        "fixtures written under {}",
        repo_root.join("fixtures").display()
    );
}

/// Splice a fake conflict episode after the first decision: the check lies
/// that a satisfied constraint is violated, a conflict blames it, the
/// decision is reverted and then re-proposed unchanged. Replay stays
/// consistent; only the narrated statuses are false.
fn hallucinate_conflict(events: Vec<TraceEvent>, num_vars: u32) -> Vec<TraceEvent> {
    let TraceEvent::Decide { var, value, .. } = events[0] else {
        panic!("expected a leading decision");
    };
    let TraceEvent::Verify { statuses } = &events[1] else {
        panic!("expected a check after the decision");
    };
    let lied_clause = statuses
        .iter()
        .find(|(_, s)| *s == ClauseStatus::Satisfied)
        .map(|(i, _)| *i)
        .expect("first decision satisfies its rationale constraint");
    let mut lying_statuses = statuses.clone();
    for entry in &mut lying_statuses {
        if entry.0 == lied_clause {
            entry.1 = ClauseStatus::Falsified;
        }
    }

    let mut out = vec![
        events[0].clone(),
        TraceEvent::Verify {
            statuses: lying_statuses,
        },
        TraceEvent::Conflict {
            violated_clause: lied_clause,
        },
        TraceEvent::Backtrack {
            reverted: vec![(var, value)],
        },
        TraceEvent::Decide {
            var,
            value,
            rationale_clause: None,
        },
        events[1].clone(),
    ];
    out.extend(events.into_iter().skip(2));
    debug_assert!(num_vars >= var);
    out
}
