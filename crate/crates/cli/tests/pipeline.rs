//! Stage-level pipeline behavior: file layouts, id bookkeeping, error
//! paths, and exit-code mapping.

use std::fs;
use std::path::Path;

use tempfile::TempDir;

use sattrace_cli::config::RunConfig;
use sattrace_cli::error::CliError;
use sattrace_cli::pipeline::{self, AnalyzeArgs};
use sattrace_core::dataset::DatasetRecord;

fn small_config(root: &Path) -> RunConfig {
    RunConfig {
        count: 12,
        var_min: 5,
        var_max: 7,
        seed: 5,
        out_dir: root.join("run"),
        ..RunConfig::default()
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("record parses"))
        .collect()
}

#[test]
fn generate_writes_instances_and_manifest() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let summary = pipeline::generate(&config).unwrap();
    assert_eq!(summary.count, 12);

    let layout = pipeline::Layout::new(&config.out_dir);
    let manifest: Vec<pipeline::ManifestRecord> = read_jsonl(&layout.manifest());
    assert_eq!(manifest.len(), 12);
    for record in &manifest {
        assert!(layout.instances_dir().join(&record.file).exists());
        assert!(record.n >= 5 && record.n <= 7);
        assert_eq!(record.k, 3);
    }
    assert_eq!(manifest[0].id, "inst-0000");
    assert_eq!(manifest[11].id, "inst-0011");
}

#[test]
fn invalid_config_fails_before_writing_anything() {
    let dir = TempDir::new().unwrap();
    let config = RunConfig {
        clause_width: 9,
        var_min: 5,
        var_max: 7,
        out_dir: dir.path().join("run"),
        ..RunConfig::default()
    };
    let err = pipeline::generate(&config).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn synthesize_without_instances_is_an_explicit_error() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let err = pipeline::synthesize(&config).unwrap_err();
    assert!(matches!(err, CliError::NoInstances(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn export_produces_matched_files_with_equal_id_sets() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    pipeline::generate(&config).unwrap();
    pipeline::synthesize(&config).unwrap();
    let summary = pipeline::export(&config).unwrap();
    assert_eq!(summary.records_per_condition, 12);
    assert_eq!(summary.train + summary.heldout, 12);

    let dataset = pipeline::Layout::new(&config.out_dir).dataset_dir();
    let treatment: Vec<DatasetRecord> = read_jsonl(&dataset.join("treatment.jsonl"));
    let control: Vec<DatasetRecord> = read_jsonl(&dataset.join("control.jsonl"));
    let t_ids: Vec<&str> = treatment.iter().map(|r| r.id.as_str()).collect();
    let c_ids: Vec<&str> = control.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(t_ids, c_ids);
    for (t, c) in treatment.iter().zip(&control) {
        assert_eq!(t.prompt, c.prompt);
        assert_eq!(t.dimacs, c.dimacs);
        assert!(t.verified && c.verified);
        assert_eq!(c.conflict_count, 0);
        assert!(c.token_count <= t.token_count);
    }

    let heldout: Vec<DatasetRecord> = read_jsonl(&dataset.join("heldout_treatment.jsonl"));
    assert_eq!(heldout.len(), summary.heldout);

    // every exported completion re-parses under the strict grammar and
    // re-verifies against its instance
    for record in treatment.iter().chain(&control) {
        let formula = sattrace_core::cnf::parse_dimacs(&record.dimacs).unwrap();
        let trace = sattrace_core::trace::parse_trace(
            &record.completion,
            &formula,
            sattrace_core::trace::ParseMode::Strict,
        )
        .unwrap_or_else(|e| panic!("{}: {e}", record.id));
        let final_a = trace.final_assignment().unwrap();
        assert_eq!(
            sattrace_core::verifier::verify_final(&formula, final_a),
            Ok(true)
        );
    }
}

#[test]
fn analyzing_heldout_treatment_traces_scores_perfectly() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    pipeline::generate(&config).unwrap();
    pipeline::synthesize(&config).unwrap();
    pipeline::export(&config).unwrap();

    let layout = pipeline::Layout::new(&config.out_dir);
    let summary = pipeline::analyze(&AnalyzeArgs {
        responses: layout.dataset_dir().join("heldout_treatment.jsonl"),
        instances_dir: layout.instances_dir(),
        out_dir: config.out_dir.clone(),
        strict: true,
    })
    .unwrap();
    assert_eq!(summary.metrics.correctness_rate, Some(1.0));
    assert!(layout.analysis_dir().join("detections.jsonl").exists());
    assert!(layout.analysis_dir().join("metrics.txt").exists());
}

#[test]
fn analyze_rejects_unknown_response_ids() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    pipeline::generate(&config).unwrap();

    let responses = dir.path().join("responses.jsonl");
    fs::write(
        &responses,
        "{\"id\": \"inst-0000\", \"response\": \"assign x1 = True.\"}\n\
         {\"id\": \"mystery\", \"response\": \"hello\"}\n\
         {\"id\": \"other\", \"response\": \"hi\"}\n",
    )
    .unwrap();
    let err = pipeline::analyze(&AnalyzeArgs {
        responses,
        instances_dir: pipeline::Layout::new(&config.out_dir).instances_dir(),
        out_dir: config.out_dir.clone(),
        strict: false,
    })
    .unwrap_err();
    match err {
        CliError::UnknownIds(ids) => assert_eq!(ids, vec!["mystery", "other"]),
        other => panic!("expected UnknownIds, got {other}"),
    }
}

#[test]
fn strict_analysis_rejects_free_prose() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    pipeline::generate(&config).unwrap();

    let responses = dir.path().join("responses.jsonl");
    fs::write(
        &responses,
        "{\"id\": \"inst-0000\", \"response\": \"I think the answer is x1 = True.\"}\n",
    )
    .unwrap();
    let args = AnalyzeArgs {
        responses,
        instances_dir: pipeline::Layout::new(&config.out_dir).instances_dir(),
        out_dir: config.out_dir.clone(),
        strict: true,
    };
    let err = pipeline::analyze(&args).unwrap_err();
    assert!(matches!(err, CliError::Trace { .. }));

    // the same file passes in lenient mode
    let lenient = AnalyzeArgs {
        strict: false,
        ..args
    };
    let summary = pipeline::analyze(&lenient).unwrap();
    assert_eq!(summary.metrics.ber, 0.0);
}

#[test]
fn exit_codes_map_by_error_class() {
    assert_eq!(CliError::Config("x".into()).exit_code(), 1);
    assert_eq!(
        CliError::Io {
            path: "p".into(),
            source: std::io::Error::other("boom"),
        }
        .exit_code(),
        2
    );
    assert_eq!(
        CliError::PassRateFloor {
            pass_rate: 0.9,
            floor: 1.0,
        }
        .exit_code(),
        3
    );
}

#[test]
fn reports_use_flat_key_value_lines() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    pipeline::generate(&config).unwrap();
    pipeline::synthesize(&config).unwrap();

    let report = fs::read_to_string(
        pipeline::Layout::new(&config.out_dir)
            .reports_dir()
            .join("synthesis.txt"),
    )
    .unwrap();
    for line in report.lines() {
        assert!(line.contains('='), "flat key=value expected: {line}");
    }
    assert!(report.contains("pass_rate=1.000000"));
    assert!(report.contains("reference_pass_rate=0.992000"));
}
