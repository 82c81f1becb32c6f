//! Pipeline stages: generate → synthesize → export → analyze, plus corpus
//! stats. Each stage reads the previous stage's files, writes its own
//! atomically (temp file + rename), and returns the summary it printed.
//!
//! Seed discipline: instance `i` derives its root as `seed ⊕ i`; the
//! parameter draw and the engine schedule each apply a fixed stream tag on
//! top so the streams stay disjoint. One root seed reproduces the whole
//! corpus byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sattrace_core::analyze::{compute_ber, detect_backtracking, CorpusMetrics, DetectionResult};
use sattrace_core::cnf::{generate_instance, parse_dimacs, serialize_dimacs, Formula};
use sattrace_core::dataset::{Condition, DatasetRecord};
use sattrace_core::engine::synthesize_trace;
use sattrace_core::linearize::build_matched_pair;
use sattrace_core::trace::{parse_trace, render_assignment, ParseMode};
use sattrace_core::verifier::filter_golden;

use crate::config::RunConfig;
use crate::error::CliError;

/// Stream tag for per-instance parameter draws (variable count).
pub const PARAM_STREAM_TAG: u64 = 0x9e37_79b9_7f4a_7c15;
/// Stream tag for the engine's injection schedule.
pub const ENGINE_STREAM_TAG: u64 = 0xd1b5_4a32_d192_ed03;

/// Comparison baseline reported next to the measured pass rate: the
/// verification pass rate of an LLM-teacher pipeline over the same corpus
/// size (496/500).
pub const REFERENCE_PASS_RATE: f64 = 0.992;

// ---------------------------------------------------------------------------
// file layout + record schemas
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct Layout {
    pub out_dir: PathBuf,
}

impl Layout {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Layout {
            out_dir: out_dir.into(),
        }
    }

    pub fn instances_dir(&self) -> PathBuf {
        self.out_dir.join("instances")
    }

    pub fn manifest(&self) -> PathBuf {
        self.instances_dir().join("manifest.jsonl")
    }

    pub fn golden_dir(&self) -> PathBuf {
        self.out_dir.join("golden")
    }

    pub fn traces(&self) -> PathBuf {
        self.golden_dir().join("traces.jsonl")
    }

    pub fn rejected(&self) -> PathBuf {
        self.golden_dir().join("rejected.jsonl")
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("dataset")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.out_dir.join("analysis")
    }
}

/// One line of `instances/manifest.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub file: String,
    pub n: u32,
    pub m: usize,
    pub k: u32,
    pub seed: u64,
}

/// One line of `golden/traces.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub trace: String,
    pub injected_conflicts: u32,
    pub natural_conflicts: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub id: String,
    pub reason: String,
}

/// One line of a responses file. `completion` and `trace` are accepted as
/// aliases so exported datasets and golden traces analyze directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    #[serde(alias = "completion", alias = "trace")]
    pub response: String,
}

/// One line of `analysis/detections.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: String,
    pub has_conflict_token: bool,
    pub has_revision: bool,
    pub backtracking_event: bool,
    pub retractions: Option<usize>,
    pub flips: Option<usize>,
    pub conflicts_emitted: Option<usize>,
    pub conflicts_genuine: Option<usize>,
    pub final_assignment: Option<String>,
    pub sat_correct: Option<bool>,
}

impl DetectionRecord {
    fn new(id: String, result: &DetectionResult) -> Self {
        DetectionRecord {
            id,
            has_conflict_token: result.has_conflict_token,
            has_revision: result.has_revision,
            backtracking_event: result.backtracking_event,
            retractions: result.retractions,
            flips: result.flips,
            conflicts_emitted: result.conflicts_emitted,
            conflicts_genuine: result.conflicts_genuine,
            final_assignment: result.final_assignment.as_ref().map(render_assignment),
            sat_correct: result.sat_correct,
        }
    }
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    fs::write(&tmp, contents).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))?;
    Ok(())
}

fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record schemas serialize"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| CliError::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

fn fmt_rate(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.6}"),
        None => "none".to_string(),
    }
}

/// Flat `key=value` report document; keys keep insertion order.
#[derive(Debug)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report { lines: Vec::new() }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.lines {
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }
}

impl Default for Report {
    fn default() -> Self {
        Self::new()
    }
}

fn read_manifest(layout: &Layout) -> Result<Vec<ManifestRecord>, CliError> {
    let path = layout.manifest();
    if !path.exists() {
        return Err(CliError::NoInstances(layout.instances_dir()));
    }
    let records: Vec<ManifestRecord> = read_jsonl(&path)?;
    if records.is_empty() {
        return Err(CliError::NoInstances(layout.instances_dir()));
    }
    Ok(records)
}

fn load_formula(instances_dir: &Path, record: &ManifestRecord) -> Result<Formula, CliError> {
    let path = instances_dir.join(&record.file);
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    Ok(parse_dimacs(&text)?)
}

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct GenerateSummary {
    pub count: usize,
    pub report: Report,
}

pub fn generate(config: &RunConfig) -> Result<GenerateSummary, CliError> {
    config.validate()?;
    let layout = Layout::new(&config.out_dir);
    let mut manifest = Vec::with_capacity(config.count);

    for index in 0..config.count {
        let id = RunConfig::instance_id(index);
        let instance_seed = config.instance_seed(index);
        let mut param_rng = ChaCha8Rng::seed_from_u64(instance_seed ^ PARAM_STREAM_TAG);
        let n = param_rng.gen_range(config.var_min..=config.var_max);
        let m = ((config.clause_ratio * f64::from(n)).round() as usize).max(1);
        let formula = generate_instance(n, m, config.clause_width, instance_seed)?;
        let file = format!("{id}.cnf");
        write_atomic(
            &layout.instances_dir().join(&file),
            &serialize_dimacs(&formula),
        )?;
        manifest.push(ManifestRecord {
            id,
            file,
            n,
            m,
            k: config.clause_width,
            seed: instance_seed,
        });
    }

    write_atomic(&layout.manifest(), &to_jsonl(&manifest))?;

    let mut report = Report::new();
    report.push("instances", config.count);
    report.push("var_min", config.var_min);
    report.push("var_max", config.var_max);
    report.push("clause_width", config.clause_width);
    report.push("clause_ratio", format!("{:.6}", config.clause_ratio));
    report.push("seed", config.seed);
    write_atomic(&layout.reports_dir().join("generate.txt"), &report.render())?;
    Ok(GenerateSummary {
        count: config.count,
        report,
    })
}

#[derive(Debug)]
pub struct SynthesizeSummary {
    pub golden: usize,
    pub rejected: usize,
    pub pass_rate: f64,
    pub injected_traces: usize,
    pub injected_trace_fraction: f64,
    pub report: Report,
}

pub fn synthesize(config: &RunConfig) -> Result<SynthesizeSummary, CliError> {
    config.validate()?;
    let layout = Layout::new(&config.out_dir);
    let manifest = read_manifest(&layout)?;

    let mut traces = Vec::with_capacity(manifest.len());
    let mut stats: BTreeMap<String, (u32, u32, u32)> = BTreeMap::new();
    for record in &manifest {
        let formula = load_formula(&layout.instances_dir(), record)?;
        let cfg = config.injection_config(record.seed);
        let mut result = synthesize_trace(&formula, &cfg)?;
        result.trace.instance_id = record.id.clone();
        stats.insert(
            record.id.clone(),
            (
                result.injected_conflicts,
                result.natural_conflicts,
                result.abandoned_injections,
            ),
        );
        traces.push(result.trace);
    }

    let outcome = filter_golden(traces);
    let total = outcome.golden.len() + outcome.rejected.len();
    let pass_rate = outcome.pass_rate.unwrap_or(0.0);

    let golden_records: Vec<TraceRecord> = outcome
        .golden
        .iter()
        .map(|trace| {
            let (injected, natural, _) = stats[&trace.instance_id];
            TraceRecord {
                id: trace.instance_id.clone(),
                trace: sattrace_core::trace::serialize_trace(trace),
                injected_conflicts: injected,
                natural_conflicts: natural,
            }
        })
        .collect();
    let rejected_records: Vec<RejectedRecord> = outcome
        .rejected
        .iter()
        .map(|(trace, reason)| RejectedRecord {
            id: trace.instance_id.clone(),
            reason: reason.as_str().to_string(),
        })
        .collect();

    write_atomic(&layout.traces(), &to_jsonl(&golden_records))?;
    write_atomic(&layout.rejected(), &to_jsonl(&rejected_records))?;

    let injected_traces = golden_records
        .iter()
        .filter(|r| r.injected_conflicts > 0)
        .count();
    let injected_trace_fraction = injected_traces as f64 / total.max(1) as f64;
    let natural_total: u32 = stats.values().map(|(_, n, _)| *n).sum();
    let abandoned_total: u32 = stats.values().map(|(_, _, a)| *a).sum();

    let mut report = Report::new();
    report.push("instances", total);
    report.push("golden", outcome.golden.len());
    report.push("rejected", outcome.rejected.len());
    report.push("pass_rate", format!("{pass_rate:.6}"));
    report.push("reference_pass_rate", format!("{REFERENCE_PASS_RATE:.6}"));
    report.push("injected_traces", injected_traces);
    report.push(
        "injected_trace_fraction",
        format!("{injected_trace_fraction:.6}"),
    );
    report.push("natural_conflicts", natural_total);
    report.push("abandoned_injections", abandoned_total);
    write_atomic(
        &layout.reports_dir().join("synthesis.txt"),
        &report.render(),
    )?;

    if pass_rate < config.pass_rate_floor {
        return Err(CliError::PassRateFloor {
            pass_rate,
            floor: config.pass_rate_floor,
        });
    }

    Ok(SynthesizeSummary {
        golden: outcome.golden.len(),
        rejected: outcome.rejected.len(),
        pass_rate,
        injected_traces,
        injected_trace_fraction,
        report,
    })
}

#[derive(Debug)]
pub struct ExportSummary {
    pub records_per_condition: usize,
    pub train: usize,
    pub heldout: usize,
    pub report: Report,
}

pub fn export(config: &RunConfig) -> Result<ExportSummary, CliError> {
    config.validate()?;
    let layout = Layout::new(&config.out_dir);
    let manifest = read_manifest(&layout)?;
    let formulas: BTreeMap<&str, &ManifestRecord> =
        manifest.iter().map(|r| (r.id.as_str(), r)).collect();

    let traces_path = layout.traces();
    if !traces_path.exists() {
        return Err(CliError::NoGoldenTraces(layout.golden_dir()));
    }
    let trace_records: Vec<TraceRecord> = read_jsonl(&traces_path)?;
    if trace_records.is_empty() {
        return Err(CliError::NoGoldenTraces(layout.golden_dir()));
    }

    let mut treatment = Vec::with_capacity(trace_records.len());
    let mut control = Vec::with_capacity(trace_records.len());
    for record in &trace_records {
        let manifest_record = formulas
            .get(record.id.as_str())
            .ok_or_else(|| CliError::UnknownIds(vec![record.id.clone()]))?;
        let formula = load_formula(&layout.instances_dir(), manifest_record)?;
        // exported completions must re-parse under the strict grammar
        let mut trace =
            parse_trace(&record.trace, &formula, ParseMode::Strict).map_err(|source| {
                CliError::Trace {
                    id: record.id.clone(),
                    source,
                }
            })?;
        trace.instance_id = record.id.clone();
        let (t_rec, c_rec) = build_matched_pair(&trace).map_err(|source| CliError::Linearize {
            id: record.id.clone(),
            source,
        })?;
        treatment.push(t_rec);
        control.push(c_rec);
    }

    let train_len =
        ((config.train_fraction * treatment.len() as f64).round() as usize).min(treatment.len());
    let dataset = layout.dataset_dir();
    write_atomic(&dataset.join("treatment.jsonl"), &to_jsonl(&treatment))?;
    write_atomic(&dataset.join("control.jsonl"), &to_jsonl(&control))?;
    write_atomic(
        &dataset.join("heldout_treatment.jsonl"),
        &to_jsonl(&treatment[train_len..]),
    )?;
    write_atomic(
        &dataset.join("heldout_control.jsonl"),
        &to_jsonl(&control[train_len..]),
    )?;

    let treatment_tokens: usize = treatment.iter().map(|r| r.token_count).sum();
    let control_tokens: usize = control.iter().map(|r| r.token_count).sum();
    let mut report = Report::new();
    report.push("records_per_condition", treatment.len());
    report.push("train_records", train_len);
    report.push("heldout_records", treatment.len() - train_len);
    report.push("treatment_tokens", treatment_tokens);
    report.push("control_tokens", control_tokens);
    report.push(
        "token_ratio_treatment_over_control",
        format!(
            "{:.6}",
            treatment_tokens as f64 / control_tokens.max(1) as f64
        ),
    );
    write_atomic(&layout.reports_dir().join("export.txt"), &report.render())?;

    Ok(ExportSummary {
        records_per_condition: treatment.len(),
        train: train_len,
        heldout: treatment.len() - train_len,
        report,
    })
}

#[derive(Debug)]
pub struct AnalyzeSummary {
    pub metrics: CorpusMetrics,
    pub report: Report,
}

#[derive(Debug)]
pub struct AnalyzeArgs {
    pub responses: PathBuf,
    pub instances_dir: PathBuf,
    pub out_dir: PathBuf,
    pub strict: bool,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<AnalyzeSummary, CliError> {
    let manifest_path = args.instances_dir.join("manifest.jsonl");
    if !manifest_path.exists() {
        return Err(CliError::NoInstances(args.instances_dir.clone()));
    }
    let manifest: Vec<ManifestRecord> = read_jsonl(&manifest_path)?;
    let by_id: BTreeMap<&str, &ManifestRecord> =
        manifest.iter().map(|r| (r.id.as_str(), r)).collect();

    let responses: Vec<ResponseRecord> = read_jsonl(&args.responses)?;
    if responses.is_empty() {
        return Err(CliError::MalformedInput {
            path: args.responses.clone(),
            message: "no response records".into(),
        });
    }
    let missing: Vec<String> = responses
        .iter()
        .filter(|r| !by_id.contains_key(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::UnknownIds(missing));
    }

    let mut formulas: BTreeMap<&str, Formula> = BTreeMap::new();
    for response in &responses {
        if !formulas.contains_key(response.id.as_str()) {
            let record = by_id[response.id.as_str()];
            formulas.insert(&response.id, load_formula(&args.instances_dir, record)?);
        }
    }

    let mut results = Vec::with_capacity(responses.len());
    let mut detections = Vec::with_capacity(responses.len());
    for response in &responses {
        let formula = &formulas[response.id.as_str()];
        if args.strict {
            parse_trace(&response.response, formula, ParseMode::Strict).map_err(|source| {
                CliError::Trace {
                    id: response.id.clone(),
                    source,
                }
            })?;
        }
        let result = detect_backtracking(&response.response, formula);
        detections.push(DetectionRecord::new(response.id.clone(), &result));
        results.push(result);
    }

    let metrics = compute_ber(&results)?;
    let analysis = Layout::new(&args.out_dir).analysis_dir();
    write_atomic(&analysis.join("detections.jsonl"), &to_jsonl(&detections))?;

    let events = results.iter().filter(|r| r.backtracking_event).count();
    let emitted: usize = results.iter().filter_map(|r| r.conflicts_emitted).sum();
    let genuine: usize = results.iter().filter_map(|r| r.conflicts_genuine).sum();
    let with_final = results.iter().filter(|r| r.sat_correct.is_some()).count();
    let mut report = Report::new();
    report.push("n", metrics.n);
    report.push("backtracking_events", events);
    report.push("ber", format!("{:.6}", metrics.ber));
    report.push("conflicts_emitted", emitted);
    report.push("conflicts_genuine", genuine);
    report.push("conflict_precision", fmt_rate(metrics.conflict_precision));
    report.push("responses_with_final", with_final);
    report.push("correctness_rate", fmt_rate(metrics.correctness_rate));
    write_atomic(&analysis.join("metrics.txt"), &report.render())?;

    Ok(AnalyzeSummary { metrics, report })
}

#[derive(Debug)]
pub struct StatsSummary {
    pub report: Report,
}

/// Corpus statistics over the exported dataset files.
pub fn stats(out_dir: &Path) -> Result<StatsSummary, CliError> {
    let layout = Layout::new(out_dir);
    let dataset = layout.dataset_dir();
    let treatment: Vec<DatasetRecord> = read_jsonl(&dataset.join("treatment.jsonl"))?;
    let control: Vec<DatasetRecord> = read_jsonl(&dataset.join("control.jsonl"))?;

    let mut report = Report::new();
    for (name, condition, records) in [
        ("treatment", Condition::Treatment, &treatment),
        ("control", Condition::Control, &control),
    ] {
        if let Some(stray) = records.iter().find(|r| r.condition != condition) {
            return Err(CliError::MalformedInput {
                path: dataset.join(format!("{name}.jsonl")),
                message: format!("record {} has the wrong condition", stray.id),
            });
        }
        let tokens: usize = records.iter().map(|r| r.token_count).sum();
        let conflicts: usize = records.iter().map(|r| r.conflict_count).sum();
        let with_conflict = records.iter().filter(|r| r.conflict_count > 0).count();
        let verified = records.iter().filter(|r| r.verified).count();
        report.push(&format!("{name}_records"), records.len());
        report.push(&format!("{name}_verified"), verified);
        report.push(&format!("{name}_tokens"), tokens);
        report.push(
            &format!("{name}_mean_tokens"),
            format!("{:.6}", tokens as f64 / records.len().max(1) as f64),
        );
        report.push(&format!("{name}_conflicts"), conflicts);
        report.push(
            &format!("{name}_conflict_trace_fraction"),
            format!("{:.6}", with_conflict as f64 / records.len().max(1) as f64),
        );
    }
    let t_tokens: usize = treatment.iter().map(|r| r.token_count).sum();
    let c_tokens: usize = control.iter().map(|r| r.token_count).sum();
    report.push(
        "token_ratio_treatment_over_control",
        format!("{:.6}", t_tokens as f64 / c_tokens.max(1) as f64),
    );
    write_atomic(&layout.reports_dir().join("stats.txt"), &report.render())?;
    Ok(StatsSummary { report })
}
