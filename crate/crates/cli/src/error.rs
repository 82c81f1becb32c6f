//! Pipeline errors mapped onto stable exit codes:
//! 1 validation or config, 2 I/O, 3 verification pass rate below the floor.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    MalformedInput { path: PathBuf, message: String },
    #[error("no instances found under {0}; run `generate` first")]
    NoInstances(PathBuf),
    #[error("no golden traces found under {0}; run `synthesize` first")]
    NoGoldenTraces(PathBuf),
    #[error("responses reference unknown instance ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("verification pass rate {pass_rate:.6} below the configured floor {floor:.6}")]
    PassRateFloor { pass_rate: f64, floor: f64 },
    #[error(transparent)]
    Generate(#[from] sattrace_core::cnf::GenerateError),
    #[error(transparent)]
    Dimacs(#[from] sattrace_core::cnf::DimacsError),
    #[error(transparent)]
    Engine(#[from] sattrace_core::engine::EngineError),
    #[error("trace for {id}: {source}")]
    Trace {
        id: String,
        source: sattrace_core::trace::TraceTextError,
    },
    #[error("linearization of {id}: {source}")]
    Linearize {
        id: String,
        source: sattrace_core::linearize::LinearizeError,
    },
    #[error(transparent)]
    Analyze(#[from] sattrace_core::analyze::AnalyzeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::PassRateFloor { .. } => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
