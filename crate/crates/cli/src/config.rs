//! Run configuration: one JSON file drives every stage; command-line
//! flags override individual fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sattrace_core::cnf::generate::GENERATION_VAR_LIMIT;
use sattrace_core::engine::{EngineMode, InjectionConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Witness,
    Search,
}

impl Mode {
    pub fn engine_mode(self) -> EngineMode {
        match self {
            Mode::Witness => EngineMode::WitnessGuided,
            Mode::Search => EngineMode::GenuineSearch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionSettings {
    pub probability: f64,
    pub max_injections: u32,
    pub rollback_window: u32,
    pub mode: Mode,
}

impl Default for InjectionSettings {
    fn default() -> Self {
        InjectionSettings {
            probability: 0.9,
            max_injections: 1,
            rollback_window: 3,
            mode: Mode::Witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Instances to generate.
    pub count: usize,
    /// Inclusive variable-count range; each instance draws uniformly.
    pub var_min: u32,
    pub var_max: u32,
    /// Clauses per variable; the clause count is `round(ratio * n)`.
    pub clause_ratio: f64,
    pub clause_width: u32,
    /// Root seed; every stage derives its streams from it.
    pub seed: u64,
    pub train_fraction: f64,
    pub heldout_fraction: f64,
    /// `synthesize` exits with code 3 below this pass rate.
    pub pass_rate_floor: f64,
    pub out_dir: PathBuf,
    pub injection: InjectionSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            count: 500,
            var_min: 6,
            var_max: 12,
            clause_ratio: 3.0,
            clause_width: 3,
            seed: 42,
            train_fraction: 0.9,
            heldout_fraction: 0.1,
            pass_rate_floor: 1.0,
            out_dir: PathBuf::from("out"),
            injection: InjectionSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.count == 0 {
            return fail("count must be at least 1".into());
        }
        if self.var_min == 0 || self.var_min > self.var_max {
            return fail(format!(
                "variable range [{}, {}] is empty or starts at zero",
                self.var_min, self.var_max
            ));
        }
        if self.var_max > GENERATION_VAR_LIMIT {
            return fail(format!(
                "var_max {} exceeds the generation limit {GENERATION_VAR_LIMIT}",
                self.var_max
            ));
        }
        if self.clause_width == 0 || self.clause_width > self.var_min {
            return fail(format!(
                "clause width {} must lie in 1..={} (the smallest variable count)",
                self.clause_width, self.var_min
            ));
        }
        if !self.clause_ratio.is_finite() || self.clause_ratio <= 0.0 {
            return fail(format!(
                "clause ratio {} must be positive",
                self.clause_ratio
            ));
        }
        let sum = self.train_fraction + self.heldout_fraction;
        if !(self.train_fraction >= 0.0 && self.heldout_fraction >= 0.0) || (sum - 1.0).abs() > 1e-9
        {
            return fail(format!(
                "split fractions {} + {} must sum to 1",
                self.train_fraction, self.heldout_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.pass_rate_floor) {
            return fail(format!(
                "pass rate floor {} outside [0, 1]",
                self.pass_rate_floor
            ));
        }
        self.injection_config(0)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Engine configuration for one instance; the engine stream is derived
    /// from the instance seed so corpora are reproducible from the root
    /// seed alone.
    pub fn injection_config(&self, instance_seed: u64) -> InjectionConfig {
        InjectionConfig {
            injection_probability: self.injection.probability,
            max_injections: self.injection.max_injections,
            rollback_window: self.injection.rollback_window,
            mode: self.injection.mode.engine_mode(),
            seed: instance_seed ^ crate::pipeline::ENGINE_STREAM_TAG,
        }
    }

    /// Instance ids are `inst-<index>`, zero-padded to four digits.
    pub fn instance_id(index: usize) -> String {
        format!("inst-{index:04}")
    }

    /// Per-instance root: `seed ⊕ index`.
    pub fn instance_seed(&self, index: usize) -> u64 {
        self.seed ^ index as u64
    }
}
