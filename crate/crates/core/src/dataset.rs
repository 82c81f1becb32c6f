//! Training-record schema shared by exported corpora.

use serde::{Deserialize, Serialize};

use crate::cnf::Formula;

/// Which corpus a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Full trace including conflicts and backtracking.
    Treatment,
    /// Linearized monotonic trace ending in the same final assignment.
    Control,
}

/// One training example. Serialized as one JSON object per line with this
/// exact key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub dimacs: String,
    pub prompt: String,
    pub completion: String,
    pub condition: Condition,
    pub verified: bool,
    pub token_count: usize,
    pub conflict_count: usize,
}

/// Natural-language task statement enumerating the clauses with the same
/// constraint numbers the trace text refers to.
pub fn render_prompt(f: &Formula) -> String {
    let mut out = format!(
        "Find a truth assignment for variables x1 through x{} that satisfies every constraint.\n",
        f.num_vars()
    );
    for (i, clause) in f.clauses().iter().enumerate() {
        out.push_str(&format!("Constraint {}: {clause}\n", i + 1));
    }
    out.push_str("Work through the constraints step by step and end with the final assignment.\n");
    out
}
