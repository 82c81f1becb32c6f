//! Line-oriented trace text: serializer, strict parser, lenient scanner.
//!
//! Canonical grammar (LF endings; step numbers run from 1; numbered blocks
//! are separated by one blank line):
//!
//! ```text
//! 1. Initial State:
//!    All variables unassigned.
//!    Assignment set = {}.
//!
//! 2. Propose Assignment:
//!    Based on Constraint <i> (<x<p> = true|false>),      (omitted when no rationale)
//!    assign x<p> = <True|False>.
//!    -> Current State: {<x<p>: <True|False>, ...>}
//!
//! 3. Check Assignment:
//!    Verifying against constraints...
//!    - Constraint <i> <satisfied|violated|undetermined>. (one line per clause)
//!
//!    [CONFLICT] Constraint violation detected.           (only after a violation)
//!    Backtracking...
//!    Reverting assignment x<p> = <True|False>.           (one line per reverted variable)
//!
//! 4. New Proposal:                                       (repair decision)
//!    Assign x<p> = <True|False>.
//!    -> Current State: {...}
//!
//! 5. Final Assignment:
//!    {x1: <True|False>, ..., xn: <True|False>}
//! ```
//!
//! Assignment-state braces list variables in ascending index order. The
//! strict parser accepts exactly this grammar and replay-validates the
//! result; the lenient scanner extracts whatever events it can recognize
//! from arbitrary text and keeps the rest as prose.

use thiserror::Error;

use crate::cnf::{Assignment, ClauseStatus, Formula};

use super::{replay, ReplayError, Trace, TraceEvent};

/// The literal conflict marker line content.
pub const CONFLICT_MARKER: &str = "[CONFLICT]";
const CONFLICT_LINE: &str = "[CONFLICT] Constraint violation detected.";
const BACKTRACKING_LINE: &str = "Backtracking...";
const INDENT: &str = "   ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Full grammar conformance plus replay validation.
    Strict,
    /// Best-effort event extraction from arbitrary text.
    Lenient,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceTextError {
    #[error("line {line}: expected {expected}, found `{found}`")]
    GrammarViolation {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: stated state `{found}` does not match replayed state `{expected}`")]
    StateMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: constraint index {index} outside 1..={num_clauses}")]
    ConstraintOutOfRange {
        line: usize,
        index: usize,
        num_clauses: usize,
    },
    #[error("line {line}: check block must list every constraint exactly once in order")]
    IncompleteCheck { line: usize },
    #[error("unexpected end of text: expected {expected}")]
    UnexpectedEnd { expected: String },
    #[error("line {line}: {source}")]
    Replay { line: usize, source: ReplayError },
}

/// Whitespace-delimited token count; the deterministic length proxy used
/// for corpus budget comparisons.
pub fn proxy_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn value_word(value: bool) -> &'static str {
    if value {
        "True"
    } else {
        "False"
    }
}

fn status_word(status: ClauseStatus) -> &'static str {
    match status {
        ClauseStatus::Satisfied => "satisfied",
        ClauseStatus::Falsified => "violated",
        ClauseStatus::Undetermined => "undetermined",
    }
}

/// Brace-form rendering used throughout the grammar: `{x1: True, x3: False}`,
/// variables in ascending index order, unassigned variables omitted.
pub fn render_assignment(a: &Assignment) -> String {
    let mut out = String::from("{");
    for (i, (var, value)) in a.assigned().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("x{var}: {}", value_word(value)));
    }
    out.push('}');
    out
}

use render_assignment as render_state;

/// Narrated justification for assigning `var`: the polarity the rationale
/// clause wants for it, falling back to the assigned value.
fn explanation(f: &Formula, clause_index: usize, var: u32, value: bool) -> String {
    let wanted = f
        .clause(clause_index)
        .and_then(|c| c.literal_on(var))
        .map(|l| l.is_positive())
        .unwrap_or(value);
    format!("x{var} = {}", if wanted { "true" } else { "false" })
}

pub fn serialize_trace(t: &Trace) -> String {
    let mut out = String::new();
    let mut step = 1usize;
    let mut state = Assignment::new(t.formula.num_vars());
    out.push_str("1. Initial State:\n");
    out.push_str("   All variables unassigned.\n");
    out.push_str("   Assignment set = {}.\n");

    for event in &t.events {
        match event {
            TraceEvent::Decide {
                var,
                value,
                rationale_clause,
            } => {
                step += 1;
                if state.in_domain(*var) {
                    state.set(*var, *value);
                }
                out.push('\n');
                match rationale_clause {
                    Some(i) => {
                        out.push_str(&format!("{step}. Propose Assignment:\n"));
                        out.push_str(&format!(
                            "   Based on Constraint {i} ({}),\n",
                            explanation(&t.formula, *i, *var, *value)
                        ));
                        out.push_str(&format!("   assign x{var} = {}.\n", value_word(*value)));
                    }
                    None => {
                        out.push_str(&format!("{step}. New Proposal:\n"));
                        out.push_str(&format!("   Assign x{var} = {}.\n", value_word(*value)));
                    }
                }
                out.push_str(&format!("   -> Current State: {}\n", render_state(&state)));
            }
            TraceEvent::Verify { statuses } => {
                step += 1;
                out.push('\n');
                out.push_str(&format!("{step}. Check Assignment:\n"));
                out.push_str("   Verifying against constraints...\n");
                for (i, status) in statuses {
                    out.push_str(&format!("   - Constraint {i} {}.\n", status_word(*status)));
                }
            }
            TraceEvent::Conflict { .. } => {
                out.push('\n');
                out.push_str(INDENT);
                out.push_str(CONFLICT_LINE);
                out.push('\n');
            }
            TraceEvent::Backtrack { reverted } => {
                out.push_str(INDENT);
                out.push_str(BACKTRACKING_LINE);
                out.push('\n');
                for (var, old) in reverted {
                    if state.in_domain(*var) {
                        state.unset(*var);
                    }
                    out.push_str(&format!(
                        "   Reverting assignment x{var} = {}.\n",
                        value_word(*old)
                    ));
                }
            }
            TraceEvent::Final { assignment } => {
                step += 1;
                out.push('\n');
                out.push_str(&format!("{step}. Final Assignment:\n"));
                out.push_str(&format!("   {}\n", render_state(assignment)));
            }
        }
    }
    out
}

/// Parse trace text against `f`.
///
/// Strict mode requires the canonical grammar and a consistent replay and
/// reports the first violation with its line number. Lenient mode builds a
/// trace from every event the scanner recognizes and never fails; prose is
/// dropped (use [`scan_trace`] to keep it).
pub fn parse_trace(text: &str, f: &Formula, mode: ParseMode) -> Result<Trace, TraceTextError> {
    match mode {
        ParseMode::Strict => parse_strict(text, f),
        ParseMode::Lenient => {
            let scan = scan_trace(text, f);
            Ok(Trace::new("", f.clone(), scan.into_events()))
        }
    }
}

// ---------------------------------------------------------------------------
// Strict parser
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    fn line_no(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<&'a str> {
        let line = self.peek();
        if line.is_some() {
            self.pos += 1;
        }
        line
    }

    fn expect(&mut self, expected: &str) -> Result<(), TraceTextError> {
        match self.next() {
            Some(line) if line == expected => Ok(()),
            Some(line) => Err(TraceTextError::GrammarViolation {
                line: self.pos,
                expected: format!("`{expected}`"),
                found: line.to_string(),
            }),
            None => Err(TraceTextError::UnexpectedEnd {
                expected: format!("`{expected}`"),
            }),
        }
    }
}

fn grammar_err(line: usize, expected: &str, found: &str) -> TraceTextError {
    TraceTextError::GrammarViolation {
        line,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// `"x3"` → `3`.
fn parse_var_token(token: &str) -> Option<u32> {
    let digits = token.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn parse_value_token(token: &str) -> Option<bool> {
    match token.trim_end_matches(['.', ',']) {
        "True" | "true" => Some(true),
        "False" | "false" => Some(false),
        _ => None,
    }
}

/// `"assign x3 = False."` (any leading keyword already stripped) → `(3, false)`.
fn parse_assignment_phrase(rest: &str) -> Option<(u32, bool)> {
    let mut parts = rest.split_whitespace();
    let var = parse_var_token(parts.next()?)?;
    if parts.next()? != "=" {
        return None;
    }
    let value = parse_value_token(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    Some((var, value))
}

/// `"{x1: True, x3: False}"` → pairs; `max_var` bounds the domain.
fn parse_state_braces(s: &str, max_var: u32) -> Option<Vec<(u32, bool)>> {
    let inner = s.trim().strip_prefix('{')?.strip_suffix('}')?.trim();
    let mut pairs = Vec::new();
    if inner.is_empty() {
        return Some(pairs);
    }
    for entry in inner.split(',') {
        let (var_part, value_part) = entry.split_once(':')?;
        let var = parse_var_token(var_part.trim())?;
        let value = parse_value_token(value_part.trim())?;
        if var == 0 || var > max_var {
            return None;
        }
        pairs.push((var, value));
    }
    Some(pairs)
}

/// Splits `"3. Check Assignment:"` into `(3, "Check Assignment:")`.
fn split_step_header(line: &str) -> Option<(usize, &str)> {
    let (num, rest) = line.split_once(". ")?;
    if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((num.parse().ok()?, rest))
}

fn parse_strict(text: &str, f: &Formula) -> Result<Trace, TraceTextError> {
    let mut cur = Cursor::new(text);
    let mut events: Vec<(usize, TraceEvent)> = Vec::new();
    let mut state = Assignment::new(f.num_vars());
    let mut step = 1usize;

    cur.expect("1. Initial State:")?;
    cur.expect("   All variables unassigned.")?;
    cur.expect("   Assignment set = {}.")?;

    let mut finished = false;
    loop {
        match cur.peek() {
            None => break,
            Some("") => {
                cur.next();
                // blank separator; anything after the final block must be blank
                if finished {
                    continue;
                }
            }
            Some(line) => {
                return Err(grammar_err(
                    cur.line_no(),
                    "blank line between blocks",
                    line,
                ))
            }
        }
        let Some(line) = cur.peek() else { break };
        if finished {
            return Err(grammar_err(
                cur.line_no(),
                "nothing after the final assignment",
                line,
            ));
        }

        if let Some(rest) = line.strip_prefix(INDENT) {
            // unnumbered conflict/backtrack continuation
            if rest == CONFLICT_LINE {
                let conflict_line = cur.line_no();
                cur.next();
                let violated = match events.last() {
                    Some((_, TraceEvent::Verify { statuses })) => statuses
                        .iter()
                        .find(|(_, s)| *s == ClauseStatus::Falsified)
                        .map(|(i, _)| *i),
                    _ => None,
                };
                let violated = violated.ok_or(grammar_err(
                    conflict_line,
                    "a conflict marker directly after a check reporting a violation",
                    line,
                ))?;
                events.push((
                    conflict_line,
                    TraceEvent::Conflict {
                        violated_clause: violated,
                    },
                ));

                let bt_line = cur.line_no();
                cur.expect("   Backtracking...")?;
                let mut reverted = Vec::new();
                while let Some(next) = cur.peek() {
                    let Some(tail) = next
                        .strip_prefix("   Reverting assignment ")
                        .and_then(parse_assignment_phrase)
                    else {
                        break;
                    };
                    cur.next();
                    if state.in_domain(tail.0) {
                        state.unset(tail.0);
                    }
                    reverted.push(tail);
                }
                if reverted.is_empty() {
                    return Err(grammar_err(
                        cur.line_no(),
                        "at least one `Reverting assignment` line",
                        cur.peek().unwrap_or(""),
                    ));
                }
                events.push((bt_line, TraceEvent::Backtrack { reverted }));
                continue;
            }
            return Err(grammar_err(
                cur.line_no(),
                "a numbered block or conflict marker",
                line,
            ));
        }

        let Some((num, header)) = split_step_header(line) else {
            return Err(grammar_err(cur.line_no(), "a numbered block header", line));
        };
        step += 1;
        if num != step {
            return Err(grammar_err(
                cur.line_no(),
                &format!("step number {step}"),
                line,
            ));
        }
        let header_line = cur.line_no();
        cur.next();

        match header {
            "Propose Assignment:" | "New Proposal:" => {
                let repair = header == "New Proposal:";
                let mut rationale = None;
                if !repair {
                    let based = cur.next().ok_or(TraceTextError::UnexpectedEnd {
                        expected: "proposal body".into(),
                    })?;
                    if let Some(rest) = based.strip_prefix("   Based on Constraint ") {
                        let (idx_token, _) = rest.split_once(' ').ok_or(grammar_err(
                            cur.line_no(),
                            "`Based on Constraint <i> (<explanation>),`",
                            based,
                        ))?;
                        let index: usize = idx_token.parse().map_err(|_| {
                            grammar_err(cur.line_no(), "a constraint index", based)
                        })?;
                        if index == 0 || index > f.num_clauses() {
                            return Err(TraceTextError::ConstraintOutOfRange {
                                line: cur.line_no(),
                                index,
                                num_clauses: f.num_clauses(),
                            });
                        }
                        rationale = Some(index);
                    } else {
                        // a rationale-free decision still serializes as
                        // "Propose Assignment" only when absent entirely
                        cur.pos -= 1;
                    }
                }
                let keyword = if repair { "   Assign " } else { "   assign " };
                let assign = cur.next().ok_or(TraceTextError::UnexpectedEnd {
                    expected: "an assignment line".into(),
                })?;
                let (var, value) = assign
                    .strip_prefix(keyword)
                    .and_then(parse_assignment_phrase)
                    .ok_or(grammar_err(
                        cur.line_no(),
                        &format!("`{}x<p> = <True|False>.`", keyword.trim_start()),
                        assign,
                    ))?;
                if state.in_domain(var) {
                    state.set(var, value);
                }
                let state_line = cur.next().ok_or(TraceTextError::UnexpectedEnd {
                    expected: "a current-state line".into(),
                })?;
                let expected_state = format!("   -> Current State: {}", render_state(&state));
                if state_line != expected_state {
                    return Err(TraceTextError::StateMismatch {
                        line: cur.line_no(),
                        expected: expected_state.trim_start().to_string(),
                        found: state_line.trim_start().to_string(),
                    });
                }
                events.push((
                    header_line,
                    TraceEvent::Decide {
                        var,
                        value,
                        rationale_clause: rationale,
                    },
                ));
            }
            "Check Assignment:" => {
                cur.expect("   Verifying against constraints...")?;
                let mut statuses = Vec::new();
                while let Some(next) = cur.peek() {
                    let Some(rest) = next.strip_prefix("   - Constraint ") else {
                        break;
                    };
                    let (idx_token, status_token) = rest.split_once(' ').ok_or(grammar_err(
                        cur.line_no() + 1,
                        "`- Constraint <i> <status>.`",
                        next,
                    ))?;
                    let index: usize = idx_token
                        .parse()
                        .map_err(|_| grammar_err(cur.line_no() + 1, "a constraint index", next))?;
                    let status = match status_token.trim_end_matches('.') {
                        "satisfied" => ClauseStatus::Satisfied,
                        "violated" => ClauseStatus::Falsified,
                        "undetermined" => ClauseStatus::Undetermined,
                        other => {
                            return Err(grammar_err(
                                cur.line_no() + 1,
                                "`satisfied`, `violated`, or `undetermined`",
                                other,
                            ))
                        }
                    };
                    cur.next();
                    statuses.push((index, status));
                }
                let complete = statuses.len() == f.num_clauses()
                    && statuses.iter().enumerate().all(|(i, (idx, _))| *idx == i + 1);
                if !complete {
                    return Err(TraceTextError::IncompleteCheck { line: header_line });
                }
                events.push((header_line, TraceEvent::Verify { statuses }));
            }
            "Final Assignment:" => {
                let body = cur.next().ok_or(TraceTextError::UnexpectedEnd {
                    expected: "a final assignment line".into(),
                })?;
                let pairs = body
                    .strip_prefix(INDENT)
                    .and_then(|s| parse_state_braces(s, f.num_vars()))
                    .ok_or(grammar_err(
                        cur.line_no(),
                        "`{x1: <v>, ..., xn: <v>}`",
                        body,
                    ))?;
                let assignment = Assignment::from_pairs(f.num_vars(), &pairs)
                    .expect("indices bounded by parse_state_braces");
                events.push((header_line, TraceEvent::Final { assignment }));
                finished = true;
            }
            other => {
                return Err(grammar_err(
                    header_line,
                    "`Propose Assignment:`, `New Proposal:`, `Check Assignment:`, or `Final Assignment:`",
                    other,
                ))
            }
        }
    }

    if !finished {
        return Err(TraceTextError::UnexpectedEnd {
            expected: "a final assignment block".into(),
        });
    }

    let lines: Vec<usize> = events.iter().map(|(l, _)| *l).collect();
    let trace = Trace::new("", f.clone(), events.into_iter().map(|(_, e)| e).collect());
    if let Err(source) = replay(&trace) {
        let line = match &source {
            ReplayError::MissingFinal => lines.last().copied().unwrap_or(1),
            ReplayError::DoubleAssign { index, .. }
            | ReplayError::RevertUnassigned { index, .. }
            | ReplayError::RevertValueMismatch { index, .. }
            | ReplayError::OutOfDomain { index, .. }
            | ReplayError::ConflictWithoutViolation { index }
            | ReplayError::FinalMismatch { index }
            | ReplayError::FinalNotTotal { index }
            | ReplayError::EventAfterFinal { index } => lines[*index],
        };
        return Err(TraceTextError::Replay { line, source });
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Lenient scanner
// ---------------------------------------------------------------------------

/// One classified line (or line-anchored event) of a lenient scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanItem {
    /// 1-based line number the item starts on.
    pub line: usize,
    pub kind: ScanKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanKind {
    Event(TraceEvent),
    /// A conflict marker with no preceding narration naming a violated
    /// constraint; counts as emitted but can never be genuine.
    UnattributedConflict,
    /// Recognized grammar furniture that carries no event of its own.
    Furniture,
    /// Anything the scanner does not recognize.
    Prose(String),
}

/// Result of a lenient scan of arbitrary response text.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceScan {
    pub items: Vec<ScanItem>,
}

impl TraceScan {
    /// Extracted events in order.
    pub fn events(&self) -> impl Iterator<Item = (usize, &TraceEvent)> {
        self.items.iter().filter_map(|item| match &item.kind {
            ScanKind::Event(e) => Some((item.line, e)),
            _ => None,
        })
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.items
            .into_iter()
            .filter_map(|item| match item.kind {
                ScanKind::Event(e) => Some(e),
                _ => None,
            })
            .collect()
    }

    /// Prose lines the scanner could not classify.
    pub fn prose(&self) -> impl Iterator<Item = (usize, &str)> {
        self.items.iter().filter_map(|item| match &item.kind {
            ScanKind::Prose(s) => Some((item.line, s.as_str())),
            _ => None,
        })
    }

    /// True when at least one line was recognized as trace structure.
    pub fn recognized_any(&self) -> bool {
        self.items
            .iter()
            .any(|i| !matches!(i.kind, ScanKind::Prose(_)))
    }

    /// Total conflict markers, attributed or not.
    pub fn conflicts_emitted(&self) -> usize {
        self.items
            .iter()
            .filter(|i| {
                matches!(i.kind, ScanKind::UnattributedConflict)
                    || matches!(i.kind, ScanKind::Event(TraceEvent::Conflict { .. }))
            })
            .count()
    }
}

struct ScanState {
    items: Vec<ScanItem>,
    pending_statuses: Vec<(usize, ClauseStatus)>,
    statuses_line: usize,
    pending_reverts: Vec<(u32, bool)>,
    reverts_line: usize,
    pending_rationale: Option<usize>,
    last_violated: Option<usize>,
    expect_final_braces: bool,
}

impl ScanState {
    fn flush_statuses(&mut self) {
        if !self.pending_statuses.is_empty() {
            let statuses = std::mem::take(&mut self.pending_statuses);
            // conflict attribution follows the most recent check: its
            // lowest violated constraint, or nothing when it was clean
            self.last_violated = statuses
                .iter()
                .find(|(_, s)| *s == ClauseStatus::Falsified)
                .map(|(i, _)| *i);
            self.items.push(ScanItem {
                line: self.statuses_line,
                kind: ScanKind::Event(TraceEvent::Verify { statuses }),
            });
        }
    }

    fn flush_reverts(&mut self) {
        if !self.pending_reverts.is_empty() {
            let reverted = std::mem::take(&mut self.pending_reverts);
            self.items.push(ScanItem {
                line: self.reverts_line,
                kind: ScanKind::Event(TraceEvent::Backtrack { reverted }),
            });
        }
    }

    fn flush(&mut self) {
        self.flush_statuses();
        self.flush_reverts();
    }
}

/// Classify every line of `text`, extracting whatever trace events can be
/// recognized. Never fails; inconsistent histories are left to the caller
/// to judge.
pub fn scan_trace(text: &str, f: &Formula) -> TraceScan {
    let mut st = ScanState {
        items: Vec::new(),
        pending_statuses: Vec::new(),
        statuses_line: 0,
        pending_reverts: Vec::new(),
        reverts_line: 0,
        pending_rationale: None,
        last_violated: None,
        expect_final_braces: false,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }

        if st.expect_final_braces {
            st.expect_final_braces = false;
            if let Some(pairs) = parse_state_braces(line, f.num_vars()) {
                st.flush();
                let assignment = Assignment::from_pairs(f.num_vars(), &pairs)
                    .expect("indices bounded by parse_state_braces");
                st.items.push(ScanItem {
                    line: line_no,
                    kind: ScanKind::Event(TraceEvent::Final { assignment }),
                });
                continue;
            }
        }

        if line.contains(CONFLICT_MARKER) {
            st.flush();
            let kind = match st.last_violated {
                Some(violated_clause) => ScanKind::Event(TraceEvent::Conflict { violated_clause }),
                None => ScanKind::UnattributedConflict,
            };
            st.items.push(ScanItem {
                line: line_no,
                kind,
            });
            continue;
        }

        // "- Constraint <i> <status>." narration
        if let Some(rest) = line
            .strip_prefix("- Constraint ")
            .or_else(|| line.strip_prefix("Constraint "))
        {
            if let Some((idx_token, status_token)) = rest.split_once(' ') {
                let status = match status_token.trim_end_matches('.') {
                    "satisfied" => Some(ClauseStatus::Satisfied),
                    "violated" => Some(ClauseStatus::Falsified),
                    "undetermined" => Some(ClauseStatus::Undetermined),
                    _ => None,
                };
                if let (Ok(index), Some(status)) = (idx_token.parse::<usize>(), status) {
                    st.flush_reverts();
                    if st.pending_statuses.is_empty() {
                        st.statuses_line = line_no;
                    }
                    st.pending_statuses.push((index, status));
                    continue;
                }
            }
        }

        if let Some(rest) = line.strip_prefix("Reverting assignment ") {
            if let Some((var, value)) = parse_assignment_phrase(rest) {
                st.flush_statuses();
                if st.pending_reverts.is_empty() {
                    st.reverts_line = line_no;
                }
                st.pending_reverts.push((var, value));
                continue;
            }
        }

        if let Some(rest) = line
            .strip_prefix("assign ")
            .or_else(|| line.strip_prefix("Assign "))
        {
            if let Some((var, value)) = parse_assignment_phrase(rest) {
                st.flush();
                let rationale_clause = st.pending_rationale.take();
                st.items.push(ScanItem {
                    line: line_no,
                    kind: ScanKind::Event(TraceEvent::Decide {
                        var,
                        value,
                        rationale_clause,
                    }),
                });
                continue;
            }
        }

        if let Some(rest) = line.strip_prefix("Based on Constraint ") {
            if let Some((idx_token, _)) = rest.split_once(' ') {
                if let Ok(index) = idx_token.parse::<usize>() {
                    st.pending_rationale = Some(index);
                    st.items.push(ScanItem {
                        line: line_no,
                        kind: ScanKind::Furniture,
                    });
                    continue;
                }
            }
        }

        if let Some(pos) = line.find("Final Assignment") {
            st.flush();
            let after = &line[pos..];
            if let Some(brace) = after.find('{') {
                if let Some(pairs) = parse_state_braces(&after[brace..], f.num_vars()) {
                    let assignment = Assignment::from_pairs(f.num_vars(), &pairs)
                        .expect("indices bounded by parse_state_braces");
                    st.items.push(ScanItem {
                        line: line_no,
                        kind: ScanKind::Event(TraceEvent::Final { assignment }),
                    });
                    continue;
                }
            }
            st.expect_final_braces = true;
            st.items.push(ScanItem {
                line: line_no,
                kind: ScanKind::Furniture,
            });
            continue;
        }

        let furniture = line == BACKTRACKING_LINE
            || line.starts_with("-> Current State:")
            || line == "Verifying against constraints..."
            || line == "All variables unassigned."
            || line == "Assignment set = {}."
            || split_step_header(line).is_some_and(|(_, h)| {
                matches!(
                    h,
                    "Initial State:"
                        | "Propose Assignment:"
                        | "New Proposal:"
                        | "Check Assignment:"
                        | "Final Assignment:"
                )
            });
        if furniture {
            if split_step_header(line).is_some_and(|(_, h)| h == "Final Assignment:")
                || line.starts_with("Final Assignment")
            {
                st.expect_final_braces = true;
            }
            st.items.push(ScanItem {
                line: line_no,
                kind: ScanKind::Furniture,
            });
            continue;
        }

        st.items.push(ScanItem {
            line: line_no,
            kind: ScanKind::Prose(raw.to_string()),
        });
    }
    st.flush();
    TraceScan { items: st.items }
}
