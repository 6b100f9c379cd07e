//! Deterministic stand-in for the completion model. `RuleBased` reads the
//! excerpts back out of the prompt and applies the extraction rules the
//! system prompt asks for; `Canned` replays fixed responses.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{cell, normalize_part, Column};
use crate::units::{apply_exponent, conditions_match, fmt_exact, normalize_conditions, number_prefix_len, parse_conditions, split_unit};

use super::prompt::{parse_user_prompt, Excerpt, PromptView};
use super::{BackendError, ChatRequest, CompletionBackend, CompletionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MockMode {
    RuleBased,
    Canned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub mode: MockMode,
    pub canned: Vec<String>,
    /// Read the Typ column first; otherwise the first filled of Min/Typ/Max.
    pub prefer_typ: bool,
    pub match_conditions: bool,
    /// Sleep injected into every call.
    pub delay: Duration,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript {
            mode: MockMode::RuleBased,
            canned: Vec::new(),
            prefer_typ: true,
            match_conditions: true,
            delay: Duration::ZERO,
        }
    }
}

impl MockScript {
    pub fn rule_based() -> MockScript {
        MockScript::default()
    }

    pub fn canned(responses: Vec<String>) -> Result<MockScript, BackendError> {
        if responses.is_empty() {
            return Err(BackendError::Config("canned mock needs at least one response".into()));
        }
        Ok(MockScript {
            mode: MockMode::Canned,
            canned: responses,
            ..MockScript::default()
        })
    }

    pub fn with_delay(mut self, delay: Duration) -> MockScript {
        self.delay = delay;
        self
    }
}

pub struct MockBackend {
    script: MockScript,
    cursor: Mutex<usize>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<MockBackend, BackendError> {
        if script.mode == MockMode::Canned && script.canned.is_empty() {
            return Err(BackendError::Config("canned mock needs at least one response".into()));
        }
        Ok(MockBackend {
            script,
            cursor: Mutex::new(0),
            calls: AtomicUsize::new(0),
        })
    }

    pub fn rule_based() -> MockBackend {
        MockBackend::new(MockScript::rule_based()).expect("rule-based script is valid")
    }

    /// Number of `complete` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn respond(&self, req: &ChatRequest) -> String {
        match self.script.mode {
            MockMode::RuleBased => rule_answer(req, &self.script),
            MockMode::Canned => {
                let mut cur = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
                // exhausted scripts keep repeating the last response
                let i = (*cur).min(self.script.canned.len() - 1);
                *cur += 1;
                self.script.canned[i].clone()
            }
        }
    }
}

impl CompletionBackend for MockBackend {
    fn id(&self) -> &str {
        match self.script.mode {
            MockMode::RuleBased => "mock-rule",
            MockMode::Canned => "mock-canned",
        }
    }

    fn complete(&self, req: &ChatRequest) -> Result<CompletionResult, BackendError> {
        let start = Instant::now();
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.script.delay.is_zero() {
            std::thread::sleep(self.script.delay);
        }
        let text = self.respond(req);
        Ok(CompletionResult {
            text,
            latency_ms: start.elapsed().as_secs_f64() * 1000.0,
            backend_id: self.id().to_string(),
        })
    }
}

/// Rule-based completion with the default rules.
pub fn mock_rule_complete(req: &ChatRequest) -> CompletionResult {
    let start = Instant::now();
    let text = rule_answer(req, &MockScript::rule_based());
    CompletionResult {
        text,
        latency_ms: start.elapsed().as_secs_f64() * 1000.0,
        backend_id: "mock-rule".into(),
    }
}

struct TableRows<'a> {
    excerpt: &'a Excerpt,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn split_cells(line: &str) -> Vec<String> {
    let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn table_of(excerpt: &Excerpt) -> Option<TableRows<'_>> {
    let mut lines = excerpt.text.lines().filter(|l| l.trim_start().starts_with('|'));
    let header = split_cells(lines.next()?);
    Some(TableRows {
        excerpt,
        header,
        rows: lines.map(split_cells).collect(),
    })
}

fn row_is(header: &[String], row: &[String], symbol: &str) -> bool {
    match cell(header, row, Column::Symbol) {
        Some(s) => s == symbol,
        None => cell(header, row, Column::Parameter) == Some(symbol),
    }
}

fn numeric(header: &[String], row: &[String], col: Column) -> Option<f64> {
    let raw = cell(header, row, col)?;
    let n = number_prefix_len(raw)?;
    let v: f64 = raw[..n].parse().ok()?;
    let (exp, _) = split_unit(cell(header, row, Column::Unit).unwrap_or(""));
    Some(apply_exponent(v, exp))
}

fn row_unit(header: &[String], row: &[String]) -> String {
    split_unit(cell(header, row, Column::Unit).unwrap_or("")).1
}

struct Pick {
    reasoning: String,
    line: String,
}

fn render(symbol: &str, value: &str, unit: &str, conditions: &str) -> String {
    let mut s = format!("{symbol}={value}");
    if !unit.is_empty() {
        s.push(' ');
        s.push_str(unit);
    }
    let key = normalize_conditions(conditions);
    if !key.is_empty() {
        s.push_str(" @ ");
        s.push_str(&key);
    }
    s
}

fn single_row(symbol: &str, header: &[String], row: &[String], script: &MockScript) -> Pick {
    let order: &[Column] = if script.prefer_typ {
        &[Column::Typ, Column::Min, Column::Max]
    } else {
        &[Column::Min, Column::Typ, Column::Max]
    };
    let conds = cell(header, row, Column::Conditions).unwrap_or("");
    let unit = row_unit(header, row);
    for &col in order {
        if let Some(v) = numeric(header, row, col) {
            let reasoning = if col == Column::Typ || !script.prefer_typ {
                format!("{symbol}: read from the {col:?} column")
            } else {
                format!("{symbol}: no Typ entry in the source row; value taken from the {col:?} column (fallback)")
            };
            return Pick {
                reasoning,
                line: render(symbol, &fmt_exact(v), &unit, conds),
            };
        }
    }
    not_found(symbol)
}

fn not_found(symbol: &str) -> Pick {
    Pick {
        reasoning: format!("{symbol}: not present in the excerpts"),
        line: format!("{symbol}=?"),
    }
}

fn pick_symbol(symbol: &str, tables: &[TableRows<'_>], view: &PromptView, script: &MockScript) -> Pick {
    // first excerpt (prompt order) with a matching row, plus later slices of
    // the same section
    let Some(first) = tables.iter().find(|t| t.rows.iter().any(|r| row_is(&t.header, r, symbol))) else {
        return not_found(symbol);
    };
    let same_section = |t: &&TableRows<'_>| {
        t.excerpt.doc_id == first.excerpt.doc_id && t.excerpt.section_ordinal == first.excerpt.section_ordinal
    };
    let rows: Vec<(&[String], &[String])> = tables
        .iter()
        .filter(same_section)
        .flat_map(|t| t.rows.iter().filter(|r| row_is(&t.header, r, symbol)).map(|r| (t.header.as_slice(), r.as_slice())))
        .collect();
    if rows.len() == 1 {
        return single_row(symbol, rows[0].0, rows[0].1, script);
    }
    let requested = parse_conditions(&view.conditions);
    if script.match_conditions && !requested.is_empty() {
        let hit = rows.iter().find(|(h, r)| {
            let rc = parse_conditions(cell(h, r, Column::Conditions).unwrap_or(""));
            conditions_match(&rc, &requested) == Some(true)
        });
        if let Some((h, r)) = hit {
            let mut p = single_row(symbol, h, r, script);
            p.reasoning = format!("{symbol}: row matching the operating conditions; {}", p.reasoning);
            return p;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (h, r) in &rows {
        let l = numeric(h, r, Column::Min).or(numeric(h, r, Column::Typ)).or(numeric(h, r, Column::Max));
        let u = numeric(h, r, Column::Max).or(numeric(h, r, Column::Typ)).or(numeric(h, r, Column::Min));
        if let (Some(l), Some(u)) = (l, u) {
            lo = lo.min(l);
            hi = hi.max(u);
        }
    }
    if !lo.is_finite() {
        return not_found(symbol);
    }
    let unit = row_unit(rows[0].0, rows[0].1);
    let value = if lo < hi { format!("{}..{}", fmt_exact(lo), fmt_exact(hi)) } else { fmt_exact(lo) };
    Pick {
        reasoning: format!("{symbol}: {} rows and no matching operating conditions; reporting the Min..Max range", rows.len()),
        line: render(symbol, &value, &unit, ""),
    }
}

fn rule_answer(req: &ChatRequest, script: &MockScript) -> String {
    let Some(view) = parse_user_prompt(&req.user_prompt) else {
        return "The request does not contain datasheet excerpts.".into();
    };
    let wanted = normalize_part(&view.part_number);
    let own: Vec<&Excerpt> = view.excerpts.iter().filter(|e| normalize_part(&e.part_number) == wanted).collect();
    let pool: Vec<&Excerpt> = if own.is_empty() { view.excerpts.iter().collect() } else { own };
    let tables: Vec<TableRows<'_>> = pool.into_iter().filter_map(table_of).collect();

    let picks: Vec<Pick> = view
        .requested_symbols
        .iter()
        .map(|s| pick_symbol(s, &tables, &view, script))
        .collect();
    let mut out = String::new();
    for p in &picks {
        out.push_str(&p.reasoning);
        out.push('\n');
    }
    out.push_str("ANSWER:\n");
    for p in &picks {
        out.push_str(&p.line);
        out.push('\n');
    }
    out
}
