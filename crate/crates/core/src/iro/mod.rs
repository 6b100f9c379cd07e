//! Iterative retrieval: each pass retrieves with the previous raw output
//! prepended to the query, prompts the backend and merges the parsed answer.

mod retrieve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    build_extraction_prompt, parse_extraction_output, BackendError, CompletionBackend, PromptStage,
    DEFAULT_PROMPT_BUDGET,
};
use crate::corpus::{cell, Chunk, Column, CorpusIndex};
use crate::params::{Confidence, ParamEntry, ParamValue, ParameterSet, SourceRef};
use crate::po::ChunkStream;
use crate::units::{apply_exponent, approx_eq, normalize_conditions, number_prefix_len, split_unit};

pub use retrieve::{chunk_tokens, concat_query, retrieve, score_chunk, Retrieved, SYMBOL_WEIGHT};

#[derive(Debug, Error)]
pub enum IroError {
    #[error("extraction request names no symbols")]
    NoSymbols,
    #[error("no chunks to retrieve from")]
    EmptyCorpus,
    #[error("invalid iteration config: {0}")]
    Config(String),
    #[error("backend failed at iteration {iteration}: {source}")]
    Backend {
        iteration: usize,
        #[source]
        source: BackendError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRequest {
    pub part_number: String,
    pub requested_symbols: Vec<String>,
    /// (quantity, value with unit), e.g. `("I_C", "0.1 mA")`.
    pub conditions: Vec<(String, String)>,
}

impl ExtractionRequest {
    pub fn new(
        part_number: &str,
        requested_symbols: Vec<String>,
        conditions: Vec<(String, String)>,
    ) -> Result<ExtractionRequest, IroError> {
        if requested_symbols.is_empty() {
            return Err(IroError::NoSymbols);
        }
        Ok(ExtractionRequest {
            part_number: part_number.to_string(),
            requested_symbols,
            conditions,
        })
    }

    /// `I_C=0.1 mA, V_CE=10 V`
    pub fn conditions_text(&self) -> String {
        self.conditions
            .iter()
            .map(|(q, v)| format!("{q}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Normalized condition key, empty when unconditioned.
    pub fn condition_key(&self) -> String {
        normalize_conditions(&self.conditions_text())
    }

    /// The query text q: part number, requested symbols and conditions.
    pub fn query(&self) -> String {
        let mut parts = vec![self.part_number.clone()];
        parts.extend(self.requested_symbols.iter().cloned());
        parts.extend(self.conditions.iter().map(|(q, v)| format!("{q}={v}")));
        parts.join(" ")
    }
}

/// Parses `I_C=0.1mA, V_CE=10V` (also `;` or newline separated) into pairs.
pub fn parse_condition_pairs(text: &str) -> Vec<(String, String)> {
    text.split([',', ';', '\n'])
        .filter_map(|t| t.split_once('='))
        .map(|(q, v)| (q.trim().to_string(), v.trim().to_string()))
        .filter(|(q, v)| !q.is_empty() && !v.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convergence {
    FixedPoint,
    AllParamsResolved,
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IroConfig {
    pub max_iterations: usize,
    pub top_k: usize,
    pub convergence: Convergence,
    pub max_query_chars: usize,
    pub prompt_budget: usize,
    /// Extra attempts per iteration after a transient backend error.
    pub backend_retries: u32,
}

impl Default for IroConfig {
    fn default() -> Self {
        IroConfig {
            max_iterations: 3,
            top_k: 4,
            convergence: Convergence::FixedPoint,
            max_query_chars: 4000,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            backend_retries: 1,
        }
    }
}

impl IroConfig {
    pub fn validate(&self) -> Result<(), IroError> {
        if self.max_iterations == 0 {
            return Err(IroError::Config("max_iterations must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(IroError::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub query: String,
    pub chunk_ids: Vec<String>,
    pub raw_output: String,
    /// `ok`, or the parse error message.
    pub parse_status: String,
    pub scanned_chunks: usize,
    pub dropped_chunks: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IroState {
    pub t: usize,
    pub prev_output: String,
    pub retrieved: Vec<String>,
    pub accumulated: ParameterSet,
    pub trace: Vec<TraceRecord>,
}

impl IroState {
    pub fn new() -> IroState {
        IroState::default()
    }

    /// A prompt for operating conditions when a requested symbol only came
    /// back as a range and none were given.
    pub fn needs_user_input(&self, req: &ExtractionRequest) -> Option<String> {
        if !req.conditions.is_empty() {
            return None;
        }
        let ranged: Vec<String> = req
            .requested_symbols
            .iter()
            .filter_map(|s| self.accumulated.answer_for(s, "").filter(|e| e.value.is_range()))
            .map(|e| match e.value {
                ParamValue::Range { lo, hi } => format!("{} ({lo}..{hi})", e.symbol),
                ParamValue::Scalar(_) => e.symbol.clone(),
            })
            .collect();
        (!ranged.is_empty()).then(|| {
            format!(
                "Only a general range was found for {}. Enter operating conditions as key=value lines (e.g. I_C=0.1mA), blank line to finish:",
                ranged.join(", ")
            )
        })
    }

    fn all_resolved(&self, req: &ExtractionRequest) -> bool {
        req.requested_symbols.iter().all(|s| self.accumulated.has_symbol(s))
    }

    fn fixed_point(&self) -> bool {
        let n = self.trace.len();
        n >= 2 && self.trace[n - 1].raw_output == self.trace[n - 2].raw_output
    }
}

/// Post-merge hook computing derived parameters (e.g. Ohm's-law RS).
pub type DeriveFn = fn(&mut ParameterSet);

pub struct IroContext<'a> {
    pub index: &'a CorpusIndex,
    pub stream: ChunkStream<'a>,
    pub backend: &'a dyn CompletionBackend,
    pub derive: Option<DeriveFn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub parameters: ParameterSet,
    pub iterations_used: usize,
    pub converged: bool,
    pub needs_user_input: Option<String>,
    pub trace: Vec<TraceRecord>,
    /// Chunks scored across all iterations.
    pub scanned_chunks: usize,
}

fn cell_value(header: &[String], row: &[String], col: Column) -> Option<f64> {
    let raw = cell(header, row, col)?;
    let v: f64 = raw[..number_prefix_len(raw)?].parse().ok()?;
    let (exp, _) = split_unit(cell(header, row, Column::Unit).unwrap_or(""));
    Some(apply_exponent(v, exp))
}

/// Links an answer to the first retrieved table row carrying it and grades
/// the column it came from.
fn attach_provenance(entry: &mut ParamEntry, chunks: &[&Chunk]) {
    for c in chunks {
        let Some(slice) = &c.table_slice else { continue };
        for row in &slice.rows {
            let h = &slice.header;
            let is_sym = cell(h, row, Column::Symbol).or_else(|| cell(h, row, Column::Parameter)) == Some(entry.symbol.as_str());
            if !is_sym {
                continue;
            }
            let confidence = match entry.value {
                ParamValue::Range { .. } => Some(Confidence::FallbackMinMax),
                ParamValue::Scalar(v) => {
                    let hit = |col| cell_value(h, row, col).is_some_and(|x| approx_eq(x, v));
                    if hit(Column::Typ) {
                        Some(Confidence::TypPreferred)
                    } else if hit(Column::Min) || hit(Column::Max) {
                        Some(Confidence::FallbackMinMax)
                    } else {
                        None
                    }
                }
            };
            if let Some(confidence) = confidence {
                entry.confidence = confidence;
                entry.source = Some(SourceRef {
                    doc_id: c.doc_id.clone(),
                    section_ordinal: c.section_ordinal,
                    chunk_index: c.chunk_index,
                });
                return;
            }
        }
    }
    if entry.value.is_range() {
        entry.confidence = Confidence::FallbackMinMax;
    }
}

fn complete_with_retries(
    ctx: &IroContext<'_>,
    chat: &crate::backend::ChatRequest,
    cfg: &IroConfig,
    iteration: usize,
) -> Result<crate::backend::CompletionResult, IroError> {
    let mut attempt = 0;
    loop {
        match ctx.backend.complete(chat) {
            Ok(r) => return Ok(r),
            Err(e) if e.is_transient() && attempt < cfg.backend_retries => attempt += 1,
            Err(source) => return Err(IroError::Backend { iteration, source }),
        }
    }
}

/// One retrieve-prompt-generate-merge pass.
pub fn iro_step(
    state: &mut IroState,
    req: &ExtractionRequest,
    ctx: &IroContext<'_>,
    cfg: &IroConfig,
) -> Result<(), IroError> {
    let t = state.t + 1;
    let q = req.query();
    let query = concat_query(&state.prev_output, &q, cfg.max_query_chars);
    let got = retrieve(
        &state.prev_output,
        &q,
        &ctx.stream,
        cfg.top_k,
        ctx.index,
        &req.requested_symbols,
        cfg.max_query_chars,
    )?;
    let stage = if t == 1 {
        PromptStage::Initial
    } else {
        PromptStage::Refine {
            previous_output: state.prev_output.clone(),
        }
    };
    let (chat, dropped) = build_extraction_prompt(&got.chunks, ctx.index, req, &stage, cfg.prompt_budget)
        .map_err(|source| IroError::Backend { iteration: t, source })?;
    let resp = complete_with_retries(ctx, &chat, cfg, t)?;
    let parse_status = match parse_extraction_output(&resp.text) {
        Ok(mut parsed) => {
            let mut fresh = ParameterSet::new();
            for e in parsed.entries() {
                let mut e = e.clone();
                attach_provenance(&mut e, &got.chunks);
                fresh.insert(e);
            }
            for s in parsed.unresolved() {
                fresh.mark_unresolved(s);
            }
            parsed = fresh;
            state.accumulated.merge(&parsed);
            if let Some(derive) = ctx.derive {
                derive(&mut state.accumulated);
            }
            "ok".to_string()
        }
        Err(e) => e.to_string(),
    };
    state.retrieved = got.chunks.iter().map(|c| c.id().to_string()).collect();
    state.trace.push(TraceRecord {
        t,
        query,
        chunk_ids: state.retrieved.clone(),
        raw_output: resp.text.clone(),
        parse_status,
        scanned_chunks: got.scanned,
        dropped_chunks: dropped,
        latency_ms: resp.latency_ms,
    });
    state.prev_output = resp.text;
    state.t = t;
    Ok(())
}

/// A resumable extraction; conditions can be supplied between passes.
pub struct IroSession<'a> {
    pub req: ExtractionRequest,
    ctx: IroContext<'a>,
    cfg: IroConfig,
    state: IroState,
    limit: usize,
    converged: bool,
}

impl<'a> IroSession<'a> {
    pub fn new(req: ExtractionRequest, ctx: IroContext<'a>, cfg: IroConfig) -> Result<IroSession<'a>, IroError> {
        cfg.validate()?;
        if req.requested_symbols.is_empty() {
            return Err(IroError::NoSymbols);
        }
        Ok(IroSession {
            limit: cfg.max_iterations,
            req,
            ctx,
            cfg,
            state: IroState::new(),
            converged: false,
        })
    }

    pub fn state(&self) -> &IroState {
        &self.state
    }

    fn stop_rule_met(&self) -> bool {
        let fixed = self.state.fixed_point();
        let resolved = self.state.all_resolved(&self.req);
        match self.cfg.convergence {
            Convergence::FixedPoint => fixed,
            Convergence::AllParamsResolved => resolved,
            Convergence::Either => fixed || resolved,
        }
    }

    /// Runs one pass unless the iteration budget is spent; returns whether
    /// a pass ran.
    pub fn step(&mut self) -> Result<bool, IroError> {
        if self.state.t >= self.limit {
            return Ok(false);
        }
        iro_step(&mut self.state, &self.req, &self.ctx, &self.cfg)?;
        self.converged = self.stop_rule_met();
        Ok(true)
    }

    /// Passes until the budget is spent or the stop rule holds.
    pub fn run(&mut self) -> Result<ExtractionResult, IroError> {
        while self.state.t < self.limit {
            self.step()?;
            if self.converged {
                break;
            }
        }
        Ok(self.result())
    }

    /// Adds operating conditions and grants a fresh iteration budget.
    pub fn supply_conditions(&mut self, conditions: Vec<(String, String)>) {
        self.req.conditions.extend(conditions);
        self.limit = self.state.t + self.cfg.max_iterations;
        self.converged = false;
    }

    pub fn result(&self) -> ExtractionResult {
        ExtractionResult {
            parameters: self.state.accumulated.clone(),
            iterations_used: self.state.t,
            converged: self.converged,
            needs_user_input: self.state.needs_user_input(&self.req),
            trace: self.state.trace.clone(),
            scanned_chunks: self.state.trace.iter().map(|r| r.scanned_chunks).sum(),
        }
    }
}

/// Iterates until `max_iterations` or the configured stop rule.
pub fn run_iro(req: &ExtractionRequest, ctx: IroContext<'_>, cfg: &IroConfig) -> Result<ExtractionResult, IroError> {
    IroSession::new(req.clone(), ctx, cfg.clone())?.run()
}

/// One JSON object per iteration.
pub fn trace_json(trace: &[TraceRecord]) -> String {
    serde_json::to_string_pretty(trace).unwrap_or_else(|_| "[]".into())
}
