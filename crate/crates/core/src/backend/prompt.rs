//! Chain-of-thought extraction prompts. The user prompt layout is also the
//! input format of the rule-based mock, so `parse_user_prompt` must stay in
//! sync with `build_extraction_prompt`.

use crate::corpus::{Chunk, CorpusIndex};
use crate::iro::ExtractionRequest;

use super::{BackendError, ChatRequest};

pub const DEFAULT_PROMPT_BUDGET: usize = 12_000;

const EXCERPT_OPEN: &str = "<<< excerpt ";
const EXCERPT_CLOSE: &str = ">>>";
const PREV_PREFIX: &str = "> ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptStage {
    Initial,
    /// A later pass; carries the raw output of the previous one.
    Refine { previous_output: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excerpt {
    pub doc_id: String,
    pub part_number: String,
    pub section_ordinal: usize,
    pub chunk_index: usize,
    pub heading: String,
    pub text: String,
}

/// What the mock reads back out of a user prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptView {
    pub part_number: String,
    pub requested_symbols: Vec<String>,
    /// Raw condition text, empty when none were given.
    pub conditions: String,
    pub previous_output: Option<String>,
    pub excerpts: Vec<Excerpt>,
}

fn system_prompt(stage: &PromptStage) -> String {
    let mut s = String::from(
        "You extract SPICE model parameters from semiconductor datasheet excerpts.\n\
         Work step by step before answering:\n\
         1. Identify the table header row and the columns it defines.\n\
         2. Identify the Typ column and prefer the Typ value over Min and Max.\n\
         3. Match each row's Conditions against the requested operating conditions.\n\
         4. If no operating conditions are given and several rows match, report the Min..Max range.\n",
    );
    if matches!(stage, PromptStage::Refine { .. }) {
        s.push_str("5. Re-check the previous answer against the new excerpts and correct it where they disagree.\n");
    }
    s.push_str(
        "Finish with a line `ANSWER:` followed by one line per requested symbol:\n\
         <symbol>=<number>[..<number>][ <unit>][ @ <conditions>]\n\
         Use SI base units. Write <symbol>=? when the excerpts do not give the value.\n",
    );
    s
}

fn excerpt_for(chunk: &Chunk, index: &CorpusIndex) -> Excerpt {
    let doc = index.doc(&chunk.doc_id);
    let heading = doc
        .and_then(|d| d.sections.iter().find(|s| s.ordinal == chunk.section_ordinal))
        .map(|s| s.heading.clone())
        .unwrap_or_default();
    Excerpt {
        doc_id: chunk.doc_id.clone(),
        part_number: doc.map(|d| d.meta.part_number.clone()).unwrap_or_default(),
        section_ordinal: chunk.section_ordinal,
        chunk_index: chunk.chunk_index,
        heading,
        text: chunk.text.clone(),
    }
}

fn render_user_prompt(req: &ExtractionRequest, stage: &PromptStage, excerpts: &[Excerpt]) -> String {
    let mut s = format!(
        "Part number: {}\nRequested symbols: {}\nOperating conditions: {}\n",
        req.part_number,
        req.requested_symbols.join(", "),
        if req.conditions.is_empty() { "none".to_string() } else { req.conditions_text() }
    );
    if let PromptStage::Refine { previous_output } = stage {
        s.push_str("Previous answer:\n");
        for line in previous_output.lines() {
            s.push_str(PREV_PREFIX);
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str("Excerpts:\n");
    for (i, e) in excerpts.iter().enumerate() {
        s.push_str(&format!(
            "{EXCERPT_OPEN}{} doc={} part={} section={} chunk={} heading={}\n{}\n{EXCERPT_CLOSE}\n",
            i + 1,
            e.doc_id,
            e.part_number,
            e.section_ordinal,
            e.chunk_index,
            e.heading,
            e.text
        ));
    }
    s
}

/// Builds the prompt from chunks ranked best-first. Chunks are dropped from
/// the tail until the prompt fits in `budget` characters; the number dropped
/// is returned alongside the request.
pub fn build_extraction_prompt(
    chunks: &[&Chunk],
    index: &CorpusIndex,
    req: &ExtractionRequest,
    stage: &PromptStage,
    budget: usize,
) -> Result<(ChatRequest, usize), BackendError> {
    let system = system_prompt(stage);
    let mut excerpts: Vec<Excerpt> = chunks.iter().map(|c| excerpt_for(c, index)).collect();
    let total = excerpts.len();
    loop {
        let user = render_user_prompt(req, stage, &excerpts);
        if system.chars().count() + user.chars().count() <= budget {
            return Ok((ChatRequest::new(system, user), total - excerpts.len()));
        }
        if excerpts.len() <= 1 {
            return Err(BackendError::PromptTooLong { budget });
        }
        excerpts.pop();
    }
}

fn parse_marker(line: &str) -> Option<Excerpt> {
    let rest = line.strip_prefix(EXCERPT_OPEN)?;
    let (_, rest) = rest.split_once(' ')?;
    let (fields, heading) = rest.split_once(" heading=")?;
    let mut e = Excerpt {
        doc_id: String::new(),
        part_number: String::new(),
        section_ordinal: 0,
        chunk_index: 0,
        heading: heading.to_string(),
        text: String::new(),
    };
    for kv in fields.split(' ') {
        match kv.split_once('=')? {
            ("doc", v) => e.doc_id = v.to_string(),
            ("part", v) => e.part_number = v.to_string(),
            ("section", v) => e.section_ordinal = v.parse().ok()?,
            ("chunk", v) => e.chunk_index = v.parse().ok()?,
            _ => {}
        }
    }
    Some(e)
}

/// Inverse of the user-prompt template. Returns `None` for text that was
/// not produced by it.
pub fn parse_user_prompt(text: &str) -> Option<PromptView> {
    let mut view = PromptView::default();
    let mut lines = text.lines();
    view.part_number = lines.next()?.strip_prefix("Part number: ")?.trim().to_string();
    view.requested_symbols = lines
        .next()?
        .strip_prefix("Requested symbols: ")?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let cond = lines.next()?.strip_prefix("Operating conditions: ")?.trim();
    if cond != "none" {
        view.conditions = cond.to_string();
    }
    let mut current: Option<Excerpt> = None;
    let mut body: Vec<&str> = Vec::new();
    let mut prev: Option<Vec<&str>> = None;
    for line in lines {
        if let Some(e) = current.as_mut() {
            if line == EXCERPT_CLOSE {
                e.text = body.join("\n");
                body.clear();
                view.excerpts.extend(current.take());
            } else {
                body.push(line);
            }
            continue;
        }
        if line == "Previous answer:" {
            prev = Some(Vec::new());
        } else if let (Some(p), Some(l)) = (prev.as_mut(), line.strip_prefix(PREV_PREFIX)) {
            p.push(l);
        } else if line.starts_with(EXCERPT_OPEN) {
            current = Some(parse_marker(line)?);
        }
    }
    view.previous_output = prev.map(|p| p.join("\n"));
    Some(view)
}
