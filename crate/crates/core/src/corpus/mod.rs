//! Datasheet document model and the `.dst` structured-text format.
//!
//! A `.dst` file starts with a front-matter block delimited by `---` lines
//! holding `key: value` pairs, followed by `## Heading` sections. Section
//! bodies are free prose; lines starting with `|` form pipe-delimited tables
//! whose first row is the header.
//!
//! ```text
//! ---
//! part_number: 2N7002E
//! series: 2N7002
//! manufacturer: Example Semi
//! keywords: NMOS, MOSFET
//! aliases: 2N7002E, 2N7002E-T1
//! ---
//! ## Electrical Characteristics (TA = 25°C)
//! | Parameter | Symbol | Min | Typ | Max | Unit | Conditions |
//! | Gate Threshold Voltage | VTO | 1.0 | 1.6 | 2.4 | V | V_DS=V_GS, I_D=250uA |
//! ```

mod chunk;
mod index;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::po::SectionLabel;

pub use chunk::{chunk_document, Chunk, ChunkId, TableSlice, MIN_CHUNK_CHARS};
pub use index::{build_index, tokenize, CorpusIndex, Tokens};

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("{source_name}: missing front matter or part_number")]
    MissingFrontMatter { source_name: String },
    #[error("{source_name}:{line}: malformed table: {reason}")]
    MalformedTable {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("{source_name}:{line}: content outside of any `##` section")]
    UnexpectedContent { source_name: String, line: usize },
    #[error("{source_name}: document has no sections")]
    EmptyDocument { source_name: String },
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("alias `{alias}` claimed by both `{first}` and `{second}`")]
    DuplicateAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Uppercases and strips hyphens and whitespace.
pub fn normalize_part(raw: &str) -> String {
    raw.chars()
        .filter(|c| !c.is_whitespace() && *c != '-')
        .flat_map(char::to_uppercase)
        .collect()
}

/// Length of the prefix used as series key when none is tagged.
pub const DERIVED_SERIES_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocMeta {
    pub part_number: String,
    pub series: String,
    pub manufacturer: String,
    pub device_keywords: Vec<String>,
    pub aliases: Vec<String>,
}

/// Canonical column roles; header cells are matched case-insensitively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Parameter,
    Symbol,
    Min,
    Typ,
    Max,
    Unit,
    Conditions,
}

impl Column {
    fn name(self) -> &'static str {
        match self {
            Column::Parameter => "parameter",
            Column::Symbol => "symbol",
            Column::Min => "min",
            Column::Typ => "typ",
            Column::Max => "max",
            Column::Unit => "unit",
            Column::Conditions => "conditions",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParamTable {
    pub fn column_index(&self, col: Column) -> Option<usize> {
        column_index(&self.columns, col)
    }

    pub fn render_header(&self) -> String {
        render_row(&self.columns)
    }
}

pub(crate) fn column_index(columns: &[String], col: Column) -> Option<usize> {
    columns
        .iter()
        .position(|c| c.trim().eq_ignore_ascii_case(col.name()))
}

/// Reads a cell; `-`, `—` and empty cells are absent.
pub fn cell<'a>(columns: &[String], row: &'a [String], col: Column) -> Option<&'a str> {
    let i = column_index(columns, col)?;
    let v = row.get(i)?.trim();
    (!v.is_empty() && v != "-" && v != "—").then_some(v)
}

pub fn render_row(cells: &[String]) -> String {
    let mut out = String::from("|");
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    /// Set by [`crate::po::label_sections`]; `None` straight after ingestion.
    pub label: Option<SectionLabel>,
    pub body_text: String,
    pub tables: Vec<ParamTable>,
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasheetDoc {
    pub doc_id: String,
    pub meta: DocMeta,
    pub sections: Vec<Section>,
}

fn split_cells(line: &str) -> Vec<String> {
    let inner = line.trim();
    let inner = inner.strip_prefix('|').unwrap_or(inner);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_separator_row(cells: &[String]) -> bool {
    cells.iter().all(|c| {
        let t = c.trim_matches(':');
        t.len() >= 3 && t.chars().all(|ch| ch == '-')
    })
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn doc_id_from_source(source_name: &str) -> String {
    Path::new(source_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source_name.to_string())
}

struct SectionBuilder {
    heading: String,
    body: Vec<String>,
    tables: Vec<ParamTable>,
    open_table: bool,
}

impl SectionBuilder {
    fn finish(self, ordinal: usize) -> Section {
        let body = self.body.join("\n");
        Section {
            heading: self.heading,
            label: None,
            body_text: body.trim_matches('\n').to_string(),
            tables: self.tables,
            ordinal,
        }
    }
}

/// Parses `.dst` text into a document. `source_name` supplies the doc id
/// (file stem) and error context.
pub fn ingest_document(raw_text: &str, source_name: &str) -> Result<DatasheetDoc, CorpusError> {
    let src = || source_name.to_string();
    if raw_text.trim().is_empty() {
        return Err(CorpusError::EmptyDocument { source_name: src() });
    }
    let mut lines = raw_text.lines().enumerate().map(|(i, l)| (i + 1, l));

    // front matter
    let mut opened = false;
    for (_, line) in lines.by_ref() {
        if line.trim().is_empty() {
            continue;
        }
        opened = line.trim() == "---";
        break;
    }
    if !opened {
        return Err(CorpusError::MissingFrontMatter { source_name: src() });
    }
    let mut meta = DocMeta {
        part_number: String::new(),
        series: String::new(),
        manufacturer: String::new(),
        device_keywords: Vec::new(),
        aliases: Vec::new(),
    };
    let mut closed = false;
    for (_, line) in lines.by_ref() {
        if line.trim() == "---" {
            closed = true;
            break;
        }
        let Some((k, v)) = line.split_once(':') else { continue };
        let v = v.trim();
        match k.trim().to_ascii_lowercase().as_str() {
            "part_number" => meta.part_number = v.to_string(),
            "series" => meta.series = v.to_string(),
            "manufacturer" => meta.manufacturer = v.to_string(),
            "keywords" => meta.device_keywords = split_list(v),
            "aliases" => meta.aliases = split_list(v),
            _ => {}
        }
    }
    if !closed || meta.part_number.is_empty() {
        return Err(CorpusError::MissingFrontMatter { source_name: src() });
    }
    let canonical = normalize_part(&meta.part_number);
    if !meta.aliases.iter().any(|a| normalize_part(a) == canonical) {
        meta.aliases.insert(0, meta.part_number.clone());
    }
    if meta.series.is_empty() {
        meta.series = canonical.chars().take(DERIVED_SERIES_LEN).collect();
    }

    let mut sections = Vec::new();
    let mut current: Option<SectionBuilder> = None;
    for (lineno, line) in lines {
        if let Some(heading) = line.strip_prefix("## ") {
            if let Some(b) = current.take() {
                sections.push(b.finish(sections.len()));
            }
            current = Some(SectionBuilder {
                heading: heading.trim().to_string(),
                body: Vec::new(),
                tables: Vec::new(),
                open_table: false,
            });
            continue;
        }
        let Some(b) = current.as_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(CorpusError::UnexpectedContent { source_name: src(), line: lineno });
        };
        if line.trim_start().starts_with('|') {
            let cells = split_cells(line);
            if !b.open_table {
                if column_index(&cells, Column::Symbol).is_none()
                    && column_index(&cells, Column::Parameter).is_none()
                {
                    return Err(CorpusError::MalformedTable {
                        source_name: src(),
                        line: lineno,
                        reason: "header has neither a Parameter nor a Symbol column".into(),
                    });
                }
                b.tables.push(ParamTable { columns: cells, rows: Vec::new() });
                b.open_table = true;
                continue;
            }
            if is_separator_row(&cells) {
                continue;
            }
            let table = b.tables.last_mut().expect("open table");
            if cells.len() != table.columns.len() {
                return Err(CorpusError::MalformedTable {
                    source_name: src(),
                    line: lineno,
                    reason: format!(
                        "row has {} cells but header has {} columns",
                        cells.len(),
                        table.columns.len()
                    ),
                });
            }
            table.rows.push(cells);
        } else {
            b.open_table = false;
            b.body.push(line.trim_end().to_string());
        }
    }
    if let Some(b) = current.take() {
        sections.push(b.finish(sections.len()));
    }
    if sections.is_empty() {
        return Err(CorpusError::EmptyDocument { source_name: src() });
    }
    Ok(DatasheetDoc {
        doc_id: doc_id_from_source(source_name),
        meta,
        sections,
    })
}

/// Serialises a document back to `.dst` text; inverse of [`ingest_document`]
/// for documents whose bodies carry no trailing whitespace.
pub fn render_document(doc: &DatasheetDoc) -> String {
    let m = &doc.meta;
    let mut out = String::new();
    out.push_str("---\n");
    let _ = writeln!(out, "part_number: {}", m.part_number);
    let _ = writeln!(out, "series: {}", m.series);
    let _ = writeln!(out, "manufacturer: {}", m.manufacturer);
    let _ = writeln!(out, "keywords: {}", m.device_keywords.join(", "));
    let _ = writeln!(out, "aliases: {}", m.aliases.join(", "));
    out.push_str("---\n");
    for s in &doc.sections {
        let _ = writeln!(out, "## {}", s.heading);
        if !s.body_text.is_empty() {
            out.push_str(&s.body_text);
            out.push('\n');
        }
        for t in &s.tables {
            out.push('\n');
            out.push_str(&t.render_header());
            out.push('\n');
            for r in &t.rows {
                out.push_str(&render_row(r));
                out.push('\n');
            }
        }
        out.push('\n');
    }
    out
}

/// Reads every `.dst` file in a directory, sorted by file name. Returns the
/// parsed documents and the per-file errors separately.
pub fn load_dir(dir: &Path) -> Result<(Vec<DatasheetDoc>, Vec<CorpusError>), CorpusError> {
    let io_err = |e: std::io::Error| CorpusError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "dst"))
        .collect();
    paths.sort();
    let mut docs = Vec::new();
    let mut errors = Vec::new();
    for p in paths {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        match std::fs::read_to_string(&p) {
            Ok(text) => match ingest_document(&text, &name) {
                Ok(d) => docs.push(d),
                Err(e) => errors.push(e),
            },
            Err(e) => errors.push(CorpusError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            }),
        }
    }
    Ok((docs, errors))
}
