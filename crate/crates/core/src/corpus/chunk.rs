use serde::{Deserialize, Serialize};

use super::{render_row, DatasheetDoc};

/// Chunk sizes below this are raised to it.
pub const MIN_CHUNK_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChunkId {
    pub doc_id: String,
    pub chunk_index: usize,
}

impl std::fmt::Display for ChunkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.chunk_index)
    }
}

/// Header plus a contiguous run of rows from one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSlice {
    pub table_index: usize,
    pub first_row: usize,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub section_ordinal: usize,
    /// Position within the whole document.
    pub chunk_index: usize,
    pub text: String,
    pub table_slice: Option<TableSlice>,
}

impl Chunk {
    pub fn id(&self) -> ChunkId {
        ChunkId {
            doc_id: self.doc_id.clone(),
            chunk_index: self.chunk_index,
        }
    }
}

/// Splits prose into consecutive pieces of at most `max` bytes, preferring
/// paragraph breaks, then whitespace. Pieces concatenate back to `text`.
fn split_prose(text: &str, max: usize) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        if rest.len() <= max {
            out.push(rest);
            break;
        }
        let mut end = max;
        while !rest.is_char_boundary(end) {
            end -= 1;
        }
        let window = &rest[..end];
        let cut = window
            .rfind("\n\n")
            .map(|i| i + 2)
            .or_else(|| {
                window
                    .char_indices()
                    .rev()
                    .find(|(_, c)| c.is_whitespace())
                    .map(|(i, c)| i + c.len_utf8())
            })
            .filter(|&i| i > 0)
            .unwrap_or(end.max(rest.chars().next().map_or(1, char::len_utf8)));
        out.push(&rest[..cut]);
        rest = &rest[cut..];
    }
    out
}

/// Splits a document into retrieval chunks: prose pieces per section, then
/// table slices that each repeat the header row.
pub fn chunk_document(doc: &DatasheetDoc, max_chars: usize) -> Vec<Chunk> {
    let max = max_chars.max(MIN_CHUNK_CHARS);
    let mut chunks = Vec::new();
    let mut push = |section_ordinal: usize, text: String, slice: Option<TableSlice>| {
        let chunk_index = chunks.len();
        chunks.push(Chunk {
            doc_id: doc.doc_id.clone(),
            section_ordinal,
            chunk_index,
            text,
            table_slice: slice,
        });
    };
    for section in &doc.sections {
        for piece in split_prose(&section.body_text, max) {
            push(section.ordinal, piece.to_string(), None);
        }
        for (ti, table) in section.tables.iter().enumerate() {
            let header = render_row(&table.columns);
            let mut start = 0;
            while start < table.rows.len() {
                let mut text = header.clone();
                let mut end = start;
                while end < table.rows.len() {
                    let line = render_row(&table.rows[end]);
                    if end > start && text.len() + 1 + line.len() > max {
                        break;
                    }
                    text.push('\n');
                    text.push_str(&line);
                    end += 1;
                }
                let slice = TableSlice {
                    table_index: ti,
                    first_row: start,
                    header: table.columns.clone(),
                    rows: table.rows[start..end].to_vec(),
                };
                push(section.ordinal, text, Some(slice));
                start = end;
            }
        }
    }
    chunks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocMeta, ParamTable, Section};

    fn doc_with(body: &str, rows: usize) -> DatasheetDoc {
        let table = ParamTable {
            columns: ["Parameter", "Symbol", "Typ", "Unit"].map(String::from).to_vec(),
            rows: (0..rows)
                .map(|i| vec![format!("Parameter number {i:02} padded out to a realistic row width"), format!("S{i}"), "1.0".into(), "V".into()])
                .collect(),
        };
        DatasheetDoc {
            doc_id: "d".into(),
            meta: DocMeta {
                part_number: "D".into(),
                series: "D".into(),
                manufacturer: String::new(),
                device_keywords: vec![],
                aliases: vec!["D".into()],
            },
            sections: vec![Section {
                heading: "H".into(),
                label: None,
                body_text: body.into(),
                tables: if rows > 0 { vec![table] } else { vec![] },
                ordinal: 0,
            }],
        }
    }

    #[test]
    fn short_body_is_one_chunk() {
        let body = "x".repeat(100);
        let chunks = chunk_document(&doc_with(&body, 0), 500);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, body);
    }

    #[test]
    fn ten_rows_three_per_chunk() {
        let doc = doc_with("", 10);
        let header_len = render_row(&doc.sections[0].tables[0].columns).len();
        let row_len = render_row(&doc.sections[0].tables[0].rows[0]).len();
        // room for exactly three rows
        let max = header_len + 3 * (row_len + 1);
        assert!(max >= MIN_CHUNK_CHARS);
        let chunks = chunk_document(&doc, max);
        assert_eq!(chunks.len(), 4);
        let sizes: Vec<_> = chunks.iter().map(|c| c.table_slice.as_ref().unwrap().rows.len()).collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        for c in &chunks {
            assert!(c.text.starts_with(&render_row(&doc.sections[0].tables[0].columns)));
        }
    }

    #[test]
    fn empty_body_yields_only_table_slices() {
        let chunks = chunk_document(&doc_with("", 2), 1000);
        assert_eq!(chunks.len(), 1);
        assert!(chunks.iter().all(|c| c.table_slice.is_some()));
    }

    #[test]
    fn prose_pieces_concatenate_back() {
        let body = "Alpha beta gamma. ".repeat(40) + "\n\n" + &"Delta µ epsilon ".repeat(30);
        let chunks = chunk_document(&doc_with(&body, 0), 200);
        assert!(chunks.len() > 3);
        assert!(chunks.iter().all(|c| !c.text.is_empty() && c.text.len() <= 200));
        let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(joined, body);
    }
}
