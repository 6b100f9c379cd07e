use std::collections::{BTreeMap, HashMap, HashSet};

use indexmap::IndexMap;

use super::{column_index, normalize_part, render_row, Chunk, Column, CorpusError, DatasheetDoc};

/// Raw words are split on whitespace and these delimiters before symbol
/// detection; `_` stays inside words so `h_FE` survives.
const WORD_DELIMS: &[char] = &['|', ',', ';', '=', '(', ')', '[', ']', '@', ':', '"', '\''];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Tokens {
    /// Lowercased alphanumeric tokens of length >= 2.
    pub terms: Vec<String>,
    /// Case-preserved electrical symbols found in the vocabulary.
    pub symbols: Vec<String>,
}

/// Tokenizes `text`. A raw word that appears verbatim in `symbol_vocab` is a
/// symbol token and is not split further; everything else is lowercased and
/// split on non-alphanumerics, keeping tokens of two or more characters.
pub fn tokenize(text: &str, symbol_vocab: &HashSet<String>) -> Tokens {
    let mut out = Tokens::default();
    for raw in text.split(|c: char| c.is_whitespace() || WORD_DELIMS.contains(&c)) {
        let word = raw.trim_end_matches(['.', '?', '!']);
        if word.is_empty() {
            continue;
        }
        if symbol_vocab.contains(word) {
            out.symbols.push(word.to_string());
            continue;
        }
        for t in word.split(|c: char| !c.is_alphanumeric()) {
            if t.chars().count() >= 2 {
                out.terms.push(t.to_lowercase());
            }
        }
    }
    out
}

/// Immutable lookup structure over an ingested corpus.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    docs: IndexMap<String, DatasheetDoc>,
    aliases: HashMap<String, String>,
    series: BTreeMap<String, Vec<String>>,
    term_df: HashMap<String, usize>,
    symbol_df: HashMap<String, usize>,
    symbol_vocab: HashSet<String>,
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> impl Iterator<Item = &DatasheetDoc> {
        self.docs.values()
    }

    pub fn doc(&self, doc_id: &str) -> Option<&DatasheetDoc> {
        self.docs.get(doc_id)
    }

    /// Position of a document in corpus order.
    pub fn doc_position(&self, doc_id: &str) -> Option<usize> {
        self.docs.get_index_of(doc_id)
    }

    pub fn lookup_alias(&self, normalized: &str) -> Option<&str> {
        self.aliases.get(normalized).map(String::as_str)
    }

    /// Normalized alias -> doc id pairs, sorted by alias.
    pub fn aliases(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<_> = self
            .aliases
            .iter()
            .map(|(a, d)| (a.as_str(), d.as_str()))
            .collect();
        v.sort();
        v
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }

    pub fn series_members(&self, normalized_series: &str) -> Option<&[String]> {
        self.series.get(normalized_series).map(Vec::as_slice)
    }

    pub fn series_count(&self) -> usize {
        self.series.len()
    }

    pub fn symbol_vocab(&self) -> &HashSet<String> {
        &self.symbol_vocab
    }

    pub fn term_df(&self, term: &str) -> usize {
        self.term_df.get(term).copied().unwrap_or(0)
    }

    pub fn symbol_df(&self, symbol: &str) -> usize {
        self.symbol_df.get(symbol).copied().unwrap_or(0)
    }

    /// `ln(1 + N / df)`, with df floored at 1.
    pub fn idf(&self, df: usize) -> f64 {
        (1.0 + self.docs.len() as f64 / df.max(1) as f64).ln()
    }

    /// Page-header context scored alongside a chunk: part number and the
    /// heading of the chunk's section.
    pub fn chunk_context(&self, chunk: &Chunk) -> String {
        match self.docs.get(&chunk.doc_id) {
            Some(doc) => {
                let heading = doc
                    .sections
                    .iter()
                    .find(|s| s.ordinal == chunk.section_ordinal)
                    .map_or("", |s| s.heading.as_str());
                format!("{} {}", doc.meta.part_number, heading)
            }
            None => String::new(),
        }
    }

    pub fn tokenize(&self, text: &str) -> Tokens {
        tokenize(text, &self.symbol_vocab)
    }
}

fn doc_surface(doc: &DatasheetDoc) -> String {
    let mut s = doc.meta.part_number.clone();
    for sec in &doc.sections {
        s.push('\n');
        s.push_str(&sec.heading);
        s.push('\n');
        s.push_str(&sec.body_text);
        for t in &sec.tables {
            s.push('\n');
            s.push_str(&render_row(&t.columns));
            for r in &t.rows {
                s.push('\n');
                s.push_str(&render_row(r));
            }
        }
    }
    s
}

/// Builds the alias, series and term-statistics maps.
pub fn build_index(docs: Vec<DatasheetDoc>) -> Result<CorpusIndex, CorpusError> {
    let mut index = CorpusIndex::default();
    for doc in &docs {
        for sec in &doc.sections {
            for t in &sec.tables {
                if let Some(si) = column_index(&t.columns, Column::Symbol) {
                    for r in &t.rows {
                        let sym = r[si].trim();
                        if !sym.is_empty() && sym != "-" {
                            index.symbol_vocab.insert(sym.to_string());
                        }
                    }
                }
            }
        }
    }
    for doc in docs {
        if index.docs.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateDocId(doc.doc_id));
        }
        for alias in &doc.meta.aliases {
            let norm = normalize_part(alias);
            match index.aliases.get(&norm) {
                Some(other) if *other != doc.doc_id => {
                    return Err(CorpusError::DuplicateAlias {
                        alias: norm,
                        first: other.clone(),
                        second: doc.doc_id.clone(),
                    })
                }
                _ => {
                    index.aliases.insert(norm, doc.doc_id.clone());
                }
            }
        }
        index
            .series
            .entry(normalize_part(&doc.meta.series))
            .or_default()
            .push(doc.doc_id.clone());
        let tokens = tokenize(&doc_surface(&doc), &index.symbol_vocab);
        let terms: HashSet<_> = tokens.terms.into_iter().collect();
        for t in terms {
            *index.term_df.entry(t).or_default() += 1;
        }
        let syms: HashSet<_> = tokens.symbols.into_iter().collect();
        for s in syms {
            *index.symbol_df.entry(s).or_default() += 1;
        }
        index.docs.insert(doc.doc_id.clone(), doc);
    }
    Ok(index)
}
