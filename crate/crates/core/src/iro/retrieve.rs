//! Lexical tf-idf chunk scoring and tiered top-k retrieval.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{Chunk, CorpusIndex, Tokens};
use crate::po::ChunkStream;

use super::IroError;

/// Weight applied to exact symbol hits and part-number hits.
pub const SYMBOL_WEIGHT: f64 = 3.0;

/// Term-frequency saturation constant.
pub const TF_K1: f64 = 1.2;

/// `tf * (k1 + 1) / (tf + k1)`: 1 for a single hit, bounded by `k1 + 1`.
pub fn saturate(tf: usize) -> f64 {
    let tf = tf as f64;
    tf * (TF_K1 + 1.0) / (tf + TF_K1)
}

/// `y_prev + " " + q`, keeping q whole and the tail of `y_prev` when the
/// result would exceed `max_chars`. An empty `y_prev` yields `q` unchanged.
pub fn concat_query(y_prev: &str, q: &str, max_chars: usize) -> String {
    if y_prev.is_empty() {
        return q.to_string();
    }
    let room = max_chars.saturating_sub(q.chars().count() + 1);
    let n = y_prev.chars().count();
    let tail: String = y_prev.chars().skip(n.saturating_sub(room)).collect();
    if tail.is_empty() {
        q.to_string()
    } else {
        format!("{tail} {q}")
    }
}

fn counts(items: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for s in items {
        *m.entry(s.as_str()).or_insert(0) += 1;
    }
    m
}

/// Tokens of the scored surface: page-header context plus chunk text.
pub fn chunk_tokens(chunk: &Chunk, index: &CorpusIndex) -> Tokens {
    index.tokenize(&format!("{}\n{}", index.chunk_context(chunk), chunk.text))
}

fn score_tokens(query: &Tokens, surface: &Tokens, index: &CorpusIndex) -> f64 {
    let terms = counts(&surface.terms);
    let symbols = counts(&surface.symbols);
    let mut score = 0.0;
    // sorted so the float sum is identical from run to run
    let distinct_terms: BTreeSet<&str> = query.terms.iter().map(String::as_str).collect();
    for t in distinct_terms {
        if let Some(&tf) = terms.get(t) {
            let w = if index.lookup_alias(&t.to_ascii_uppercase()).is_some() { SYMBOL_WEIGHT } else { 1.0 };
            score += w * index.idf(index.term_df(t)) * saturate(tf);
        }
    }
    let distinct_symbols: BTreeSet<&str> = query.symbols.iter().map(String::as_str).collect();
    for s in distinct_symbols {
        if let Some(&tf) = symbols.get(s) {
            score += SYMBOL_WEIGHT * index.idf(index.symbol_df(s)) * saturate(tf);
        }
    }
    score
}

/// Sum over distinct query tokens present in the chunk of
/// `idf * saturate(tf)`, with symbol and part-number tokens weighted by
/// [`SYMBOL_WEIGHT`].
pub fn score_chunk(query_text: &str, chunk: &Chunk, index: &CorpusIndex) -> f64 {
    score_tokens(&index.tokenize(query_text), &chunk_tokens(chunk, index), index)
}

#[derive(Debug, Clone)]
pub struct Retrieved<'a> {
    /// Selected chunks, best first within each scanned tier.
    pub chunks: Vec<&'a Chunk>,
    pub scores: Vec<f64>,
    /// Chunks scored before stopping.
    pub scanned: usize,
    pub tiers_scanned: usize,
}

/// Scores the stream tier by tier, keeping the top `k` of each scanned tier,
/// and stops once every symbol in `need` that the corpus knows about occurs
/// in a selected chunk. Ties break by document order, then chunk index.
pub fn retrieve<'a>(
    y_prev: &str,
    q: &str,
    stream: &ChunkStream<'a>,
    k: usize,
    index: &CorpusIndex,
    need: &[String],
    max_query_chars: usize,
) -> Result<Retrieved<'a>, IroError> {
    if stream.is_empty() {
        return Err(IroError::EmptyCorpus);
    }
    let k = k.max(1);
    let query = index.tokenize(&concat_query(y_prev, q, max_query_chars));
    let mut missing: Vec<&str> = need
        .iter()
        .map(String::as_str)
        .filter(|s| index.symbol_vocab().contains(*s))
        .collect();
    let mut out = Retrieved {
        chunks: Vec::new(),
        scores: Vec::new(),
        scanned: 0,
        tiers_scanned: 0,
    };
    for tier in &stream.tiers {
        if tier.chunks.is_empty() {
            continue;
        }
        let mut scored: Vec<(f64, usize, &'a Chunk, Tokens)> = tier
            .chunks
            .iter()
            .map(|&c| {
                let toks = chunk_tokens(c, index);
                let pos = index.doc_position(&c.doc_id).unwrap_or(usize::MAX);
                (score_tokens(&query, &toks, index), pos, c, toks)
            })
            .collect();
        out.scanned += scored.len();
        out.tiers_scanned += 1;
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.chunk_index.cmp(&b.2.chunk_index))
        });
        scored.truncate(k);
        for (score, _, chunk, toks) in scored {
            missing.retain(|s| !toks.symbols.iter().any(|t| t == s));
            out.chunks.push(chunk);
            out.scores.push(score);
        }
        if missing.is_empty() {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, chunk_document, ingest_document};
    use crate::po::{build_search_plan, label_sections, prioritized_chunks, PriorityTable};

    const DOC: &str = "---\npart_number: Q1\n---\n## Features\nA small transistor for switching and amplification.\n\
        ## Electrical Characteristics\n\
        | Parameter | Symbol | Min | Typ | Max | Unit |\n\
        | DC Current Gain | h_FE | 40 | 120 | 300 | |\n\
        ## Thermal Characteristics\n\
        | Parameter | Symbol | Max | Unit |\n\
        | Junction Temperature | T_J | 150 | °C |\n";

    fn setup() -> (CorpusIndex, Vec<Chunk>) {
        let other = ingest_document("---\npart_number: Q2\n---\n## Features\nswitching\n", "q2.dst").unwrap();
        let doc = label_sections(ingest_document(DOC, "q1.dst").unwrap());
        let chunks = chunk_document(&doc, 400);
        (build_index(vec![doc, other]).unwrap(), chunks)
    }

    #[test]
    fn concatenation_rules() {
        assert_eq!(concat_query("", "Q1 h_FE", 100), "Q1 h_FE");
        assert_eq!(concat_query("prev", "q", 100), "prev q");
        assert_eq!(concat_query("abcdef", "q", 5), "def q");
        assert_eq!(concat_query("abcdef", "qqqqq", 3), "qqqqq");
    }

    #[test]
    fn no_shared_tokens_scores_zero() {
        let (index, chunks) = setup();
        assert_eq!(score_chunk("zebra", &chunks[0], &index), 0.0);
    }

    #[test]
    fn duplicate_query_tokens_count_once() {
        let (index, chunks) = setup();
        let table = chunks.iter().find(|c| c.text.contains("h_FE")).unwrap();
        assert_eq!(score_chunk("h_FE h_FE gain", table, &index), score_chunk("h_FE gain", table, &index));
    }

    #[test]
    fn symbol_hit_outscores_plain_chunk() {
        let (index, _) = setup();
        let mk = |text: &str| Chunk {
            doc_id: "q1".into(),
            section_ordinal: 1,
            chunk_index: 0,
            text: text.into(),
            table_slice: None,
        };
        let with = mk("gain h_FE");
        let without = mk("gain");
        assert!(score_chunk("Q1 h_FE gain", &with, &index) > score_chunk("Q1 h_FE gain", &without, &index));
    }

    #[test]
    fn escalation_stops_at_first_tier_with_the_symbol() {
        let (index, chunks) = setup();
        let doc = index.doc("q1").unwrap();
        let plan = build_search_plan(doc, &PriorityTable::default());
        let stream = prioritized_chunks(&plan, &chunks, true);
        let r = retrieve("", "Q1 h_FE", &stream, 4, &index, &["h_FE".into()], 4000).unwrap();
        assert_eq!(r.tiers_scanned, 1);
        assert!(r.scanned < chunks.len());
        assert!(r.chunks[0].text.contains("h_FE"));
        let flat = prioritized_chunks(&plan, &chunks, false);
        let r = retrieve("", "Q1 h_FE", &flat, 100, &index, &["h_FE".into()], 4000).unwrap();
        assert_eq!(r.chunks.len(), chunks.len());
        assert_eq!(r.scanned, chunks.len());
    }

    #[test]
    fn empty_stream_is_an_error() {
        let (index, _) = setup();
        let empty = ChunkStream { tiers: vec![] };
        assert!(matches!(retrieve("", "q", &empty, 1, &index, &[], 100), Err(IroError::EmptyCorpus)));
    }
}
