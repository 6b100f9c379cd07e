//! Part-number resolution: exact alias, series expansion, then Levenshtein
//! fuzzy matching with ranked recommendations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_part, CorpusIndex};

/// Edit distance over Unicode scalar values (two-row dynamic programming).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - d / max(len)`; two empty strings are identical.
pub fn similarity(a: &str, b: &str, distance: usize) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        1.0
    } else {
        1.0 - distance as f64 / longest as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelQuery {
    pub raw_input: String,
    pub normalized: String,
}

impl ModelQuery {
    pub fn new(raw: &str) -> Option<ModelQuery> {
        let normalized = normalize_part(raw);
        (!normalized.is_empty()).then(|| ModelQuery {
            raw_input: raw.to_string(),
            normalized,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchSource {
    Exact,
    Series,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub doc_id: String,
    pub matched_alias: String,
    pub edit_distance: usize,
    pub similarity: f64,
    pub source: MatchSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResolveOutcome {
    Exact(String),
    SeriesExpansion(Vec<MatchCandidate>),
    Recommendations(Vec<MatchCandidate>),
    NotFound,
}

impl ResolveOutcome {
    /// The document a batch run proceeds with: the exact hit or the
    /// top-ranked candidate.
    pub fn best_doc(&self) -> Option<&str> {
        match self {
            ResolveOutcome::Exact(d) => Some(d),
            ResolveOutcome::SeriesExpansion(c) | ResolveOutcome::Recommendations(c) => {
                c.first().map(|c| c.doc_id.as_str())
            }
            ResolveOutcome::NotFound => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TdrConfig {
    pub max_distance: usize,
    pub max_recommendations: usize,
}

impl Default for TdrConfig {
    fn default() -> Self {
        TdrConfig {
            max_distance: 2,
            max_recommendations: 5,
        }
    }
}

/// Stable sort by descending similarity, then ascending alias.
pub fn rank_candidates(mut cands: Vec<MatchCandidate>) -> Vec<MatchCandidate> {
    cands.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.matched_alias.cmp(&b.matched_alias))
    });
    cands
}

pub fn resolve_model(query: &ModelQuery, index: &CorpusIndex, cfg: &TdrConfig) -> ResolveOutcome {
    let q = &query.normalized;
    if let Some(doc) = index.lookup_alias(q) {
        return ResolveOutcome::Exact(doc.to_string());
    }
    if let Some(members) = index.series_members(q) {
        let cands = members
            .iter()
            .filter_map(|id| index.doc(id))
            .map(|doc| {
                let alias = normalize_part(&doc.meta.part_number);
                let d = levenshtein(q, &alias);
                MatchCandidate {
                    doc_id: doc.doc_id.clone(),
                    similarity: similarity(q, &alias, d),
                    matched_alias: alias,
                    edit_distance: d,
                    source: MatchSource::Series,
                }
            })
            .collect::<Vec<_>>();
        if !cands.is_empty() {
            return ResolveOutcome::SeriesExpansion(rank_candidates(cands));
        }
    }
    // best alias per document
    let mut best: HashMap<&str, MatchCandidate> = HashMap::new();
    for (alias, doc_id) in index.aliases() {
        let d = levenshtein(q, alias);
        if d > cfg.max_distance {
            continue;
        }
        let cand = MatchCandidate {
            doc_id: doc_id.to_string(),
            matched_alias: alias.to_string(),
            edit_distance: d,
            similarity: similarity(q, alias, d),
            source: MatchSource::Fuzzy,
        };
        let replace = match best.get(doc_id) {
            Some(cur) => {
                (cand.similarity, std::cmp::Reverse(&cand.matched_alias))
                    > (cur.similarity, std::cmp::Reverse(&cur.matched_alias))
            }
            None => true,
        };
        if replace {
            best.insert(doc_id, cand);
        }
    }
    if best.is_empty() {
        return ResolveOutcome::NotFound;
    }
    let mut ranked = rank_candidates(best.into_values().collect());
    ranked.truncate(cfg.max_recommendations.max(1));
    ResolveOutcome::Recommendations(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, ingest_document};

    fn cand(alias: &str, sim: f64) -> MatchCandidate {
        MatchCandidate {
            doc_id: alias.to_lowercase(),
            matched_alias: alias.into(),
            edit_distance: 0,
            similarity: sim,
            source: MatchSource::Fuzzy,
        }
    }

    fn index() -> CorpusIndex {
        let mk = |id: &str, part: &str, series: &str| {
            ingest_document(
                &format!("---\npart_number: {part}\nseries: {series}\n---\n## Features\ntext\n"),
                &format!("{id}.dst"),
            )
            .unwrap()
        };
        build_index(vec![
            mk("p2n2222a", "P2N2222A", "P2N22"),
            mk("p2n2219a", "P2N2219A", "P2N22"),
            mk("p2n2218a", "P2N2218A", "P2N22"),
            mk("2n7002e", "2N7002E", "2N7002"),
        ])
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(levenshtein("P2N2222A", "P2N2222A"), 0);
        assert_eq!(levenshtein("", "ABC"), 3);
        assert_eq!(levenshtein("P2N222A", "P2N2222A"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn ranking_rules() {
        assert_eq!(rank_candidates(vec![cand("A", 0.5)]), vec![cand("A", 0.5)]);
        let r = rank_candidates(vec![cand("X", 0.9), cand("Y", 0.95)]);
        assert_eq!(r[0].matched_alias, "Y");
        let r = rank_candidates(vec![cand("B", 0.9), cand("A", 0.9)]);
        assert_eq!(r[0].matched_alias, "A");
        assert_eq!(rank_candidates(r.clone()), r);
    }

    #[test]
    fn exact_hit() {
        let q = ModelQuery::new("p2n-2222a").unwrap();
        assert_eq!(resolve_model(&q, &index(), &TdrConfig::default()), ResolveOutcome::Exact("p2n2222a".into()));
    }

    #[test]
    fn series_expands_to_all_members() {
        let q = ModelQuery::new("P2N22").unwrap();
        match resolve_model(&q, &index(), &TdrConfig::default()) {
            ResolveOutcome::SeriesExpansion(c) => {
                assert_eq!(c.len(), 3);
                assert!(c.iter().all(|c| c.source == MatchSource::Series));
                let aliases: Vec<_> = c.iter().map(|c| c.matched_alias.as_str()).collect();
                assert_eq!(aliases, ["P2N2218A", "P2N2219A", "P2N2222A"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn typo_recommends_nearest() {
        let q = ModelQuery::new("P2N2223A").unwrap();
        match resolve_model(&q, &index(), &TdrConfig::default()) {
            ResolveOutcome::Recommendations(c) => {
                assert_eq!(c[0].matched_alias, "P2N2222A");
                assert_eq!(c[0].edit_distance, 1);
                assert!(c.iter().all(|c| c.edit_distance <= 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn far_query_not_found() {
        let q = ModelQuery::new("ZZZZZ").unwrap();
        assert_eq!(resolve_model(&q, &index(), &TdrConfig::default()), ResolveOutcome::NotFound);
        assert!(ModelQuery::new(" - ").is_none());
    }
}
