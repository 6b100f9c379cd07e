//! End-to-end extraction: resolve the part, build the chunk stream for the
//! enabled techniques, run the iterative loop.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::CompletionBackend;
use crate::corpus::{build_index, chunk_document, load_dir, Chunk, CorpusError, CorpusIndex, DatasheetDoc};
use crate::devicegen::{classify_device, derive_secondary, retrieval_symbols, DeviceClass};
use crate::iro::{ExtractionRequest, ExtractionResult, IroConfig, IroContext, IroError, IroSession};
use crate::po::{build_search_plan, label_sections, prioritized_chunks, ChunkStream, PriorityTable, SearchPlan};
use crate::tdr::{resolve_model, MatchCandidate, ModelQuery, ResolveOutcome, TdrConfig};

pub const DEFAULT_CHUNK_CHARS: usize = 600;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("part number `{query}` not found")]
    NotFound { query: String, recommendations: Vec<MatchCandidate> },
    #[error(transparent)]
    Iro(#[from] IroError),
}

/// An indexed corpus with section labels, chunks and search plans.
pub struct Corpus {
    index: CorpusIndex,
    chunks: HashMap<String, Vec<Chunk>>,
    plans: HashMap<String, SearchPlan>,
}

impl Corpus {
    pub fn from_docs(docs: Vec<DatasheetDoc>, priorities: &PriorityTable, chunk_chars: usize) -> Result<Corpus, CorpusError> {
        let docs: Vec<DatasheetDoc> = docs.into_iter().map(label_sections).collect();
        let mut chunks = HashMap::new();
        let mut plans = HashMap::new();
        for d in &docs {
            chunks.insert(d.doc_id.clone(), chunk_document(d, chunk_chars));
            plans.insert(d.doc_id.clone(), build_search_plan(d, priorities));
        }
        Ok(Corpus {
            index: build_index(docs)?,
            chunks,
            plans,
        })
    }

    /// Loads a directory; per-file ingestion errors are returned alongside.
    pub fn load(dir: &Path, priorities: &PriorityTable, chunk_chars: usize) -> Result<(Corpus, Vec<CorpusError>), CorpusError> {
        let (docs, errors) = load_dir(dir)?;
        Ok((Corpus::from_docs(docs, priorities, chunk_chars)?, errors))
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn chunks(&self, doc_id: &str) -> &[Chunk] {
        self.chunks.get(doc_id).map_or(&[], Vec::as_slice)
    }

    pub fn plan(&self, doc_id: &str) -> Option<&SearchPlan> {
        self.plans.get(doc_id)
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.values().map(Vec::len).sum()
    }

    /// Chunk stream over the given documents (in corpus order).
    pub fn stream<'a>(&'a self, doc_ids: &[&str], po: bool) -> ChunkStream<'a> {
        ChunkStream::merge(
            doc_ids
                .iter()
                .filter_map(|id| Some(prioritized_chunks(self.plans.get(*id)?, self.chunks.get(*id)?, po)))
                .collect(),
        )
    }

    pub fn all_doc_ids(&self) -> Vec<&str> {
        self.index.docs().map(|d| d.doc_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub tdr: bool,
    pub iro: bool,
    pub po: bool,
}

impl Flags {
    pub const ALL: Flags = Flags { tdr: true, iro: true, po: true };
    pub const NONE: Flags = Flags { tdr: false, iro: false, po: false };
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub flags: Flags,
    pub iro: IroConfig,
    pub tdr: TdrConfig,
    /// Continue with the top fuzzy candidate instead of failing.
    pub accept_recommendation: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            flags: Flags::ALL,
            iro: IroConfig::default(),
            tdr: TdrConfig::default(),
            accept_recommendation: true,
        }
    }
}

/// The part of an extraction that precedes the iterative loop.
pub struct Prepared<'a> {
    pub resolution: Option<ResolveOutcome>,
    /// Documents the chunk stream covers.
    pub doc_ids: Vec<String>,
    pub class: Option<DeviceClass>,
    /// Request sent to the loop: resolved part number, expanded symbols.
    pub request: ExtractionRequest,
    pub session: IroSession<'a>,
}

pub fn prepare<'a>(
    corpus: &'a Corpus,
    backend: &'a dyn CompletionBackend,
    req: &ExtractionRequest,
    opts: &ExtractOptions,
) -> Result<Prepared<'a>, PipelineError> {
    let not_found = |recommendations| PipelineError::NotFound {
        query: req.part_number.clone(),
        recommendations,
    };
    let mut request = req.clone();
    request.requested_symbols = retrieval_symbols(&req.requested_symbols);
    let (resolution, doc_ids) = if opts.flags.tdr {
        let q = ModelQuery::new(&req.part_number).ok_or_else(|| not_found(vec![]))?;
        let outcome = resolve_model(&q, corpus.index(), &opts.tdr);
        let ids: Vec<String> = match &outcome {
            ResolveOutcome::Exact(id) => vec![id.clone()],
            ResolveOutcome::SeriesExpansion(c) => c.iter().map(|c| c.doc_id.clone()).collect(),
            ResolveOutcome::Recommendations(c) if opts.accept_recommendation => vec![c[0].doc_id.clone()],
            ResolveOutcome::Recommendations(c) => return Err(not_found(c.clone())),
            ResolveOutcome::NotFound => return Err(not_found(vec![])),
        };
        if let [only] = ids.as_slice() {
            if let Some(d) = corpus.index().doc(only) {
                request.part_number = d.meta.part_number.clone();
            }
        }
        (Some(outcome), ids)
    } else {
        (None, corpus.all_doc_ids().into_iter().map(String::from).collect())
    };
    let class = match doc_ids.as_slice() {
        [only] => corpus.index().doc(only).map(classify_device),
        _ => None,
    };
    let mut iro_cfg = opts.iro.clone();
    if !opts.flags.iro {
        iro_cfg.max_iterations = 1;
    }
    let ids: Vec<&str> = doc_ids.iter().map(String::as_str).collect();
    let ctx = IroContext {
        index: corpus.index(),
        stream: corpus.stream(&ids, opts.flags.po),
        backend,
        derive: Some(derive_secondary),
    };
    let session = IroSession::new(request.clone(), ctx, iro_cfg)?;
    Ok(Prepared {
        resolution,
        doc_ids,
        class,
        request,
        session,
    })
}

pub struct Extraction {
    pub resolution: Option<ResolveOutcome>,
    pub doc_ids: Vec<String>,
    pub class: Option<DeviceClass>,
    pub request: ExtractionRequest,
    pub result: ExtractionResult,
}

/// Batch extraction: no condition prompting.
pub fn extract(
    corpus: &Corpus,
    backend: &dyn CompletionBackend,
    req: &ExtractionRequest,
    opts: &ExtractOptions,
) -> Result<Extraction, PipelineError> {
    let mut p = prepare(corpus, backend, req, opts)?;
    let result = p.session.run()?;
    Ok(Extraction {
        resolution: p.resolution,
        doc_ids: p.doc_ids,
        class: p.class,
        request: p.request,
        result,
    })
}
