//! Runs the five technique groups over a query set and reports precision,
//! latency, improvements and effect sizes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{
    avg_response_time, cohens_d, improvement_columns, match_parameter, precision, round2, GroupStats, MetricError,
    DEFAULT_REL_TOL,
};
use super::synth::{EvalQuery, GroundTruth};
use super::EvalError;
use crate::backend::CompletionBackend;
use crate::iro::IroConfig;
use crate::pipeline::{extract, Corpus, ExtractOptions, Flags, PipelineError};
use crate::tdr::TdrConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub id: u8,
    pub flags: Flags,
}

impl GroupConfig {
    /// Group 1 is the baseline, 5 uses all techniques; 2-4 each drop one.
    pub fn standard(id: u8) -> Option<GroupConfig> {
        let (tdr, iro, po) = match id {
            1 => (false, false, false),
            2 => (true, true, false),
            3 => (true, false, true),
            4 => (false, true, true),
            5 => (true, true, true),
            _ => return None,
        };
        Some(GroupConfig {
            id,
            flags: Flags { tdr, iro, po },
        })
    }

    pub fn all() -> Vec<GroupConfig> {
        (1..=5).filter_map(GroupConfig::standard).collect()
    }

    pub fn label(&self) -> String {
        format!("Group {}", self.id)
    }

    pub fn techniques(&self) -> String {
        let f = self.flags;
        let names: Vec<&str> = [(f.tdr, "TDR"), (f.iro, "IRO"), (f.po, "PO")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        if names.is_empty() {
            "baseline".into()
        } else {
            names.join("+")
        }
    }
}

/// `1,3,5`, `2..4` or a mix such as `1,3..5`.
pub fn parse_groups(spec: &str) -> Result<Vec<GroupConfig>, EvalError> {
    let bad = || EvalError::BadGroups(spec.to_string());
    let mut ids = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = match part.split_once("..") {
            Some((a, b)) => (a.trim().parse::<u8>().map_err(|_| bad())?, b.trim().parse::<u8>().map_err(|_| bad())?),
            None => {
                let v = part.parse::<u8>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if a > b {
            return Err(bad());
        }
        for id in a..=b {
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
    }
    if ids.is_empty() {
        return Err(bad());
    }
    ids.sort_unstable();
    ids.into_iter().map(|id| GroupConfig::standard(id).ok_or_else(bad)).collect()
}

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub trials: usize,
    pub iro: IroConfig,
    pub tdr: TdrConfig,
    pub rel_tol: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            trials: 3,
            iro: IroConfig::default(),
            tdr: TdrConfig::default(),
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub query_id: String,
    pub group: u8,
    pub trial: usize,
    /// Requested parameters that came back with a value.
    pub extracted: usize,
    pub correct: usize,
    pub latency_ms: f64,
    pub scanned_chunks: usize,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    #[serde(rename = "Group")]
    pub group: String,
    #[serde(rename = "Techniques")]
    pub techniques: String,
    #[serde(rename = "Retrieval Precision (%)")]
    pub precision: Option<f64>,
    #[serde(rename = "Retrieval Latency (ms)")]
    pub latency_ms: f64,
    #[serde(rename = "Precision Improvement (%)")]
    pub precision_improvement: Option<f64>,
    #[serde(rename = "Latency Reduction (%)")]
    pub latency_reduction: Option<f64>,
    pub id: u8,
    pub extracted: usize,
    pub correct: usize,
    /// Unrounded precision.
    pub precision_raw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeRow {
    #[serde(rename = "Group Comparison")]
    pub comparison: String,
    #[serde(rename = "Tested Method")]
    pub tested_method: String,
    #[serde(rename = "Cohen's d (Precision Improvement)")]
    pub d_precision: Option<f64>,
    #[serde(rename = "Cohen's d (Latency Reduction)")]
    pub d_latency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trials: usize,
    pub queries: usize,
    pub groups: Vec<GroupRow>,
    pub effect_sizes: Vec<EffectSizeRow>,
    pub notes: Vec<String>,
    pub records: Vec<RunRecord>,
}

impl EvalReport {
    pub fn group(&self, id: u8) -> Option<&GroupRow> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn records_for(&self, id: u8) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.group == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<12} {:>14} {:>14} {:>16} {:>14}",
            "Group", "Techniques", "Precision (%)", "Latency (ms)", "Precision Impr.", "Latency Red."
        );
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{:<8} {:<12} {:>14} {:>14.2} {:>16} {:>14}",
                g.group,
                g.techniques,
                opt(g.precision),
                g.latency_ms,
                opt(g.precision_improvement),
                opt(g.latency_reduction)
            );
        }
        if !self.effect_sizes.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "{:<20} {:<8} {:>12} {:>12}", "Comparison", "Method", "d(prec)", "d(latency)");
            for e in &self.effect_sizes {
                let _ = writeln!(
                    out,
                    "{:<20} {:<8} {:>12} {:>12}",
                    e.comparison,
                    e.tested_method,
                    opt(e.d_precision),
                    opt(e.d_latency)
                );
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

fn score_query(
    q: &EvalQuery,
    truth: &GroundTruth,
    result: &crate::params::ParameterSet,
    rel_tol: f64,
) -> (usize, usize) {
    let key = q.request.condition_key();
    let mut extracted = 0;
    let mut correct = 0;
    for s in &q.request.requested_symbols {
        let Some(got) = result.answer_for(s, &key) else { continue };
        extracted += 1;
        if truth
            .expected(&q.doc_id, s, &key)
            .is_some_and(|t| match_parameter(got, t, rel_tol))
        {
            correct += 1;
        }
    }
    (extracted, correct)
}

fn run_one(
    corpus: &Corpus,
    truth: &GroundTruth,
    q: &EvalQuery,
    group: &GroupConfig,
    trial: usize,
    backend: &dyn CompletionBackend,
    settings: &EvalSettings,
) -> Result<RunRecord, EvalError> {
    let opts = ExtractOptions {
        flags: group.flags,
        iro: settings.iro.clone(),
        tdr: settings.tdr.clone(),
        accept_recommendation: true,
    };
    let start = Instant::now();
    let outcome = extract(corpus, backend, &q.request, &opts);
    let latency_ms = start.elapsed().as_secs_f64() * 1000.0;
    let mut rec = RunRecord {
        query_id: q.id.clone(),
        group: group.id,
        trial,
        extracted: 0,
        correct: 0,
        latency_ms,
        scanned_chunks: 0,
        iterations: 0,
        error: None,
    };
    match outcome {
        Ok(x) => {
            let (e, c) = score_query(q, truth, &x.result.parameters, settings.rel_tol);
            rec.extracted = e;
            rec.correct = c;
            rec.scanned_chunks = x.result.scanned_chunks;
            rec.iterations = x.result.iterations_used;
        }
        Err(PipelineError::NotFound { .. }) => rec.error = Some("part not found".into()),
        Err(e) => return Err(e.into()),
    }
    Ok(rec)
}

fn method_for(id: u8) -> Option<&'static str> {
    match id {
        2 => Some("PO"),
        3 => Some("IRO"),
        4 => Some("TDR"),
        1 => Some("ALL"),
        _ => None,
    }
}

/// Per-run precision samples (runs without extractions are skipped) and
/// latency samples.
fn samples<'a>(records: impl Iterator<Item = &'a RunRecord>) -> (Vec<f64>, Vec<f64>) {
    let mut p = Vec::new();
    let mut l = Vec::new();
    for r in records {
        if let Ok(v) = precision(r.correct, r.extracted) {
            p.push(v);
        }
        l.push(r.latency_ms);
    }
    (p, l)
}

fn effect(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    cohens_d(&GroupStats::from_samples(x)?, &GroupStats::from_samples(y)?)
}

pub fn run_ablation(
    corpus: &Corpus,
    truth: &GroundTruth,
    queries: &[EvalQuery],
    groups: &[GroupConfig],
    backend: &dyn CompletionBackend,
    settings: &EvalSettings,
) -> Result<EvalReport, EvalError> {
    if settings.trials == 0 {
        return Err(EvalError::NoTrials);
    }
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let mut records = Vec::new();
    for trial in 0..settings.trials {
        for g in groups {
            for q in queries {
                records.push(run_one(corpus, truth, q, g, trial, backend, settings)?);
            }
        }
    }

    let mut stats: BTreeMap<u8, (Option<f64>, f64, usize, usize)> = BTreeMap::new();
    for g in groups {
        let recs: Vec<&RunRecord> = records.iter().filter(|r| r.group == g.id).collect();
        let e: usize = recs.iter().map(|r| r.extracted).sum();
        let c: usize = recs.iter().map(|r| r.correct).sum();
        let lat = avg_response_time(&recs.iter().map(|r| r.latency_ms).collect::<Vec<_>>())?;
        stats.insert(g.id, (precision(c, e).ok(), lat, e, c));
    }
    let mut notes = Vec::new();
    let base_id = if stats.contains_key(&1) { 1 } else { groups[0].id };
    let (p0, l0, _, _) = stats[&base_id];
    if base_id != 1 {
        notes.push(format!("improvements are relative to Group {base_id}"));
    }
    let rows = groups
        .iter()
        .map(|g| {
            let (p, lat, e, c) = stats[&g.id];
            let imp = p.zip(p0).and_then(|(p, p0)| improvement_columns(p, lat, p0, l0).ok());
            let lat_red = improvement_columns(1.0, lat, 1.0, l0).ok().map(|i| i.latency_reduction);
            GroupRow {
                group: g.label(),
                techniques: g.techniques(),
                precision: p.map(round2),
                latency_ms: round2(lat),
                precision_improvement: imp.map(|i| i.precision_improvement),
                latency_reduction: lat_red,
                id: g.id,
                extracted: e,
                correct: c,
                precision_raw: p,
            }
        })
        .collect();

    let mut effect_sizes = Vec::new();
    if settings.trials < 2 {
        notes.push("effect sizes need at least two trials; table omitted".into());
    } else if stats.contains_key(&5) {
        let (p5, l5) = samples(records.iter().filter(|r| r.group == 5));
        for g in [2u8, 3, 4, 1] {
            if !stats.contains_key(&g) {
                continue;
            }
            let (pg, lg) = samples(records.iter().filter(|r| r.group == g));
            let dp = effect(&p5, &pg);
            let dl = effect(&lg, &l5);
            let note = [("precision", &dp), ("latency", &dl)]
                .iter()
                .filter_map(|(what, r)| r.as_ref().err().map(|e| format!("{what}: {e}")))
                .collect::<Vec<_>>();
            effect_sizes.push(EffectSizeRow {
                comparison: format!("Group 5 vs Group {g}"),
                tested_method: method_for(g).unwrap_or("?").into(),
                d_precision: dp.ok().map(round2),
                d_latency: dl.ok().map(round2),
                note: (!note.is_empty()).then(|| note.join("; ")),
            });
        }
    }

    Ok(EvalReport {
        trials: settings.trials,
        queries: queries.len(),
        groups: rows,
        effect_sizes,
        notes,
        records,
    })
}
