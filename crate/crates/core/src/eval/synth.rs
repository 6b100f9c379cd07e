//! Seeded synthetic datasheet corpus with ground truth and queries.
//!
//! Every document carries an Absolute Maximum Ratings decoy table and an
//! Electrical Characteristics table whose Typ column holds the truth. Some
//! documents and queries carry one planted difficulty:
//!
//! * `PartTypo`: the query part number is a near-miss of the real one.
//! * `CurvesTable`: a Typical Performance Curves table repeats the symbol at
//!   several junction temperatures.
//! * `LimitsTable`: a Min/Max-only limits table precedes the main one.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fixtures;
use crate::corpus::{build_index, ingest_document, normalize_part, Column, CorpusError, CorpusIndex, DatasheetDoc};
use crate::iro::{parse_condition_pairs, ExtractionRequest};
use crate::params::{ParamEntry, ParamValue};
use crate::tdr::{resolve_model, ModelQuery, ResolveOutcome, TdrConfig};
use crate::units::{apply_exponent, split_unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Clean,
    PartTypo,
    CurvesTable,
    LimitsTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub id: String,
    /// Document the query is about.
    pub doc_id: String,
    pub difficulty: Difficulty,
    pub request: ExtractionRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub doc_id: String,
    pub entry: ParamEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn push(&mut self, doc_id: &str, entry: ParamEntry) {
        self.records.push(TruthRecord {
            doc_id: doc_id.to_string(),
            entry,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_doc<'a>(&'a self, doc_id: &'a str) -> impl Iterator<Item = &'a ParamEntry> + 'a {
        self.records.iter().filter(move |r| r.doc_id == doc_id).map(|r| &r.entry)
    }

    /// Entry under the given condition key, else the only entry for the symbol.
    pub fn expected(&self, doc_id: &str, symbol: &str, condition_key: &str) -> Option<&ParamEntry> {
        let all: Vec<&ParamEntry> = self
            .records
            .iter()
            .filter(|r| r.doc_id == doc_id && r.entry.symbol == symbol)
            .map(|r| &r.entry)
            .collect();
        if let Some(e) = all.iter().find(|e| e.conditions == condition_key) {
            return Some(e);
        }
        match all.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Generated documents, fixtures excluded.
    pub n_docs: usize,
    /// Probability that a Typ value is flanked by both Min and Max decoys.
    pub distractor_rate: f64,
    /// Planted difficulties as a share of all queries.
    pub typo_rate: f64,
    pub curves_rate: f64,
    pub limits_rate: f64,
    pub include_fixtures: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_docs: 24,
            distractor_rate: 0.6,
            typo_rate: 0.06,
            curves_rate: 0.11,
            limits_rate: 0.16,
            include_fixtures: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    /// (file name, contents), sorted by file name.
    pub files: Vec<(String, String)>,
    pub truth: GroundTruth,
    pub queries: Vec<EvalQuery>,
}

impl SynthCorpus {
    pub fn docs(&self) -> Result<Vec<DatasheetDoc>, CorpusError> {
        self.files.iter().map(|(name, text)| ingest_document(text, name)).collect()
    }

    /// Writes the datasheets plus `truth.json` and `queries.json`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            fs::write(dir.join(name), text)?;
        }
        let json = |v: serde_json::Result<String>| v.map_err(std::io::Error::other);
        fs::write(dir.join("truth.json"), json(serde_json::to_string_pretty(&self.truth))?)?;
        fs::write(dir.join("queries.json"), json(serde_json::to_string_pretty(&self.queries))?)?;
        Ok(())
    }

    pub fn count(&self, d: Difficulty) -> usize {
        self.queries.iter().filter(|q| q.difficulty == d).count()
    }
}

pub fn gen_synthetic_corpus(seed: u64, n_docs: usize, distractor_rate: f64) -> SynthCorpus {
    generate(&SynthConfig {
        seed,
        n_docs,
        distractor_rate,
        ..SynthConfig::default()
    })
}

struct SymSpec {
    symbol: &'static str,
    name: &'static str,
    unit: &'static str,
    lo: f64,
    hi: f64,
    decimals: usize,
    conditions: &'static str,
}

struct LimitSpec {
    name: &'static str,
    symbol: &'static str,
    lo: f64,
    hi: f64,
    unit: &'static str,
}

struct FamilySpec {
    prefix: &'static str,
    keywords: &'static str,
    feature: &'static str,
    packages: &'static [&'static str],
    bjt: bool,
    symbols: &'static [SymSpec],
    abs_max: &'static [LimitSpec],
}

const fn sym(
    symbol: &'static str,
    name: &'static str,
    unit: &'static str,
    lo: f64,
    hi: f64,
    decimals: usize,
    conditions: &'static str,
) -> SymSpec {
    SymSpec {
        symbol,
        name,
        unit,
        lo,
        hi,
        decimals,
        conditions,
    }
}

const fn lim(name: &'static str, symbol: &'static str, lo: f64, hi: f64, unit: &'static str) -> LimitSpec {
    LimitSpec { name, symbol, lo, hi, unit }
}

const BJT_SYMBOLS: &[SymSpec] = &[
    sym("V_CEsat", "Collector-Emitter Saturation Voltage", "V", 0.08, 0.35, 2, "I_C=50mA, I_B=5mA"),
    sym("V_BEsat", "Base-Emitter Saturation Voltage", "V", 0.65, 0.95, 2, "I_C=50mA, I_B=5mA"),
    sym("f_T", "Current-Gain Bandwidth Product", "MHz", 150.0, 450.0, 0, "I_C=10mA, V_CE=20V"),
    sym("C_ob", "Output Capacitance", "pF", 2.0, 9.0, 1, "V_CB=10V, f=1MHz"),
];

const BJT_LIMITS: &[LimitSpec] = &[
    lim("Collector-Emitter Voltage", "V_CEO", 30.0, 80.0, "V"),
    lim("Collector-Base Voltage", "V_CBO", 60.0, 120.0, "V"),
    lim("Collector Current", "I_C", 200.0, 800.0, "mA"),
];

const FAMILIES: &[FamilySpec] = &[
    FamilySpec {
        prefix: "QN",
        keywords: "NPN, bipolar, small signal",
        feature: "General purpose NPN bipolar junction transistor for switching and linear amplification.",
        packages: &["TO-92 through-hole package, bulk.", "SOT-23 surface mount package, tape and reel."],
        bjt: true,
        symbols: BJT_SYMBOLS,
        abs_max: BJT_LIMITS,
    },
    FamilySpec {
        prefix: "FN",
        keywords: "NMOS, N-channel, enhancement mode",
        feature: "N-channel enhancement mode field effect transistor for load switching and level shifting.",
        packages: &["SOT-23 surface mount package, tape and reel.", "SOT-323 surface mount package."],
        bjt: false,
        symbols: &[
            sym("VTO", "Gate Threshold Voltage", "V", 0.9, 2.6, 2, "V_DS=V_GS, I_D=250uA"),
            sym("BETA", "Conductance Parameter", "A/V^2", 0.05, 0.9, 2, "V_DS=10V"),
            sym("Ciss", "Input Capacitance", "pF", 20.0, 480.0, 0, "V_DS=25V, f=1MHz"),
            sym("RDS_on", "Static Drain-Source On-Resistance", "Ohm", 0.4, 5.0, 2, "V_GS=10V, I_D=500mA"),
            sym("g_fs", "Forward Transconductance", "mS", 80.0, 600.0, 0, "V_DS=10V, I_D=200mA"),
        ],
        abs_max: &[
            lim("Drain-Source Voltage", "V_DS", 30.0, 100.0, "V"),
            lim("Gate-Source Voltage", "V_GS", 12.0, 20.0, "V"),
            lim("Continuous Drain Current", "I_D", 100.0, 500.0, "mA"),
        ],
    },
    FamilySpec {
        prefix: "DS",
        keywords: "DIODE, switching, rectifier",
        feature: "Fast switching silicon diode for signal rectification and clamping.",
        packages: &["SOD-123 surface mount package.", "DO-35 axial glass package."],
        bjt: false,
        symbols: &[
            sym("V_F", "Forward Voltage", "V", 0.62, 1.05, 2, "I_F=10mA"),
            sym("BV", "Reverse Breakdown Voltage", "V", 75.0, 1000.0, 0, "I_R=5uA"),
            sym("I_R", "Reverse Leakage Current", "nA", 5.0, 500.0, 0, "V_R=50V"),
            sym("C_j", "Junction Capacitance", "pF", 1.0, 15.0, 1, "V_R=4V, f=1MHz"),
            sym("t_rr", "Reverse Recovery Time", "ns", 2.0, 50.0, 0, "I_F=10mA, I_RR=1mA"),
        ],
        abs_max: &[
            lim("Repetitive Peak Reverse Voltage", "V_RRM", 75.0, 1000.0, "V"),
            lim("Average Rectified Current", "I_FAV", 150.0, 1000.0, "mA"),
        ],
    },
    FamilySpec {
        prefix: "LB",
        keywords: "LED, indicator, optoelectronic",
        feature: "High brightness indicator LED with a diffused lens for panel and status lighting.",
        packages: &["T-1 3/4 through-hole package, 5 mm.", "PLCC-2 surface mount package."],
        bjt: false,
        symbols: &[
            sym("V_F", "Forward Voltage", "V", 1.8, 3.4, 2, "I_F=20mA"),
            sym("BV", "Reverse Breakdown Voltage", "V", 5.0, 12.0, 1, "I_R=10uA"),
            sym("C_j", "Junction Capacitance", "pF", 10.0, 60.0, 0, "V_R=0V, f=1MHz"),
            sym("I_V", "Luminous Intensity", "mcd", 200.0, 9000.0, 0, "I_F=20mA"),
        ],
        abs_max: &[
            lim("Continuous Forward Current", "I_F", 20.0, 50.0, "mA"),
            lim("Reverse Voltage", "V_R", 5.0, 5.0, "V"),
            lim("Power Dissipation", "P_D", 60.0, 120.0, "mW"),
        ],
    },
    FamilySpec {
        prefix: "QP",
        keywords: "PNP, bipolar, small signal",
        feature: "General purpose PNP bipolar junction transistor, complementary pair device.",
        packages: &["TO-92 through-hole package, bulk.", "SOT-23 surface mount package, tape and reel."],
        bjt: true,
        symbols: BJT_SYMBOLS,
        abs_max: BJT_LIMITS,
    },
];

const H_FE_ROWS: &[(&str, f64, f64)] = &[
    ("I_C=0.1mA, V_CE=10V", 60.0, 140.0),
    ("I_C=10mA, V_CE=10V", 120.0, 260.0),
    ("I_C=100mA, V_CE=10V", 80.0, 200.0),
];

const MANUFACTURERS: &[&str] = &[
    "Northfield Semiconductor",
    "Keystone Devices",
    "Larkspur Micro",
    "Harrow Electronics",
];

fn fmt_dec(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn dash(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("-")
}

#[derive(Clone)]
struct Row {
    name: String,
    symbol: String,
    min: Option<String>,
    typ: Option<String>,
    max: Option<String>,
    unit: String,
    conditions: String,
}

impl Row {
    fn render(&self) -> String {
        format!(
            "| {} | {} | {} | {} | {} | {} | {} |",
            self.name,
            self.symbol,
            dash(&self.min),
            dash(&self.typ),
            dash(&self.max),
            self.unit,
            if self.conditions.is_empty() { "-" } else { &self.conditions }
        )
    }

    fn truth(&self) -> Option<ParamEntry> {
        let typ: f64 = self.typ.as_deref()?.parse().ok()?;
        let (exp, unit) = split_unit(self.unit.trim_start_matches('-'));
        Some(ParamEntry::new(
            &self.symbol,
            &self.conditions,
            ParamValue::Scalar(apply_exponent(typ, exp)),
            &unit,
        ))
    }
}

const FULL_HEADER: &str = "| Parameter | Symbol | Min | Typ | Max | Unit | Conditions |";

/// A Typ value with optional Min/Max decoys.
fn typ_row(rng: &mut ChaCha8Rng, s: &SymSpec, distractor_rate: f64, force_both: bool) -> Row {
    let typ_v: f64 = fmt_dec(rng.gen_range(s.lo..s.hi), s.decimals).parse().unwrap();
    let typ = fmt_dec(typ_v, s.decimals);
    let decoy = |v: f64| {
        let d = fmt_dec(v, s.decimals);
        (d != typ && v > 0.0).then_some(d)
    };
    let min = decoy(typ_v * rng.gen_range(0.55..0.85));
    let max = decoy(typ_v * rng.gen_range(1.2..1.7));
    let (keep_min, keep_max) = if force_both || rng.gen_bool(distractor_rate) {
        (true, true)
    } else {
        (rng.gen_bool(0.5), rng.gen_bool(0.5))
    };
    Row {
        name: s.name.into(),
        symbol: s.symbol.into(),
        min: min.filter(|_| keep_min),
        typ: Some(typ),
        max: max.filter(|_| keep_max),
        unit: s.unit.into(),
        conditions: s.conditions.into(),
    }
}

struct DocPlan {
    part: String,
    series: String,
    family: usize,
    /// Planted symbol and difficulty for the first query.
    plant: Option<(Difficulty, &'static SymSpec)>,
}

struct DocOut {
    doc_id: String,
    text: String,
    truth: Vec<ParamEntry>,
    /// Symbols a query may ask for, h_FE condition rows as (h_FE, conds).
    askable: Vec<(String, String)>,
}

fn render_doc(rng: &mut ChaCha8Rng, plan: &DocPlan, distractor_rate: f64) -> DocOut {
    let fam = &FAMILIES[plan.family];
    let mut text = String::new();
    text.push_str("---\n");
    text.push_str(&format!("part_number: {}\n", plan.part));
    text.push_str(&format!("series: {}\n", plan.series));
    text.push_str(&format!("manufacturer: {}\n", MANUFACTURERS.choose(rng).unwrap()));
    text.push_str(&format!("keywords: {}\n", fam.keywords));
    text.push_str(&format!("aliases: {}, {}-TR\n", plan.part, plan.part));
    text.push_str("---\n");
    text.push_str(&format!("## Features\n{}\n\n", fam.feature));

    text.push_str("## Absolute Maximum Ratings\n| Parameter | Symbol | Max | Unit |\n");
    for l in fam.abs_max {
        let v = if l.lo < l.hi { rng.gen_range(l.lo..l.hi) } else { l.lo };
        text.push_str(&format!("| {} | {} | {} | {} |\n", l.name, l.symbol, fmt_dec(v, 0), l.unit));
    }
    text.push('\n');

    let mut rows = Vec::new();
    let mut askable = Vec::new();
    if fam.bjt {
        rows.push(Row {
            name: "DC Current Gain".into(),
            symbol: "h_FE".into(),
            min: Some(fmt_dec(rng.gen_range(30.0..60.0), 0)),
            typ: None,
            max: Some(fmt_dec(rng.gen_range(250.0..400.0), 0)),
            unit: "-".into(),
            conditions: String::new(),
        });
        for &(conds, lo, hi) in H_FE_ROWS {
            let spec = SymSpec {
                symbol: "h_FE",
                name: "DC Current Gain",
                unit: "-",
                lo,
                hi,
                decimals: 0,
                conditions: conds,
            };
            let mut r = typ_row(rng, &spec, distractor_rate, false);
            r.unit = "-".into();
            rows.push(r);
            askable.push(("h_FE".to_string(), conds.to_string()));
        }
    }
    for s in fam.symbols {
        let force = plan.plant.is_some_and(|(d, p)| d == Difficulty::LimitsTable && p.symbol == s.symbol);
        rows.push(typ_row(rng, s, distractor_rate, force));
        askable.push((s.symbol.to_string(), String::new()));
    }

    if let Some((Difficulty::LimitsTable, s)) = plan.plant {
        let main = rows.iter().find(|r| r.symbol == s.symbol).unwrap();
        text.push_str("## Electrical Characteristics (Guaranteed Limits)\n");
        text.push_str("| Parameter | Symbol | Min | Max | Unit |\n");
        text.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n\n",
            main.name,
            main.symbol,
            dash(&main.min),
            dash(&main.max),
            main.unit
        ));
    }

    text.push_str("## Electrical Characteristics (TA = 25°C)\n");
    text.push_str(FULL_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.render());
        text.push('\n');
    }
    text.push('\n');

    if let Some((Difficulty::CurvesTable, s)) = plan.plant {
        let main = rows.iter().find(|r| r.symbol == s.symbol).unwrap();
        let base: f64 = main.typ.as_deref().unwrap().parse().unwrap();
        text.push_str("## Typical Performance Curves\n");
        text.push_str("Temperature dependence measured on a characterization lot.\n");
        text.push_str(FULL_HEADER);
        text.push('\n');
        for (t, f) in [("-40", 0.82), ("25", 0.97), ("85", 1.12), ("125", 1.27)] {
            let v = fmt_dec(base * f, s.decimals + 1);
            text.push_str(&format!(
                "| {} vs temperature | {} | - | {} | - | {} | T_J={}°C |\n",
                s.name, s.symbol, v, s.unit, t
            ));
        }
        text.push('\n');
    }

    text.push_str("## Thermal Characteristics\n| Parameter | Symbol | Max | Unit |\n");
    text.push_str(&format!(
        "| Thermal Resistance, Junction to Ambient | R_thJA | {} | °C/W |\n\n",
        fmt_dec(rng.gen_range(150.0..400.0), 0)
    ));
    text.push_str(&format!("## Package Information\n{}\n", fam.packages.choose(rng).unwrap()));

    DocOut {
        doc_id: plan.part.to_lowercase(),
        text,
        truth: rows.iter().filter_map(Row::truth).collect(),
        askable,
    }
}

fn part_numbers(rng: &mut ChaCha8Rng, n_docs: usize) -> Vec<(String, String, usize)> {
    let mut out = Vec::with_capacity(n_docs);
    let mut used = HashSet::new();
    let mut per_family = vec![0usize; FAMILIES.len()];
    let mut series_digits: Vec<String> = vec![String::new(); FAMILIES.len()];
    for i in 0..n_docs {
        let f = i % FAMILIES.len();
        let k = per_family[f];
        per_family[f] += 1;
        if k % 2 == 0 {
            loop {
                let d = format!("{:03}", rng.gen_range(100..1000));
                if used.insert(format!("{}{}", FAMILIES[f].prefix, d)) {
                    series_digits[f] = d;
                    break;
                }
            }
        }
        let series = format!("{}{}", FAMILIES[f].prefix, series_digits[f]);
        let variant = if k % 2 == 0 { rng.gen_range(0..5) } else { rng.gen_range(5..10) };
        let suffix = ['A', 'B', 'E', 'K'].choose(rng).unwrap();
        out.push((format!("{series}{variant}{suffix}"), series, f));
    }
    out
}

/// A near-miss spelling that fuzzy resolution maps back to `doc_id` alone.
fn typo_for(rng: &mut ChaCha8Rng, part: &str, doc_id: &str, index: &CorpusIndex) -> Option<String> {
    let chars: Vec<char> = part.chars().collect();
    let mut cands = Vec::new();
    for i in 2..chars.len() {
        let pool: Vec<char> = if chars[i].is_ascii_digit() {
            ('0'..='9').collect()
        } else {
            ('A'..='Z').collect()
        };
        for c in pool {
            if c != chars[i] {
                let mut t = chars.clone();
                t[i] = c;
                cands.push(t.into_iter().collect::<String>());
            }
        }
    }
    cands.shuffle(rng);
    let cfg = TdrConfig::default();
    cands.into_iter().find(|t| {
        let Some(q) = ModelQuery::new(t) else { return false };
        match resolve_model(&q, index, &cfg) {
            ResolveOutcome::Recommendations(c) => {
                c[0].doc_id == doc_id && c.get(1).is_none_or(|n| n.similarity < c[0].similarity)
            }
            _ => false,
        }
    })
}

/// First document in corpus order with a table row for `symbol`.
fn first_with_symbol<'a>(docs: &'a [DatasheetDoc], symbol: &str) -> Option<&'a str> {
    docs.iter()
        .find(|d| {
            d.sections.iter().flat_map(|s| &s.tables).any(|t| {
                t.rows
                    .iter()
                    .any(|r| crate::corpus::cell(&t.columns, r, Column::Symbol) == Some(symbol))
            })
        })
        .map(|d| d.doc_id.as_str())
}

fn request(part: &str, symbols: &[&str], conds: &str) -> ExtractionRequest {
    ExtractionRequest::new(
        part,
        symbols.iter().map(|s| s.to_string()).collect(),
        parse_condition_pairs(conds),
    )
    .expect("at least one symbol")
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let parts = part_numbers(&mut rng, cfg.n_docs);
    let fixture_queries = if cfg.include_fixtures { fixtures::fixture_queries() } else { vec![] };
    let n_queries = 2 * cfg.n_docs + fixture_queries.len();
    let quota = |rate: f64| (rate * n_queries as f64).round() as usize;
    let (n_limits, n_curves, n_typo) = (quota(cfg.limits_rate), quota(cfg.curves_rate), quota(cfg.typo_rate));

    let mut order: Vec<usize> = (0..cfg.n_docs).collect();
    order.shuffle(&mut rng);
    let mut plans: Vec<DocPlan> = parts
        .into_iter()
        .map(|(part, series, family)| DocPlan {
            part,
            series,
            family,
            plant: None,
        })
        .collect();
    for (rank, &i) in order.iter().enumerate() {
        let d = if rank < n_limits {
            Difficulty::LimitsTable
        } else if rank < n_limits + n_curves {
            Difficulty::CurvesTable
        } else {
            continue;
        };
        let s = FAMILIES[plans[i].family].symbols.choose(&mut rng).unwrap();
        plans[i].plant = Some((d, s));
    }

    let outs: Vec<DocOut> = plans.iter().map(|p| render_doc(&mut rng, p, cfg.distractor_rate)).collect();
    let mut files: Vec<(String, String)> = outs.iter().map(|o| (format!("{}.dst", o.doc_id), o.text.clone())).collect();
    if cfg.include_fixtures {
        files.extend(fixtures::fixture_files());
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let docs: Vec<DatasheetDoc> = files
        .iter()
        .map(|(n, t)| ingest_document(t, n).expect("generated datasheets parse"))
        .collect();
    let index = build_index(docs.clone()).expect("generated corpus indexes");

    let mut truth = GroundTruth::default();
    for o in &outs {
        for e in &o.truth {
            truth.push(&o.doc_id, e.clone());
        }
    }
    if cfg.include_fixtures {
        for (doc, e) in fixtures::fixture_truth() {
            truth.push(&doc, e);
        }
    }

    // typo plants go to unplanted documents that are not the first holder
    // of the chosen symbol, so lexical retrieval cannot land on them by luck
    let mut typos: Vec<Option<(String, &'static str)>> = vec![None; cfg.n_docs];
    let mut placed = 0;
    for &i in order.iter().skip(n_limits + n_curves) {
        if placed == n_typo {
            break;
        }
        let doc_id = outs[i].doc_id.as_str();
        let mut syms: Vec<&'static SymSpec> = FAMILIES[plans[i].family].symbols.iter().collect();
        syms.shuffle(&mut rng);
        let Some(s) = syms.into_iter().find(|s| first_with_symbol(&docs, s.symbol) != Some(doc_id)) else {
            continue;
        };
        if let Some(t) = typo_for(&mut rng, &plans[i].part, doc_id, &index) {
            typos[i] = Some((t, s.symbol));
            placed += 1;
        }
    }

    let mut queries = Vec::new();
    let mut push = |doc_id: &str, difficulty: Difficulty, request: ExtractionRequest| {
        let id = format!("q{:03}", queries.len() + 1);
        queries.push(EvalQuery {
            id,
            doc_id: doc_id.to_string(),
            difficulty,
            request,
        });
    };
    for (i, (plan, out)) in plans.iter().zip(&outs).enumerate() {
        let (first_sym, difficulty, part) = match (&plan.plant, &typos[i]) {
            (Some((d, s)), _) => (s.symbol.to_string(), *d, plan.part.clone()),
            (None, Some((t, s))) => (s.to_string(), Difficulty::PartTypo, t.clone()),
            (None, None) => {
                let (s, c) = out.askable.choose(&mut rng).unwrap();
                push(&out.doc_id, Difficulty::Clean, request(&plan.part, &[s], c));
                (s.clone(), Difficulty::Clean, String::new())
            }
        };
        if difficulty != Difficulty::Clean {
            push(&out.doc_id, difficulty, request(&part, &[&first_sym], ""));
        }
        let rest: Vec<&(String, String)> = out.askable.iter().filter(|(s, _)| *s != first_sym).collect();
        let (s, c) = rest.choose(&mut rng).unwrap();
        if !c.is_empty() {
            push(&out.doc_id, Difficulty::Clean, request(&plan.part, &[s], c));
        } else {
            let plain: Vec<&str> = rest
                .iter()
                .filter(|(x, c)| c.is_empty() && x != s)
                .map(|(x, _)| x.as_str())
                .collect();
            let mut syms = vec![s.as_str()];
            if rng.gen_bool(0.5) {
                if let Some(extra) = plain.choose(&mut rng) {
                    syms.push(*extra);
                }
            }
            push(&out.doc_id, Difficulty::Clean, request(&plan.part, &syms, ""));
        }
    }
    for (doc, req) in fixture_queries {
        push(&doc, Difficulty::Clean, req);
    }

    debug_assert!(queries.iter().all(|q| normalize_part(&q.request.part_number).len() > 2));
    SynthCorpus { files, truth, queries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_corpus() {
        let a = gen_synthetic_corpus(11, 12, 0.5);
        let b = gen_synthetic_corpus(11, 12, 0.5);
        assert_eq!(a, b);
        assert_ne!(a.files, gen_synthetic_corpus(12, 12, 0.5).files);
    }

    #[test]
    fn every_doc_parses_and_has_truth() {
        let c = generate(&SynthConfig::default());
        let docs = c.docs().unwrap();
        assert_eq!(docs.len(), 27);
        for d in &docs {
            assert!(c.truth.for_doc(&d.doc_id).count() >= 1, "{}", d.doc_id);
        }
        assert!(c.queries.len() >= 40);
    }

    #[test]
    fn every_query_has_expected_values() {
        let c = generate(&SynthConfig::default());
        for q in &c.queries {
            for s in &q.request.requested_symbols {
                assert!(
                    c.truth.expected(&q.doc_id, s, &q.request.condition_key()).is_some(),
                    "{} {s}",
                    q.id
                );
            }
        }
    }

    #[test]
    fn planted_difficulties_are_present() {
        let c = generate(&SynthConfig::default());
        assert!(c.count(Difficulty::LimitsTable) > c.count(Difficulty::CurvesTable));
        assert!(c.count(Difficulty::CurvesTable) > c.count(Difficulty::PartTypo));
        assert!(c.count(Difficulty::PartTypo) > 0);
    }

    #[test]
    fn full_distractors_flank_every_typ() {
        let c = gen_synthetic_corpus(3, 10, 1.0);
        for (name, text) in c.files.iter().filter(|(n, _)| n.starts_with(['q', 'f', 'd', 'l'])) {
            for line in text.lines().filter(|l| l.starts_with("| ") && l.matches('|').count() == 8) {
                let cells: Vec<&str> = line.split('|').map(str::trim).collect();
                if cells[4] != "-" && cells[4] != "Typ" && !cells[1].contains("vs temperature") {
                    assert!(cells[3] != "-" && cells[5] != "-", "{name}: {line}");
                }
            }
        }
    }

    #[test]
    fn typo_queries_resolve_to_their_doc() {
        let c = generate(&SynthConfig::default());
        let index = build_index(c.docs().unwrap()).unwrap();
        for q in c.queries.iter().filter(|q| q.difficulty == Difficulty::PartTypo) {
            let mq = ModelQuery::new(&q.request.part_number).unwrap();
            let out = resolve_model(&mq, &index, &TdrConfig::default());
            assert_eq!(out.best_doc(), Some(q.doc_id.as_str()));
            assert!(index.lookup_alias(&normalize_part(&q.request.part_number)).is_none());
        }
    }
}
