//! Section labeling, priority tiers and the tiered chunk stream consumed by
//! retrieval.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, DatasheetDoc};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionLabel {
    ElectricalCharacteristics,
    AbsoluteMaximumRatings,
    TypicalPerformanceCurves,
    ThermalCharacteristics,
    PackageInformation,
    Other(String),
}

/// Canonical phrases, checked in order against the lowercased heading.
const PHRASES: &[(&str, SectionLabel)] = &[
    ("electrical characteristics", SectionLabel::ElectricalCharacteristics),
    ("absolute maximum", SectionLabel::AbsoluteMaximumRatings),
    ("typical performance", SectionLabel::TypicalPerformanceCurves),
    ("typical characteristics", SectionLabel::TypicalPerformanceCurves),
    ("thermal", SectionLabel::ThermalCharacteristics),
    ("package", SectionLabel::PackageInformation),
    ("mechanical", SectionLabel::PackageInformation),
];

impl SectionLabel {
    pub fn from_heading(heading: &str) -> SectionLabel {
        let h = heading.to_lowercase();
        PHRASES
            .iter()
            .find(|(p, _)| h.contains(p))
            .map(|(_, l)| l.clone())
            .unwrap_or_else(|| SectionLabel::Other(heading.to_string()))
    }

    /// Variant name, with all `Other` headings collapsing to `Other`.
    pub fn kind(&self) -> &'static str {
        match self {
            SectionLabel::ElectricalCharacteristics => "ElectricalCharacteristics",
            SectionLabel::AbsoluteMaximumRatings => "AbsoluteMaximumRatings",
            SectionLabel::TypicalPerformanceCurves => "TypicalPerformanceCurves",
            SectionLabel::ThermalCharacteristics => "ThermalCharacteristics",
            SectionLabel::PackageInformation => "PackageInformation",
            SectionLabel::Other(_) => "Other",
        }
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectionLabel::Other(h) => write!(f, "Other({h})"),
            l => f.write_str(l.kind()),
        }
    }
}

/// Label kinds accepted in priority overrides (`ElectricalCharacteristics`,
/// `electrical_characteristics`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelKind {
    ElectricalCharacteristics,
    AbsoluteMaximumRatings,
    TypicalPerformanceCurves,
    ThermalCharacteristics,
    PackageInformation,
    Other,
}

impl LabelKind {
    pub const ALL: [LabelKind; 6] = [
        LabelKind::ElectricalCharacteristics,
        LabelKind::AbsoluteMaximumRatings,
        LabelKind::TypicalPerformanceCurves,
        LabelKind::ThermalCharacteristics,
        LabelKind::PackageInformation,
        LabelKind::Other,
    ];

    pub fn of(label: &SectionLabel) -> LabelKind {
        match label {
            SectionLabel::ElectricalCharacteristics => LabelKind::ElectricalCharacteristics,
            SectionLabel::AbsoluteMaximumRatings => LabelKind::AbsoluteMaximumRatings,
            SectionLabel::TypicalPerformanceCurves => LabelKind::TypicalPerformanceCurves,
            SectionLabel::ThermalCharacteristics => LabelKind::ThermalCharacteristics,
            SectionLabel::PackageInformation => LabelKind::PackageInformation,
            SectionLabel::Other(_) => LabelKind::Other,
        }
    }
}

impl FromStr for LabelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != ' ').collect::<String>().to_lowercase();
        LabelKind::ALL
            .into_iter()
            .find(|k| format!("{k:?}").to_lowercase() == key)
            .ok_or_else(|| format!("unknown section label `{s}`"))
    }
}

/// Label kind -> tier (1 = searched first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityTable {
    tiers: BTreeMap<LabelKind, u32>,
}

impl Default for PriorityTable {
    fn default() -> Self {
        use LabelKind::*;
        PriorityTable {
            tiers: [
                (ElectricalCharacteristics, 1),
                (AbsoluteMaximumRatings, 2),
                (TypicalPerformanceCurves, 3),
                (ThermalCharacteristics, 3),
                (PackageInformation, 4),
                (Other, 5),
            ]
            .into(),
        }
    }
}

impl PriorityTable {
    pub fn tier(&self, label: &SectionLabel) -> u32 {
        self.tiers[&LabelKind::of(label)]
    }

    /// Overrides one tier; tiers must be positive.
    pub fn set(&mut self, kind: LabelKind, tier: u32) -> Result<(), String> {
        if tier == 0 {
            return Err(format!("tier for {kind:?} must be >= 1"));
        }
        self.tiers.insert(kind, tier);
        Ok(())
    }
}

/// Labels every section from its heading. Idempotent.
pub fn label_sections(mut doc: DatasheetDoc) -> DatasheetDoc {
    for s in &mut doc.sections {
        s.label = Some(SectionLabel::from_heading(&s.heading));
    }
    doc
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanTier {
    pub tier: u32,
    /// Section ordinals in document order.
    pub sections: Vec<usize>,
    /// Whether the consumer may move past this tier when a requested symbol
    /// has no candidate in it.
    pub escalate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchPlan {
    pub tiers: Vec<PlanTier>,
}

impl SearchPlan {
    pub fn tier_of(&self, section_ordinal: usize) -> Option<u32> {
        self.tiers
            .iter()
            .find(|t| t.sections.contains(&section_ordinal))
            .map(|t| t.tier)
    }
}

/// Groups sections by tier, ascending. Unlabeled sections are labeled on
/// the fly from their headings.
pub fn build_search_plan(doc: &DatasheetDoc, priorities: &PriorityTable) -> SearchPlan {
    let mut by_tier: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for s in &doc.sections {
        let tier = match &s.label {
            Some(l) => priorities.tier(l),
            None => priorities.tier(&SectionLabel::from_heading(&s.heading)),
        };
        by_tier.entry(tier).or_default().push(s.ordinal);
    }
    let n = by_tier.len();
    SearchPlan {
        tiers: by_tier
            .into_iter()
            .enumerate()
            .map(|(i, (tier, sections))| PlanTier {
                tier,
                sections,
                escalate: i + 1 < n,
            })
            .collect(),
    }
}

/// One tier of the chunk stream.
#[derive(Debug, Clone)]
pub struct StreamTier<'a> {
    pub tier: u32,
    pub chunks: Vec<&'a Chunk>,
}

/// Chunks grouped into tiers; the boundaries let retrieval stop early.
#[derive(Debug, Clone, Default)]
pub struct ChunkStream<'a> {
    pub tiers: Vec<StreamTier<'a>>,
}

impl<'a> ChunkStream<'a> {
    pub fn len(&self) -> usize {
        self.tiers.iter().map(|t| t.chunks.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a Chunk> + '_ {
        self.tiers.iter().flat_map(|t| t.chunks.iter().copied())
    }

    /// Merges per-document streams tier by tier (corpus-wide retrieval).
    pub fn merge(streams: Vec<ChunkStream<'a>>) -> ChunkStream<'a> {
        let mut by_tier: BTreeMap<u32, Vec<&'a Chunk>> = BTreeMap::new();
        for s in streams {
            for t in s.tiers {
                by_tier.entry(t.tier).or_default().extend(t.chunks);
            }
        }
        ChunkStream {
            tiers: by_tier
                .into_iter()
                .map(|(tier, chunks)| StreamTier { tier, chunks })
                .collect(),
        }
    }
}

/// Orders a document's chunks by plan tier. With `po_enabled == false` the
/// stream is a single tier in document order.
pub fn prioritized_chunks<'a>(plan: &SearchPlan, chunks: &'a [Chunk], po_enabled: bool) -> ChunkStream<'a> {
    if !po_enabled {
        return ChunkStream {
            tiers: vec![StreamTier {
                tier: 1,
                chunks: chunks.iter().collect(),
            }],
        };
    }
    let tiers = plan
        .tiers
        .iter()
        .map(|pt| StreamTier {
            tier: pt.tier,
            chunks: chunks
                .iter()
                .filter(|c| pt.sections.contains(&c.section_ordinal))
                .collect(),
        })
        .filter(|t| !t.chunks.is_empty())
        .collect();
    ChunkStream { tiers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{chunk_document, ingest_document};

    fn doc(headings: &[&str]) -> DatasheetDoc {
        let mut text = String::from("---\npart_number: X1\n---\n");
        for h in headings {
            text.push_str(&format!("## {h}\nbody of {h}\n"));
        }
        label_sections(ingest_document(&text, "x.dst").unwrap())
    }

    #[test]
    fn headings_map_to_labels() {
        assert_eq!(
            SectionLabel::from_heading("Electrical Characteristics (TA = 25°C)"),
            SectionLabel::ElectricalCharacteristics
        );
        assert_eq!(
            SectionLabel::from_heading("ABSOLUTE MAXIMUM RATINGS"),
            SectionLabel::AbsoluteMaximumRatings
        );
        assert_eq!(
            SectionLabel::from_heading("Ordering Information"),
            SectionLabel::Other("Ordering Information".into())
        );
    }

    #[test]
    fn relabeling_is_idempotent() {
        let d = doc(&["Features", "Electrical Characteristics"]);
        assert_eq!(label_sections(d.clone()), d);
    }

    #[test]
    fn electrical_characteristics_lead_the_plan() {
        let d = doc(&["Ordering Information", "Electrical Characteristics"]);
        let plan = build_search_plan(&d, &PriorityTable::default());
        assert_eq!(plan.tiers[0].tier, 1);
        assert_eq!(plan.tiers[0].sections, vec![1]);
        assert_eq!(plan.tiers[1].sections, vec![0]);
        assert!(plan.tiers[0].escalate && !plan.tiers[1].escalate);
    }

    #[test]
    fn only_other_sections_form_one_tier() {
        let d = doc(&["Features", "Ordering Information"]);
        let plan = build_search_plan(&d, &PriorityTable::default());
        assert_eq!(plan.tiers.len(), 1);
        assert_eq!(plan.tiers[0].sections, vec![0, 1]);
    }

    #[test]
    fn same_tier_keeps_document_order() {
        let d = doc(&["Electrical Characteristics", "Features", "Electrical Characteristics (cont.)"]);
        let plan = build_search_plan(&d, &PriorityTable::default());
        assert_eq!(plan.tiers[0].sections, vec![0, 2]);
    }

    #[test]
    fn stream_order_follows_tiers() {
        let d = doc(&["Package Information", "Electrical Characteristics"]);
        let chunks = chunk_document(&d, 500);
        let plan = build_search_plan(&d, &PriorityTable::default());
        let off: Vec<_> = prioritized_chunks(&plan, &chunks, false).iter().map(|c| c.chunk_index).collect();
        assert_eq!(off, vec![0, 1]);
        let on = prioritized_chunks(&plan, &chunks, true);
        let order: Vec<_> = on.iter().map(|c| c.section_ordinal).collect();
        assert_eq!(order, vec![1, 0]);
        assert_eq!(on.tiers.iter().map(|t| t.tier).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn priority_overrides_parse() {
        assert_eq!("electrical_characteristics".parse::<LabelKind>(), Ok(LabelKind::ElectricalCharacteristics));
        assert_eq!("Other".parse::<LabelKind>(), Ok(LabelKind::Other));
        assert!("Bogus".parse::<LabelKind>().is_err());
        let mut p = PriorityTable::default();
        p.set(LabelKind::Other, 1).unwrap();
        assert_eq!(p.tier(&SectionLabel::Other("x".into())), 1);
        assert!(p.set(LabelKind::Other, 0).is_err());
    }
}
