//! Extracted parameter values keyed by (symbol, normalized conditions).

use serde::{Deserialize, Serialize};

use crate::units::normalize_conditions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Range { lo: f64, hi: f64 },
}

impl ParamValue {
    /// Scalar value, or the midpoint of a range.
    pub fn collapse(&self) -> f64 {
        match *self {
            ParamValue::Scalar(v) => v,
            ParamValue::Range { lo, hi } => (lo + hi) / 2.0,
        }
    }

    pub fn is_range(&self) -> bool {
        matches!(self, ParamValue::Range { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    Exact,
    TypPreferred,
    FallbackMinMax,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub doc_id: String,
    pub section_ordinal: usize,
    pub chunk_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub symbol: String,
    /// Normalized condition key; empty when unconditioned.
    pub conditions: String,
    pub value: ParamValue,
    /// SI base unit (`V`, `A`, `Ω`, ...) or empty for dimensionless.
    pub unit: String,
    pub source: Option<SourceRef>,
    pub derived: bool,
    pub confidence: Confidence,
    /// Name of the derivation formula for derived entries.
    pub formula: Option<String>,
}

impl ParamEntry {
    pub fn new(symbol: &str, conditions: &str, value: ParamValue, unit: &str) -> ParamEntry {
        ParamEntry {
            symbol: symbol.to_string(),
            conditions: normalize_conditions(conditions),
            value,
            unit: unit.to_string(),
            source: None,
            derived: false,
            confidence: Confidence::Exact,
            formula: None,
        }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.symbol, &self.conditions)
    }
}

/// Ordered set of entries; the most recently written entry for a key sits
/// last.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    entries: Vec<ParamEntry>,
    /// Symbols the generator reported as not found (`SYMBOL=?`).
    unresolved: Vec<String>,
}

impl ParameterSet {
    pub fn new() -> ParameterSet {
        ParameterSet::default()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn unresolved(&self) -> &[String] {
        &self.unresolved
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.unresolved.is_empty()
    }

    /// Inserts or overwrites by key; the written entry moves to the end.
    pub fn insert(&mut self, entry: ParamEntry) {
        self.entries.retain(|e| e.key() != entry.key());
        self.unresolved.retain(|s| *s != entry.symbol);
        self.entries.push(entry);
    }

    /// Records a symbol as not found unless a value already exists.
    pub fn mark_unresolved(&mut self, symbol: &str) {
        if !self.has_symbol(symbol) && !self.unresolved.iter().any(|s| s == symbol) {
            self.unresolved.push(symbol.to_string());
        }
    }

    /// Later values win per key; resolved symbols never become unresolved.
    pub fn merge(&mut self, newer: &ParameterSet) {
        for e in &newer.entries {
            self.insert(e.clone());
        }
        for s in &newer.unresolved {
            self.mark_unresolved(s);
        }
    }

    pub fn get(&self, symbol: &str, conditions: &str) -> Option<&ParamEntry> {
        let key = normalize_conditions(conditions);
        self.entries
            .iter()
            .find(|e| e.symbol == symbol && e.conditions == key)
    }

    pub fn latest(&self, symbol: &str) -> Option<&ParamEntry> {
        self.entries.iter().rev().find(|e| e.symbol == symbol)
    }

    /// The entry reported for a request: the one keyed by the requested
    /// conditions if present, else the latest for the symbol.
    pub fn answer_for(&self, symbol: &str, requested_conditions: &str) -> Option<&ParamEntry> {
        if !requested_conditions.is_empty() {
            if let Some(e) = self.get(symbol, requested_conditions) {
                return Some(e);
            }
        }
        self.latest(symbol)
    }

    pub fn has_symbol(&self, symbol: &str) -> bool {
        self.entries.iter().any(|e| e.symbol == symbol)
    }

    /// Distinct symbols with at least one value, in first-seen order.
    pub fn resolved_symbols(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.symbol.as_str()) {
                out.push(&e.symbol);
            }
        }
        out
    }
}
