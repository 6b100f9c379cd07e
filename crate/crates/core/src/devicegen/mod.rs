//! Device classification, derived parameters and SPICE / PySpice output.

mod card;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DatasheetDoc;
use crate::params::{Confidence, ParamEntry, ParamValue, ParameterSet};
use crate::units::{parse_conditions, ConditionTerm};

pub use card::{check_model_card, generate_model_card, generate_sim_script, model_symbols, MappingTable, SpiceModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("missing required parameter {symbol} for {family}")]
    MissingRequiredParameter { symbol: String, family: Family },
    #[error("device family is unknown; cannot choose a model type")]
    UnknownFamily,
    #[error("forward current is zero")]
    ZeroCurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "BJT_NPN")]
    BjtNpn,
    #[serde(rename = "BJT_PNP")]
    BjtPnp,
    #[serde(rename = "NMOS")]
    Nmos,
    #[serde(rename = "PMOS")]
    Pmos,
    Diode,
    #[serde(rename = "LED")]
    Led,
    Unknown,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::BjtNpn => "BJT_NPN",
            Family::BjtPnp => "BJT_PNP",
            Family::Nmos => "NMOS",
            Family::Pmos => "PMOS",
            Family::Diode => "Diode",
            Family::Led => "LED",
            Family::Unknown => "Unknown",
        })
    }
}

impl Family {
    pub fn kind(self) -> DeviceKind {
        match self {
            Family::BjtNpn | Family::BjtPnp | Family::Nmos | Family::Pmos => DeviceKind::Dynamic,
            // unknown parts are treated like static ones: no condition prompt
            Family::Diode | Family::Led | Family::Unknown => DeviceKind::Static,
        }
    }

    /// SPICE `.model` type token.
    pub fn spice_type(self) -> Option<&'static str> {
        match self {
            Family::BjtNpn => Some("NPN"),
            Family::BjtPnp => Some("PNP"),
            Family::Nmos => Some("NMOS"),
            Family::Pmos => Some("PMOS"),
            Family::Diode | Family::Led => Some("D"),
            Family::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceClass {
    pub kind: DeviceKind,
    pub family: Family,
}

impl From<Family> for DeviceClass {
    fn from(family: Family) -> Self {
        DeviceClass {
            kind: family.kind(),
            family,
        }
    }
}

/// Keyword precedence: earlier entries win when several occur.
const FAMILY_KEYWORDS: [(&str, Family); 6] = [
    ("NPN", Family::BjtNpn),
    ("PNP", Family::BjtPnp),
    ("NMOS", Family::Nmos),
    ("PMOS", Family::Pmos),
    ("LED", Family::Led),
    ("DIODE", Family::Diode),
];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| {
            let w = w.to_uppercase();
            // plural forms: LEDs, diodes
            match w.strip_suffix('S') {
                Some(stem) if stem == "LED" || stem == "DIODE" => stem.to_string(),
                _ => w,
            }
        })
        .collect()
}

fn first_family(words: &[String]) -> Option<Family> {
    FAMILY_KEYWORDS
        .iter()
        .find(|(kw, _)| words.iter().any(|w| w == kw))
        .map(|&(_, f)| f)
}

/// Front-matter keywords first, then section headings and prose.
pub fn classify_device(doc: &DatasheetDoc) -> DeviceClass {
    let kw: Vec<String> = doc.meta.device_keywords.iter().flat_map(|k| words(k)).collect();
    if let Some(f) = first_family(&kw) {
        return f.into();
    }
    let mut text = String::new();
    for s in &doc.sections {
        text.push_str(&s.heading);
        text.push('\n');
        text.push_str(&s.body_text);
        text.push('\n');
    }
    first_family(&words(&text)).unwrap_or(Family::Unknown).into()
}

pub const RS_FORMULA: &str = "ohms_law:V_F/I_F";

/// RS = V_F / I_F in ohms; inputs in volts and amps.
pub fn derive_rs_ohms_law(v_f: f64, i_f: f64) -> Result<ParamEntry, DeviceError> {
    if i_f == 0.0 {
        return Err(DeviceError::ZeroCurrent);
    }
    let mut e = ParamEntry::new("RS", "", ParamValue::Scalar(v_f / i_f), "Ω");
    e.derived = true;
    e.confidence = Confidence::Derived;
    e.formula = Some(RS_FORMULA.into());
    Ok(e)
}

/// Symbols that must be extracted to derive `symbol`.
pub fn prerequisites(symbol: &str) -> &'static [&'static str] {
    match symbol {
        "RS" => &["V_F"],
        _ => &[],
    }
}

/// Requested symbols followed by any missing prerequisites.
pub fn retrieval_symbols(requested: &[String]) -> Vec<String> {
    let mut out: Vec<String> = requested.to_vec();
    for s in requested {
        for p in prerequisites(s) {
            if !out.iter().any(|o| o == p) {
                out.push(p.to_string());
            }
        }
    }
    out
}

/// Adds RS from the latest V_F entry whose conditions carry the test
/// current, unless RS was read directly from the datasheet.
pub fn derive_secondary(set: &mut ParameterSet) {
    if set.entries().iter().any(|e| e.symbol == "RS" && !e.derived) {
        return;
    }
    let Some(vf) = set.latest("V_F").filter(|e| e.unit == "V") else {
        return;
    };
    let i_f = parse_conditions(&vf.conditions).into_iter().find_map(|t| match t {
        ConditionTerm::Numeric { quantity, value, unit } if quantity == "I_F" && unit == "A" => Some(value),
        _ => None,
    });
    let Some(i_f) = i_f else { return };
    if let Ok(mut rs) = derive_rs_ohms_law(vf.value.collapse(), i_f) {
        rs.source = vf.source.clone();
        set.insert(rs);
    }
}
