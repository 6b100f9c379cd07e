//! `.model` cards and PySpice-format scripts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::params::{ParamValue, ParameterSet};
use crate::units::fmt_sig6;

use super::{DeviceError, Family};

/// Extracted symbol to card key. Order is the rendering order of keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingTable {
    pub entries: Vec<(String, String)>,
}

impl Default for MappingTable {
    fn default() -> Self {
        let pairs = [
            ("h_FE", "BF"),
            ("VTO", "VTO"),
            ("BETA", "KP"),
            // Ciss lumps CGS and CGD; CGSO is only an approximation of it
            ("Ciss", "CGSO"),
            ("RS", "RS"),
            ("BV", "BV"),
        ];
        MappingTable {
            entries: pairs.iter().map(|(s, k)| (s.to_string(), k.to_string())).collect(),
        }
    }
}

impl MappingTable {
    pub fn key_for(&self, symbol: &str) -> Option<&str> {
        self.entries.iter().find(|(s, _)| s == symbol).map(|(_, k)| k.as_str())
    }

    /// Overrides or extends entries (config `[mapping]` section).
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, String>) {
        for (sym, key) in overrides {
            match self.entries.iter_mut().find(|(s, _)| s == sym) {
                Some(e) => e.1 = key.clone(),
                None => self.entries.push((sym.clone(), key.clone())),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiceModel {
    pub name: String,
    pub family: Family,
    pub card_params: Vec<(String, f64)>,
    pub rendered_card: String,
}

fn required(family: Family) -> Result<&'static [&'static str], DeviceError> {
    Ok(match family {
        Family::BjtNpn | Family::BjtPnp => &["h_FE"],
        Family::Nmos | Family::Pmos => &["VTO"],
        Family::Diode | Family::Led => &["RS", "BV"],
        Family::Unknown => return Err(DeviceError::UnknownFamily),
    })
}

/// Symbols extracted for a model card of this family.
pub fn model_symbols(family: Family) -> &'static [&'static str] {
    match family {
        Family::BjtNpn | Family::BjtPnp => &["h_FE"],
        Family::Nmos | Family::Pmos => &["VTO", "BETA", "Ciss"],
        Family::Diode | Family::Led => &["RS", "BV"],
        Family::Unknown => &[],
    }
}

/// SPICE-safe model name: alphanumerics and `_` only.
fn model_name(raw: &str) -> String {
    let s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if s.is_empty() { "MODEL".into() } else { s }
}

fn value_text(v: &ParamValue) -> String {
    match *v {
        ParamValue::Scalar(x) => fmt_sig6(x),
        ParamValue::Range { lo, hi } => format!("{}..{}", fmt_sig6(lo), fmt_sig6(hi)),
    }
}

pub fn generate_model_card(
    params: &ParameterSet,
    family: Family,
    name: &str,
    mapping: &MappingTable,
) -> Result<SpiceModel, DeviceError> {
    let type_token = family.spice_type().ok_or(DeviceError::UnknownFamily)?;
    let req = required(family)?;
    // BJT/MOS need every listed symbol; diodes need at least one
    let any_of = matches!(family, Family::Diode | Family::Led);
    let missing = req.iter().find(|s| !params.has_symbol(s));
    let satisfied = if any_of { req.iter().any(|s| params.has_symbol(s)) } else { missing.is_none() };
    if !satisfied {
        return Err(DeviceError::MissingRequiredParameter {
            symbol: if any_of { req.join(" or ") } else { missing.map_or(String::new(), |s| s.to_string()) },
            family,
        });
    }

    let mut card_params: Vec<(String, f64)> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut unmapped: Vec<String> = Vec::new();
    for sym in params.resolved_symbols() {
        let Some(e) = params.latest(sym) else { continue };
        match mapping.key_for(sym) {
            Some(key) if !card_params.iter().any(|(k, _)| k == key) => {
                let v = e.value.collapse();
                if let ParamValue::Range { lo, hi } = e.value {
                    notes.push(format!(
                        "{sym} range {}..{} collapsed to midpoint (FallbackMinMax)",
                        fmt_sig6(lo),
                        fmt_sig6(hi)
                    ));
                }
                if sym == "Ciss" {
                    notes.push(format!("{key} approximated from Ciss"));
                }
                if let Some(f) = &e.formula {
                    notes.push(format!("{key} derived ({f})"));
                }
                card_params.push((key.to_string(), v));
            }
            Some(_) => {}
            None => {
                let mut s = format!("{sym}={}", value_text(&e.value));
                if !e.unit.is_empty() {
                    let _ = write!(s, " {}", e.unit);
                }
                unmapped.push(s);
            }
        }
    }

    let name = model_name(name);
    let mut card = format!(".model {name} {type_token} (");
    let body: Vec<String> = card_params.iter().map(|(k, v)| format!("{k}={}", fmt_sig6(*v))).collect();
    card.push_str(&body.join(" "));
    card.push_str(")\n");
    for n in &notes {
        let _ = writeln!(card, "* {n}");
    }
    if !unmapped.is_empty() {
        let _ = writeln!(card, "* unmapped: {}", unmapped.join(", "));
    }
    Ok(SpiceModel {
        name,
        family,
        card_params,
        rendered_card: card,
    })
}

/// Minimal `.model` grammar: name, type token, balanced parentheses around
/// `key=value` pairs, then only `*` comment lines.
pub fn check_model_card(text: &str) -> Result<(), String> {
    let mut lines = text.lines();
    let first = lines.next().ok_or("empty card")?;
    let rest = first.strip_prefix(".model ").ok_or("card must begin with `.model`")?;
    let mut it = rest.splitn(3, ' ');
    let name = it.next().unwrap_or("");
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("bad model name `{name}`"));
    }
    let ty = it.next().unwrap_or("");
    if !["NPN", "PNP", "NMOS", "PMOS", "D"].contains(&ty) {
        return Err(format!("bad type token `{ty}`"));
    }
    let params = it.next().ok_or("missing parameter list")?;
    let inner = params
        .strip_prefix('(')
        .and_then(|p| p.strip_suffix(')'))
        .ok_or("parameter list must be parenthesised")?;
    if inner.contains(['(', ')']) {
        return Err("unbalanced parentheses".into());
    }
    let mut keys: Vec<&str> = Vec::new();
    for pair in inner.split_whitespace() {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("`{pair}` is not key=value"))?;
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad key `{k}`"));
        }
        v.parse::<f64>().map_err(|_| format!("bad value `{v}` for {k}"))?;
        if keys.contains(&k) {
            return Err(format!("duplicate key {k}"));
        }
        keys.push(k);
    }
    for l in lines {
        if !l.starts_with('*') && !l.trim().is_empty() {
            return Err(format!("unexpected line `{l}`"));
        }
    }
    Ok(())
}

/// PySpice-format script text: a circuit, the model and one element using
/// it. Never executed here.
pub fn generate_sim_script(model: &SpiceModel) -> String {
    let ty = model.family.spice_type().unwrap_or("D");
    let kwargs: Vec<String> = model
        .card_params
        .iter()
        .map(|(k, v)| format!("{k}={}", fmt_sig6(*v)))
        .collect();
    let mut s = String::new();
    s.push_str("from PySpice.Spice.Netlist import Circuit\nfrom PySpice.Unit import *\n\n");
    for line in model.rendered_card.lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "circuit = Circuit('{} test')", model.name);
    if kwargs.is_empty() {
        let _ = writeln!(s, "circuit.model('{}', '{ty}')", model.name);
    } else {
        let _ = writeln!(s, "circuit.model('{}', '{ty}', {})", model.name, kwargs.join(", "));
    }
    let element = match model.family {
        Family::BjtNpn | Family::BjtPnp => {
            format!("circuit.BJT(1, 'collector', 'base', circuit.gnd, model='{}')", model.name)
        }
        Family::Nmos | Family::Pmos => format!(
            "circuit.MOSFET(1, 'drain', 'gate', circuit.gnd, circuit.gnd, model='{}')",
            model.name
        ),
        _ => format!("circuit.D(1, 'anode', circuit.gnd, model='{}')", model.name),
    };
    let _ = writeln!(s, "{element}");
    s.push_str("\nprint(circuit)\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamEntry;

    fn set(entries: &[(&str, ParamValue)]) -> ParameterSet {
        let mut s = ParameterSet::new();
        for (sym, v) in entries {
            s.insert(ParamEntry::new(sym, "", *v, ""));
        }
        s
    }

    #[test]
    fn npn_maps_hfe_to_bf() {
        let m = generate_model_card(&set(&[("h_FE", ParamValue::Scalar(200.0))]), Family::BjtNpn, "Q1", &MappingTable::default()).unwrap();
        assert!(m.rendered_card.starts_with(".model Q1 NPN (BF=200)"));
        check_model_card(&m.rendered_card).unwrap();
    }

    #[test]
    fn ranges_collapse_and_unmapped_are_listed() {
        let p = set(&[
            ("h_FE", ParamValue::Range { lo: 40.0, hi: 300.0 }),
            ("V_CEsat", ParamValue::Scalar(0.3)),
        ]);
        let m = generate_model_card(&p, Family::BjtNpn, "P2N2222A", &MappingTable::default()).unwrap();
        assert_eq!(m.card_params, vec![("BF".to_string(), 170.0)]);
        assert!(m.rendered_card.contains("FallbackMinMax"));
        assert!(m.rendered_card.contains("* unmapped: V_CEsat=0.3"));
        check_model_card(&m.rendered_card).unwrap();
    }

    #[test]
    fn missing_required() {
        let err = generate_model_card(&set(&[("V_F", ParamValue::Scalar(0.7))]), Family::Diode, "D1", &MappingTable::default()).unwrap_err();
        assert!(matches!(err, DeviceError::MissingRequiredParameter { family: Family::Diode, .. }));
        let err = generate_model_card(&ParameterSet::new(), Family::Unknown, "X", &MappingTable::default()).unwrap_err();
        assert_eq!(err, DeviceError::UnknownFamily);
    }

    #[test]
    fn grammar_rejects_malformed_cards() {
        assert!(check_model_card(".model Q1 NPN (BF=200)").is_ok());
        assert!(check_model_card(".model Q1 NPN BF=200").is_err());
        assert!(check_model_card(".model Q1 XYZ (BF=200)").is_err());
        assert!(check_model_card(".model Q1 NPN (BF=200 BF=1)").is_err());
        assert!(check_model_card(".model Q1 NPN ((BF=200)").is_err());
        assert!(check_model_card("model Q1 NPN (BF=200)").is_err());
    }

    #[test]
    fn script_is_deterministic() {
        let p = set(&[("VTO", ParamValue::Scalar(1.6)), ("BETA", ParamValue::Scalar(0.25))]);
        let m = generate_model_card(&p, Family::Nmos, "2N7002E", &MappingTable::default()).unwrap();
        let a = generate_sim_script(&m);
        assert_eq!(a, generate_sim_script(&m));
        assert!(a.contains("circuit.model('2N7002E', 'NMOS', VTO=1.6, KP=0.25)"));
        assert!(a.contains("circuit.MOSFET("));
    }

    #[test]
    fn overrides_replace_and_extend() {
        let mut m = MappingTable::default();
        m.apply_overrides(&[("Ciss".to_string(), "CGDO".to_string()), ("I_S".to_string(), "IS".to_string())].into());
        assert_eq!(m.key_for("Ciss"), Some("CGDO"));
        assert_eq!(m.key_for("I_S"), Some("IS"));
    }
}
