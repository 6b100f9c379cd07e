//! SI-prefixed quantities, operating-condition keys and number formatting.

use std::fmt;

/// Base units recognised after an optional SI prefix.
const BASE_UNITS: &[&str] = &[
    "V", "A", "Ω", "Ohm", "ohm", "F", "Hz", "W", "s", "S", "A/V^2", "A/V²", "K", "°C", "C",
];

fn canonical_base(unit: &str) -> Option<&'static str> {
    match unit {
        "Ohm" | "ohm" | "Ω" | "ohms" | "Ohms" => Some("Ω"),
        "A/V²" | "A/V^2" => Some("A/V^2"),
        other => BASE_UNITS.iter().copied().find(|b| *b == other),
    }
}

fn prefix_exponent(c: char) -> Option<i32> {
    Some(match c {
        'p' => -12,
        'n' => -9,
        'u' | 'µ' | 'μ' => -6,
        'm' => -3,
        'k' => 3,
        'M' => 6,
        'G' => 9,
        _ => return None,
    })
}

/// Applies a power-of-ten scale; negative exponents divide so that e.g.
/// 1600 mV lands exactly on 1.6 V.
pub fn apply_exponent(value: f64, exp: i32) -> f64 {
    if exp < 0 {
        value / 10f64.powi(-exp)
    } else {
        value * 10f64.powi(exp)
    }
}

/// Splits a unit string into (power-of-ten exponent, base unit). Unknown
/// units are kept verbatim with exponent 0.
pub fn split_unit(unit: &str) -> (i32, String) {
    let unit = unit.trim();
    if unit.is_empty() {
        return (0, String::new());
    }
    if let Some(base) = canonical_base(unit) {
        return (0, base.to_string());
    }
    let mut chars = unit.chars();
    if let Some(first) = chars.next() {
        let rest = chars.as_str();
        if let (Some(exp), Some(base)) = (prefix_exponent(first), canonical_base(rest)) {
            return (exp, base.to_string());
        }
    }
    (0, unit.to_string())
}

/// Parses a number optionally followed by a unit, e.g. `0.1mA`, `10 V`, `1.6`.
/// Returns the SI-normalised value and base unit.
pub fn parse_quantity(text: &str) -> Option<(f64, String)> {
    let text = text.trim();
    let split = number_prefix_len(text)?;
    let value: f64 = text[..split].parse().ok()?;
    let (exp, unit) = split_unit(&text[split..]);
    Some((apply_exponent(value, exp), unit))
}

/// Length of the leading floating-point literal in `text`.
pub(crate) fn number_prefix_len(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
        i += 1;
    }
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    // a single '.', never the start of a ".." range separator
    if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1) != Some(&b'.') {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if !text[digits_start..i].bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    // exponent only when followed by digits, so "5e" stays a unit-less 5 + "e"
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
            j += 1;
        }
        let exp_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    Some(i)
}

/// Shortest decimal form that round-trips through `f64::from_str`.
pub fn fmt_exact(v: f64) -> String {
    format!("{v}")
}

/// `%g`-style formatting with six significant digits.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i32;
    // rounding can bump the exponent (999999.5 -> 1e6)
    let rounded: f64 = format!("{:.5e}", v).parse().unwrap_or(v);
    let exp = if rounded != 0.0 { rounded.abs().log10().floor() as i32 } else { exp };
    if !(-4..6).contains(&exp) {
        let s = format!("{:.5e}", v);
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().unwrap_or(0);
        format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One `quantity=value` term of an operating-condition string.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionTerm {
    Numeric { quantity: String, value: f64, unit: String },
    Verbatim(String),
}

impl ConditionTerm {
    pub fn quantity(&self) -> Option<&str> {
        match self {
            ConditionTerm::Numeric { quantity, .. } => Some(quantity),
            ConditionTerm::Verbatim(s) => s.split_once('=').map(|(q, _)| q.trim()),
        }
    }
}

impl fmt::Display for ConditionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionTerm::Numeric { quantity, value, unit } => {
                write!(f, "{quantity}={}{unit}", fmt_exact(*value))
            }
            ConditionTerm::Verbatim(s) => f.write_str(s),
        }
    }
}

/// Parses a condition list such as `I_C=0.1mA, V_CE=10V`. Empty, `-` and
/// `none` yield no terms.
pub fn parse_conditions(text: &str) -> Vec<ConditionTerm> {
    let text = text.trim();
    if text.is_empty() || text == "-" || text.eq_ignore_ascii_case("none") {
        return Vec::new();
    }
    let mut terms: Vec<ConditionTerm> = text
        .split([',', ';'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.split_once('=') {
            Some((q, v)) => match parse_quantity(v) {
                Some((value, unit)) => ConditionTerm::Numeric {
                    quantity: q.trim().to_string(),
                    value,
                    unit,
                },
                None => ConditionTerm::Verbatim(format!("{}={}", q.trim(), v.trim())),
            },
            None => ConditionTerm::Verbatim(t.to_string()),
        })
        .collect();
    terms.sort_by(|a, b| a.to_string().cmp(&b.to_string()));
    terms
}

/// Canonical key for a condition string; idempotent.
pub fn normalize_conditions(text: &str) -> String {
    parse_conditions(text)
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Relative comparison used for condition matching.
pub fn approx_eq(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() <= 1e-9 * scale
}

/// Whether row conditions satisfy the requested ones. `None` means the two
/// lists share no quantity, so the request says nothing about this row.
pub fn conditions_match(row: &[ConditionTerm], requested: &[ConditionTerm]) -> Option<bool> {
    let mut overlap = false;
    for req in requested {
        let Some(q) = req.quantity() else { continue };
        if let Some(found) = row.iter().find(|r| r.quantity() == Some(q)) {
            overlap = true;
            let same = match (found, req) {
                (
                    ConditionTerm::Numeric { value: a, unit: ua, .. },
                    ConditionTerm::Numeric { value: b, unit: ub, .. },
                ) => ua == ub && approx_eq(*a, *b),
                (a, b) => a == b,
            };
            if !same {
                return Some(false);
            }
        }
    }
    overlap.then_some(true)
}
