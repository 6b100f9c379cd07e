//! The answer block: the only structured contract between generation and
//! parsing.
//!
//! ```text
//! ANSWER:
//! VTO=1.6 V
//! h_FE=40..300
//! h_FE=120 @ I_C=0.0001A,V_CE=10V
//! BV=?
//! ```
//!
//! Everything before the last `ANSWER:` line is free-form reasoning and is
//! ignored.

use thiserror::Error;

use crate::params::{ParamEntry, ParamValue, ParameterSet};
use crate::units::{apply_exponent, fmt_exact, normalize_conditions, number_prefix_len, split_unit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no ANSWER: block in model output")]
    NoAnswerBlock,
}

pub fn render_answer_line(e: &ParamEntry) -> String {
    let mut line = format!("{}=", e.symbol);
    match e.value {
        ParamValue::Scalar(v) => line.push_str(&fmt_exact(v)),
        ParamValue::Range { lo, hi } => {
            line.push_str(&fmt_exact(lo));
            line.push_str("..");
            line.push_str(&fmt_exact(hi));
        }
    }
    if !e.unit.is_empty() {
        line.push(' ');
        line.push_str(&e.unit);
    }
    if !e.conditions.is_empty() {
        line.push_str(" @ ");
        line.push_str(&e.conditions);
    }
    line
}

pub fn render_answer_block(set: &ParameterSet) -> String {
    let mut out = String::from("ANSWER:\n");
    for e in set.entries() {
        out.push_str(&render_answer_line(e));
        out.push('\n');
    }
    for s in set.unresolved() {
        out.push_str(s);
        out.push_str("=?\n");
    }
    out
}

fn parse_number(s: &str) -> Option<(f64, &str)> {
    let n = number_prefix_len(s)?;
    Some((s[..n].parse().ok()?, &s[n..]))
}

enum Line {
    Value(ParamEntry),
    Unknown(String),
}

fn parse_line(line: &str) -> Option<Line> {
    let (symbol, rest) = line.split_once('=')?;
    let symbol = symbol.trim();
    if symbol.is_empty() || symbol.contains(char::is_whitespace) {
        return None;
    }
    let rest = rest.trim();
    if rest == "?" {
        return Some(Line::Unknown(symbol.to_string()));
    }
    let (value_part, conditions) = match rest.split_once(" @ ") {
        Some((v, c)) => (v.trim(), c.trim()),
        None => (rest, ""),
    };
    let (lo, tail) = parse_number(value_part)?;
    let (hi, tail) = match tail.strip_prefix("..") {
        Some(t) => {
            let (hi, t) = parse_number(t)?;
            (Some(hi), t)
        }
        None => (None, tail),
    };
    if !tail.is_empty() && !tail.starts_with(' ') {
        return None;
    }
    let (exp, unit) = split_unit(tail);
    let value = match hi {
        Some(hi) => {
            let (lo, hi) = (apply_exponent(lo, exp), apply_exponent(hi, exp));
            if lo > hi {
                return None;
            }
            ParamValue::Range { lo, hi }
        }
        None => ParamValue::Scalar(apply_exponent(lo, exp)),
    };
    let mut e = ParamEntry::new(symbol, "", value, &unit);
    e.conditions = normalize_conditions(conditions);
    Some(Line::Value(e))
}

/// Reads the answer block after the last `ANSWER:` line. Parsing stops at
/// the first line that does not follow the grammar.
pub fn parse_extraction_output(text: &str) -> Result<ParameterSet, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .rposition(|l| l.trim() == "ANSWER:")
        .ok_or(ParseError::NoAnswerBlock)?;
    let mut set = ParameterSet::new();
    for line in &lines[start + 1..] {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_line(line) {
            Some(Line::Value(e)) => set.insert(e),
            Some(Line::Unknown(s)) => set.mark_unresolved(&s),
            None => break,
        }
    }
    Ok(set)
}
