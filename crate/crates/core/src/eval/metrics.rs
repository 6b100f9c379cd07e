//! Precision, mean response time, pooled SD, Cohen's d and the derived
//! improvement columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{ParamEntry, ParamValue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no parameters were extracted; precision is undefined")]
    NoExtractions,
    #[error("empty list")]
    EmptyList,
    #[error("at least two samples per group are needed")]
    InsufficientSamples,
    #[error("pooled standard deviation is zero")]
    ZeroPooledSD,
    #[error("baseline value is zero")]
    ZeroBaseline,
}

/// C / E * 100.
pub fn precision(correct: usize, extracted: usize) -> Result<f64, MetricError> {
    if extracted == 0 {
        return Err(MetricError::NoExtractions);
    }
    Ok(correct as f64 / extracted as f64 * 100.0)
}

pub fn avg_response_time(times_ms: &[f64]) -> Result<f64, MetricError> {
    if times_ms.is_empty() {
        return Err(MetricError::EmptyList);
    }
    Ok(times_ms.iter().sum::<f64>() / times_ms.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub n: usize,
}

impl GroupStats {
    pub fn from_samples(xs: &[f64]) -> Result<GroupStats, MetricError> {
        let mean = avg_response_time(xs)?;
        let sd = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        Ok(GroupStats { mean, sd, n: xs.len() })
    }
}

pub fn pooled_sd(sx: f64, sy: f64, nx: usize, ny: usize) -> Result<f64, MetricError> {
    if nx < 2 || ny < 2 {
        return Err(MetricError::InsufficientSamples);
    }
    let (fx, fy) = ((nx - 1) as f64, (ny - 1) as f64);
    Ok(((fx * sx * sx + fy * sy * sy) / (fx + fy)).sqrt())
}

/// (x.mean - y.mean) / pooled SD. Equal means give 0 even when both groups
/// are constant; constant groups with different means are `ZeroPooledSD`.
pub fn cohens_d(x: &GroupStats, y: &GroupStats) -> Result<f64, MetricError> {
    let s = pooled_sd(x.sd, y.sd, x.n, y.n)?;
    if x.mean == y.mean {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Err(MetricError::ZeroPooledSD);
    }
    Ok((x.mean - y.mean) / s)
}

/// Half-up rounding to two decimals. The small epsilon absorbs binary
/// representation error so that 1.005 rounds to 1.01.
pub fn round2(v: f64) -> f64 {
    let scaled = v.abs() * 100.0;
    let r = (scaled + 0.5 + 1e-9).floor() / 100.0;
    if v < 0.0 { -r } else { r }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub precision_improvement: f64,
    pub latency_reduction: f64,
    /// Unrounded values.
    pub precision_improvement_raw: f64,
    pub latency_reduction_raw: f64,
}

/// Relative change against the baseline, in percent, rounded half-up.
pub fn improvement_columns(p: f64, latency: f64, p0: f64, latency0: f64) -> Result<Improvement, MetricError> {
    if p0 == 0.0 || latency0 == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    let pi = (p - p0) / p0 * 100.0;
    let lr = (latency0 - latency) / latency0 * 100.0;
    Ok(Improvement {
        precision_improvement: round2(pi),
        latency_reduction: round2(lr),
        precision_improvement_raw: pi,
        latency_reduction_raw: lr,
    })
}

pub const DEFAULT_REL_TOL: f64 = 0.01;

/// Same symbol, same condition key, and every value endpoint within
/// `rel_tol` of the truth. Scalars never match ranges.
pub fn match_parameter(extracted: &ParamEntry, truth: &ParamEntry, rel_tol: f64) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * b.abs();
    extracted.symbol == truth.symbol
        && extracted.conditions == truth.conditions
        && extracted.unit == truth.unit
        && match (extracted.value, truth.value) {
            (ParamValue::Scalar(a), ParamValue::Scalar(b)) => close(a, b),
            (ParamValue::Range { lo: a, hi: b }, ParamValue::Range { lo: c, hi: d }) => close(a, c) && close(b, d),
            _ => false,
        }
}
