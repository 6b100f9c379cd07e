//! Datasheet parameter extraction: targeted document retrieval, section
//! priorities, iterative retrieval with a pluggable completion backend, and
//! SPICE model generation.

pub mod backend;
pub mod config;
pub mod corpus;
pub mod devicegen;
pub mod eval;
pub mod iro;
pub mod params;
pub mod pipeline;
pub mod po;
pub mod tdr;
pub mod units;
