//! The three hand-written datasheets shipped with every generated corpus.

use crate::iro::ExtractionRequest;
use crate::params::{ParamEntry, ParamValue};

pub const P2N2222A: &str = include_str!("../../fixtures/p2n2222a.dst");
pub const N2N7002E: &str = include_str!("../../fixtures/2n7002e.dst");
pub const LED_5100H5: &str = include_str!("../../fixtures/5100h5.dst");

/// (file name, contents)
pub fn fixture_files() -> Vec<(String, String)> {
    vec![
        ("2n7002e.dst".into(), N2N7002E.into()),
        ("5100h5.dst".into(), LED_5100H5.into()),
        ("p2n2222a.dst".into(), P2N2222A.into()),
    ]
}

/// Typ-column truth for the fixture rows, SI units.
pub fn fixture_truth() -> Vec<(String, ParamEntry)> {
    let e = |doc: &str, sym: &str, cond: &str, v: f64, unit: &str| {
        (doc.to_string(), ParamEntry::new(sym, cond, ParamValue::Scalar(v), unit))
    };
    vec![
        e("p2n2222a", "h_FE", "I_C=0.1mA, V_CE=10V", 120.0, ""),
        e("p2n2222a", "h_FE", "I_C=10mA, V_CE=10V", 200.0, ""),
        e("p2n2222a", "h_FE", "I_C=150mA, V_CE=10V", 250.0, ""),
        e("p2n2222a", "V_CEsat", "I_C=150mA, I_B=15mA", 0.3, "V"),
        e("2n7002e", "VTO", "V_DS=V_GS, I_D=250uA", 1.6, "V"),
        e("2n7002e", "BETA", "V_DS=10V", 0.32, "A/V^2"),
        e("2n7002e", "Ciss", "V_DS=25V, f=1MHz", 21e-12, "F"),
        e("2n7002e", "RDS_on", "V_GS=10V, I_D=500mA", 1.2, "Ω"),
        e("5100h5", "V_F", "I_F=20mA", 3.2, "V"),
        e("5100h5", "BV", "I_R=10uA", 7.0, "V"),
    ]
}

/// (doc id, request) pairs exercising the fixtures.
pub fn fixture_queries() -> Vec<(String, ExtractionRequest)> {
    let q = |doc: &str, part: &str, syms: &[&str], conds: &[(&str, &str)]| {
        let req = ExtractionRequest::new(
            part,
            syms.iter().map(|s| s.to_string()).collect(),
            conds.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        )
        .expect("fixture queries name symbols");
        (doc.to_string(), req)
    };
    vec![
        q("p2n2222a", "P2N2222A", &["h_FE"], &[("I_C", "0.1 mA"), ("V_CE", "10 V")]),
        q("2n7002e", "2N7002E", &["VTO"], &[]),
        q("2n7002e", "2N7002E", &["BETA", "Ciss"], &[]),
        q("5100h5", "5100H5", &["V_F", "BV"], &[]),
    ]
}
