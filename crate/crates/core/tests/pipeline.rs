use dpx::backend::{MockBackend, MockScript};
use dpx::corpus::ingest_document;
use dpx::devicegen::{DeviceKind, Family, RS_FORMULA};
use dpx::eval::fixtures::fixture_files;
use dpx::iro::{run_iro, Convergence, ExtractionRequest, IroConfig, IroContext};
use dpx::params::{Confidence, ParamValue};
use dpx::pipeline::{extract, prepare, Corpus, ExtractOptions, Flags, PipelineError, DEFAULT_CHUNK_CHARS};
use dpx::po::PriorityTable;
use proptest::prelude::*;

fn fixtures() -> Corpus {
    let docs = fixture_files()
        .iter()
        .map(|(n, t)| ingest_document(t, n).unwrap())
        .collect();
    Corpus::from_docs(docs, &PriorityTable::default(), DEFAULT_CHUNK_CHARS).unwrap()
}

fn req(part: &str, syms: &[&str], conds: &[(&str, &str)]) -> ExtractionRequest {
    ExtractionRequest::new(
        part,
        syms.iter().map(|s| s.to_string()).collect(),
        conds.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
    )
    .unwrap()
}

#[test]
fn p2n2222a_range_then_condition_value() {
    let corpus = fixtures();
    let backend = MockBackend::rule_based();
    let r = req("P2N2222A", &["h_FE"], &[]);
    let mut p = prepare(&corpus, &backend, &r, &ExtractOptions::default()).unwrap();
    assert_eq!(p.class.unwrap().kind, DeviceKind::Dynamic);
    assert!(p.session.step().unwrap());
    let first = p.session.result();
    assert_eq!(first.iterations_used, 1);
    assert_eq!(first.parameters.latest("h_FE").unwrap().value, ParamValue::Range { lo: 40.0, hi: 300.0 });
    assert!(first.needs_user_input.is_some());

    p.session.supply_conditions(vec![("I_C".into(), "0.1mA".into()), ("V_CE".into(), "10V".into())]);
    let done = p.session.run().unwrap();
    let e = done.parameters.answer_for("h_FE", "I_C=0.0001A,V_CE=10V").unwrap();
    assert_eq!(e.value, ParamValue::Scalar(120.0));
    assert!(done.needs_user_input.is_none());
}

#[test]
fn conditions_up_front_pick_the_matching_row() {
    let corpus = fixtures();
    let backend = MockBackend::rule_based();
    let r = req("P2N2222A", &["h_FE"], &[("I_C", "10 mA"), ("V_CE", "10 V")]);
    let x = extract(&corpus, &backend, &r, &ExtractOptions::default()).unwrap();
    let e = x.result.parameters.answer_for("h_FE", &r.condition_key()).unwrap();
    assert_eq!(e.value, ParamValue::Scalar(200.0));
}

#[test]
fn led_rs_is_derived_and_bv_read_directly() {
    let corpus = fixtures();
    let backend = MockBackend::rule_based();
    let x = extract(&corpus, &backend, &req("5100H5", &["RS", "BV"], &[]), &ExtractOptions::default()).unwrap();
    assert_eq!(x.class.unwrap().family, Family::Led);
    let rs = x.result.parameters.latest("RS").unwrap();
    assert!(rs.derived);
    assert_eq!(rs.formula.as_deref(), Some(RS_FORMULA));
    assert_eq!(rs.confidence, Confidence::Derived);
    assert!((rs.value.collapse() - 160.0).abs() < 1e-9);
    let bv = x.result.parameters.latest("BV").unwrap();
    assert_eq!(bv.value, ParamValue::Scalar(7.0));
    assert!(!bv.derived);
}

#[test]
fn mosfet_typ_values_despite_decoys() {
    let corpus = fixtures();
    let backend = MockBackend::rule_based();
    let x = extract(&corpus, &backend, &req("2N7002E", &["VTO", "BETA", "Ciss"], &[]), &ExtractOptions::default()).unwrap();
    let p = &x.result.parameters;
    assert_eq!(p.latest("VTO").unwrap().value, ParamValue::Scalar(1.6));
    assert_eq!(p.latest("BETA").unwrap().value, ParamValue::Scalar(0.32));
    assert!((p.latest("Ciss").unwrap().value.collapse() - 21e-12).abs() < 1e-18);
}

#[test]
fn typo_is_refused_or_followed() {
    let corpus = fixtures();
    let backend = MockBackend::rule_based();
    let r = req("P2N2223A", &["h_FE"], &[]);
    let strict = ExtractOptions {
        accept_recommendation: false,
        ..ExtractOptions::default()
    };
    match extract(&corpus, &backend, &r, &strict) {
        Err(PipelineError::NotFound { recommendations, .. }) => {
            assert_eq!(recommendations[0].matched_alias, "P2N2222A");
        }
        other => panic!("expected NotFound, got {:?}", other.map(|x| x.doc_ids)),
    }
    let x = extract(&corpus, &backend, &r, &ExtractOptions::default()).unwrap();
    assert_eq!(x.doc_ids, ["p2n2222a"]);
    assert_eq!(x.request.part_number, "P2N2222A");
}

#[test]
fn disabled_iro_is_single_pass() {
    let corpus = fixtures();
    let backend = MockBackend::rule_based();
    let opts = ExtractOptions {
        flags: Flags { iro: false, ..Flags::ALL },
        ..ExtractOptions::default()
    };
    let x = extract(&corpus, &backend, &req("2N7002E", &["VTO"], &[]), &opts).unwrap();
    assert_eq!(x.result.iterations_used, 1);
    assert_eq!(backend.calls(), 1);
}

#[test]
fn constant_output_converges_at_second_pass() {
    let corpus = fixtures();
    let backend = MockBackend::new(MockScript::canned(vec!["ANSWER:\nVTO=1.6 V".into()]).unwrap()).unwrap();
    let ctx = IroContext {
        index: corpus.index(),
        stream: corpus.stream(&["2n7002e"], true),
        backend: &backend,
        derive: None,
    };
    let res = run_iro(&req("2N7002E", &["VTO"], &[]), ctx, &IroConfig::default()).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations_used, 2);
    assert_eq!(backend.calls(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn loop_never_exceeds_budget(
        t in 1usize..=5,
        conv in prop::sample::select(vec![Convergence::FixedPoint, Convergence::AllParamsResolved, Convergence::Either]),
        outputs in prop::collection::vec(
            prop::sample::select(vec![
                "ANSWER:\nVTO=1.6 V".to_string(),
                "ANSWER:\nVTO=?".to_string(),
                "ANSWER:\nVTO=1.0..2.4 V".to_string(),
                "no answer block".to_string(),
                "ANSWER:\nBETA=0.32 A/V^2".to_string(),
            ]),
            1..8,
        ),
        top_k in 1usize..6,
    ) {
        let corpus = fixtures();
        let backend = MockBackend::new(MockScript::canned(outputs).unwrap()).unwrap();
        let ids = corpus.all_doc_ids();
        let ctx = IroContext {
            index: corpus.index(),
            stream: corpus.stream(&ids, true),
            backend: &backend,
            derive: None,
        };
        let cfg = IroConfig { max_iterations: t, top_k, convergence: conv, ..IroConfig::default() };
        let res = run_iro(&req("2N7002E", &["VTO", "BETA"], &[]), ctx, &cfg).unwrap();
        prop_assert!(res.iterations_used >= 1 && res.iterations_used <= t);
        prop_assert_eq!(backend.calls(), res.iterations_used);
        prop_assert_eq!(res.trace.len(), res.iterations_used);
    }
}
