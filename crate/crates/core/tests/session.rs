mod common;

use std::collections::BTreeSet;

use hypex_core::session::{read_log, replay};
use hypex_core::{
    investigate_another_hypothesis, ClassLabel, Error, ExplainEngine, HypothesisRequest, Record, Session,
    SessionLog,
};

fn engine() -> ExplainEngine {
    ExplainEngine::new(common::small_model().clone(), common::thyroid().data.clone()).unwrap()
}

fn first_id() -> String {
    common::thyroid().data.records()[0].id.clone()
}

#[test]
fn defaults_fill_the_bundle() {
    let e = engine();
    let mut req = HypothesisRequest::for_record(first_id(), ClassLabel::NEGATIVE);
    req.include_importance = true;
    req.seed = Some(1);
    let b = e.handle_request(&req).unwrap();
    assert_eq!(b.similar_cases.requested, 3);
    let keys: BTreeSet<_> = b.counterexamples.keys().copied().collect();
    assert_eq!(keys, [ClassLabel::HYPERTHYROID, ClassLabel::HYPOTHYROID].into());
    for set in b.counterexamples.values().chain([&b.similar_cases]) {
        assert_eq!(set.requested, 3);
        assert!(set.cases.len() == 3 || set.budget_exhausted);
    }
    let imp = b.importance.as_ref().unwrap();
    assert_eq!(imp.weights.len(), 20);
    assert_eq!(imp.hypothesis, ClassLabel::NEGATIVE);
}

#[test]
fn zero_counts_echo_the_record_only() {
    let e = engine();
    let req = HypothesisRequest {
        n_counterexamples_per_class: Some(0),
        n_similar_cases: Some(0),
        seed: Some(4),
        ..HypothesisRequest::for_record(first_id(), ClassLabel::HYPOTHYROID)
    };
    let b = e.handle_request(&req).unwrap();
    assert!(b.similar_cases.cases.is_empty());
    assert!(!b.similar_cases.budget_exhausted);
    assert!(b.counterexamples.values().all(|s| s.cases.is_empty()));
    assert!(b.importance.is_none());
    assert_eq!(b.record.len(), 20);
}

#[test]
fn display_order_leads_every_table() {
    let e = engine();
    let mut req = HypothesisRequest::for_record(first_id(), ClassLabel::HYPERTHYROID);
    req.seed = Some(8);
    let b = e.handle_request(&req).unwrap();
    let head = |cells: &[hypex_core::session::Cell]| cells.iter().take(3).map(|c| c.name.clone()).collect::<Vec<_>>();
    assert_eq!(head(&b.record), ["age", "sex", "TSH"]);
    for set in b.counterexamples.values().chain([&b.similar_cases]) {
        for case in &set.cases {
            assert_eq!(head(&case.values), ["age", "sex", "TSH"]);
            let marked: BTreeSet<_> = case.values.iter().filter(|c| c.changed).map(|c| c.name.clone()).collect();
            let changed: BTreeSet<_> = case.changed_features.iter().map(|f| f.name.clone()).collect();
            assert_eq!(marked, changed);
        }
    }
}

#[test]
fn seeded_requests_are_byte_identical() {
    let e = engine();
    let mut req = HypothesisRequest::for_record(first_id(), ClassLabel::HYPOTHYROID);
    req.include_importance = true;
    req.seed = Some(77);
    assert_eq!(e.handle_request(&req).unwrap().to_json_bytes(), e.handle_request(&req).unwrap().to_json_bytes());
}

#[test]
fn unseeded_requests_record_their_seed() {
    let e = engine();
    let req = HypothesisRequest {
        n_counterexamples_per_class: Some(1),
        n_similar_cases: Some(1),
        ..HypothesisRequest::for_record(first_id(), ClassLabel::NEGATIVE)
    };
    let b = e.handle_request(&req).unwrap();
    let again = HypothesisRequest {
        seed: Some(b.provenance.seed),
        ..req
    };
    assert_eq!(e.handle_request(&again).unwrap(), b);
}

#[test]
fn unknown_record_is_not_found() {
    let e = engine();
    let err = e
        .handle_request(&HypothesisRequest::for_record("no-such-id", ClassLabel::NEGATIVE))
        .unwrap_err();
    assert!(matches!(err, Error::RecordNotFound(_)));
    assert_eq!(err.code(), "record_not_found");
}

#[test]
fn inline_records_are_validated_and_carried_forward() {
    let e = engine();
    let values = common::thyroid().data.records()[3].values.clone();
    let req = HypothesisRequest {
        record_id: None,
        record: Some(Record::new("new-patient", values.clone())),
        n_counterexamples_per_class: Some(1),
        n_similar_cases: Some(1),
        seed: Some(2),
        ..HypothesisRequest::for_record("", ClassLabel::NEGATIVE)
    };
    let b = e.handle_request(&req).unwrap();
    assert_eq!(b.record_id, "new-patient");
    let (next, repeat) = investigate_another_hypothesis(&b, ClassLabel::HYPERTHYROID);
    assert!(!repeat);
    assert_eq!(next.record.as_ref().unwrap().values, values);
    assert_eq!(next.hypothesis, ClassLabel::HYPERTHYROID);
    assert_eq!((next.n_counterexamples_per_class, next.n_similar_cases), (Some(5), Some(5)));

    let (same, repeat) = investigate_another_hypothesis(&b, ClassLabel::NEGATIVE);
    assert!(repeat);
    assert_eq!((same.n_counterexamples_per_class, same.n_similar_cases), (Some(3), Some(3)));

    let mut bad = req.clone();
    bad.record = Some(Record::new("short", vec![1.0; 5]));
    assert!(matches!(e.handle_request(&bad), Err(Error::RecordShape(_))));
}

#[test]
fn pivot_from_dataset_record() {
    let e = engine();
    let req = HypothesisRequest {
        n_counterexamples_per_class: Some(0),
        n_similar_cases: Some(0),
        seed: Some(1),
        ..HypothesisRequest::for_record(first_id(), ClassLabel::NEGATIVE)
    };
    let b = e.handle_request(&req).unwrap();
    let (next, repeat) = investigate_another_hypothesis(&b, ClassLabel::HYPERTHYROID);
    assert!(!repeat);
    assert_eq!(next.record_id.as_deref(), Some(first_id().as_str()));
    assert!(next.record.is_none());
    assert_eq!(next.counts(), (5, 5));
}

#[test]
fn log_file_appends_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let session = Session::new(engine(), SessionLog::open(&path).unwrap());
    for (i, h) in ClassLabel::all().enumerate() {
        let req = HypothesisRequest {
            n_counterexamples_per_class: Some(1),
            n_similar_cases: Some(1),
            include_importance: i == 0,
            seed: if i == 1 { None } else { Some(i as u64) },
            ..HypothesisRequest::for_record(first_id(), h)
        };
        session.handle(&req).unwrap();
    }
    assert_eq!(session.log().len(), 3);
    let entries = read_log(&path).unwrap();
    assert_eq!(entries, session.log().entries());
    assert!(entries.iter().all(|e| e.request.seed.is_some()));
    assert_eq!(replay(session.engine(), &entries).unwrap(), [true, true, true]);

    drop(session);
    let reopened = SessionLog::open(&path).unwrap();
    assert_eq!(reopened.len(), 3);
}
