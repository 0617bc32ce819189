mod common;

use proptest::prelude::*;

use hypex_core::counterfactual::diversity_select;
use hypex_core::{
    ingest_reader, kernel_weights, perturb_around, stratified_split, ClassLabel, Classifier, DatasetSchema,
    DistanceProfile, ExampleCase, FeatureKind, FeatureStats, FnClassifier, LabeledDataset, MissingPolicy,
    PerturbationConfig, Record,
};
use hypex_core::surrogate::explain_importance;

fn thyroid_value(kind: FeatureKind) -> BoxedStrategy<f64> {
    match kind {
        FeatureKind::Boolean => prop_oneof![Just(0.0), Just(1.0)].boxed(),
        FeatureKind::Integer => (0u32..100).prop_map(f64::from).boxed(),
        FeatureKind::Real => (0.0f64..500.0).boxed(),
    }
}

fn thyroid_rows() -> impl Strategy<Value = Vec<(Vec<f64>, usize)>> {
    let schema = DatasetSchema::thyroid();
    let row: Vec<BoxedStrategy<f64>> = schema.features().iter().map(|f| thyroid_value(f.kind)).collect();
    prop::collection::vec((row, 0usize..3), 1..40)
}

fn profile_2d() -> DistanceProfile {
    let schema = DatasetSchema::from_kinds(&[("a", FeatureKind::Real), ("b", FeatureKind::Boolean)]).unwrap();
    let recs = [Record::new("0", vec![0.0, 0.0]), Record::new("1", vec![10.0, 1.0])];
    DistanceProfile::new(&schema, &FeatureStats::from_records(&schema, &recs).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip(rows in thyroid_rows()) {
        let schema = DatasetSchema::thyroid();
        let records: Vec<Record> = rows.iter().enumerate().map(|(i, (v, _))| Record::new(format!("p{i}"), v.clone())).collect();
        let labels: Vec<ClassLabel> = rows.iter().map(|(_, c)| ClassLabel::new(*c).unwrap()).collect();
        let data = LabeledDataset::new(schema.clone(), records, labels).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let (back, report) = ingest_reader(buf.as_slice(), &schema, MissingPolicy::DropRow).unwrap();
        prop_assert_eq!(report.rows_dropped, 0);
        prop_assert_eq!(back.records(), data.records());
        prop_assert_eq!(back.labels(), data.labels());
    }

    #[test]
    fn probabilities_are_normalized(rows in thyroid_rows()) {
        let model = common::small_model();
        for (values, _) in rows {
            let p = model.predict_proba(&values);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn distance_is_a_bounded_symmetric_premetric(
        a in (0.0f64..=10.0, prop_oneof![Just(0.0), Just(1.0)]),
        b in (0.0f64..=10.0, prop_oneof![Just(0.0), Just(1.0)]),
    ) {
        let p = profile_2d();
        let (a, b) = ([a.0, a.1], [b.0, b.1]);
        let d = p.distance(&a, &b);
        prop_assert_eq!(d, p.distance(&b, &a));
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d == 0.0, a == b);
        prop_assert_eq!(p.sparsity(&a, &b), p.changed(&a, &b).len());
    }

    #[test]
    fn kernel_weights_decrease_with_distance(xs in prop::collection::vec(0.0f64..=10.0, 1..20), width in 0.05f64..5.0) {
        let p = profile_2d();
        let r = Record::new("r", vec![0.0, 0.0]);
        let mut samples = vec![r.clone()];
        samples.extend(xs.iter().map(|&x| Record::new("s", vec![x, 0.0])));
        let w = kernel_weights(&r, &samples, &p, width);
        prop_assert_eq!(w[0], 1.0);
        for (i, &x) in xs.iter().enumerate() {
            prop_assert!(w[i + 1] > 0.0 || x > 0.0);
            prop_assert!(w[i + 1] <= 1.0);
            for (k, &y) in xs.iter().enumerate() {
                if x < y {
                    prop_assert!(w[i + 1] >= w[k + 1]);
                }
            }
        }
    }

    #[test]
    fn diversity_selection_never_repeats(xs in prop::collection::vec(0u8..=10, 0..25), k in 0usize..8) {
        let p = profile_2d();
        let pool: Vec<ExampleCase> = xs
            .iter()
            .map(|&x| {
                let v = f64::from(x);
                ExampleCase {
                    candidate: Record::new(format!("c{x}"), vec![v, 0.0]),
                    predicted_class: ClassLabel::NEGATIVE,
                    changed_features: Vec::new(),
                    proximity: p.distance(&[0.0, 0.0], &[v, 0.0]),
                    sparsity: usize::from(x != 0),
                }
            })
            .collect();
        let out = diversity_select(&pool, k, &p);
        let distinct = {
            let mut d = xs.clone();
            d.sort_unstable();
            d.dedup();
            d.len()
        };
        prop_assert_eq!(out.len(), k.min(distinct));
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                prop_assert!(p.distance(&a.candidate.values, &b.candidate.values) > 0.0);
            }
        }
    }

    #[test]
    fn stratified_split_partitions(seed in any::<u64>(), frac in 0.05f64..0.5) {
        let data = &common::thyroid().data;
        let sub = data.subset(&(0..600).collect::<Vec<_>>());
        if sub.class_counts().iter().all(|&n| n >= 2) {
            let (train, test) = stratified_split(&sub, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), sub.len());
            let ids: std::collections::HashSet<&str> = train.records().iter().map(|r| r.id.as_str()).collect();
            prop_assert!(test.records().iter().all(|r| !ids.contains(r.id.as_str())));
        }
    }

    #[test]
    fn class_labels_round_trip(i in 0usize..3) {
        let c = ClassLabel::new(i).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(serde_json::from_str::<ClassLabel>(&text).unwrap(), c);
        let by_name: ClassLabel = serde_json::from_str(&format!("\"{}\"", c.default_name())).unwrap();
        prop_assert_eq!(by_name, c);
    }
}

fn named_schema(order: &[usize]) -> DatasetSchema {
    let names = ["alpha", "beta", "gamma", "delta"];
    let kinds: Vec<(&str, FeatureKind)> = order.iter().map(|&i| (names[i], FeatureKind::Real)).collect();
    DatasetSchema::from_kinds(&kinds).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn importance_is_permutation_equivariant(
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        seed in any::<u64>(),
        anchor in prop::collection::vec(-0.9f64..0.9, 4),
    ) {
        // model over named features: p1 = sigmoid(2 alpha - beta + 0.5 gamma)
        let coef = [2.0, -1.0, 0.5, 0.0];
        let base = named_schema(&[0, 1, 2, 3]);
        let permuted = named_schema(&perm);
        let grid: Vec<Vec<f64>> = (0..50).map(|i| (0..4).map(|j| ((i * 7 + j * 13) % 50) as f64 / 25.0 - 1.0).collect()).collect();
        let stats_of = |order: &[usize]| {
            let schema = named_schema(order);
            let recs: Vec<Record> = grid.iter().map(|g| Record::new("g", order.iter().map(|&i| g[i]).collect())).collect();
            FeatureStats::from_records(&schema, &recs).unwrap()
        };
        let model_for = |order: Vec<usize>| {
            FnClassifier(move |x: &[f64]| {
                let s: f64 = order.iter().zip(x).map(|(&i, v)| coef[i] * v).sum();
                let p = 1.0 / (1.0 + (-s).exp());
                [1.0 - p, p, 0.0]
            })
        };
        let cfg = PerturbationConfig { n_samples: 800, seed, ..PerturbationConfig::default() };
        let r0 = Record::new("r", anchor.clone());
        let r1 = Record::new("r", perm.iter().map(|&i| anchor[i]).collect());
        let w0 = explain_importance(&model_for(vec![0, 1, 2, 3]), &base, &r0, ClassLabel::HYPERTHYROID, &stats_of(&[0, 1, 2, 3]), &cfg).unwrap();
        let w1 = explain_importance(&model_for(perm.clone()), &permuted, &r1, ClassLabel::HYPERTHYROID, &stats_of(&perm), &cfg).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            prop_assert_eq!(&w1.weights[pos].name, &w0.weights[i].name);
            prop_assert!((w1.weights[pos].weight - w0.weights[i].weight).abs() < 1e-9);
        }
    }
}

#[test]
fn perturbation_is_seed_deterministic() {
    let schema = DatasetSchema::thyroid();
    let data = &common::thyroid().data;
    let stats = hypex_core::compute_stats(data).unwrap();
    let r = &data.records()[0];
    let cfg = PerturbationConfig { n_samples: 300, seed: 3, ..PerturbationConfig::default() };
    let a = perturb_around(&schema, r, &stats, &cfg).unwrap();
    let b = perturb_around(&schema, r, &stats, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].values, r.values);
    for s in &a {
        s.validate(&schema).unwrap();
    }
}
