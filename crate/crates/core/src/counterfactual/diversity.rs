use super::{DistanceProfile, ExampleCase};

/// Greedy max-min selection of up to `k` cases.
///
/// Starts from the best case by (sparsity, proximity), then repeatedly adds
/// the case whose minimum distance to the selection is largest, preferring
/// lower proximity on ties. Cases at distance zero from the selection are
/// never added, so duplicates are never co-selected.
pub fn diversity_select(candidates: &[ExampleCase], k: usize, profile: &DistanceProfile) -> Vec<ExampleCase> {
    if k == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let first = (0..candidates.len())
        .min_by(|&a, &b| candidates[a].rank_cmp(&candidates[b]).then(a.cmp(&b)))
        .expect("non-empty");
    let mut chosen = vec![first];
    let mut min_dist: Vec<f64> = candidates
        .iter()
        .map(|c| profile.distance(&c.candidate.values, &candidates[first].candidate.values))
        .collect();

    while chosen.len() < k {
        let mut best: Option<usize> = None;
        for i in 0..candidates.len() {
            if min_dist[i] <= 0.0 {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let better = min_dist[i] > min_dist[b]
                        || (min_dist[i] == min_dist[b]
                            && candidates[i].proximity < candidates[b].proximity);
                    Some(if better { i } else { b })
                }
            };
        }
        let Some(next) = best else { break };
        chosen.push(next);
        for (i, c) in candidates.iter().enumerate() {
            let d = profile.distance(&c.candidate.values, &candidates[next].candidate.values);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| candidates[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ClassLabel, DatasetSchema, FeatureKind};
    use crate::stats::FeatureStats;
    use crate::dataset::Record;

    fn profile() -> DistanceProfile {
        let schema = DatasetSchema::from_kinds(&[("x", FeatureKind::Real)]).unwrap();
        let recs = [Record::new("a", vec![0.0]), Record::new("b", vec![10.0])];
        let stats = FeatureStats::from_records(&schema, &recs).unwrap();
        DistanceProfile::new(&schema, &stats).unwrap()
    }

    fn case(query: f64, x: f64, p: &DistanceProfile) -> ExampleCase {
        ExampleCase::build(&[query], vec![x], format!("c{x}"), ClassLabel::HYPERTHYROID, p)
    }

    #[test]
    fn single_candidate() {
        let p = profile();
        let out = diversity_select(&[case(0.0, 4.0, &p)], 3, &p);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn duplicates_never_co_selected() {
        let p = profile();
        let pool = vec![case(0.0, 4.0, &p), case(0.0, 4.0, &p), case(0.0, 4.0, &p)];
        assert_eq!(diversity_select(&pool, 3, &p).len(), 1);
        let pool = vec![case(0.0, 4.0, &p), case(0.0, 4.0, &p), case(0.0, 6.0, &p)];
        let out = diversity_select(&pool, 3, &p);
        assert_eq!(out.len(), 2);
        assert_ne!(out[0].candidate.values, out[1].candidate.values);
    }

    #[test]
    fn collinear_picks_far_end() {
        // query at 0; A=1 is best, B=2, C=5 is farthest from A
        let p = profile();
        let pool = vec![case(0.0, 2.0, &p), case(0.0, 5.0, &p), case(0.0, 1.0, &p)];
        let out = diversity_select(&pool, 2, &p);
        let xs: Vec<f64> = out.iter().map(|c| c.candidate.values[0]).collect();
        assert_eq!(xs, [1.0, 5.0]);
    }

    #[test]
    fn zero_k() {
        let p = profile();
        assert!(diversity_select(&[case(0.0, 1.0, &p)], 0, &p).is_empty());
    }
}
