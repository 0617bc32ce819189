//! Genetic search for counterexamples and similar cases.
//!
//! The population is seeded half from dataset records of the wanted class
//! (nearest to the query first) and half from perturbed copies of the query.
//! Fitness is a hard validity filter followed by proximity plus a
//! per-changed-feature penalty; invalid individuals are ranked by how far
//! the model is from the wanted class so the population drifts toward it.
//! Every valid individual ever seen goes into an archive. Counterexamples
//! from the archive are then pulled back toward the query feature by
//! feature until any further step would break validity.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{
    default_constraints, diversity_select, CfConfig, Constraints, DistanceProfile, ExampleCase,
    SearchOutcome, Validity,
};
use crate::classifier::{argmax, Classifier};
use crate::dataset::{LabeledDataset, Record};
use crate::error::{Error, Result};
use crate::schema::{ClassLabel, FeatureKind};

const ELITE_FRACTION: f64 = 0.1;
const TOURNAMENT: usize = 3;
const REVERT_PROB: f64 = 0.1;
/// Local mutation step as a fraction of the feature range.
const LOCAL_STEP: f64 = 0.05;
const INVALID_PENALTY: f64 = 10.0;
const REFINE_PASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Counterexample,
    Similar,
}

/// Up to `config.k` diverse candidates that the model assigns to
/// `config.target_class`, sorted by (sparsity, proximity).
pub fn generate_counterexamples<C: Classifier + ?Sized>(
    model: &C,
    query: &Record,
    config: &CfConfig,
    profile: &DistanceProfile,
    data: &LabeledDataset,
) -> Result<SearchOutcome> {
    run(model, query, config, profile, data, Mode::Counterexample)
}

/// Up to `k` diverse candidates, distinct from the query, that the model
/// keeps in `hypothesis`. Uses default search parameters.
pub fn generate_similar_cases<C: Classifier + ?Sized>(
    model: &C,
    query: &Record,
    hypothesis: ClassLabel,
    k: usize,
    profile: &DistanceProfile,
    data: &LabeledDataset,
    seed: u64,
) -> Result<SearchOutcome> {
    let config = CfConfig {
        target_class: hypothesis,
        k,
        seed,
        ..CfConfig::default()
    };
    generate_similar_cases_with(model, query, &config, profile, data)
}

/// As [`generate_similar_cases`] with full control over the search;
/// `config.target_class` is the hypothesis.
pub fn generate_similar_cases_with<C: Classifier + ?Sized>(
    model: &C,
    query: &Record,
    config: &CfConfig,
    profile: &DistanceProfile,
    data: &LabeledDataset,
) -> Result<SearchOutcome> {
    run(model, query, config, profile, data, Mode::Similar)
}

fn run<C: Classifier + ?Sized>(
    model: &C,
    query: &Record,
    config: &CfConfig,
    profile: &DistanceProfile,
    data: &LabeledDataset,
    mode: Mode,
) -> Result<SearchOutcome> {
    config.validate()?;
    if query.values.len() != profile.len() || data.schema().len() != profile.len() {
        return Err(Error::RecordShape(format!(
            "query has {} values, profile {} features, dataset {} features",
            query.values.len(),
            profile.len(),
            data.schema().len()
        )));
    }
    if config.k == 0 {
        return Ok(SearchOutcome {
            cases: Vec::new(),
            requested: 0,
            budget_exhausted: false,
        });
    }
    if config.generations == 0 {
        return Ok(SearchOutcome::empty(config.k));
    }
    let profile = profile.clone().with_immutable(&config.immutable_features)?;
    let constraints: Constraints = if config.domain_constraints {
        default_constraints(data.schema())
    } else {
        Vec::new()
    };
    let validity = Validity {
        model,
        target: config.target_class,
        constraints: &constraints,
    };
    let search = Search {
        model,
        query: &query.values,
        profile: &profile,
        validity: &validity,
        config,
        mode,
        mutable: profile.mutable_features(),
    };
    Ok(search.execute(&query.id, data))
}

struct Search<'a, C: ?Sized> {
    model: &'a C,
    query: &'a [f64],
    profile: &'a DistanceProfile,
    validity: &'a Validity<'a, C>,
    config: &'a CfConfig,
    mode: Mode,
    mutable: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Fitness {
    score: f64,
    valid: bool,
}

fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

impl<C: Classifier + ?Sized> Search<'_, C> {
    fn execute(&self, query_id: &str, data: &LabeledDataset) -> SearchOutcome {
        let cfg = self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut population = self.seed_population(data, &mut rng);

        let mut seen = HashSet::new();
        let mut archive: Vec<Vec<f64>> = Vec::new();
        for generation in 0..cfg.generations {
            let fitness: Vec<Fitness> = population.par_iter().map(|x| self.fitness(x)).collect();
            for (x, f) in population.iter().zip(&fitness) {
                if f.valid && seen.insert(key(x)) {
                    archive.push(x.clone());
                }
            }
            if generation + 1 == cfg.generations {
                break;
            }
            population = self.breed(&population, &fitness, &mut rng);
        }

        let pool = self.finish(archive);
        let selected = diversity_select(&pool, cfg.k, self.profile);
        let mut cases = selected;
        cases.sort_by(|a, b| a.rank_cmp(b));
        let tag = match self.mode {
            Mode::Counterexample => format!("cf{}", cfg.target_class.index()),
            Mode::Similar => "sc".to_owned(),
        };
        for (i, c) in cases.iter_mut().enumerate() {
            c.candidate.id = format!("{query_id}-{tag}-{}", i + 1);
        }
        SearchOutcome {
            budget_exhausted: cases.len() < cfg.k,
            requested: cfg.k,
            cases,
        }
    }

    fn fitness(&self, x: &[f64]) -> Fitness {
        let sparsity = self.profile.sparsity(self.query, x);
        let prox = self.profile.distance(self.query, x);
        let admitted = self.validity.constraints.iter().all(|c| c.admits(x));
        let p = self.model.predict_proba(x);
        let target = self.config.target_class;
        let valid = sparsity > 0 && admitted && argmax(&p) == target;
        let score = if valid {
            prox + self.config.sparsity_pressure * sparsity as f64
        } else {
            INVALID_PENALTY + (1.0 - p[target.index()]) + prox
        };
        Fitness { score, valid }
    }

    fn seed_population(&self, data: &LabeledDataset, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = self.config.population_size;
        let target = self.config.target_class;
        let mut nearest: Vec<(f64, usize)> = data
            .iter()
            .enumerate()
            .filter(|(_, (_, label))| *label == target)
            .map(|(i, (r, _))| (self.profile.distance(self.query, &r.values), i))
            .filter(|(d, _)| *d > 0.0)
            .collect();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut population: Vec<Vec<f64>> = nearest
            .iter()
            .take(n / 2)
            .map(|&(_, i)| self.project(data.records()[i].values.clone()))
            .collect();
        while population.len() < n {
            let mut x = self.query.to_vec();
            if !self.mutable.is_empty() {
                let m = rng.random_range(1..=3.min(self.mutable.len()));
                for _ in 0..m {
                    let j = self.mutable[rng.random_range(0..self.mutable.len())];
                    x[j] = match self.mode {
                        Mode::Counterexample => self.resample(j, rng),
                        Mode::Similar => self.local_step(j, x[j], rng),
                    };
                }
            }
            population.push(x);
        }
        population
    }

    /// Pins frozen features to the query and snaps the rest onto their domain.
    fn project(&self, mut x: Vec<f64>) -> Vec<f64> {
        for (j, v) in x.iter_mut().enumerate() {
            *v = if self.profile.is_mutable(j) {
                self.profile.conform(j, *v)
            } else {
                self.query[j]
            };
        }
        x
    }

    fn resample(&self, j: usize, rng: &mut ChaCha8Rng) -> f64 {
        let (lo, hi) = self.profile.bounds(j);
        match self.profile.kind(j) {
            FeatureKind::Boolean => f64::from(rng.random_bool(0.5)),
            FeatureKind::Integer => rng.random_range(lo.round() as i64..=hi.round() as i64) as f64,
            FeatureKind::Real => rng.random_range(lo..=hi),
        }
    }

    fn local_step(&self, j: usize, current: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self.profile.kind(j) {
            FeatureKind::Boolean => 1.0 - current,
            kind => {
                let sd = (self.profile.scale(j) * LOCAL_STEP).max(f64::MIN_POSITIVE);
                let step = Normal::new(0.0, sd).expect("positive sd").sample(rng);
                let mut v = self.profile.conform(j, current + step);
                if kind == FeatureKind::Integer && v == current {
                    v = self.profile.conform(j, current + step.signum());
                }
                v
            }
        }
    }

    fn breed(&self, population: &[Vec<f64>], fitness: &[Fitness], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = population.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| fitness[a].score.total_cmp(&fitness[b].score).then(a.cmp(&b)));
        let elite = ((n as f64 * ELITE_FRACTION).ceil() as usize).clamp(1, n);
        let mut next: Vec<Vec<f64>> = order[..elite].iter().map(|&i| population[i].clone()).collect();

        let tournament = |rng: &mut ChaCha8Rng| {
            (0..TOURNAMENT)
                .map(|_| rng.random_range(0..n))
                .min_by(|&a, &b| fitness[a].score.total_cmp(&fitness[b].score).then(a.cmp(&b)))
                .expect("tournament is non-empty")
        };
        let p_mut = if self.mutable.is_empty() {
            0.0
        } else {
            (1.0 / self.mutable.len() as f64).max(0.05)
        };
        while next.len() < n {
            let a = &population[tournament(rng)];
            let b = &population[tournament(rng)];
            let mut child: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
                .collect();
            for &j in &self.mutable {
                let r: f64 = rng.random();
                if r < p_mut / 2.0 {
                    child[j] = self.resample(j, rng);
                } else if r < p_mut {
                    child[j] = self.local_step(j, child[j], rng);
                } else if r < p_mut + REVERT_PROB {
                    child[j] = self.query[j];
                }
            }
            next.push(self.project(child));
        }
        next
    }

    /// Ranks the archive, refines counterexamples and returns the pool handed
    /// to diversity selection.
    fn finish(&self, archive: Vec<Vec<f64>>) -> Vec<ExampleCase> {
        let k = self.config.k;
        let rank = |x: &Vec<f64>| {
            (
                self.profile.sparsity(self.query, x),
                self.profile.distance(self.query, x),
            )
        };
        let mut ranked: Vec<((usize, f64), Vec<f64>)> = archive.into_iter().map(|x| (rank(&x), x)).collect();
        ranked.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
        ranked.truncate((8 * k).max(40));

        if self.mode == Mode::Counterexample {
            let refined: Vec<Vec<f64>> = ranked
                .par_iter()
                .map(|(_, x)| {
                    let mut x = x.clone();
                    self.refine(&mut x);
                    x
                })
                .collect();
            let mut seen = HashSet::new();
            ranked = refined
                .into_iter()
                .filter(|x| seen.insert(key(x)))
                .map(|x| (rank(&x), x))
                .collect();
            ranked.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
        }
        ranked.truncate((4 * k).max(k));

        ranked
            .into_iter()
            .map(|(_, x)| {
                let predicted = self.model.predict_class(&x);
                ExampleCase::build(self.query, x, String::new(), predicted, self.profile)
            })
            .collect()
    }

    /// Moves each changed feature back toward the query as far as validity
    /// allows: full reversion when possible, otherwise a bisection to the
    /// nearest valid value on the segment.
    fn refine(&self, x: &mut [f64]) {
        let ok = |x: &[f64]| self.profile.sparsity(self.query, x) > 0 && self.validity.check(x);
        debug_assert!(ok(x));
        for _ in 0..REFINE_PASSES {
            let mut moved = false;
            for j in self.profile.changed(self.query, x) {
                let orig = x[j];
                let q = self.query[j];
                x[j] = q;
                if ok(x) {
                    moved = true;
                    continue;
                }
                x[j] = orig;
                match self.profile.kind(j) {
                    FeatureKind::Boolean => {}
                    FeatureKind::Integer => {
                        let (mut bad, mut good) = (q as i64, orig as i64);
                        while (good - bad).abs() > 1 {
                            let mid = bad + (good - bad) / 2;
                            x[j] = mid as f64;
                            if ok(x) {
                                good = mid;
                            } else {
                                bad = mid;
                            }
                        }
                        x[j] = good as f64;
                    }
                    FeatureKind::Real => {
                        let (mut bad, mut good) = (0.0f64, 1.0f64);
                        let at = |t: f64| q + t * (orig - q);
                        let tol = 1e-12 * self.profile.scale(j).max(f64::MIN_POSITIVE);
                        for _ in 0..64 {
                            if (at(good) - at(bad)).abs() <= tol {
                                break;
                            }
                            let mid = 0.5 * (bad + good);
                            x[j] = at(mid);
                            if ok(x) {
                                good = mid;
                            } else {
                                bad = mid;
                            }
                        }
                        x[j] = at(good);
                    }
                }
                if x[j] != orig {
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
}
