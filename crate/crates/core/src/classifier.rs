//! The black-box interface the explainers work against.

use crate::schema::{ClassLabel, NUM_CLASSES};

pub type Proba = [f64; NUM_CLASSES];

/// A probabilistic classifier over raw feature vectors in schema order.
///
/// Explainers only ever query probabilities, so any model implementing this
/// trait can be explained, including hand-written oracles in tests.
pub trait Classifier: Sync {
    fn predict_proba(&self, values: &[f64]) -> Proba;

    fn predict_class(&self, values: &[f64]) -> ClassLabel {
        argmax(&self.predict_proba(values))
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict_proba(&self, values: &[f64]) -> Proba {
        (**self).predict_proba(values)
    }

    fn predict_class(&self, values: &[f64]) -> ClassLabel {
        (**self).predict_class(values)
    }
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(p: &Proba) -> ClassLabel {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    ClassLabel::new(best).expect("index below NUM_CLASSES")
}

pub fn softmax(scores: &Proba) -> Proba {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| (s - max).exp());
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Wraps a closure as a classifier. Handy for synthetic oracles.
pub struct FnClassifier<F>(pub F);

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> Proba + Sync,
{
    fn predict_proba(&self, values: &[f64]) -> Proba {
        (self.0)(values)
    }
}
