//! Regression trees grown on gradient/hessian statistics.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Samples with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Structural check used when loading untrusted artifacts: child links
    /// point forward and in bounds, features exist, values are finite.
    pub(crate) fn check(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(format!("node {i}: non-finite leaf"))
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let (l, r) = (*left as usize, *right as usize);
                    if *feature >= n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    if l <= i || r <= i || l >= self.nodes.len() || r >= self.nodes.len() {
                        return Err(format!("node {i}: bad child link"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Training matrix in column-major layout with per-feature sort orders.
pub(crate) struct Columns {
    pub values: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<u32>>,
}

impl Columns {
    pub fn new(rows: &[&[f64]], n_features: usize) -> Self {
        let values: Vec<Vec<f64>> = (0..n_features)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let sorted = values
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        Columns { values, sorted }
    }

    pub fn n_rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub learning_rate: f64,
}

const NO_NODE: u32 = u32::MAX;
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Default)]
struct Acc {
    g: f64,
    h: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn score(&self, lambda: f64) -> f64 {
        self.g * self.g / (self.h + lambda)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one tree level by level with exact greedy split search. Samples
/// with `in_bag[i] == false` do not contribute.
pub(crate) fn grow(cols: &Columns, grad: &[f64], hess: &[f64], in_bag: &[bool], p: &GrowParams) -> Tree {
    let n = cols.n_rows();
    let mut node_of: Vec<u32> = (0..n).map(|i| if in_bag[i] { 0 } else { NO_NODE }).collect();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut totals: Vec<Acc> = vec![Acc::default()];
    for i in 0..n {
        if in_bag[i] {
            totals[0].add(grad[i], hess[i]);
        }
    }
    let mut frontier: Vec<u32> = vec![0];

    for _depth in 0..p.max_depth {
        if frontier.is_empty() {
            break;
        }
        // node id -> position in the frontier
        let mut slot_of = vec![NO_NODE; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot_of[id as usize] = s as u32;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];

        for (feature, order) in cols.sorted.iter().enumerate() {
            let col = &cols.values[feature];
            let mut left = vec![Acc::default(); frontier.len()];
            let mut last: Vec<Option<f64>> = vec![None; frontier.len()];
            for &i in order {
                let i = i as usize;
                let node = node_of[i];
                if node == NO_NODE {
                    continue;
                }
                let slot = slot_of[node as usize];
                if slot == NO_NODE {
                    continue;
                }
                let s = slot as usize;
                let x = col[i];
                if let Some(prev) = last[s] {
                    if x != prev {
                        let total = totals[node as usize];
                        let l = left[s];
                        let r = Acc {
                            g: total.g - l.g,
                            h: total.h - l.h,
                            n: total.n - l.n,
                        };
                        if l.n >= p.min_samples_leaf && r.n >= p.min_samples_leaf {
                            let gain = 0.5
                                * (l.score(p.lambda) + r.score(p.lambda) - total.score(p.lambda));
                            if gain > MIN_GAIN && best[s].is_none_or(|b| gain > b.gain) {
                                best[s] = Some(Candidate {
                                    gain,
                                    feature,
                                    threshold: prev + (x - prev) / 2.0,
                                });
                            }
                        }
                    }
                }
                left[s].add(grad[i], hess[i]);
                last[s] = Some(x);
            }
        }

        let mut next = Vec::new();
        let mut child_of: Vec<Option<(u32, u32, usize, f64)>> = vec![None; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let l = nodes.len() as u32;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    totals.push(Acc::default());
                    totals.push(Acc::default());
                    nodes[id as usize] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: l + 1,
                    };
                    child_of[id as usize] = Some((l, l + 1, c.feature, c.threshold));
                    next.push(l);
                    next.push(l + 1);
                }
                None => {
                    nodes[id as usize] = leaf(totals[id as usize], p);
                }
            }
        }
        for i in 0..n {
            let node = node_of[i];
            if node == NO_NODE {
                continue;
            }
            if let Some(Some((l, r, f, t))) = child_of.get(node as usize) {
                let child = if cols.values[*f][i] < *t { *l } else { *r };
                node_of[i] = child;
                totals[child as usize].add(grad[i], hess[i]);
            }
        }
        frontier = next;
    }
    for id in frontier {
        nodes[id as usize] = leaf(totals[id as usize], p);
    }
    Tree { nodes }
}

fn leaf(acc: Acc, p: &GrowParams) -> Node {
    Node::Leaf {
        value: -acc.g / (acc.h + p.lambda) * p.learning_rate,
    }
}
