//! CART regression trees whose leaves remember their training members.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Terminal node: the training indices that reached it and their responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    members: Vec<usize>,
    /// Responses of `members`, sorted ascending.
    values: Vec<f64>,
    mean: f64,
}

impl Leaf {
    fn new(data: &Dataset, members: Vec<usize>) -> Self {
        let mut values: Vec<f64> = members.iter().map(|&i| data.target(i)).collect();
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            members,
            values,
            mean,
        }
    }

    /// Builds a leaf directly from response values.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            members: Vec::new(),
            values,
            mean,
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub min_leaf: usize,
    pub mtry: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Number of samples going left in the sorted order.
    left_count: usize,
}

impl RegressionTree {
    /// Grows a tree on the rows listed in `samples` (repeats allowed).
    pub(crate) fn grow<R: Rng + ?Sized>(data: &Dataset, samples: Vec<usize>, params: TreeParams, rng: &mut R) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow_node(data, samples, params, rng);
        tree
    }

    fn grow_node<R: Rng + ?Sized>(&mut self, data: &Dataset, samples: Vec<usize>, params: TreeParams, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let split = if samples.len() >= 2 * params.min_leaf {
            let features = candidate_features(data.dim(), params.mtry, rng);
            best_split(data, &samples, &features, params.min_leaf)
        } else {
            None
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf(Leaf::new(data, samples)));
            return id;
        };
        // placeholder, patched once both children exist
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| data.feature(i, split.feature) <= split.threshold);
        debug_assert_eq!(left.len(), split.left_count);
        let left_id = self.grow_node(data, left, params, rng);
        let right_id = self.grow_node(data, right, params, rng);
        if let Node::Split { left, right, .. } = &mut self.nodes[id] {
            *left = left_id;
            *right = right_id;
        }
        id
    }

    pub fn leaf(&self, x: &[f64]) -> &Leaf {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(leaf) => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf(x).mean
    }
}

fn candidate_features<R: Rng + ?Sized>(dim: usize, mtry: usize, rng: &mut R) -> Vec<usize> {
    if mtry >= dim {
        return (0..dim).collect();
    }
    let mut f = sample(rng, dim, mtry).into_vec();
    f.sort_unstable();
    f
}

/// Exhaustive variance-reduction search. Ties go to the lowest feature id,
/// then the lowest threshold.
fn best_split(data: &Dataset, samples: &[usize], features: &[usize], min_leaf: usize) -> Option<Split> {
    let n = samples.len();
    let mean = samples.iter().map(|&i| data.target(i)).sum::<f64>() / n as f64;
    let total_ss: f64 = samples.iter().map(|&i| (data.target(i) - mean).powi(2)).sum();
    if total_ss <= 0.0 {
        return None;
    }
    let total: f64 = samples.iter().map(|&i| data.target(i) - mean).sum();
    let base = total * total / n as f64;
    let min_gain = 1e-12 * total_ss;

    let mut best: Option<(f64, Split)> = None;
    let mut order = samples.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| data.feature(a, f).total_cmp(&data.feature(b, f)));
        let mut left_sum = 0.0;
        for p in 1..n {
            left_sum += data.target(order[p - 1]) - mean;
            if p < min_leaf || n - p < min_leaf {
                continue;
            }
            let a = data.feature(order[p - 1], f);
            let b = data.feature(order[p], f);
            if a >= b {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / p as f64 + right_sum * right_sum / (n - p) as f64 - base;
            if gain <= min_gain {
                continue;
            }
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((
                    gain,
                    Split {
                        feature: f,
                        threshold,
                        left_count: p,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}
