//! Bagged regression forests with out-of-bag bookkeeping.
//!
//! Every tree keeps the training indices that reached each leaf, so the same
//! fitted forest answers mean, spread and quantile queries for the whole
//! ensemble or for any subset of trees. Quantiles follow Meinshausen's
//! weighting: each tree in the subset carries equal mass, spread evenly over
//! the members of the leaf that `x` falls into.
//!
//! Tree `j` draws its bag and feature subsets from a ChaCha stream selected
//! by `j` under the master seed, so results do not depend on the order in
//! which trees are grown.

mod bag;
mod tree;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bag::{Bag, BagMode};
pub use tree::{Leaf, RegressionTree};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::family::{PointQuery, Predictor};
use tree::TreeParams;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub mode: BagMode,
    /// Bag size; `None` means `n` for bootstrap and `n / 2` for subsampling.
    pub bag_size: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means all.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            mode: BagMode::Bootstrap,
            bag_size: None,
            min_leaf: 5,
            mtry: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn bag_size_for(&self, n: usize) -> usize {
        self.bag_size.unwrap_or(match self.mode {
            BagMode::Bootstrap => n,
            BagMode::Subsample => (n / 2).max(1),
        })
    }
}

/// What to compute from a set of trees at one feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Query {
    Mean,
    Spread,
    Quantile(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForest {
    format_version: u32,
    config: ForestConfig,
    n_train: usize,
    trees: Vec<RegressionTree>,
    bags: Vec<Bag>,
    #[serde(skip)]
    oob: Vec<Vec<usize>>,
}

impl QuantileForest {
    pub fn fit(data: &Dataset, config: &ForestConfig) -> Result<Self> {
        let n = data.len();
        if n < 2 {
            return Err(Error::NotEnoughData(format!("forest needs at least 2 points, got {n}")));
        }
        if config.trees == 0 {
            return Err(invalid("trees", "need at least one tree"));
        }
        if config.min_leaf == 0 {
            return Err(invalid("min_leaf", "must be at least 1"));
        }
        let m = config.bag_size_for(n);
        if m == 0 || (config.mode == BagMode::Subsample && m > n) {
            return Err(invalid("bag_size", format!("{m} is outside 1..={n}")));
        }
        let params = TreeParams {
            min_leaf: config.min_leaf,
            mtry: config.mtry.unwrap_or(data.dim()).clamp(1, data.dim()),
        };
        let grown: Vec<(Bag, RegressionTree)> = (0..config.trees)
            .into_par_iter()
            .map(|j| {
                let mut rng = tree_rng(config.seed, j);
                let bag = Bag::draw(config.mode, n, m, &mut rng);
                let tree = RegressionTree::grow(data, bag.indices().to_vec(), params, &mut rng);
                (bag, tree)
            })
            .collect();
        let (bags, trees) = grown.into_iter().unzip();
        let mut forest = Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            n_train: n,
            trees,
            bags,
            oob: Vec::new(),
        };
        forest.index_out_of_bag();
        Ok(forest)
    }

    fn index_out_of_bag(&mut self) {
        let mut oob = vec![Vec::new(); self.n_train];
        for (j, bag) in self.bags.iter().enumerate() {
            let mut in_bag = vec![false; self.n_train];
            for &i in bag.indices() {
                in_bag[i] = true;
            }
            for (i, list) in oob.iter_mut().enumerate() {
                if !in_bag[i] {
                    list.push(j);
                }
            }
        }
        self.oob = oob;
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    /// For each training index, the trees whose bag excludes it.
    pub fn oob_map(&self) -> &[Vec<usize>] {
        &self.oob
    }

    pub fn oob_trees(&self, i: usize) -> &[usize] {
        &self.oob[i]
    }

    /// Fails on the first training index that is in every bag.
    pub fn require_out_of_bag(&self) -> Result<()> {
        match self.oob.iter().position(Vec::is_empty) {
            Some(i) => Err(Error::NeverOutOfBag(i)),
            None => Ok(()),
        }
    }

    /// The leaf reached by `x` in every tree, indexed by tree id.
    pub fn leaves_at(&self, x: &[f64]) -> Vec<&Leaf> {
        self.trees.iter().map(|t| t.leaf(x)).collect()
    }

    pub fn query(&self, trees: &[usize], x: &[f64], what: Query) -> Result<f64> {
        if trees.is_empty() {
            return Err(Error::NoOutOfBagTrees);
        }
        let leaves: Vec<&Leaf> = trees.iter().map(|&j| self.trees[j].leaf(x)).collect();
        let view = LeafEnsemble::new(leaves);
        Ok(match what {
            Query::Mean => view.mean(),
            Query::Spread => view.spread(),
            Query::Quantile(level) => view.quantiles(&[level])[0],
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut forest: Self = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if forest.format_version != FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported forest format version {}",
                forest.format_version
            )));
        }
        if forest.bags.len() != forest.trees.len() {
            return Err(Error::Serialization("bag and tree counts differ".into()));
        }
        forest.index_out_of_bag();
        Ok(forest)
    }
}

pub(crate) fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// The leaves one feature vector reaches in a set of trees.
#[derive(Debug, Clone)]
pub struct LeafEnsemble<'a> {
    leaves: Vec<&'a Leaf>,
}

impl<'a> LeafEnsemble<'a> {
    pub fn new(leaves: Vec<&'a Leaf>) -> Self {
        assert!(!leaves.is_empty(), "ensemble view needs at least one leaf");
        Self { leaves }
    }

    /// Picks `trees` out of leaves indexed by tree id.
    pub fn subset(all: &[&'a Leaf], trees: &[usize]) -> Self {
        Self::new(trees.iter().map(|&j| all[j]).collect())
    }
}

impl PointQuery for LeafEnsemble<'_> {
    fn mean(&self) -> f64 {
        self.leaves.iter().map(|l| l.mean()).sum::<f64>() / self.leaves.len() as f64
    }

    fn spread(&self) -> f64 {
        let mean = self.mean();
        let var = self.leaves.iter().map(|l| (l.mean() - mean).powi(2)).sum::<f64>() / self.leaves.len() as f64;
        var.sqrt()
    }

    fn quantiles(&self, levels: &[f64]) -> Vec<f64> {
        weighted_quantiles(&self.leaves, levels)
    }
}

/// Generalized inverse of the pooled leaf distribution: for each level, the
/// smallest value whose cumulative weight reaches it. Each leaf carries unit
/// mass shared equally among its members.
fn weighted_quantiles(leaves: &[&Leaf], levels: &[f64]) -> Vec<f64> {
    let total = leaves.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(leaves.iter().map(|l| l.values().len()).sum());
    for leaf in leaves {
        let w = 1.0 / leaf.values().len() as f64;
        points.extend(leaf.values().iter().map(|&v| (v, w)));
    }
    points.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let mut out = vec![0.0; levels.len()];
    let slack = 1e-12 * total;
    let mut cum = 0.0;
    let mut k = 0;
    for idx in order {
        let target = levels[idx] * total - slack;
        while k < points.len() - 1 && cum + points[k].1 < target {
            cum += points[k].1;
            k += 1;
        }
        out[idx] = points[k].0;
    }
    out
}

/// Predictor over the whole ensemble.
#[derive(Debug, Clone)]
pub struct ForestPredictor {
    forest: Arc<QuantileForest>,
}

impl ForestPredictor {
    pub fn new(forest: Arc<QuantileForest>) -> Self {
        Self { forest }
    }
}

impl Predictor for ForestPredictor {
    fn query<'a>(&'a self, x: &'a [f64]) -> Box<dyn PointQuery + 'a> {
        Box::new(LeafEnsemble::new(self.forest.leaves_at(x)))
    }
}

/// Predictor over a fixed subset of trees, typically those out-of-bag for
/// one training point.
#[derive(Debug, Clone)]
pub struct SubsetPredictor {
    forest: Arc<QuantileForest>,
    trees: Vec<usize>,
}

impl SubsetPredictor {
    pub fn new(forest: Arc<QuantileForest>, trees: Vec<usize>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::NoOutOfBagTrees);
        }
        Ok(Self { forest, trees })
    }
}

impl Predictor for SubsetPredictor {
    fn query<'a>(&'a self, x: &'a [f64]) -> Box<dyn PointQuery + 'a> {
        let leaves = self.trees.iter().map(|&j| self.forest.trees[j].leaf(x)).collect();
        Box::new(LeafEnsemble::new(leaves))
    }
}

/// Probability that a fixed index is left out of one bag drawn from `n + 1`
/// points: `(1 - 1/(n+1))^m` for bagging, `1 - m/(n+1)` for subsampling.
pub fn out_of_bag_probability(mode: BagMode, n: usize, m: usize) -> f64 {
    let n1 = n as f64 + 1.0;
    match mode {
        BagMode::Bootstrap => (1.0 - 1.0 / n1).powi(m as i32),
        BagMode::Subsample => (1.0 - m as f64 / n1).max(0.0),
    }
}

/// Draws the ensemble size `K ~ Binomial(k_tilde, p)` with `p` from
/// [`out_of_bag_probability`].
pub fn draw_tree_count(k_tilde: u64, mode: BagMode, n: usize, m: usize, seed: u64) -> Result<usize> {
    let p = out_of_bag_probability(mode, n, m);
    let dist = Binomial::new(k_tilde, p).map_err(|e| invalid("k_tilde", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(dist.sample(&mut rng) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let y = rows.iter().map(|r| 3.0 * r[0] + rng.random::<f64>()).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn oob_map_is_bag_complement() {
        let data = toy(40, 1);
        let cfg = ForestConfig {
            trees: 15,
            ..ForestConfig::default()
        };
        let forest = QuantileForest::fit(&data, &cfg).unwrap();
        for i in 0..40 {
            let expected: Vec<usize> = (0..15).filter(|&j| !forest.bags()[j].contains(i)).collect();
            assert_eq!(forest.oob_trees(i), expected.as_slice());
            for &j in forest.oob_trees(i) {
                assert!(forest.trees()[j].leaves().all(|l| !l.members().contains(&i)));
            }
        }
    }

    #[test]
    fn single_full_subsample_tree_has_no_oob() {
        let data = toy(10, 2);
        let cfg = ForestConfig {
            trees: 1,
            mode: BagMode::Subsample,
            bag_size: Some(10),
            ..ForestConfig::default()
        };
        let forest = QuantileForest::fit(&data, &cfg).unwrap();
        assert!(forest.oob_map().iter().all(Vec::is_empty));
        assert!(matches!(forest.require_out_of_bag(), Err(Error::NeverOutOfBag(0))));
    }

    #[test]
    fn quantile_examples() {
        let leaf = Leaf::from_values(vec![4.0, 2.0, 3.0, 1.0]);
        let view = LeafEnsemble::new(vec![&leaf]);
        // CDF: 0.25, 0.5, 0.75, 1.0 at 1, 2, 3, 4
        assert_eq!(view.quantiles(&[0.5, 0.25, 0.26, 1.0, 0.0]), vec![2.0, 1.0, 2.0, 4.0, 1.0]);

        let a = Leaf::from_values(vec![2.0]);
        let b = Leaf::from_values(vec![4.0]);
        let two = LeafEnsemble::new(vec![&a, &b]);
        assert_eq!(two.mean(), 3.0);
        assert_eq!(two.spread(), 1.0);
    }

    #[test]
    fn trees_weigh_equally_regardless_of_leaf_size() {
        let a = Leaf::from_values(vec![0.0]);
        let b = Leaf::from_values(vec![10.0, 10.0, 10.0, 10.0]);
        let view = LeafEnsemble::new(vec![&a, &b]);
        assert_eq!(view.quantiles(&[0.5]), vec![0.0]);
        assert_eq!(view.quantiles(&[0.51]), vec![10.0]);
    }

    #[test]
    fn deterministic_given_seed() {
        let data = toy(50, 3);
        let cfg = ForestConfig {
            trees: 10,
            seed: 42,
            ..ForestConfig::default()
        };
        let a = QuantileForest::fit(&data, &cfg).unwrap();
        let b = QuantileForest::fit(&data, &cfg).unwrap();
        assert_eq!(a, b);
        let other = QuantileForest::fit(&data, &ForestConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.bags(), other.bags());
    }

    #[test]
    fn empty_subset_is_an_error() {
        let data = toy(20, 4);
        let forest = QuantileForest::fit(&data, &ForestConfig { trees: 3, ..Default::default() }).unwrap();
        assert!(matches!(forest.query(&[], &[0.5, 0.5], Query::Mean), Err(Error::NoOutOfBagTrees)));
    }

    #[test]
    fn json_round_trip_rebuilds_oob() {
        let data = toy(30, 5);
        let forest = QuantileForest::fit(&data, &ForestConfig { trees: 5, ..Default::default() }).unwrap();
        let back = QuantileForest::from_json(&forest.to_json().unwrap()).unwrap();
        assert_eq!(back, forest);
    }

    #[test]
    fn invalid_configs() {
        let data = toy(10, 6);
        let bad = |cfg: ForestConfig| QuantileForest::fit(&data, &cfg).is_err();
        assert!(bad(ForestConfig { trees: 0, ..Default::default() }));
        assert!(bad(ForestConfig { min_leaf: 0, ..Default::default() }));
        assert!(bad(ForestConfig {
            mode: BagMode::Subsample,
            bag_size: Some(11),
            ..Default::default()
        }));
        let one = Dataset::from_rows(&[vec![1.0]], vec![1.0]).unwrap();
        assert!(QuantileForest::fit(&one, &ForestConfig::default()).is_err());
    }

    #[test]
    fn bagging_probability_matches_direct_evaluation() {
        let p = out_of_bag_probability(BagMode::Bootstrap, 99, 100);
        assert!((p - 0.99f64.powi(100)).abs() < 1e-15);
        assert_eq!(out_of_bag_probability(BagMode::Subsample, 99, 50), 0.5);
    }
}
