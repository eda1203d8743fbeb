use std::sync::Arc;

use rayon::prelude::*;

use super::{CalibratedPredictor, CalibrationPoint, Method, Models, Rule};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::family::{response_scale, FamilyKind, SCALE_FLOOR};
use crate::forest::{draw_tree_count, BagMode, ForestConfig, LeafEnsemble, QuantileForest};
use crate::rank::check_alpha;

/// How many trees the out-of-bag ensemble grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeCount {
    /// Exactly `ForestConfig::trees`.
    #[default]
    Fixed,
    /// `K ~ Binomial(k_tilde, p)` with `p` the chance that a given point of
    /// an `n + 1` sample is out of one bag; drawn before any fitting.
    Binomial { k_tilde: u64 },
}

/// Out-of-bag cross-conformal: fits one forest and scores point `i` with the
/// family built from the trees that never saw it.
pub fn oob_calibrate(
    train: &Dataset,
    forest: &ForestConfig,
    kind: FamilyKind,
    alpha: f64,
    count: TreeCount,
) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    kind.validate()?;
    let mut config = forest.clone();
    if let TreeCount::Binomial { k_tilde } = count {
        let n = train.len();
        let m = config.bag_size_for(n);
        // separate stream from the one used to grow trees
        let k = draw_tree_count(k_tilde, config.mode, n, m, config.seed ^ 0x6b5f_d1a3_94c2_e7f1)?;
        if k == 0 {
            return Err(Error::ZeroTrees);
        }
        config.trees = k;
    }
    let fitted = QuantileForest::fit(train, &config)?;
    oob_from_forest(train, Arc::new(fitted), kind, alpha)
}

/// Out-of-bag cross-conformal on an already fitted forest. `train` must be
/// the data the forest was fit on.
pub fn oob_from_forest(
    train: &Dataset,
    forest: Arc<QuantileForest>,
    kind: FamilyKind,
    alpha: f64,
) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    kind.validate()?;
    if forest.n_train() != train.len() {
        return Err(invalid(
            "train",
            format!("forest was fit on {} points, got {}", forest.n_train(), train.len()),
        ));
    }
    forest.require_out_of_bag()?;
    let floor = SCALE_FLOOR * response_scale(train.targets());
    let points: Vec<CalibrationPoint> = (0..train.len())
        .into_par_iter()
        .map(|i| {
            let leaves = forest.leaves_at(train.row(i));
            let local = kind.localize(&LeafEnsemble::subset(&leaves, forest.oob_trees(i)), floor);
            CalibrationPoint {
                index: i,
                model: i,
                score: local.score(train.target(i)),
            }
        })
        .collect();
    let method = if matches!(kind, FamilyKind::Cqr { .. }) {
        Method::Qoob
    } else {
        Method::OobCc
    };
    Ok(CalibratedPredictor {
        method,
        alpha,
        n: train.len(),
        models: Arc::new(Models::OutOfBag { forest, kind, floor }),
        points,
        rule: Rule::Counting,
    })
}

/// Settings for quantile out-of-bag conformal.
#[derive(Debug, Clone, PartialEq)]
pub struct QoobParams {
    pub trees: usize,
    /// Nominal quantile level; `None` means `2 * alpha`.
    pub beta: Option<f64>,
    pub mode: BagMode,
    pub bag_size: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    pub count: TreeCount,
}

impl Default for QoobParams {
    fn default() -> Self {
        Self {
            trees: 100,
            beta: None,
            mode: BagMode::Bootstrap,
            bag_size: None,
            min_leaf: 5,
            seed: 0,
            count: TreeCount::Fixed,
        }
    }
}

/// Quantile forest plus out-of-bag CQR family `[q_beta - t, q_{1-beta} + t]`,
/// aggregated by the cross-conformal sweep.
pub fn qoob(train: &Dataset, alpha: f64, params: &QoobParams) -> Result<CalibratedPredictor> {
    if params.trees < 2 {
        return Err(invalid("trees", format!("need at least 2, got {}", params.trees)));
    }
    let beta = params.beta.unwrap_or(2.0 * alpha);
    let forest = ForestConfig {
        trees: params.trees,
        mode: params.mode,
        bag_size: params.bag_size,
        min_leaf: params.min_leaf,
        mtry: None,
        seed: params.seed,
    };
    oob_calibrate(train, &forest, FamilyKind::Cqr { beta }, alpha, params.count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::Aggregate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_line(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let y = rows.iter().map(|r| 2.0 * r[0] + rng.random::<f64>()).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn default_beta_is_twice_alpha() {
        let train = noisy_line(40, 1);
        let p = qoob(&train, 0.1, &QoobParams { trees: 40, ..Default::default() }).unwrap();
        assert_eq!(p.method(), Method::Qoob);
        let Models::OutOfBag { kind, .. } = p.models.as_ref() else {
            panic!("expected an out-of-bag predictor")
        };
        assert_eq!(*kind, FamilyKind::Cqr { beta: 0.2 });
    }

    #[test]
    fn never_out_of_bag_is_reported() {
        let train = noisy_line(10, 2);
        let forest = ForestConfig {
            trees: 1,
            mode: BagMode::Subsample,
            bag_size: Some(10),
            ..Default::default()
        };
        let err = oob_calibrate(&train, &forest, FamilyKind::MeanSymmetric, 0.1, TreeCount::Fixed).unwrap_err();
        assert!(matches!(err, Error::NeverOutOfBag(_)));
    }

    #[test]
    fn binomial_zero_trees_is_an_error() {
        let train = noisy_line(10, 3);
        // zero candidate trees can only produce K = 0
        let forest = ForestConfig {
            mode: BagMode::Subsample,
            bag_size: Some(5),
            ..Default::default()
        };
        let err = oob_calibrate(&train, &forest, FamilyKind::MeanSymmetric, 0.1, TreeCount::Binomial { k_tilde: 0 })
            .unwrap_err();
        assert!(matches!(err, Error::ZeroTrees));
    }

    #[test]
    fn too_few_trees_for_qoob() {
        let train = noisy_line(10, 4);
        assert!(qoob(&train, 0.1, &QoobParams { trees: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn cross_set_inside_jackknife_interval() {
        let train = noisy_line(60, 5);
        let forest = ForestConfig { trees: 30, ..Default::default() };
        let p = oob_calibrate(&train, &forest, FamilyKind::MeanSymmetric, 0.1, TreeCount::Fixed).unwrap();
        for x in [0.1, 0.5, 0.9] {
            let cross = p.predict_aggregate(&[x], Aggregate::Cross).unwrap();
            let jp = p.predict_aggregate(&[x], Aggregate::JackknifePlus).unwrap();
            assert!(cross.is_subset_of(&jp));
        }
        let jp = p.clone().into_jackknife_plus().unwrap();
        assert_eq!(jp.method(), Method::OobJp);
        assert_eq!(jp.predict(&[0.5]), p.predict_aggregate(&[0.5], Aggregate::JackknifePlus).unwrap());
    }
}
