use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CalibratedPredictor, CalibrationPoint, FamilyBuilder, Method, Models, Rule};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::family::Family;
use crate::rank::check_alpha;

/// Leave-one-out cross-conformal: `n` refits, point `i` scored by the fit
/// that excludes it.
pub fn loo_cross(train: &Dataset, builder: &dyn FamilyBuilder, alpha: f64) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    let n = train.len();
    if n < 2 {
        return Err(Error::NotEnoughData(format!("leave-one-out needs at least 2 points, got {n}")));
    }
    let folds: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let fold_of: Vec<usize> = (0..n).collect();
    cross_fit(train, builder, alpha, &folds, &fold_of, Method::LooCross)
}

/// K-fold cross-conformal over equal folds from a seeded shuffle. Switch to
/// CV+ with [`CalibratedPredictor::into_jackknife_plus`].
pub fn kfold_cross(
    train: &Dataset,
    builder: &dyn FamilyBuilder,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    let n = train.len();
    if k < 2 || k > n {
        return Err(invalid("k", format!("need 2 <= K <= n = {n}, got {k}")));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::UnequalFolds { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let size = n / k;
    let mut fold_of = vec![0; n];
    let folds: Vec<Vec<usize>> = perm
        .chunks(size)
        .enumerate()
        .map(|(f, chunk)| {
            let mut members = chunk.to_vec();
            members.sort_unstable();
            for &i in &members {
                fold_of[i] = f;
            }
            members
        })
        .collect();
    cross_fit(train, builder, alpha, &folds, &fold_of, Method::KfoldCross)
}

fn cross_fit(
    train: &Dataset,
    builder: &dyn FamilyBuilder,
    alpha: f64,
    folds: &[Vec<usize>],
    fold_of: &[usize],
    method: Method,
) -> Result<CalibratedPredictor> {
    let n = train.len();
    let families: Vec<Family> = folds
        .par_iter()
        .map(|held_out| {
            let rest: Vec<usize> = (0..n).filter(|i| held_out.binary_search(i).is_err()).collect();
            builder.build(&train.select(&rest))
        })
        .collect::<Result<_>>()?;
    let points: Vec<CalibrationPoint> = (0..n)
        .into_par_iter()
        .map(|i| CalibrationPoint {
            index: i,
            model: fold_of[i],
            score: families[fold_of[i]].score(train.row(i), train.target(i)),
        })
        .collect();
    Ok(CalibratedPredictor {
        method,
        alpha,
        n,
        models: Arc::new(Models::Families(families)),
        points,
        rule: Rule::Counting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{response_scale, FamilyKind, PointQuery, Predictor};
    use crate::set::{Interval, PredictionSet};

    /// Predicts the mean response of its training sample everywhere.
    struct MeanOf(f64);

    impl PointQuery for MeanOf {
        fn mean(&self) -> f64 {
            self.0
        }
        fn spread(&self) -> f64 {
            1.0
        }
        fn quantiles(&self, levels: &[f64]) -> Vec<f64> {
            vec![self.0; levels.len()]
        }
    }

    struct MeanPredictor(f64);

    impl Predictor for MeanPredictor {
        fn query<'a>(&'a self, _x: &'a [f64]) -> Box<dyn PointQuery + 'a> {
            Box::new(MeanOf(self.0))
        }
    }

    fn mean_builder(train: &Dataset) -> Result<Family> {
        let m = train.targets().iter().sum::<f64>() / train.len() as f64;
        Family::new(FamilyKind::MeanSymmetric, Arc::new(MeanPredictor(m)), response_scale(train.targets()))
    }

    fn line(ys: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..ys.len()).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(&rows, ys.to_vec()).unwrap()
    }

    #[test]
    fn identical_intervals_give_that_interval() {
        // every fit predicts 1 and every residual is 1
        let builder = |d: &Dataset| {
            Family::new(FamilyKind::MeanSymmetric, Arc::new(MeanPredictor(1.0)), response_scale(d.targets()))
        };
        let p = loo_cross(&line(&[0.0, 2.0, 2.0]), &builder, 0.5).unwrap();
        assert_eq!(p.predict(&[0.0]), PredictionSet::interval(Interval::new(0.0, 2.0).unwrap()));
    }

    #[test]
    fn kfold_requires_equal_folds() {
        let train = line(&[1.0; 9]);
        assert!(matches!(
            kfold_cross(&train, &mean_builder, 2, 0.1, 0),
            Err(Error::UnequalFolds { n: 9, k: 2 })
        ));
    }

    #[test]
    fn kfold_with_n_folds_is_loo() {
        let train = line(&[0.3, 1.2, -0.7, 2.5, 0.9, 1.1]);
        let loo = loo_cross(&train, &mean_builder, 0.3).unwrap();
        let kf = kfold_cross(&train, &mean_builder, 6, 0.3, 99).unwrap();
        for x in [0.0, 3.0] {
            assert_eq!(loo.predict(&[x]), kf.predict(&[x]));
        }
    }

    #[test]
    fn tiny_training_set_is_rejected() {
        assert!(loo_cross(&line(&[1.0]), &mean_builder, 0.1).is_err());
    }
}
