use std::sync::Arc;

use rayon::prelude::*;

use super::{CalibratedPredictor, CalibrationPoint, FamilyBuilder, Method, Models, Rule};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::family::Family;
use crate::forest::{tree_rng, Bag, BagMode};
use crate::rank::check_alpha;

/// How each of the `K` training sets is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    /// `m` distinct points.
    Subsample(usize),
    /// `m` draws with replacement.
    Bootstrap(usize),
}

/// Averages split-conformal p-values over `k` resampled splits.
///
/// Draw `j` fits a family on its bag and scores the points it left out. A
/// label is kept when the mean over draws of
/// `(#{i out of bag j : R_j(x, y) <= R_j(X_i, Y_i)} + 1) / (|out of bag j| + 1)`
/// exceeds `alpha`. Each out-of-bag pair becomes an interval of weight
/// `1 / (k (|out of bag j| + 1))` in a sweep whose threshold absorbs the
/// constant `+1` terms.
pub fn aggregated_conformal(
    train: &Dataset,
    builder: &dyn FamilyBuilder,
    k: usize,
    resample: Resample,
    alpha: f64,
    seed: u64,
) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(invalid("k", "need at least one resample"));
    }
    let n = train.len();
    let (m, method) = match resample {
        Resample::Subsample(m) => (m, Method::SubsampleAgg),
        Resample::Bootstrap(m) => (m, Method::BootstrapAgg),
    };
    if m == 0 || (method == Method::SubsampleAgg && m > n) {
        return Err(invalid("m", format!("{m} is outside 1..={n}")));
    }
    let bags = resample_bags(n, k, resample, seed);
    let held_out: Vec<Vec<usize>> = bags.iter().map(|b| b.complement(n)).collect();
    if let Some(j) = held_out.iter().position(Vec::is_empty) {
        return Err(Error::DegenerateResample(j));
    }
    let families: Vec<Family> = bags
        .par_iter()
        .map(|bag| builder.build(&train.select(bag.indices())))
        .collect::<Result<_>>()?;

    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut offset = 0.0;
    for (j, out) in held_out.iter().enumerate() {
        let w = 1.0 / (k as f64 * (out.len() as f64 + 1.0));
        offset += w;
        let scores: Vec<f64> = out
            .par_iter()
            .map(|&i| families[j].score(train.row(i), train.target(i)))
            .collect();
        for (&i, score) in out.iter().zip(scores) {
            points.push(CalibrationPoint { index: i, model: j, score });
            weights.push(w);
        }
    }
    Ok(CalibratedPredictor {
        method,
        alpha,
        n,
        models: Arc::new(Models::Families(families)),
        points,
        rule: Rule::Weighted {
            weights,
            threshold: alpha - offset,
        },
    })
}

/// The training bags [`aggregated_conformal`] draws for `n` points.
pub fn resample_bags(n: usize, k: usize, resample: Resample, seed: u64) -> Vec<Bag> {
    let (mode, m) = match resample {
        Resample::Subsample(m) => (BagMode::Subsample, m),
        Resample::Bootstrap(m) => (BagMode::Bootstrap, m),
    };
    (0..k).map(|j| Bag::draw(mode, n, m, &mut tree_rng(seed, j))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{response_scale, FamilyKind, PointQuery, Predictor};

    struct Zero;

    impl PointQuery for Zero {
        fn mean(&self) -> f64 {
            0.0
        }
        fn spread(&self) -> f64 {
            1.0
        }
        fn quantiles(&self, levels: &[f64]) -> Vec<f64> {
            vec![0.0; levels.len()]
        }
    }

    impl Predictor for Zero {
        fn query<'a>(&'a self, _x: &'a [f64]) -> Box<dyn PointQuery + 'a> {
            Box::new(Zero)
        }
    }

    fn zero_builder(train: &Dataset) -> Result<Family> {
        Family::new(FamilyKind::MeanSymmetric, Arc::new(Zero), response_scale(train.targets()))
    }

    fn sample(ys: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..ys.len()).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(&rows, ys.to_vec()).unwrap()
    }

    /// Mean over draws of the split p-value of `y` at `x`, computed directly.
    fn averaged_p_value(p: &CalibratedPredictor, x: &[f64], y: f64) -> f64 {
        let Models::Families(fams) = p.models.as_ref() else { unreachable!() };
        let k = fams.len() as f64;
        (0..fams.len())
            .map(|j| {
                let scores: Vec<f64> = p.points.iter().filter(|c| c.model == j).map(|c| c.score).collect();
                let test = fams[j].score(x, y);
                let beaten = scores.iter().filter(|&&s| test <= s).count() as f64;
                (beaten + 1.0) / (scores.len() as f64 + 1.0) / k
            })
            .sum()
    }

    #[test]
    fn p_value_example() {
        // find a seed whose single bag is {3}, leaving residuals 1, 3, 5 held out
        let train = sample(&[1.0, 3.0, 5.0, 100.0]);
        let seed = (0..1000)
            .find(|&s| Bag::draw(BagMode::Subsample, 4, 1, &mut tree_rng(s, 0)).indices() == [3])
            .unwrap();
        for (alpha, kept) in [(0.7, true), (0.75, false)] {
            let p = aggregated_conformal(&train, &zero_builder, 1, Resample::Subsample(1), alpha, seed).unwrap();
            // residual 2 beats 3 and 5: p-value (2 + 1) / (3 + 1)
            assert_eq!(averaged_p_value(&p, &[0.0], 2.0), 0.75);
            assert_eq!(p.predict(&[0.0]).contains(2.0), kept);
        }
    }

    #[test]
    fn weighted_sweep_matches_direct_p_values() {
        let train = sample(&[0.4, -1.3, 2.2, 0.1, -0.6, 1.7, 3.1, -2.4, 0.9, -0.2]);
        for (resample, alpha) in [(Resample::Subsample(4), 0.2), (Resample::Bootstrap(10), 0.3)] {
            let p = aggregated_conformal(&train, &zero_builder, 3, resample, alpha, 5).unwrap();
            let set = p.predict(&[0.0]);
            let mut y = -5.0;
            while y <= 5.0 {
                let keep = averaged_p_value(&p, &[0.0], y) > alpha + 1e-9;
                assert_eq!(set.contains(y), keep, "y = {y}");
                y += 0.01;
            }
        }
    }

    #[test]
    fn full_subsample_is_degenerate() {
        let train = sample(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            aggregated_conformal(&train, &zero_builder, 2, Resample::Subsample(3), 0.1, 0),
            Err(Error::DegenerateResample(0))
        ));
    }
}
