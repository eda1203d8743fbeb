use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{load_dataset, synthetic_sample, BenchMethod, DataSource, ExperimentConfig, ReplicateReport};
use crate::conformal::{
    aggregated_conformal, kfold_cross, oob_calibrate, qoob, split_calibrate, Aggregate, CalibratedPredictor,
    FamilyBuilder, ForestFamilyBuilder, QoobParams, Resample, TreeCount,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::FamilyKind;
use crate::forest::{BagMode, ForestConfig};
use crate::set::PredictionSet;

/// Loads the configured pool and runs every replicate in parallel. Output
/// order and values do not depend on scheduling.
pub fn run_replicates(config: &ExperimentConfig) -> Result<Vec<ReplicateReport>> {
    config.validate()?;
    let pool = match config.source.as_ref().expect("validated") {
        DataSource::Csv(path) => load_dataset(path)?,
        DataSource::Synthetic(n) => synthetic_sample(*n, config.seed),
    };
    if pool.len() < config.subsample_size() {
        return Err(Error::NotEnoughData(format!(
            "{} rows, but each replicate draws {}",
            pool.len(),
            config.subsample_size()
        )));
    }
    (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(&pool, config, r))
        .collect()
}

/// One replicate: draw, split, fit, calibrate, evaluate.
pub fn run_replicate(pool: &Dataset, config: &ExperimentConfig, replicate: usize) -> Result<ReplicateReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate as u64 + 1);
    // sample() returns the chosen indices in random order
    let drawn = sample(&mut rng, pool.len(), config.subsample_size()).into_vec();
    let train = pool.select(&drawn[..config.train]);
    let test = pool.select(&drawn[config.train..]);
    let fit_seed: u64 = rng.random();

    let sets = predict_test(&train, &test, config, fit_seed)?;
    assert_eq!(sets.len(), config.test, "every test row gets a prediction set");

    let n = sets.len() as f64;
    let mean_width = sets.iter().map(PredictionSet::width).sum::<f64>() / n;
    let covered = sets.iter().enumerate().filter(|(i, s)| s.contains(test.target(*i))).count();
    Ok(ReplicateReport {
        replicate,
        mean_width,
        mean_coverage: covered as f64 / n,
        wall_time_ms: config.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

fn predict_test(train: &Dataset, test: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<Vec<PredictionSet>> {
    let alpha = config.alpha;
    let forest = ForestConfig {
        trees: config.trees,
        mode: BagMode::Bootstrap,
        bag_size: None,
        min_leaf: config.min_leaf,
        mtry: None,
        seed,
    };
    let mean_builder = ForestFamilyBuilder {
        kind: FamilyKind::MeanSymmetric,
        forest: forest.clone(),
    };
    let cqr = FamilyKind::Cqr { beta: config.beta() };
    let qoob_params = QoobParams {
        trees: config.trees,
        beta: Some(config.beta()),
        mode: BagMode::Bootstrap,
        bag_size: None,
        min_leaf: config.min_leaf,
        seed,
        count: TreeCount::Fixed,
    };
    let predictor: CalibratedPredictor = match config.method {
        BenchMethod::Sc | BenchMethod::SplitCqr => {
            let kind = if config.method == BenchMethod::Sc {
                FamilyKind::MeanSymmetric
            } else {
                cqr
            };
            let half = train.len() / 2;
            let fit_rows: Vec<usize> = (0..half).collect();
            let cal_rows: Vec<usize> = (half..train.len()).collect();
            let builder = ForestFamilyBuilder { kind, forest };
            let family = builder.build(&train.select(&fit_rows))?;
            split_calibrate(family, &train.select(&cal_rows), alpha)?
        }
        BenchMethod::KfoldCc => kfold_cross(train, &mean_builder, config.k, alpha, seed)?,
        BenchMethod::OobCc => oob_calibrate(train, &forest, FamilyKind::MeanSymmetric, alpha, TreeCount::Fixed)?,
        BenchMethod::OobNcc => oob_calibrate(train, &forest, FamilyKind::MeanScaled, alpha, TreeCount::Fixed)?,
        BenchMethod::Qoob => qoob(train, alpha, &qoob_params)?,
        BenchMethod::QoobJp => qoob(train, alpha, &qoob_params)?.into_jackknife_plus()?,
        BenchMethod::QoobConv => {
            let p = qoob(train, alpha, &qoob_params)?;
            return (0..test.len())
                .into_par_iter()
                .map(|i| p.predict_aggregate(test.row(i), Aggregate::Hull))
                .collect();
        }
        BenchMethod::SubsampleAgg => {
            let m = (train.len() / 2).max(1);
            aggregated_conformal(train, &mean_builder, config.k, Resample::Subsample(m), alpha, seed)?
        }
        BenchMethod::BootstrapAgg => {
            aggregated_conformal(train, &mean_builder, config.k, Resample::Bootstrap(train.len()), alpha, seed)?
        }
    };
    Ok(predictor.predict_rows(test))
}
