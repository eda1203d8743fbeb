use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Reads a numeric CSV with a header row. The last column is the target and
/// the others are features.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let columns = reader.headers().map_err(|e| csv_error(path, e))?.len();
    if columns < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("need at least 2 columns, found {columns}"),
        });
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                reason: format!("column {} is not numeric: `{cell}`", col + 1),
            })?;
            if col + 1 == columns {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    Dataset::new(features, targets, columns - 1)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            reason: format!("{kind:?}"),
        },
    }
}

/// One-dimensional heavy-tailed count data:
/// `Y = Poisson(sin(X)^2 + 0.1) + 0.03 X e1 + 25 1{u < 0.01} e2` with
/// `X, u ~ U[0, 1]` and `e1, e2 ~ N(0, 1)`.
pub fn synthetic_sample(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.random();
        let count = poisson(x.sin().powi(2) + 0.1, rng.random());
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let outlier = if u < 0.01 { 25.0 * e2 } else { 0.0 };
        xs.push(x);
        ys.push(count as f64 + 0.03 * x * e1 + outlier);
    }
    Dataset::new(xs, ys, 1).expect("one feature per row")
}

/// Inverse-CDF Poisson draw by sequential search from zero.
fn poisson(rate: f64, u: f64) -> u64 {
    let mut k = 0;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
    }
    k
}
