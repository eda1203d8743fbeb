//! Labeled samples with numeric features.

use crate::error::{invalid, Result};

/// A labeled sample stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
}

impl Dataset {
    /// `features` holds `targets.len()` rows of `dim` values each.
    pub fn new(features: Vec<f64>, targets: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 && !targets.is_empty() {
            return Err(invalid("dim", "feature dimension must be at least 1"));
        }
        if features.len() != targets.len() * dim {
            return Err(invalid(
                "features",
                format!(
                    "expected {} values for {} rows of dimension {dim}, got {}",
                    targets.len() * dim,
                    targets.len(),
                    features.len()
                ),
            ));
        }
        Ok(Self {
            features,
            targets,
            dim,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("rows", "rows have different lengths"));
        }
        Self::new(rows.concat(), targets, dim)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature(&self, i: usize, f: usize) -> f64 {
        self.features[i * self.dim + f]
    }

    /// Rows picked by `indices`, repeats included.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            features,
            targets,
            dim: self.dim,
        }
    }

    /// Same rows in a canonical order (lexicographic on features, then target),
    /// so that anything fitted on the result ignores the input order.
    pub fn canonical(&self) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.targets[a].total_cmp(&self.targets[b]))
        });
        self.select(&order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_checked() {
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0], 2).is_err());
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0], 2).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.feature(1, 0), 3.0);
    }

    #[test]
    fn canonical_order_ignores_input_order() {
        let a = Dataset::from_rows(&[vec![2.0], vec![1.0], vec![1.0]], vec![0.0, 5.0, 3.0]).unwrap();
        let b = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![1.0]], vec![3.0, 0.0, 5.0]).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.canonical().targets(), &[3.0, 5.0, 0.0]);
    }
}
