use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How training bags are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BagMode {
    /// `m` draws with replacement.
    Bootstrap,
    /// `m` distinct indices.
    Subsample,
}

/// Training indices of one ensemble member, sorted, repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    indices: Vec<usize>,
}

impl Bag {
    pub fn draw<R: Rng + ?Sized>(mode: BagMode, n: usize, m: usize, rng: &mut R) -> Self {
        let mut indices: Vec<usize> = match mode {
            BagMode::Bootstrap => (0..m).map(|_| rng.random_range(0..n)).collect(),
            BagMode::Subsample => sample(rng, n, m).into_vec(),
        };
        indices.sort_unstable();
        Self { indices }
    }

    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Indices in `0..n` that were never drawn.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.contains(i)).collect()
    }
}
