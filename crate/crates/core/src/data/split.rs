use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::episode::BlmEpisode;
use crate::error::{Error, Result};

/// Train+dev budget of the restricted (equal-budget) setting.
pub const RESTRICTED_TOTAL: usize = 2073;

/// Disjoint train/dev/test partition.
///
/// `train` followed by `dev` is the shuffled train+dev pool in order, which
/// is what makes [`subsample_train`] monotone in its size argument.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub seed: u64,
    pub train: Vec<BlmEpisode>,
    pub dev: Vec<BlmEpisode>,
    pub test: Vec<BlmEpisode>,
}

/// Test share of `n` episodes: one tenth, rounded up.
pub fn test_size(n: usize) -> usize {
    n.div_ceil(10)
}

/// Dev share of a train+dev pool of `m`: one fifth, rounded up.
pub fn dev_size(m: usize) -> usize {
    m.div_ceil(5)
}

fn cut_pool(mut pool: Vec<BlmEpisode>) -> (Vec<BlmEpisode>, Vec<BlmEpisode>) {
    let d = dev_size(pool.len());
    let dev = pool.split_off(pool.len() - d);
    (pool, dev)
}

/// Seeded 90:10 train+dev/test split, then 80:20 train/dev.
pub fn split_dataset(episodes: &[BlmEpisode], seed: u64) -> Result<DataSplit> {
    if episodes.is_empty() {
        return Err(Error::Data("cannot split an empty episode list".into()));
    }
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let t = test_size(episodes.len());
    let test = order[..t].iter().map(|&i| episodes[i].clone()).collect();
    let pool = order[t..].iter().map(|&i| episodes[i].clone()).collect();
    let (train, dev) = cut_pool(pool);
    Ok(DataSplit { seed, train, dev, test })
}

impl DataSplit {
    pub fn pool_len(&self) -> usize {
        self.train.len() + self.dev.len()
    }
}

/// Restrict train+dev to the first `n_total` pooled episodes and re-split
/// them 80:20. The test set is untouched.
pub fn subsample_train(split: &DataSplit, n_total: usize) -> Result<DataSplit> {
    let available = split.pool_len();
    if n_total > available {
        return Err(Error::Config(format!(
            "requested {n_total} train+dev episodes but only {available} are available"
        )));
    }
    if n_total < 2 {
        return Err(Error::Config(format!("need at least 2 train+dev episodes, got {n_total}")));
    }
    let pool = split.train.iter().chain(&split.dev).take(n_total).cloned().collect();
    let (train, dev) = cut_pool(pool);
    Ok(DataSplit { seed: split.seed, train, dev, test: split.test.clone() })
}
