use super::Dataset;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Record indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Group counts for a 64/16/20 partition of `n` groups.
pub fn split_fractions(n: usize) -> (usize, usize, usize) {
    let train = (0.64 * n as f64).round() as usize;
    let val = ((0.16 * n as f64).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Shuffles scenario ids under `seed` and assigns whole scenarios to partitions.
pub fn split(data: &Dataset, seed: u64) -> Result<DatasetSplit> {
    if data.len() < 10 {
        return Err(Error::Size(format!("{} records, need at least 10", data.len())));
    }
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        groups.entry(r.scenario_id).or_default().push(i);
    }
    // Datasets without scenario structure fall back to record-wise splitting.
    let mut buckets: Vec<Vec<usize>> = if groups.len() >= 3 {
        groups.into_values().collect()
    } else {
        (0..data.len()).map(|i| vec![i]).collect()
    };
    buckets.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (nt, nv, _) = split_fractions(buckets.len());
    let flat = |b: &[Vec<usize>]| {
        let mut v: Vec<usize> = b.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    };
    Ok(DatasetSplit {
        train: flat(&buckets[..nt]),
        validation: flat(&buckets[nt..nt + nv]),
        test: flat(&buckets[nt + nv..]),
    })
}
