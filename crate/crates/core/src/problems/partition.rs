use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{LabError, Result};
use crate::rng::{stream, StreamDomain};

/// Label-skew partition: a `heterogeneity` fraction of the samples is sorted
/// by label and dealt out contiguously, the rest is spread uniformly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionSpec {
    pub n_agents: usize,
    pub heterogeneity: f64,
    pub seed: u64,
}

fn balanced_sizes(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total * (i + 1) / parts - total * i / parts)
        .collect()
}

/// Returns one index list per agent. Shards are disjoint, cover every sample,
/// and differ in size by at most one.
pub fn partition_dataset(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    let m = dataset.len();
    let n = spec.n_agents;
    if n == 0 {
        return Err(LabError::Dataset("partition needs at least one agent".into()));
    }
    if n > m {
        return Err(LabError::Dataset(format!("{n} agents but only {m} samples")));
    }
    if !(0.0..=1.0).contains(&spec.heterogeneity) {
        return Err(LabError::Dataset(format!(
            "heterogeneity must lie in [0, 1], got {}",
            spec.heterogeneity
        )));
    }
    let mut rng = stream(spec.seed, StreamDomain::Partition, 0);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);

    let n_sorted = ((m as f64) * spec.heterogeneity).round() as usize;
    let (sorted_part, uniform_part) = order.split_at(n_sorted);
    let mut sorted_part = sorted_part.to_vec();
    sorted_part.sort_by_key(|&i| dataset.label(i));
    let mut pool = uniform_part.to_vec();

    let targets = balanced_sizes(m, n);
    let skew = balanced_sizes(n_sorted, n);
    let mut shards: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut cursor = 0;
    for i in 0..n {
        let take = skew[i].min(targets[i]);
        shards.push(sorted_part[cursor..cursor + take].to_vec());
        pool.extend_from_slice(&sorted_part[cursor + take..cursor + skew[i]]);
        cursor += skew[i];
    }
    pool.shuffle(&mut rng);
    let mut it = pool.into_iter();
    for (shard, &target) in shards.iter_mut().zip(&targets) {
        while shard.len() < target {
            shard.push(it.next().expect("pool covers remaining targets"));
        }
    }
    debug_assert!(it.next().is_none());
    Ok(shards)
}
