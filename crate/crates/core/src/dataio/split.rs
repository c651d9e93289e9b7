use rand::RngCore;

use crate::error::{Error, Result};
use crate::objectives::Dataset;

/// Equal-size disjoint client shards plus a held-out test set.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedSplit {
    pub clients: Vec<Dataset>,
    pub test: Dataset,
    /// Source rows behind each client, in shard order.
    pub client_indices: Vec<Vec<usize>>,
    pub test_indices: Vec<usize>,
}

/// Fisher-Yates permutation of `0..n`.
///
/// Walks `i` from `n-1` down to `1`, swapping with `j = floor(u * (i+1) / 2^64)`
/// where `u` is the next 64-bit output of `rng`. The multiply-shift keeps the
/// result identical on 32- and 64-bit targets.
pub fn shuffled_indices<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Draw `clients * per_client` training rows and `test_size` test rows
/// uniformly without replacement.
pub fn make_split<R: RngCore + ?Sized>(
    data: &Dataset,
    clients: usize,
    per_client: usize,
    test_size: usize,
    rng: &mut R,
) -> Result<FederatedSplit> {
    if clients == 0 || per_client == 0 || test_size == 0 {
        return Err(Error::InvalidConfig("split sizes must be positive".into()));
    }
    let needed = clients
        .checked_mul(per_client)
        .and_then(|n| n.checked_add(test_size))
        .ok_or(Error::InsufficientSamples { needed: usize::MAX, available: data.len() })?;
    if needed > data.len() {
        return Err(Error::InsufficientSamples { needed, available: data.len() });
    }
    let perm = shuffled_indices(data.len(), rng);
    let client_indices: Vec<Vec<usize>> = perm[..clients * per_client].chunks(per_client).map(<[usize]>::to_vec).collect();
    let test_indices = perm[clients * per_client..needed].to_vec();
    let shards = client_indices.iter().map(|ix| data.subset(ix)).collect::<Result<Vec<_>>>()?;
    Ok(FederatedSplit { clients: shards, test: data.subset(&test_indices)?, client_indices, test_indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use std::collections::HashSet;

    fn data(n: usize) -> Dataset {
        Dataset::labeled((0..n).map(|i| i as f64).collect(), 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn disjoint_and_sized() {
        for seed in 0..20 {
            let s = make_split(&data(100), 4, 15, 20, &mut stream(seed, Purpose::Data, &[])).unwrap();
            assert_eq!(s.clients.len(), 4);
            assert!(s.clients.iter().all(|c| c.len() == 15));
            assert_eq!(s.test.len(), 20);
            let mut seen = HashSet::new();
            for i in s.client_indices.iter().flatten().chain(&s.test_indices) {
                assert!(seen.insert(*i));
            }
            // rows carry their source index as the single feature
            assert_eq!(s.clients[2].row(3)[0], s.client_indices[2][3] as f64);
        }
    }

    #[test]
    fn single_client() {
        let s = make_split(&data(10), 1, 6, 2, &mut stream(1, Purpose::Data, &[])).unwrap();
        assert_eq!(s.clients[0].len(), 6);
    }

    #[test]
    fn too_few_samples() {
        let err = make_split(&data(10), 3, 3, 2, &mut stream(1, Purpose::Data, &[])).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { needed: 11, available: 10 }));
    }

    #[test]
    fn seeded_permutation_is_stable() {
        let a = shuffled_indices(10, &mut stream(42, Purpose::Data, &[]));
        let b = shuffled_indices(10, &mut stream(42, Purpose::Data, &[]));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }
}
