//! Validation tooling: seeded sampling, P/R/F1 against gold annotations,
//! and synthetic corpora with known relation counts.

mod eval;
mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use eval::{read_gold, score, EvalReport, GoldAnnotation, GoldError, Provenance, Scores};
pub use synth::{placement_for, synth_corpus, Placement, SynthEntry, SynthError, SynthOutput, SynthSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("cannot sample {requested} items from a pool of {available}")]
    SampleTooLarge { requested: usize, available: usize },
}

/// Uniform sample without replacement.
///
/// The stream is ChaCha8 seeded with `seed` (via `seed_from_u64`), driving a
/// partial Fisher–Yates shuffle, so a seed gives the same sample on every
/// platform.
pub fn sample<T: Clone>(pool: &[T], n: usize, seed: u64) -> Result<Vec<T>, SampleError> {
    if n > pool.len() {
        return Err(SampleError::SampleTooLarge {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = pool.to_vec();
    for i in 0..n {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    items.truncate(n);
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn exhaustive_sample_is_a_permutation() {
        let pool = [1, 2, 3, 4, 5];
        let mut s = sample(&pool, 5, 42).unwrap();
        s.sort();
        assert_eq!(s, pool);
    }

    #[test]
    fn deterministic() {
        let pool: Vec<u32> = (0..100).collect();
        assert_eq!(sample(&pool, 10, 7).unwrap(), sample(&pool, 10, 7).unwrap());
    }

    #[test]
    fn too_large() {
        assert_eq!(
            sample(&[1, 2, 3], 4, 0),
            Err(SampleError::SampleTooLarge {
                requested: 4,
                available: 3
            })
        );
    }

    #[test]
    fn no_duplicates() {
        let pool: Vec<u32> = (0..50).collect();
        let s = sample(&pool, 30, 3).unwrap();
        assert_eq!(s.iter().collect::<BTreeSet<_>>().len(), 30);
    }

    #[test]
    fn different_seeds_differ() {
        let pool: Vec<u32> = (0..40).collect();
        let mut same = 0;
        for seed in 0..200u64 {
            let a: BTreeSet<_> = sample(&pool, 20, seed).unwrap().into_iter().collect();
            let b: BTreeSet<_> = sample(&pool, 20, seed + 10_000).unwrap().into_iter().collect();
            same += usize::from(a == b);
        }
        // identical subsets should essentially never happen (≥ 0.99 distinct)
        assert!(same <= 2, "{same} identical pairs out of 200");
    }

    #[test]
    fn roughly_uniform() {
        let pool: Vec<usize> = (0..10).collect();
        let mut hits = [0usize; 10];
        for seed in 0..5000u64 {
            for x in sample(&pool, 3, seed).unwrap() {
                hits[x] += 1;
            }
        }
        // each item expected 1500 times
        for h in hits {
            assert!((1350..1650).contains(&h), "{hits:?}");
        }
    }
}
