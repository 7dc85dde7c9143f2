use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Requested size of a split, as a frame count or a fraction of the dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSize {
    Count(usize),
    Fraction(f64),
}

impl SplitSize {
    fn resolve(self, n: usize, what: &str) -> Result<usize> {
        match self {
            SplitSize::Count(c) => Ok(c),
            SplitSize::Fraction(f) if (0.0..=1.0).contains(&f) => Ok((f * n as f64).round() as usize),
            SplitSize::Fraction(f) => Err(Error::InfeasibleSplit(format!(
                "{what} fraction {f} is outside [0, 1]"
            ))),
        }
    }
}

/// Disjoint train / validation / test indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into train, val and the
/// remainder as test.
pub fn split(n: usize, train_size: SplitSize, val_size: SplitSize, seed: u64) -> Result<Split> {
    let train = train_size.resolve(n, "train")?;
    let val = val_size.resolve(n, "val")?;
    if train == 0 {
        return Err(Error::InfeasibleSplit("training set would be empty".into()));
    }
    if train + val > n {
        return Err(Error::InfeasibleSplit(format!(
            "train ({train}) + val ({val}) exceeds the {n} available frames"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(train + val);
    let val_idx = idx.split_off(train);
    Ok(Split {
        seed,
        train: idx,
        val: val_idx,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn counts() {
        let s = split(10, SplitSize::Count(8), SplitSize::Count(1), 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn fractions() {
        let s = split(100, SplitSize::Fraction(0.9), SplitSize::Fraction(0.1), 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (90, 10, 0));
    }

    #[test]
    fn infeasible() {
        assert!(split(10, SplitSize::Count(8), SplitSize::Count(3), 0).is_err());
        assert!(split(10, SplitSize::Fraction(1.5), SplitSize::Count(0), 0).is_err());
        assert!(split(10, SplitSize::Count(0), SplitSize::Count(3), 0).is_err());
    }

    #[test]
    fn random_draws_are_disjoint_exhaustive_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.gen_range(1..200);
            let train = rng.gen_range(1..=n);
            let val = rng.gen_range(0..=n - train);
            let seed = rng.gen();
            let a = split(n, SplitSize::Count(train), SplitSize::Count(val), seed).unwrap();
            let b = split(n, SplitSize::Count(train), SplitSize::Count(val), seed).unwrap();
            assert_eq!(a, b);
            let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
