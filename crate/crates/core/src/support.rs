//! Enumeration of fixed-size supports, shared by the exhaustive oracles.

use crate::error::{Error, Result};

/// Default cap on the number of supports an exhaustive search may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000;

/// Binomial coefficient C(n, k), saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is always integral at this point
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Fails with `InstanceTooLarge` when C(n, k) exceeds `cap`.
pub fn check_cap(n: usize, k: usize, cap: u128) -> Result<u128> {
    let supports = binomial(n, k);
    if supports > cap {
        return Err(Error::InstanceTooLarge { supports, cap });
    }
    Ok(supports)
}

/// Lexicographic iterator over all size-`k` subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Supports {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Supports {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Supports {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
