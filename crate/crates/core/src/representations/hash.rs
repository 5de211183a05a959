//! Universal hash family for the encoder stage.
//!
//! Each function is `((a * id + b) mod p) mod m` with `p = 2^61 - 1`, evaluated
//! in 128-bit arithmetic so no input overflows.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

const HASH_STREAM: u64 = 0x4841_5348;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashFunctionParams {
    pub a: u64,
    pub b: u64,
    pub p: u64,
    pub m: u64,
}

impl HashFunctionParams {
    pub fn new(a: u64, b: u64, p: u64, m: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Parameter(format!("hash modulus {p} is not prime")));
        }
        if a == 0 || a >= p {
            return Err(Error::Parameter(format!(
                "multiplier a={a} must lie in [1, {p})"
            )));
        }
        if b >= p {
            return Err(Error::Parameter(format!(
                "offset b={b} must lie in [0, {p})"
            )));
        }
        if m < 2 || m > p {
            return Err(Error::Parameter(format!(
                "range m={m} must lie in [2, {p}]"
            )));
        }
        Ok(Self { a, b, p, m })
    }

    #[inline]
    pub fn hash(&self, id: u64) -> u64 {
        hash_id(self, id)
    }
}

/// `((a * id + b) mod p) mod m`.
#[inline]
pub fn hash_id(params: &HashFunctionParams, id: u64) -> u64 {
    let v = (params.a as u128 * id as u128 + params.b as u128) % params.p as u128;
    (v % params.m as u128) as u64
}

/// Draws `k` hash functions with pairwise distinct `(a, b)` from `seed`.
///
/// The same `(k, m, seed)` always produces the same family.
pub fn make_hash_family(k: usize, m: u64, seed: u64) -> Result<Vec<HashFunctionParams>> {
    if k == 0 {
        return Err(Error::Parameter("hash family needs k >= 1".into()));
    }
    if !(2..=MERSENNE_61).contains(&m) {
        return Err(Error::Parameter(format!(
            "hash range m={m} must lie in [2, 2^61 - 1]"
        )));
    }
    let mut rng = SplitMix64::stream(seed, HASH_STREAM);
    let mut seen = HashSet::with_capacity(k);
    let mut family = Vec::with_capacity(k);
    while family.len() < k {
        let a = 1 + rng.next_below(MERSENNE_61 - 1);
        let b = rng.next_below(MERSENNE_61);
        if seen.insert((a, b)) {
            family.push(HashFunctionParams {
                a,
                b,
                p: MERSENNE_61,
                m,
            });
        }
    }
    Ok(family)
}

/// Deterministic Miller-Rabin; the witness set is exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(small) {
            return n == small;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    let mul = |x: u64, y: u64| ((x as u128 * y as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        base %= n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            exp >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
