//! n-th prime lookup backed by a growing segmented sieve.

use std::sync::{OnceLock, RwLock};

use crate::error::{Result, SpexError};

const SEGMENT: u64 = 1 << 16;

#[derive(Default)]
struct PrimeTable {
    primes: Vec<u64>,
    /// Every prime `< sieved_to` is in `primes`.
    sieved_to: u64,
}

fn table() -> &'static RwLock<PrimeTable> {
    static TABLE: OnceLock<RwLock<PrimeTable>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(PrimeTable::default()))
}

/// Upper bound on the n-th prime: `n (ln n + ln ln n)` for `n >= 6`.
fn nth_prime_upper_bound(n: u64) -> u64 {
    if n < 6 {
        return 15;
    }
    let n = n as f64;
    (n * (n.ln() + n.ln().ln())).ceil() as u64 + 1
}

fn small_primes(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

impl PrimeTable {
    /// Sieves `[sieved_to, hi)` segment by segment.
    fn extend_to(&mut self, hi: u64) {
        if hi <= self.sieved_to {
            return;
        }
        let base = small_primes((hi as f64).sqrt() as u64 + 1);
        let mut lo = self.sieved_to.max(2);
        let mut mark = vec![false; SEGMENT as usize];
        while lo < hi {
            let end = (lo + SEGMENT).min(hi);
            let len = (end - lo) as usize;
            mark[..len].iter_mut().for_each(|m| *m = false);
            for &p in &base {
                if p * p >= end {
                    break;
                }
                let mut j = (lo.div_ceil(p) * p).max(p * p);
                while j < end {
                    mark[(j - lo) as usize] = true;
                    j += p;
                }
            }
            self.primes
                .extend((0..len).filter(|&i| !mark[i]).map(|i| lo + i as u64));
            lo = end;
        }
        self.sieved_to = hi;
    }
}

/// The `i`-th prime, 1-based: `nth_prime(1) == 2`.
pub fn nth_prime(i: u64) -> Result<u64> {
    if i == 0 {
        return Err(SpexError::param("prime index must be at least 1"));
    }
    let idx = (i - 1) as usize;
    {
        let t = table().read().expect("prime table poisoned");
        if let Some(&p) = t.primes.get(idx) {
            return Ok(p);
        }
    }
    let mut t = table().write().expect("prime table poisoned");
    if t.primes.len() <= idx {
        // grow at least geometrically so repeated small extensions amortize
        let target = nth_prime_upper_bound(i).max(t.sieved_to.saturating_mul(2));
        t.extend_to(target);
    }
    Ok(t.primes[idx])
}
