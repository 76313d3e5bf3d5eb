//! Scalar modular arithmetic over word-sized primes.

use crate::error::{Error, Result};

#[inline]
pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        p - b + a
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// a^(-1) mod p for prime p.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Precomputed quotient for Shoup multiplication with a fixed multiplier w < p.
#[inline]
pub fn shoup_precompute(w: u64, p: u64) -> u64 {
    (((w as u128) << 64) / p as u128) as u64
}

/// (a * w) mod p with w's Shoup quotient precomputed. Requires w < p < 2^63.
#[inline]
pub fn mul_mod_shoup(a: u64, w: u64, w_shoup: u64, p: u64) -> u64 {
    let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(p));
    if r >= p {
        r - p
    } else {
        r
    }
}

/// Deterministic Miller-Rabin, valid for all u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDirection {
    /// Candidates 2^bits - k*2N + 1 for k = 1, 2, ...
    Down,
    /// Candidates 2^bits + k*2N + 1 for k = 0, 1, ...
    Up,
}

/// First prime congruent to 1 mod 2N in an arithmetic progression anchored
/// at 2^target_bits, scanning in the given direction. The scan stays within
/// one bit of the target.
pub fn find_ntt_prime(target_bits: u32, n: usize, dir: SearchDirection) -> Result<u64> {
    find_ntt_prime_from(target_bits, n, dir, 0)
}

/// Same as [`find_ntt_prime`] but skipping the first `skip` primes found,
/// which yields distinct primes for modulus chains.
pub fn find_ntt_prime_from(
    target_bits: u32,
    n: usize,
    dir: SearchDirection,
    skip: usize,
) -> Result<u64> {
    let two_n = 2 * n as u64;
    let min_bits = 2 + (two_n as f64).log2() as u32;
    if target_bits < min_bits || target_bits > 62 {
        return Err(Error::InvalidParameter(format!(
            "target_bits {target_bits} out of range [{min_bits}, 62] for N = {n}"
        )));
    }
    let anchor = 1u64 << target_bits;
    // Keep candidates within one bit of the target.
    let max_k = (anchor / 2) / two_n;
    let mut remaining = skip;
    let mut k = match dir {
        SearchDirection::Down => 1,
        SearchDirection::Up => 0,
    };
    while k <= max_k {
        let cand = match dir {
            SearchDirection::Down => anchor - k * two_n + 1,
            SearchDirection::Up => anchor + k * two_n + 1,
        };
        if is_prime_u64(cand) {
            if remaining == 0 {
                return Ok(cand);
            }
            remaining -= 1;
        }
        k += 1;
    }
    Err(Error::SearchExhausted(format!(
        "no prime = 1 mod {two_n} within one bit of 2^{target_bits}"
    )))
}

/// Smallest primitive 2N-th root of unity mod p (requires 2N | p-1).
pub fn primitive_root_2n(p: u64, n: usize) -> u64 {
    let order = 2 * n as u64;
    debug_assert_eq!((p - 1) % order, 0);
    let exp = (p - 1) / order;
    let mut root = 0;
    for x in 2..p {
        let y = pow_mod(x, exp, p);
        // order exactly 2N iff y^N = -1
        if pow_mod(y, n as u64, p) == p - 1 {
            root = y;
            break;
        }
    }
    assert!(root != 0, "no primitive 2N-th root found");
    // all primitive 2N-th roots are odd powers of any one of them
    let step = mul_mod(root, root, p);
    let mut best = root;
    let mut cur = root;
    for _ in 1..n {
        cur = mul_mod(cur, step, p);
        if cur < best {
            best = cur;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_small() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(97));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64(561)); // Carmichael
        assert!(is_prime_u64(72057594037616641));
        assert!(is_prime_u64(2251799813554177));
        assert!(!is_prime_u64(72057594037616641 + 2));
    }

    #[test]
    fn shoup_matches_plain() {
        let p = 72057594037616641u64;
        let w = 123456789012345u64 % p;
        let ws = shoup_precompute(w, p);
        for a in [0u64, 1, p - 1, 987654321987654321 % p] {
            assert_eq!(mul_mod_shoup(a, w, ws, p), mul_mod(a, w, p));
        }
    }

    #[test]
    fn root_has_order_2n() {
        let p = 97u64; // 96 = 3 * 32, so 2N = 32 divides p-1
        let n = 16;
        let psi = primitive_root_2n(p, n);
        assert_eq!(pow_mod(psi, n as u64, p), p - 1);
        assert_eq!(pow_mod(psi, 2 * n as u64, p), 1);
        // smallest: no smaller odd power exists
        let mut smallest = u64::MAX;
        for j in (1..2 * n).step_by(2) {
            smallest = smallest.min(pow_mod(psi, j as u64, p));
        }
        assert_eq!(psi, smallest);
    }

    #[test]
    fn prime_search_reaches_fixture_values() {
        assert_eq!(
            find_ntt_prime(56, 1 << 13, SearchDirection::Down).unwrap(),
            72057594037616641
        );
        assert_eq!(
            find_ntt_prime(51, 1 << 13, SearchDirection::Down).unwrap(),
            2251799813554177
        );
        assert_eq!(
            find_ntt_prime(28, 1 << 12, SearchDirection::Up).unwrap(),
            268460033
        );
    }

    #[test]
    fn prime_search_rejects_tiny_targets() {
        assert!(find_ntt_prime(3, 1 << 13, SearchDirection::Up).is_err());
    }
}
