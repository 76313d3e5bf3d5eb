//! Negacyclic number-theoretic transform over a word-sized prime.
//!
//! The 2N-th root powers are merged into the butterflies (no separate twist
//! pass), with Shoup precomputation for the twiddle multiplications. Both
//! directions keep coefficients in natural order.

use super::arith::{
    add_mod, inv_mod, mul_mod_shoup, primitive_root_2n, shoup_precompute, sub_mod,
};

#[derive(Debug, Clone)]
pub struct NttTable {
    pub p: u64,
    pub n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
    root: u64,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    x.reverse_bits() >> (usize::BITS - bits)
}

impl NttTable {
    pub fn new(p: u64, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        assert_eq!((p - 1) % (2 * n as u64), 0);
        let log_n = n.trailing_zeros();
        let psi = primitive_root_2n(p, n);
        let psi_inv = inv_mod(psi, p);
        let mut pow = vec![1u64; n];
        let mut pow_inv = vec![1u64; n];
        for i in 1..n {
            pow[i] = super::arith::mul_mod(pow[i - 1], psi, p);
            pow_inv[i] = super::arith::mul_mod(pow_inv[i - 1], psi_inv, p);
        }
        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        for i in 0..n {
            let j = bit_reverse(i, log_n);
            psi_rev[i] = pow[j];
            psi_inv_rev[i] = pow_inv[j];
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| shoup_precompute(w, p)).collect();
        let psi_inv_rev_shoup = psi_inv_rev
            .iter()
            .map(|&w| shoup_precompute(w, p))
            .collect();
        let n_inv = inv_mod(n as u64, p);
        Self {
            p,
            n,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: shoup_precompute(n_inv, p),
            root: psi,
        }
    }

    /// The primitive 2N-th root the tables were built from.
    pub fn root(&self) -> u64 {
        self.root
    }

    /// In-place forward transform; input and output in natural order.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let p = self.p;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                let j1 = 2 * i * t;
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_mod_shoup(a[j + t], w, ws, p);
                    a[j] = add_mod(u, v, p);
                    a[j + t] = sub_mod(u, v, p);
                }
            }
            m <<= 1;
        }
    }

    /// In-place inverse transform, including the 1/N scaling.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let p = self.p;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, p);
                    a[j + t] = mul_mod_shoup(sub_mod(u, v, p), w, ws, p);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_mod_shoup(*x, self.n_inv, self.n_inv_shoup, p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::arith::{mul_mod, sub_mod};

    fn schoolbook_negacyclic(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let n = a.len();
        let mut out = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                let prod = mul_mod(a[i], b[j], p);
                let k = i + j;
                if k < n {
                    out[k] = add_mod(out[k], prod, p);
                } else {
                    out[k - n] = sub_mod(out[k - n], prod, p);
                }
            }
        }
        out
    }

    #[test]
    fn roundtrip_small() {
        let p = 97u64;
        let table = NttTable::new(p, 16);
        let orig: Vec<u64> = (0..16).map(|i| (i * i + 3) % p).collect();
        let mut a = orig.clone();
        table.forward(&mut a);
        assert_ne!(a, orig);
        table.inverse(&mut a);
        assert_eq!(a, orig);
    }

    #[test]
    fn zero_is_fixed_point() {
        let table = NttTable::new(97, 16);
        let mut a = vec![0u64; 16];
        table.forward(&mut a);
        assert!(a.iter().all(|&x| x == 0));
        table.inverse(&mut a);
        assert!(a.iter().all(|&x| x == 0));
    }

    #[test]
    fn pointwise_equals_schoolbook() {
        let p = 97u64;
        let n = 16;
        let table = NttTable::new(p, n);
        let a: Vec<u64> = (0..n as u64).map(|i| (7 * i + 1) % p).collect();
        let b: Vec<u64> = (0..n as u64).map(|i| (5 * i + 13) % p).collect();
        let expect = schoolbook_negacyclic(&a, &b, p);
        let mut fa = a.clone();
        let mut fb = b.clone();
        table.forward(&mut fa);
        table.forward(&mut fb);
        let mut fc: Vec<u64> = fa
            .iter()
            .zip(fb.iter())
            .map(|(&x, &y)| mul_mod(x, y, p))
            .collect();
        table.inverse(&mut fc);
        assert_eq!(fc, expect);
    }

    #[test]
    fn roundtrip_large_prime() {
        let p = 72057594037616641u64;
        let n = 1 << 13;
        let table = NttTable::new(p, n);
        let orig: Vec<u64> = (0..n as u64).map(|i| (i * 2654435761) % p).collect();
        let mut a = orig.clone();
        table.forward(&mut a);
        table.inverse(&mut a);
        assert_eq!(a, orig);
    }
}
