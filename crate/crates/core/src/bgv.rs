//! Exact plaintext-modulus scheme: encryption R_p -> R_q^2 with noise
//! carried as a multiple of p, decryption of degree-1 and degree-2
//! ciphertexts, one multiplicative level (no relinearization), and NTT slot
//! packing over Z_p so vector addition and Hadamard products act slot-wise.
//!
//! The ciphertext modulus is a chain of two word-sized primes; ciphertext
//! polynomials stay in the NTT domain so multiply-accumulate chains are
//! pointwise.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::{
    cmod, find_ntt_prime_from, NoiseSampler, Poly, RingCtx, SampleKind, SearchDirection,
};
use crate::rlwe::RingKey;

/// Degree, plaintext modulus, and the two-prime ciphertext modulus chain.
#[derive(Debug, Clone)]
pub struct BgvParams {
    n: usize,
    plaintext_modulus: u64,
    chain: Vec<u64>,
    ring_q: Arc<RingCtx>,
    ring_p: Arc<RingCtx>,
}

impl BgvParams {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn plaintext_modulus(&self) -> u64 {
        self.plaintext_modulus
    }

    pub fn chain(&self) -> &[u64] {
        &self.chain
    }

    pub fn ciphertext_modulus(&self) -> u128 {
        self.ring_q.modulus()
    }

    /// Ring context of the ciphertext space R_q.
    pub fn ring_q(&self) -> &Arc<RingCtx> {
        &self.ring_q
    }

    /// Ring context of the plaintext space R_p (also the slot codec ring).
    pub fn ring_p(&self) -> &Arc<RingCtx> {
        &self.ring_p
    }
}

/// Finds the plaintext prime upward from 2^plaintext_bits and a chain of
/// ciphertext primes upward from 2^bits, all congruent to 1 mod 2N.
pub fn bgv_setup(log_n: u32, plaintext_bits: u32, chain_bits: &[u32]) -> Result<BgvParams> {
    let n = 1usize << log_n;
    let plaintext_modulus = find_ntt_prime_from(plaintext_bits, n, SearchDirection::Up, 0)?;
    let mut chain = Vec::with_capacity(chain_bits.len());
    for &bits in chain_bits {
        let mut skip = 0;
        loop {
            let prime = find_ntt_prime_from(bits, n, SearchDirection::Up, skip)?;
            if prime != plaintext_modulus && !chain.contains(&prime) {
                chain.push(prime);
                break;
            }
            skip += 1;
        }
    }
    let ring_q = RingCtx::new(n, chain.clone())?;
    let ring_p = RingCtx::new(n, vec![plaintext_modulus])?;
    Ok(BgvParams {
        n,
        plaintext_modulus,
        chain,
        ring_q,
        ring_p,
    })
}

/// Degree-1 pair or degree-2 triple over R_q.
#[derive(Debug, Clone, PartialEq)]
pub struct BgvCiphertext {
    parts: Vec<Poly>,
}

impl BgvCiphertext {
    pub fn degree(&self) -> usize {
        self.parts.len() - 1
    }
}

/// NTT packing over Z_p: slots are the NTT-domain values of a plaintext
/// polynomial, so ring addition and multiplication act slot-wise.
#[derive(Debug, Clone)]
pub struct SlotCodec {
    ring_p: Arc<RingCtx>,
}

impl SlotCodec {
    pub fn new(ring_p: Arc<RingCtx>) -> Self {
        Self { ring_p }
    }

    pub fn slots(&self) -> usize {
        self.ring_p.n()
    }

    /// Packs up to N values (zero-padded at the end) into one plaintext.
    pub fn pack_ntt(&self, v: &[i128]) -> Result<Poly> {
        let n = self.ring_p.n();
        if v.len() > n {
            return Err(Error::CapacityExceeded {
                requested: v.len(),
                capacity: n,
            });
        }
        let mut slots = v.to_vec();
        slots.resize(n, 0);
        Ok(Poly::from_ntt_values(&self.ring_p, &slots).into_coeff())
    }

    /// The full length-N slot vector of a plaintext, centered mod p.
    pub fn unpack_ntt(&self, pt: &Poly) -> Result<Vec<i128>> {
        if !pt.ctx().compatible(&self.ring_p) {
            return Err(Error::DomainMismatch("plaintext must live mod p".into()));
        }
        let ntt = pt.to_ntt();
        let res = ntt.ntt_residues().unwrap();
        let p = self.ring_p.primes()[0] as u128;
        Ok(res[0].iter().map(|&r| cmod(r as i128, p)).collect())
    }
}

/// Keys for the exact scheme: the secret under R_q plus its cached square
/// for degree-2 decryption.
#[derive(Debug, Clone)]
pub struct BgvKeys {
    key_q: RingKey,
    s2_ntt: Poly,
}

impl BgvKeys {
    pub fn new(key_q: RingKey) -> Self {
        let s = key_q.secret_ntt();
        let s2_ntt = s.mul(s).expect("same ring");
        Self { key_q, s2_ntt }
    }

    pub fn ring(&self) -> &Arc<RingCtx> {
        self.key_q.ctx()
    }
}

/// c0 = -a*s + p*e + m, c1 = a; decryption is exact mod p while the noise
/// stays under q/2.
pub fn bgv_enc(
    m: &Poly,
    params: &BgvParams,
    keys: &BgvKeys,
    sampler: &mut NoiseSampler,
) -> Result<BgvCiphertext> {
    if !m.ctx().compatible(params.ring_p()) {
        return Err(Error::DomainMismatch("message must live mod p".into()));
    }
    let ring_q = params.ring_q();
    let p = params.plaintext_modulus() as i128;
    let a = sampler.sample_poly(SampleKind::Uniform, ring_q).into_ntt();
    let e = sampler.sample_poly(SampleKind::Gaussian, ring_q);
    let noise_plus_m = Poly::from_coeffs(
        ring_q,
        e.coeff_vec()
            .iter()
            .zip(m.coeff_vec())
            .map(|(&ei, mi)| ei * p + mi)
            .collect(),
    )
    .into_ntt();
    let c0 = noise_plus_m.sub(&a.mul(keys.key_q.secret_ntt())?)?;
    Ok(BgvCiphertext { parts: vec![c0, a] })
}

/// Centered reduction mod q then mod p, over degree 1 or 2.
pub fn bgv_dec(ct: &BgvCiphertext, params: &BgvParams, keys: &BgvKeys) -> Result<Poly> {
    let s = keys.key_q.secret_ntt();
    let mut acc = ct.parts[0].clone().into_ntt();
    acc = acc.add(&ct.parts[1].mul(s)?)?;
    match ct.parts.len() {
        2 => {}
        3 => acc = acc.add(&ct.parts[2].mul(&keys.s2_ntt)?)?,
        d => return Err(Error::UnsupportedDegree(d - 1)),
    }
    let wide = acc.into_coeff();
    let p = params.plaintext_modulus() as u128;
    Ok(Poly::from_coeffs(
        params.ring_p(),
        wide.coeff_vec().iter().map(|&c| cmod(c, p)).collect(),
    ))
}

pub fn bgv_add(a: &BgvCiphertext, b: &BgvCiphertext) -> Result<BgvCiphertext> {
    if a.parts.len() != b.parts.len() {
        return Err(Error::ShapeMismatch(format!(
            "degree {} vs {}",
            a.degree(),
            b.degree()
        )));
    }
    let parts = a
        .parts
        .iter()
        .zip(&b.parts)
        .map(|(x, y)| x.add(y))
        .collect::<Result<_>>()?;
    Ok(BgvCiphertext { parts })
}

/// Tensor product of two degree-1 ciphertexts; the result has degree 2 and
/// is decrypted directly (no relinearization exists by design).
pub fn bgv_mul(a: &BgvCiphertext, b: &BgvCiphertext) -> Result<BgvCiphertext> {
    if a.degree() != 1 || b.degree() != 1 {
        return Err(Error::UnsupportedDegree(a.degree().max(b.degree())));
    }
    let (a0, a1) = (&a.parts[0], &a.parts[1]);
    let (b0, b1) = (&b.parts[0], &b.parts[1]);
    let d0 = a0.mul(b0)?;
    let d1 = a0.mul(b1)?.add(&a1.mul(b0)?)?;
    let d2 = a1.mul(b1)?;
    Ok(BgvCiphertext {
        parts: vec![d0, d1, d2],
    })
}

/// acc <- acc + a * b.
pub fn mul_then_add(a: &BgvCiphertext, b: &BgvCiphertext, acc: &mut BgvCiphertext) -> Result<()> {
    if acc.degree() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "accumulator degree {} (want 2)",
            acc.degree()
        )));
    }
    *acc = bgv_add(acc, &bgv_mul(a, b)?)?;
    Ok(())
}
