//! Exact arithmetic in R_q = Z_q[X]/(X^N + 1) with centered coefficients.
//!
//! Wide moduli (q*P, chains of ciphertext primes) are carried as products of
//! one or two word-sized NTT-friendly primes; coefficient-domain values are
//! centered `i128`, NTT-domain values are per-prime residue vectors, and the
//! two representations round-trip exactly.

pub mod arith;
pub mod ntt;
pub mod sampler;

pub use arith::{find_ntt_prime, find_ntt_prime_from, is_prime_u64, SearchDirection};
pub use sampler::{NoiseSampler, SampleKind};

use std::sync::Arc;

use crate::error::{Error, Result};
use arith::{add_mod, inv_mod, mul_mod, sub_mod};
use ntt::NttTable;

/// Centered modular reduction: the representative of `a` in [-m/2, m/2).
pub fn centered_mod(a: i128, modulus: u128) -> Result<i128> {
    if modulus < 2 {
        return Err(Error::InvalidParameter(format!(
            "centered_mod requires modulus >= 2, got {modulus}"
        )));
    }
    Ok(cmod(a, modulus))
}

#[inline]
pub(crate) fn cmod(a: i128, m: u128) -> i128 {
    let m_i = m as i128;
    let mut r = a % m_i;
    if r < 0 {
        r += m_i;
    }
    if (r as u128) * 2 >= m {
        r - m_i
    } else {
        r
    }
}

/// Round-half-away-from-zero, the rounding used for all quantization steps.
#[inline]
pub fn round_half_away(x: f64) -> i128 {
    x.round() as i128
}

/// Validated ring dimension and moduli for one scheme instance.
#[derive(Debug, Clone)]
pub struct RingParams {
    pub n: usize,
    pub q: u64,
    pub special_p: Option<u64>,
}

impl RingParams {
    pub fn lifted_modulus(&self) -> Option<u128> {
        self.special_p.map(|p| self.q as u128 * p as u128)
    }

    /// Ring context modulo q.
    pub fn ring_q(&self) -> Arc<RingCtx> {
        RingCtx::new(self.n, vec![self.q]).expect("validated params")
    }

    /// Ring context modulo q*P (requires the special modulus).
    pub fn ring_qp(&self) -> Result<Arc<RingCtx>> {
        let p = self.special_p.ok_or_else(|| {
            Error::InvalidParameter("no special modulus configured".into())
        })?;
        RingCtx::new(self.n, vec![self.q, p])
    }
}

/// Checks the power-of-two / primality / congruence requirements.
pub fn validate_ring_params(n: usize, q: u64, special_p: Option<u64>) -> Result<RingParams> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "ring degree {n} must be a power of two >= 2"
        )));
    }
    let two_n = 2 * n as u64;
    for &m in std::iter::once(&q).chain(special_p.iter()) {
        if m % two_n != 1 {
            return Err(Error::Congruence { modulus: m, two_n });
        }
        if !is_prime_u64(m) {
            return Err(Error::NotPrime(m));
        }
    }
    Ok(RingParams { n, q, special_p })
}

/// Degree, prime factorization of the modulus, and per-prime NTT tables.
#[derive(Debug)]
pub struct RingCtx {
    n: usize,
    primes: Vec<u64>,
    tables: Vec<NttTable>,
    modulus: u128,
    /// inv(primes[0]) mod primes[1], present for two-prime moduli.
    crt_inv: u64,
}

impl RingCtx {
    pub fn new(n: usize, primes: Vec<u64>) -> Result<Arc<Self>> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::InvalidParameter(format!(
                "ring degree {n} must be a power of two >= 2"
            )));
        }
        if primes.is_empty() || primes.len() > 2 {
            return Err(Error::InvalidParameter(
                "modulus must be a product of one or two primes".into(),
            ));
        }
        let two_n = 2 * n as u64;
        for &p in &primes {
            if p >= 1 << 62 {
                return Err(Error::InvalidParameter(format!("prime {p} too large")));
            }
            if p % two_n != 1 {
                return Err(Error::Congruence { modulus: p, two_n });
            }
            if !is_prime_u64(p) {
                return Err(Error::NotPrime(p));
            }
        }
        if primes.len() == 2 && primes[0] == primes[1] {
            return Err(Error::InvalidParameter("repeated prime in modulus".into()));
        }
        let tables = primes.iter().map(|&p| NttTable::new(p, n)).collect();
        let modulus = primes.iter().map(|&p| p as u128).product();
        let crt_inv = if primes.len() == 2 {
            inv_mod(primes[0] % primes[1], primes[1])
        } else {
            0
        };
        Ok(Arc::new(Self {
            n,
            primes,
            tables,
            modulus,
            crt_inv,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn tables(&self) -> &[NttTable] {
        &self.tables
    }

    pub fn compatible(&self, other: &RingCtx) -> bool {
        self.n == other.n && self.modulus == other.modulus
    }

    /// Per-prime residues (canonical [0, p)) of centered coefficients.
    pub fn to_residues(&self, coeffs: &[i128]) -> Vec<Vec<u64>> {
        self.primes
            .iter()
            .map(|&p| {
                let p_i = p as i128;
                coeffs
                    .iter()
                    .map(|&c| c.rem_euclid(p_i) as u64)
                    .collect()
            })
            .collect()
    }

    /// Centered coefficients from per-prime residues.
    pub fn from_residues(&self, residues: &[Vec<u64>]) -> Vec<i128> {
        match self.primes.len() {
            1 => {
                let p = self.primes[0] as u128;
                residues[0].iter().map(|&r| cmod(r as i128, p)).collect()
            }
            2 => {
                let (p1, p2) = (self.primes[0], self.primes[1]);
                (0..self.n)
                    .map(|i| {
                        let r1 = residues[0][i];
                        let r2 = residues[1][i];
                        let t = mul_mod(sub_mod(r2, r1 % p2, p2), self.crt_inv, p2);
                        let x = r1 as u128 + p1 as u128 * t as u128;
                        cmod(x as i128, self.modulus)
                    })
                    .collect()
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Coeff,
    Ntt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulPath {
    Ntt,
    Schoolbook,
}

#[derive(Debug, Clone)]
enum PolyData {
    Coeff(Vec<i128>),
    Ntt(Vec<Vec<u64>>),
}

/// Element of R_m for the tagged modulus m, in coefficient or NTT form.
#[derive(Debug, Clone)]
pub struct Poly {
    ctx: Arc<RingCtx>,
    data: PolyData,
}

impl Poly {
    pub fn zero(ctx: &Arc<RingCtx>) -> Self {
        Self {
            ctx: ctx.clone(),
            data: PolyData::Coeff(vec![0; ctx.n]),
        }
    }

    pub fn constant(ctx: &Arc<RingCtx>, v: i128) -> Self {
        let mut coeffs = vec![0; ctx.n];
        coeffs[0] = cmod(v, ctx.modulus);
        Self {
            ctx: ctx.clone(),
            data: PolyData::Coeff(coeffs),
        }
    }

    /// Builds from raw coefficients, centering each one.
    pub fn from_coeffs(ctx: &Arc<RingCtx>, coeffs: Vec<i128>) -> Self {
        assert_eq!(coeffs.len(), ctx.n, "coefficient count must equal N");
        let m = ctx.modulus;
        let coeffs = coeffs.into_iter().map(|c| cmod(c, m)).collect();
        Self {
            ctx: ctx.clone(),
            data: PolyData::Coeff(coeffs),
        }
    }

    /// Builds directly in the NTT domain from per-slot values (centered,
    /// reduced into each prime residue field).
    pub fn from_ntt_values(ctx: &Arc<RingCtx>, values: &[i128]) -> Self {
        assert_eq!(values.len(), ctx.n);
        let data = ctx
            .primes()
            .iter()
            .map(|&p| {
                let p_i = p as i128;
                values.iter().map(|&v| v.rem_euclid(p_i) as u64).collect()
            })
            .collect();
        Self {
            ctx: ctx.clone(),
            data: PolyData::Ntt(data),
        }
    }

    pub fn ctx(&self) -> &Arc<RingCtx> {
        &self.ctx
    }

    pub fn domain(&self) -> Domain {
        match self.data {
            PolyData::Coeff(_) => Domain::Coeff,
            PolyData::Ntt(_) => Domain::Ntt,
        }
    }

    pub fn as_coeffs(&self) -> Option<&[i128]> {
        match &self.data {
            PolyData::Coeff(c) => Some(c),
            PolyData::Ntt(_) => None,
        }
    }

    pub fn ntt_residues(&self) -> Option<&[Vec<u64>]> {
        match &self.data {
            PolyData::Ntt(r) => Some(r),
            PolyData::Coeff(_) => None,
        }
    }

    /// Coefficient vector, converting out of the NTT domain if needed.
    pub fn coeff_vec(&self) -> Vec<i128> {
        match &self.data {
            PolyData::Coeff(c) => c.clone(),
            PolyData::Ntt(_) => self.to_coeff().coeff_vec(),
        }
    }

    pub fn into_ntt(self) -> Self {
        match self.data {
            PolyData::Ntt(_) => self,
            PolyData::Coeff(coeffs) => {
                let mut residues = self.ctx.to_residues(&coeffs);
                for (table, r) in self.ctx.tables.iter().zip(residues.iter_mut()) {
                    table.forward(r);
                }
                Self {
                    ctx: self.ctx,
                    data: PolyData::Ntt(residues),
                }
            }
        }
    }

    pub fn to_ntt(&self) -> Self {
        self.clone().into_ntt()
    }

    pub fn into_coeff(self) -> Self {
        match self.data {
            PolyData::Coeff(_) => self,
            PolyData::Ntt(mut residues) => {
                for (table, r) in self.ctx.tables.iter().zip(residues.iter_mut()) {
                    table.inverse(r);
                }
                let coeffs = self.ctx.from_residues(&residues);
                Self {
                    ctx: self.ctx,
                    data: PolyData::Coeff(coeffs),
                }
            }
        }
    }

    pub fn to_coeff(&self) -> Self {
        self.clone().into_coeff()
    }

    fn check_ctx(&self, other: &Poly) -> Result<()> {
        if !self.ctx.compatible(&other.ctx) {
            return Err(Error::DomainMismatch(format!(
                "modulus {} vs {}",
                self.ctx.modulus, other.ctx.modulus
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        Ok(match (&self.data, &other.data) {
            (PolyData::Coeff(a), PolyData::Coeff(b)) => {
                let m = self.ctx.modulus;
                let coeffs = a.iter().zip(b).map(|(&x, &y)| cmod(x + y, m)).collect();
                Poly {
                    ctx: self.ctx.clone(),
                    data: PolyData::Coeff(coeffs),
                }
            }
            (PolyData::Ntt(a), PolyData::Ntt(b)) => {
                let data = self
                    .ctx
                    .primes
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(&p, (ra, rb))| {
                        ra.iter().zip(rb).map(|(&x, &y)| add_mod(x, y, p)).collect()
                    })
                    .collect();
                Poly {
                    ctx: self.ctx.clone(),
                    data: PolyData::Ntt(data),
                }
            }
            (PolyData::Coeff(_), PolyData::Ntt(_)) => self.add(&other.to_coeff())?,
            (PolyData::Ntt(_), PolyData::Coeff(_)) => self.add(&other.to_ntt())?,
        })
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        match &self.data {
            PolyData::Coeff(a) => {
                let m = self.ctx.modulus;
                Poly {
                    ctx: self.ctx.clone(),
                    data: PolyData::Coeff(a.iter().map(|&x| cmod(-x, m)).collect()),
                }
            }
            PolyData::Ntt(a) => {
                let data = self
                    .ctx
                    .primes
                    .iter()
                    .zip(a)
                    .map(|(&p, r)| r.iter().map(|&x| if x == 0 { 0 } else { p - x }).collect())
                    .collect();
                Poly {
                    ctx: self.ctx.clone(),
                    data: PolyData::Ntt(data),
                }
            }
        }
    }

    /// Product via per-prime NTTs; the result stays in the NTT domain.
    pub fn mul(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let a = self.to_ntt();
        let b = other.to_ntt();
        let (ra, rb) = (a.ntt_residues().unwrap(), b.ntt_residues().unwrap());
        let data = self
            .ctx
            .primes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                ra[i]
                    .iter()
                    .zip(&rb[i])
                    .map(|(&x, &y)| mul_mod(x, y, p))
                    .collect()
            })
            .collect();
        Ok(Poly {
            ctx: self.ctx.clone(),
            data: PolyData::Ntt(data),
        })
    }

    /// Multiplies every coefficient by a scalar (reduced mod each prime).
    pub fn scalar_mul(&self, c: i128) -> Poly {
        match &self.data {
            PolyData::Ntt(res) => {
                let data = self
                    .ctx
                    .primes
                    .iter()
                    .zip(res)
                    .map(|(&p, r)| {
                        let cp = c.rem_euclid(p as i128) as u64;
                        r.iter().map(|&x| mul_mod(x, cp, p)).collect()
                    })
                    .collect();
                Poly {
                    ctx: self.ctx.clone(),
                    data: PolyData::Ntt(data),
                }
            }
            PolyData::Coeff(coeffs) => {
                let residues = self.ctx.to_residues(coeffs);
                let scaled: Vec<Vec<u64>> = self
                    .ctx
                    .primes
                    .iter()
                    .zip(&residues)
                    .map(|(&p, r)| {
                        let cp = c.rem_euclid(p as i128) as u64;
                        r.iter().map(|&x| mul_mod(x, cp, p)).collect()
                    })
                    .collect();
                Poly {
                    ctx: self.ctx.clone(),
                    data: PolyData::Coeff(self.ctx.from_residues(&scaled)),
                }
            }
        }
    }

    /// p(X) * X^k with X^N = -1; negative k maps to -X^(N+k).
    pub fn monomial_mul(&self, k: i64) -> Poly {
        let n = self.ctx.n as i64;
        let two_n = 2 * n;
        let shift = k.rem_euclid(two_n) as usize;
        let coeffs = self.coeff_vec();
        let m = self.ctx.modulus;
        let mut out = vec![0i128; self.ctx.n];
        for (i, &c) in coeffs.iter().enumerate() {
            let pos = i + shift;
            let (idx, negate) = if pos < self.ctx.n {
                (pos, false)
            } else if pos < 2 * self.ctx.n {
                (pos - self.ctx.n, true)
            } else {
                (pos - 2 * self.ctx.n, false)
            };
            out[idx] = cmod(if negate { -c } else { c }, m);
        }
        Poly {
            ctx: self.ctx.clone(),
            data: PolyData::Coeff(out),
        }
    }

    /// The Galois map p(X) -> p(X^k) for odd k, reduced by X^N = -1.
    pub fn automorphism(&self, k: usize) -> Result<Poly> {
        let two_n = 2 * self.ctx.n;
        if k.is_multiple_of(2) {
            return Err(Error::InvalidGaloisElement(k));
        }
        let k = k % two_n;
        let coeffs = self.coeff_vec();
        let m = self.ctx.modulus;
        let mut out = vec![0i128; self.ctx.n];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let e = (i * k) % two_n;
            let (idx, negate) = if e < self.ctx.n {
                (e, false)
            } else {
                (e - self.ctx.n, true)
            };
            out[idx] = cmod(if negate { -c } else { c }, m);
        }
        Ok(Poly {
            ctx: self.ctx.clone(),
            data: PolyData::Coeff(out),
        })
    }

    /// Max absolute coefficient under the centered representation.
    pub fn inf_norm(&self) -> u128 {
        self.coeff_vec()
            .iter()
            .map(|&c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Debug serialization: (N, primes) header then fixed-width signed
    /// little-endian coefficients, width set by the modulus size.
    pub fn to_bytes(&self) -> Vec<u8> {
        let coeffs = self.coeff_vec();
        let width = byte_width(self.ctx.modulus);
        let mut out = Vec::with_capacity(8 + self.ctx.primes.len() * 8 + coeffs.len() * width);
        out.extend_from_slice(&(self.ctx.n as u32).to_le_bytes());
        out.push(self.ctx.primes.len() as u8);
        for &p in &self.ctx.primes {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.push(width as u8);
        for &c in &coeffs {
            out.extend_from_slice(&c.to_le_bytes()[..width]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Poly> {
        let fail = || Error::Io("truncated poly serialization".into());
        if bytes.len() < 5 {
            return Err(fail());
        }
        let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let k = bytes[4] as usize;
        let mut off = 5;
        let mut primes = Vec::with_capacity(k);
        for _ in 0..k {
            if bytes.len() < off + 8 {
                return Err(fail());
            }
            primes.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        if bytes.len() <= off {
            return Err(fail());
        }
        let width = bytes[off] as usize;
        off += 1;
        if width == 0 || width > 16 || bytes.len() != off + n * width {
            return Err(fail());
        }
        let ctx = RingCtx::new(n, primes)?;
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            let chunk = &bytes[off + i * width..off + (i + 1) * width];
            let sign = (chunk[width - 1] & 0x80) != 0;
            let mut buf = if sign { [0xffu8; 16] } else { [0u8; 16] };
            buf[..width].copy_from_slice(chunk);
            coeffs.push(i128::from_le_bytes(buf));
        }
        Ok(Poly::from_coeffs(&ctx, coeffs))
    }
}

fn byte_width(modulus: u128) -> usize {
    let bits = 128 - (modulus / 2).leading_zeros() as usize + 1;
    bits.div_ceil(8).clamp(1, 16)
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.compatible(&other.ctx) && self.coeff_vec() == other.coeff_vec()
    }
}

/// Product of two ring elements over the chosen evaluation path. Both paths
/// return the coefficient-domain result and agree exactly; the schoolbook
/// path is the independent oracle and only supports word-sized moduli.
pub fn poly_mul(a: &Poly, b: &Poly, path: MulPath) -> Result<Poly> {
    match path {
        MulPath::Ntt => Ok(a.mul(b)?.into_coeff()),
        MulPath::Schoolbook => {
            if !a.ctx().compatible(b.ctx()) {
                return Err(Error::DomainMismatch("schoolbook operands".into()));
            }
            let m = a.ctx().modulus();
            if m > 1 << 63 {
                return Err(Error::InvalidParameter(
                    "schoolbook path requires modulus < 2^63".into(),
                ));
            }
            let n = a.ctx().n();
            let av = a.coeff_vec();
            let bv = b.coeff_vec();
            let mut out = vec![0i128; n];
            for i in 0..n {
                if av[i] == 0 {
                    continue;
                }
                for j in 0..n {
                    let prod = av[i] * bv[j];
                    let k = i + j;
                    if k < n {
                        out[k] = cmod(out[k] + prod, m);
                    } else {
                        out[k - n] = cmod(out[k - n] - prod, m);
                    }
                }
            }
            Ok(Poly::from_coeffs(a.ctx(), out))
        }
    }
}

/// Transform between coefficient and NTT domains with direction checking.
pub fn ntt_transform(p: &Poly, forward: bool) -> Result<Poly> {
    match (p.domain(), forward) {
        (Domain::Coeff, true) => Ok(p.to_ntt()),
        (Domain::Ntt, false) => Ok(p.to_coeff()),
        (d, _) => Err(Error::DomainMismatch(format!(
            "poly already in {d:?} domain"
        ))),
    }
}
