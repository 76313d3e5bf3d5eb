//! RGSW encryption and the external product against RLWE ciphertexts, with
//! special-modulus lifting, plus the Galois key switching that powers
//! homomorphic coefficient unpacking and packed matrix-vector products.
//!
//! Layout: a ciphertext is two groups of d gadget rows over R_qP. Group j,
//! digit t is an RLWE encryption of zero with P * nu^t * m added into
//! component j. The external product decomposes an R_q ciphertext into
//! signed base-nu digits, inner-products them with the rows over R_qP,
//! divides by P with rounding, and reduces mod q.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ring::arith::{add_mod, inv_mod, mul_mod_shoup, shoup_precompute};
use crate::ring::{cmod, round_half_away, NoiseSampler, Poly, RingCtx, RingParams};
use crate::rlwe::{
    pack_coeff, rlwe_add, rlwe_enc_zero, rlwe_sub, PackingLayout, RingKey, RlweCiphertext,
    SecretKey,
};

/// Digit count d and base nu with nu^(d-1) < q <= nu^d. The base is a power
/// of two, except for the degenerate single-digit default nu = q where the
/// decomposition is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetParams {
    pub digits: usize,
    pub base: u128,
}

impl GadgetParams {
    pub fn new(digits: usize, base: u128, q: u64) -> Result<Self> {
        if digits == 0 {
            return Err(Error::InvalidParameter("gadget digit count is zero".into()));
        }
        let identity = digits == 1 && base == q as u128;
        if !identity && !base.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "gadget base {base} must be a power of two (or q itself with d = 1)"
            )));
        }
        let below = base
            .checked_pow(digits as u32 - 1)
            .ok_or_else(|| Error::InvalidParameter("gadget base overflow".into()))?;
        let cover = below.checked_mul(base);
        if below >= q as u128 || cover.map(|c| c < q as u128).unwrap_or(false) {
            return Err(Error::InvalidParameter(format!(
                "gadget (d = {digits}, nu = {base}) does not cover q = {q}"
            )));
        }
        Ok(Self { digits, base })
    }

    /// The library default: a single digit with base q.
    pub fn identity(q: u64) -> Self {
        Self {
            digits: 1,
            base: q as u128,
        }
    }
}

/// Noise bounds implied by the public parameters: the external-product bound
/// P^(-1) d N sigma nu + (N+1)/2 and its log2(tau)-fold unpacking growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub mult_bound: f64,
    pub unpack_bound: f64,
}

impl ErrorBudget {
    pub fn new(gadget: GadgetParams, n: usize, special_p: u64, sigma: f64, tau: usize) -> Self {
        // d * N * nu stays well inside u128; sigma = 19.2 is carried as the
        // rational 96/5 so the dominant term is an exact division.
        let dnn = gadget.digits as u128 * n as u128 * gadget.base;
        let mult_bound = if (sigma * 5.0).fract() == 0.0 {
            dnn as f64 * (sigma * 5.0) / (5.0 * special_p as f64)
        } else {
            dnn as f64 * sigma / special_p as f64
        } + (n as f64 + 1.0) / 2.0;
        let levels = tau.max(1).ilog2() as f64;
        Self {
            mult_bound,
            unpack_bound: mult_bound * levels,
        }
    }
}

/// NTT-domain residues with Shoup companions for repeated multiplication.
#[derive(Debug, Clone)]
struct CachedPoly {
    vals: Vec<Vec<u64>>,
    shoup: Vec<Vec<u64>>,
}

impl CachedPoly {
    fn from_poly(p: &Poly) -> Self {
        let ntt = p.to_ntt();
        let res = ntt.ntt_residues().unwrap();
        let primes = ntt.ctx().primes();
        let shoup = res
            .iter()
            .zip(primes)
            .map(|(r, &p)| r.iter().map(|&v| shoup_precompute(v, p)).collect())
            .collect();
        Self {
            vals: res.to_vec(),
            shoup,
        }
    }
}

#[derive(Debug, Clone)]
struct GadgetEntry {
    c0: CachedPoly,
    c1: CachedPoly,
}

/// 2 x 2d matrix over R_qP; group 0 targets c0 digits, group 1 targets c1.
#[derive(Debug, Clone)]
pub struct RgswCiphertext {
    groups: [Vec<GadgetEntry>; 2],
}

/// Keys switching phi_k-rotated ciphertexts back to the base secret.
#[derive(Debug, Clone)]
pub struct GaloisKeySet {
    keys: BTreeMap<usize, Vec<GadgetEntry>>,
}

impl GaloisKeySet {
    pub fn elements(&self) -> Vec<usize> {
        self.keys.keys().copied().collect()
    }
}

/// Galois elements consumed by `unpack_ct` for a given packing width: the
/// even/odd split at level j negates slots of odd index via tau/2^j + 1.
pub fn unpack_galois_elements(tau: usize) -> Vec<usize> {
    assert!(tau.is_power_of_two());
    let mut elements = Vec::new();
    let mut t = tau;
    while t >= 2 {
        elements.push(t + 1);
        t >>= 1;
    }
    elements
}

/// Evaluation context binding the base ring, the lifted ring, and the gadget.
#[derive(Debug, Clone)]
pub struct RgswContext {
    ring_q: Arc<RingCtx>,
    ring_qp: Arc<RingCtx>,
    gadget: GadgetParams,
    special_p: u64,
}

struct QpAccum {
    c0: Vec<Vec<u64>>,
    c1: Vec<Vec<u64>>,
}

impl RgswContext {
    pub fn new(params: &RingParams, gadget: GadgetParams) -> Result<Self> {
        let special_p = params.special_p.ok_or_else(|| {
            Error::InvalidParameter("external products need a special modulus".into())
        })?;
        GadgetParams::new(gadget.digits, gadget.base, params.q)?;
        Ok(Self {
            ring_q: params.ring_q(),
            ring_qp: params.ring_qp()?,
            gadget,
            special_p,
        })
    }

    pub fn ring_q(&self) -> &Arc<RingCtx> {
        &self.ring_q
    }

    pub fn ring_qp(&self) -> &Arc<RingCtx> {
        &self.ring_qp
    }

    pub fn gadget(&self) -> GadgetParams {
        self.gadget
    }

    pub fn budget(&self, sigma: f64, tau: usize) -> ErrorBudget {
        ErrorBudget::new(self.gadget, self.ring_q.n(), self.special_p, sigma, tau)
    }

    /// Signed base-nu digits of a centered R_q element; recomposition is
    /// exact over the integers.
    pub fn gadget_decompose(&self, p: &Poly) -> Result<Vec<Poly>> {
        if !p.ctx().compatible(&self.ring_q) {
            return Err(Error::DomainMismatch("decomposition input".into()));
        }
        Ok(self
            .decompose_raw(&p.coeff_vec())
            .into_iter()
            .map(|digit| Poly::from_coeffs(&self.ring_q, digit))
            .collect())
    }

    fn decompose_raw(&self, coeffs: &[i128]) -> Vec<Vec<i128>> {
        let d = self.gadget.digits;
        if d == 1 && self.gadget.base == self.ring_q.modulus() {
            return vec![coeffs.to_vec()];
        }
        let nu = self.gadget.base;
        let nu_i = nu as i128;
        let mut digits = vec![vec![0i128; coeffs.len()]; d];
        for (i, &c0) in coeffs.iter().enumerate() {
            let mut c = c0;
            for digit in digits.iter_mut() {
                let r = cmod(c, nu);
                digit[i] = r;
                c = (c - r) / nu_i;
            }
            debug_assert_eq!(c, 0, "digit expansion must terminate");
        }
        digits
    }

    /// Gadget rows encrypting P * nu^t * m into the chosen component.
    fn gadget_encrypt(
        &self,
        m_qp: &Poly,
        component: usize,
        key_qp: &RingKey,
        sampler: &mut NoiseSampler,
    ) -> Vec<GadgetEntry> {
        (0..self.gadget.digits)
            .map(|t| {
                // nu^t < q, so the factor stays below q*P
                let factor = self.special_p as u128 * self.gadget.base.pow(t as u32);
                let ct = rlwe_enc_zero(key_qp, sampler);
                let scaled = m_qp.scalar_mul(factor as i128);
                let (c0, c1) = if component == 0 {
                    (ct.c0.add(&scaled).unwrap(), ct.c1)
                } else {
                    (ct.c0, ct.c1.add(&scaled).unwrap())
                };
                GadgetEntry {
                    c0: CachedPoly::from_poly(&c0),
                    c1: CachedPoly::from_poly(&c1),
                }
            })
            .collect()
    }

    pub fn rgsw_enc(
        &self,
        m: &Poly,
        key_qp: &RingKey,
        sampler: &mut NoiseSampler,
    ) -> Result<RgswCiphertext> {
        if !m.ctx().compatible(&self.ring_q) {
            return Err(Error::DomainMismatch("RGSW message must live mod q".into()));
        }
        let m_qp = Poly::from_coeffs(&self.ring_qp, m.coeff_vec());
        let g0 = self.gadget_encrypt(&m_qp, 0, key_qp, sampler);
        let g1 = self.gadget_encrypt(&m_qp, 1, key_qp, sampler);
        Ok(RgswCiphertext { groups: [g0, g1] })
    }

    fn new_accum(&self) -> QpAccum {
        let zeros = || {
            self.ring_qp
                .primes()
                .iter()
                .map(|_| vec![0u64; self.ring_qp.n()])
                .collect::<Vec<_>>()
        };
        QpAccum {
            c0: zeros(),
            c1: zeros(),
        }
    }

    /// Accumulates sum_t digit_t * entries[t] over R_qP into `acc`.
    fn gadget_apply(&self, src: &[i128], entries: &[GadgetEntry], acc: &mut QpAccum) {
        let digits = self.decompose_raw(src);
        let primes = self.ring_qp.primes();
        let tables = self.ring_qp.tables();
        for (digit, entry) in digits.iter().zip(entries) {
            for (i, &p) in primes.iter().enumerate() {
                let p_i = p as i128;
                let mut res: Vec<u64> =
                    digit.iter().map(|&c| c.rem_euclid(p_i) as u64).collect();
                tables[i].forward(&mut res);
                let (e0v, e0s) = (&entry.c0.vals[i], &entry.c0.shoup[i]);
                let (e1v, e1s) = (&entry.c1.vals[i], &entry.c1.shoup[i]);
                let (a0, a1) = (&mut acc.c0[i], &mut acc.c1[i]);
                for j in 0..res.len() {
                    let x = res[j];
                    a0[j] = add_mod(a0[j], mul_mod_shoup(x, e0v[j], e0s[j], p), p);
                    a1[j] = add_mod(a1[j], mul_mod_shoup(x, e1v[j], e1s[j], p), p);
                }
            }
        }
    }

    /// Inverse NTT + CRT + divide-by-P rounding + reduce mod q.
    fn finalize(&self, acc: QpAccum) -> RlweCiphertext {
        let p_i = self.special_p as i128;
        let reduce = |mut residues: Vec<Vec<u64>>| -> Poly {
            for (table, r) in self.ring_qp.tables().iter().zip(residues.iter_mut()) {
                table.inverse(r);
            }
            let wide = self.ring_qp.from_residues(&residues);
            let rounded = wide.iter().map(|&x| div_round(x, p_i)).collect();
            Poly::from_coeffs(&self.ring_q, rounded)
        };
        RlweCiphertext {
            c0: reduce(acc.c0),
            c1: reduce(acc.c1),
        }
    }

    /// The external product: RGSW(m) x RLWE(ct) decrypts to m * Dec(ct)
    /// plus fresh noise within the error budget.
    pub fn external_product(
        &self,
        c: &RgswCiphertext,
        ct: &RlweCiphertext,
    ) -> Result<RlweCiphertext> {
        if !ct.ctx().compatible(&self.ring_q) {
            return Err(Error::DomainMismatch(
                "external product input must live mod q".into(),
            ));
        }
        let mut acc = self.new_accum();
        self.gadget_apply(&ct.c0.coeff_vec(), &c.groups[0], &mut acc);
        self.gadget_apply(&ct.c1.coeff_vec(), &c.groups[1], &mut acc);
        Ok(self.finalize(acc))
    }

    pub fn gen_galois_keys(
        &self,
        sk: &SecretKey,
        elements: &[usize],
        key_qp: &RingKey,
        sampler: &mut NoiseSampler,
    ) -> Result<GaloisKeySet> {
        let two_n = 2 * self.ring_q.n();
        let mut keys = BTreeMap::new();
        for &k in elements {
            if k % 2 == 0 || k >= two_n {
                return Err(Error::InvalidGaloisElement(k));
            }
            let rotated = sk.as_poly(&self.ring_qp).automorphism(k)?;
            keys.insert(k, self.gadget_encrypt(&rotated, 0, key_qp, sampler));
        }
        Ok(GaloisKeySet { keys })
    }

    /// Homomorphic Galois action: the result decrypts to phi_k(Dec(ct))
    /// within the external-product bound.
    pub fn apply_automorphism(
        &self,
        ct: &RlweCiphertext,
        k: usize,
        keys: &GaloisKeySet,
    ) -> Result<RlweCiphertext> {
        let entries = keys.keys.get(&k).ok_or(Error::KeyNotFound(k))?;
        let c0r = ct.c0.automorphism(k)?;
        let c1r = ct.c1.automorphism(k)?;
        let mut acc = self.new_accum();
        self.gadget_apply(&c1r.coeff_vec(), entries, &mut acc);
        let switched = self.finalize(acc);
        Ok(RlweCiphertext {
            c0: c0r.add(&switched.c0)?,
            c1: switched.c1,
        })
    }

    /// Homomorphically splits a packed ciphertext into one ciphertext per
    /// slot via the even/odd coefficient recursion. The recursion doubles
    /// the surviving slot at each of the log2(tau) levels; pre-multiplying
    /// the input by tau^(-1) mod q cancels that factor exactly since the
    /// inverse rides inside the plaintext.
    ///
    /// Output semantics: the slot value sits in the constant coefficient
    /// (plus noise within the unpack budget). Coefficients at positions not
    /// divisible by the stride can hold large residues of the tau^(-1)-scaled
    /// input error; such terms never reach a slot position again, because
    /// products against stride-packed polynomials and every Galois element
    /// used here preserve coefficient positions mod the stride.
    pub fn unpack_ct(
        &self,
        ct: &RlweCiphertext,
        k: usize,
        layout: &PackingLayout,
        keys: &GaloisKeySet,
    ) -> Result<Vec<RlweCiphertext>> {
        if k > layout.tau() {
            return Err(Error::CapacityExceeded {
                requested: k,
                capacity: layout.tau(),
            });
        }
        let tau = layout.tau();
        let q = self.ring_q.primes()[0];
        let tau_inv = inv_mod(tau as u64 % q, q) as i128;
        let mut nodes = vec![scale_ct(ct, tau_inv)];
        let mut stride = layout.stride();
        let mut t = tau;
        while t >= 2 {
            let g = t + 1;
            let mut next: Vec<Option<RlweCiphertext>> = vec![None; nodes.len() * 2];
            for (r, node) in nodes.iter().enumerate() {
                let rotated = self.apply_automorphism(node, g, keys)?;
                let even = rlwe_add(node, &rotated)?;
                let odd = shift_ct(&rlwe_sub(node, &rotated)?, -(stride as i64));
                next[r] = Some(even);
                next[r + nodes.len()] = Some(odd);
            }
            nodes = next.into_iter().map(|n| n.unwrap()).collect();
            stride *= 2;
            t >>= 1;
        }
        nodes.truncate(k);
        Ok(nodes)
    }

    /// Packs each column of a (scaled) matrix and RGSW-encrypts it.
    pub fn enc_pack_matrix(
        &self,
        rows: &[Vec<f64>],
        scale: Option<f64>,
        layout: &PackingLayout,
        key_qp: &RingKey,
        sampler: &mut NoiseSampler,
        tol: f64,
    ) -> Result<Vec<RgswCiphertext>> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::ShapeMismatch("ragged matrix".into()));
        }
        let mut out = Vec::with_capacity(ncols);
        for j in 0..ncols {
            let mut ints = Vec::with_capacity(nrows);
            for row in rows {
                let v = row[j];
                let int = match scale {
                    Some(s) => round_half_away(v / s),
                    None => {
                        let r = v.round();
                        if (v - r).abs() > tol {
                            return Err(Error::Integrality {
                                max_deviation: (v - r).abs(),
                                tol,
                            });
                        }
                        r as i128
                    }
                };
                ints.push(int);
            }
            let pt = pack_coeff(&ints, layout, &self.ring_q)?;
            out.push(self.rgsw_enc(&pt, key_qp, sampler)?);
        }
        Ok(out)
    }

    /// sum_i cols[i] (x) scalars[i]: the packed matrix-vector product.
    pub fn mult_pack(
        &self,
        scalars: &[RlweCiphertext],
        cols: &[RgswCiphertext],
    ) -> Result<RlweCiphertext> {
        if scalars.len() != cols.len() || scalars.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} scalars vs {} columns",
                scalars.len(),
                cols.len()
            )));
        }
        let products: Vec<RlweCiphertext> = cols
            .par_iter()
            .zip(scalars.par_iter())
            .map(|(c, s)| self.external_product(c, s))
            .collect::<Result<_>>()?;
        let mut acc = products[0].clone();
        for p in &products[1..] {
            acc = rlwe_add(&acc, p)?;
        }
        Ok(acc)
    }

    /// Entry-wise encrypted matrix times vector of constant ciphertexts;
    /// needs no Galois keys (the no-packing mode).
    pub fn matvec_ext_nopack(
        &self,
        matrix: &[Vec<RgswCiphertext>],
        v: &[RlweCiphertext],
    ) -> Result<Vec<RlweCiphertext>> {
        for row in matrix {
            if row.len() != v.len() {
                return Err(Error::ShapeMismatch(format!(
                    "matrix row of {} vs vector of {}",
                    row.len(),
                    v.len()
                )));
            }
        }
        matrix
            .par_iter()
            .map(|row| {
                let mut acc: Option<RlweCiphertext> = None;
                for (c, s) in row.iter().zip(v) {
                    let prod = self.external_product(c, s)?;
                    acc = Some(match acc {
                        Some(a) => rlwe_add(&a, &prod)?,
                        None => prod,
                    });
                }
                Ok(acc.expect("rows are non-empty"))
            })
            .collect()
    }
}

fn div_round(x: i128, p: i128) -> i128 {
    // p is odd so exact halves cannot occur
    let half = p >> 1;
    if x >= 0 {
        (x + half) / p
    } else {
        (x - half) / p
    }
}

fn scale_ct(ct: &RlweCiphertext, c: i128) -> RlweCiphertext {
    RlweCiphertext {
        c0: ct.c0.scalar_mul(c),
        c1: ct.c1.scalar_mul(c),
    }
}

fn shift_ct(ct: &RlweCiphertext, k: i64) -> RlweCiphertext {
    RlweCiphertext {
        c0: ct.c0.monomial_mul(k),
        c1: ct.c1.monomial_mul(k),
    }
}
