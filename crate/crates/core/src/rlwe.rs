//! Base Ring-LWE scheme over R_q: ternary secrets, symmetric encryption
//! with additive homomorphism, the coefficient-packing codec, and the
//! quantize/scale helpers used by the sensor and actuator roles.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::{cmod, round_half_away, NoiseSampler, Poly, RingCtx, SampleKind};

/// Ternary secret, shared across moduli by re-tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    coeffs: Vec<i8>,
}

impl SecretKey {
    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn as_poly(&self, ctx: &Arc<RingCtx>) -> Poly {
        assert_eq!(ctx.n(), self.coeffs.len());
        Poly::from_coeffs(ctx, self.coeffs.iter().map(|&c| c as i128).collect())
    }

    /// Cached NTT form of the secret under one modulus tag.
    pub fn ring_key(&self, ctx: &Arc<RingCtx>) -> RingKey {
        RingKey {
            s_ntt: self.as_poly(ctx).into_ntt(),
        }
    }
}

/// Secret key fixed to a ring, kept in the NTT domain for fast inner products.
#[derive(Debug, Clone)]
pub struct RingKey {
    s_ntt: Poly,
}

impl RingKey {
    pub fn ctx(&self) -> &Arc<RingCtx> {
        self.s_ntt.ctx()
    }

    pub fn secret_ntt(&self) -> &Poly {
        &self.s_ntt
    }
}

pub fn keygen(n: usize, sampler: &mut NoiseSampler) -> SecretKey {
    SecretKey {
        coeffs: sampler.ternary_coeffs(n),
    }
}

/// Pair (c0, c1) with Dec = c0 + c1 * s.
#[derive(Debug, Clone, PartialEq)]
pub struct RlweCiphertext {
    pub c0: Poly,
    pub c1: Poly,
}

impl RlweCiphertext {
    pub fn ctx(&self) -> &Arc<RingCtx> {
        self.c0.ctx()
    }
}

/// c0 = -a*s + m + e, c1 = a with a uniform and e Gaussian.
pub fn rlwe_enc(m: &Poly, key: &RingKey, sampler: &mut NoiseSampler) -> Result<RlweCiphertext> {
    let ctx = key.ctx();
    if !m.ctx().compatible(ctx) {
        return Err(Error::DomainMismatch("message under wrong modulus".into()));
    }
    let a = sampler.sample_poly(SampleKind::Uniform, ctx);
    let e = sampler.sample_poly(SampleKind::Gaussian, ctx);
    let a_s = a.mul(key.secret_ntt())?.into_coeff();
    let c0 = m.add(&e)?.sub(&a_s)?;
    Ok(RlweCiphertext { c0, c1: a })
}

/// Encryption of zero (used as the randomizer for gadget rows).
pub fn rlwe_enc_zero(key: &RingKey, sampler: &mut NoiseSampler) -> RlweCiphertext {
    rlwe_enc(&Poly::zero(key.ctx()), key, sampler).expect("zero message is always valid")
}

pub fn rlwe_dec(ct: &RlweCiphertext, key: &RingKey) -> Poly {
    let c1_s = ct
        .c1
        .mul(key.secret_ntt())
        .expect("ciphertext/key modulus mismatch")
        .into_coeff();
    ct.c0.to_coeff().add(&c1_s).unwrap()
}

pub fn rlwe_add(a: &RlweCiphertext, b: &RlweCiphertext) -> Result<RlweCiphertext> {
    Ok(RlweCiphertext {
        c0: a.c0.add(&b.c0)?,
        c1: a.c1.add(&b.c1)?,
    })
}

pub fn rlwe_add3(
    a: &RlweCiphertext,
    b: &RlweCiphertext,
    c: &RlweCiphertext,
) -> Result<RlweCiphertext> {
    rlwe_add(&rlwe_add(a, b)?, c)
}

pub fn rlwe_sub(a: &RlweCiphertext, b: &RlweCiphertext) -> Result<RlweCiphertext> {
    Ok(RlweCiphertext {
        c0: a.c0.sub(&b.c0)?,
        c1: a.c1.sub(&b.c1)?,
    })
}

/// Slot layout: a k-vector lives at coefficients 0, N/tau, ..., (k-1)N/tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackingLayout {
    tau: usize,
    degree: usize,
}

impl PackingLayout {
    pub fn new(tau: usize, degree: usize) -> Result<Self> {
        if !tau.is_power_of_two() || tau > degree || !degree.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "packing layout tau={tau} degree={degree}"
            )));
        }
        Ok(Self { tau, degree })
    }

    /// Smallest power of two >= the largest packed dimension.
    pub fn for_dims(max_dim: usize, degree: usize) -> Result<Self> {
        let tau = max_dim.max(1).next_power_of_two();
        Self::new(tau, degree)
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn stride(&self) -> usize {
        self.degree / self.tau
    }
}

pub fn pack_coeff(v: &[i128], layout: &PackingLayout, ctx: &Arc<RingCtx>) -> Result<Poly> {
    if v.len() > layout.tau() {
        return Err(Error::CapacityExceeded {
            requested: v.len(),
            capacity: layout.tau(),
        });
    }
    assert_eq!(ctx.n(), layout.degree);
    let mut coeffs = vec![0i128; ctx.n()];
    for (i, &val) in v.iter().enumerate() {
        coeffs[i * layout.stride()] = cmod(val, ctx.modulus());
    }
    Ok(Poly::from_coeffs(ctx, coeffs))
}

pub fn unpack_pt_coeff(p: &Poly, k: usize, layout: &PackingLayout) -> Result<Vec<i128>> {
    if k > layout.tau() {
        return Err(Error::CapacityExceeded {
            requested: k,
            capacity: layout.tau(),
        });
    }
    let coeffs = p.coeff_vec();
    Ok((0..k).map(|i| coeffs[i * layout.stride()]).collect())
}

/// Scale factors: sensor resolution r, matrix scale s, extra scale L.
/// 1/s and 1/L are integers by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationParams {
    r: f64,
    s: f64,
    l: f64,
    inv_s: u64,
    inv_l: u64,
}

impl QuantizationParams {
    pub fn new(r: f64, s: f64, l: f64) -> Result<Self> {
        if r <= 0.0 || s <= 0.0 || l <= 0.0 {
            return Err(Error::InvalidParameter(
                "quantization scales must be positive".into(),
            ));
        }
        let integral_inverse = |x: f64, name: &str| -> Result<u64> {
            let inv = 1.0 / x;
            if (inv - inv.round()).abs() > 1e-9 * inv.abs() {
                return Err(Error::InvalidParameter(format!(
                    "1/{name} = {inv} is not an integer"
                )));
            }
            Ok(inv.round() as u64)
        };
        Ok(Self {
            r,
            s,
            l,
            inv_s: integral_inverse(s, "s")?,
            inv_l: integral_inverse(l, "L")?,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn inv_s(&self) -> u64 {
        self.inv_s
    }
    pub fn inv_l(&self) -> u64 {
        self.inv_l
    }

    /// r * s^2 * L, the actuator decode factor of the recursive loop.
    pub fn decode_factor(&self) -> f64 {
        self.r * self.s * self.s * self.l
    }

    /// round(v / r) * (1/L), the on-ramp for sensor and actuator signals.
    pub fn scale_signal(&self, v: f64) -> i128 {
        round_half_away(v / self.r) * self.inv_l as i128
    }
}

fn check_headroom(value: i128, ctx: &RingCtx) -> Result<()> {
    if value.unsigned_abs() * 2 >= ctx.modulus() {
        return Err(Error::Overflow(format!(
            "scaled message {value} exceeds +-q/2 for q = {}",
            ctx.modulus()
        )));
    }
    Ok(())
}

/// Quantizes a plant output, packs it, and encrypts it at the sensor.
pub fn sensor_encrypt_packed(
    y: &[f64],
    qp: &QuantizationParams,
    layout: &PackingLayout,
    key: &RingKey,
    sampler: &mut NoiseSampler,
) -> Result<RlweCiphertext> {
    let ctx = key.ctx();
    let mut msg = Vec::with_capacity(y.len());
    for &v in y {
        let scaled = qp.scale_signal(v);
        check_headroom(scaled, ctx)?;
        msg.push(scaled);
    }
    let pt = pack_coeff(&msg, layout, ctx)?;
    rlwe_enc(&pt, key, sampler)
}

/// Decrypts, unpacks k slots, and rescales by `factor` at the actuator.
pub fn actuator_decrypt_unpack(
    ct: &RlweCiphertext,
    k: usize,
    factor: f64,
    layout: &PackingLayout,
    key: &RingKey,
) -> Result<Vec<f64>> {
    let pt = rlwe_dec(ct, key);
    let slots = unpack_pt_coeff(&pt, k, layout)?;
    Ok(slots.iter().map(|&v| v as f64 * factor).collect())
}

/// Decodes one constant-coefficient ciphertext per component (no packing).
pub fn actuator_decrypt_each(cts: &[RlweCiphertext], factor: f64, key: &RingKey) -> Vec<f64> {
    cts.iter()
        .map(|ct| rlwe_dec(ct, key).coeff_vec()[0] as f64 * factor)
        .collect()
}

/// Re-encrypts the computed plant input as independent constant-polynomial
/// ciphertexts, one per component.
pub fn reencrypt_input(
    u: &[f64],
    qp: &QuantizationParams,
    key: &RingKey,
    sampler: &mut NoiseSampler,
) -> Result<Vec<RlweCiphertext>> {
    let ctx = key.ctx();
    u.iter()
        .map(|&v| {
            let scaled = qp.scale_signal(v);
            check_headroom(scaled, ctx)?;
            rlwe_enc(&Poly::constant(ctx, scaled), key, sampler)
        })
        .collect()
}
