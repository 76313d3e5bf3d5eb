//! Closed-loop runners for both encrypted pipelines and the unencrypted
//! baseline. Each encrypted run also steps an independent baseline loop from
//! the same plant initial state; per-step errors compare the two plant
//! inputs. Latency covers the sensor-to-actuator path (encryption,
//! controller arithmetic, decryption, re-encryption) and excludes plant
//! propagation and logging.
//!
//! Key handling is role-scoped: the secret key lives only in `SecretSide`
//! (sensor + actuator); the controller structs hold evaluation material and
//! ciphertexts only.

use std::time::Instant;

use nalgebra::DVector;

use super::budget::check_params;
use super::config::{RunConfig, Scheme};
use super::log::{StepRecord, TrajectoryLog};
use crate::bgv::{
    bgv_dec, bgv_enc, bgv_mul, mul_then_add, BgvCiphertext, BgvKeys, BgvParams, SlotCodec,
};
use crate::control::{
    dup_pad, io_form, to_integer_state, vec_pad, ControllerSS, PlantModel, ReEncryptedForm,
};
use crate::error::{Error, Result};
use crate::rgsw::{unpack_galois_elements, GaloisKeySet, RgswCiphertext, RgswContext};
use crate::ring::{cmod, round_half_away, NoiseSampler, Poly};
use crate::rlwe::{
    actuator_decrypt_each, actuator_decrypt_unpack, keygen, pack_coeff, reencrypt_input,
    rlwe_add3, rlwe_enc, sensor_encrypt_packed, PackingLayout, QuantizationParams, RingKey,
    RlweCiphertext,
};

/// Runs the scheme selected by the configuration.
pub fn run(cfg: &RunConfig) -> Result<TrajectoryLog> {
    match cfg.scheme {
        Scheme::RgswPacked => run_rgsw_loop(cfg),
        Scheme::RgswNopack => run_rgsw_nopack_loop(cfg),
        Scheme::Bgv => run_bgv_loop(cfg),
        Scheme::Baseline => run_baseline_loop(cfg),
    }
}

/// The unencrypted closed loop; both input columns carry the same values.
pub fn run_baseline_loop(cfg: &RunConfig) -> Result<TrajectoryLog> {
    let plant = cfg.plant()?;
    let ctrl = cfg.controller()?;
    let mut log = TrajectoryLog::default();
    let mut state = BaselineState::new(&plant, &ctrl);
    for t in 0..cfg.steps {
        let t0 = Instant::now();
        let (y, u) = state.step(&plant, &ctrl);
        let latency_ms = t0.elapsed().as_secs_f64() * 1e3;
        let u: Vec<f64> = u.iter().copied().collect();
        log.rows.push(StepRecord {
            t,
            y: y.iter().copied().collect(),
            u_enc: u.clone(),
            u_base: u,
            err_inf: 0.0,
            latency_ms,
        });
    }
    Ok(log)
}

struct BaselineState {
    xp: DVector<f64>,
    x: DVector<f64>,
}

impl BaselineState {
    fn new(plant: &PlantModel, ctrl: &ControllerSS) -> Self {
        Self {
            xp: plant.x_ini.clone(),
            x: ctrl.x_ini.clone(),
        }
    }

    fn step(&mut self, plant: &PlantModel, ctrl: &ControllerSS) -> (DVector<f64>, DVector<f64>) {
        let y = &plant.c_out * &self.xp;
        let u = &ctrl.h * &self.x;
        self.x = &ctrl.f * &self.x + &ctrl.g * &y;
        self.xp = &plant.a * &self.xp + &plant.b * &u;
        (y, u)
    }
}

/// Secret-key holder for the sensor and actuator roles.
struct SecretSide {
    key: RingKey,
    quant: QuantizationParams,
    layout: PackingLayout,
}

impl SecretSide {
    fn encrypt_output(&self, y: &[f64], sampler: &mut NoiseSampler) -> Result<RlweCiphertext> {
        sensor_encrypt_packed(y, &self.quant, &self.layout, &self.key, sampler)
    }

    fn decrypt_input(&self, ct: &RlweCiphertext, m: usize) -> Result<Vec<f64>> {
        actuator_decrypt_unpack(ct, m, self.quant.decode_factor(), &self.layout, &self.key)
    }

    fn reencrypt(&self, u: &[f64], sampler: &mut NoiseSampler) -> Result<Vec<RlweCiphertext>> {
        reencrypt_input(u, &self.quant, &self.key, sampler)
    }
}

fn to_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Evaluation-side material for the packed recursive controller.
struct PackedController {
    ctx: RgswContext,
    galois: GaloisKeySet,
    layout: PackingLayout,
    f_cols: Vec<RgswCiphertext>,
    g_cols: Vec<RgswCiphertext>,
    h_cols: Vec<RgswCiphertext>,
    r_cols: Vec<RgswCiphertext>,
    n: usize,
    l: usize,
}

impl PackedController {
    /// Unpacks the state and output, then computes the plant input.
    fn input_phase(
        &self,
        x_ct: &RlweCiphertext,
        y_ct: &RlweCiphertext,
    ) -> Result<(RlweCiphertext, Vec<RlweCiphertext>, Vec<RlweCiphertext>)> {
        let x_parts = self.ctx.unpack_ct(x_ct, self.n, &self.layout, &self.galois)?;
        let y_parts = self.ctx.unpack_ct(y_ct, self.l, &self.layout, &self.galois)?;
        let u_ct = self.ctx.mult_pack(&x_parts, &self.h_cols)?;
        Ok((u_ct, x_parts, y_parts))
    }

    /// x(t+1) = Fbar x + G y + R u with the re-encrypted input.
    fn state_phase(
        &self,
        x_parts: &[RlweCiphertext],
        y_parts: &[RlweCiphertext],
        u_reenc: &[RlweCiphertext],
    ) -> Result<RlweCiphertext> {
        let fx = self.ctx.mult_pack(x_parts, &self.f_cols)?;
        let gy = self.ctx.mult_pack(y_parts, &self.g_cols)?;
        let ru = self.ctx.mult_pack(u_reenc, &self.r_cols)?;
        rlwe_add3(&fx, &gy, &ru)
    }
}

struct RgswSetup {
    plant: PlantModel,
    ctrl: ControllerSS,
    form: ReEncryptedForm,
    ctx: RgswContext,
    quant: QuantizationParams,
    sampler: NoiseSampler,
    sk: crate::rlwe::SecretKey,
    key_q: RingKey,
    key_qp: RingKey,
}

fn rgsw_setup(cfg: &RunConfig) -> Result<RgswSetup> {
    let plant = cfg.plant()?;
    let ctrl = cfg.controller()?;
    let form = to_integer_state(&ctrl, 1e-9)?;
    let params = cfg.ring_params()?;
    let gadget = cfg.gadget()?;
    let ctx = RgswContext::new(&params, gadget)?;
    let quant = cfg.rgsw_quant()?;
    let mut sampler = NoiseSampler::with_params(
        cfg.seed,
        cfg.crypto.gaussian_std,
        cfg.crypto.gaussian_bound,
    );
    let sk = keygen(params.n, &mut sampler);
    let key_q = sk.ring_key(ctx.ring_q());
    let key_qp = sk.ring_key(ctx.ring_qp());
    Ok(RgswSetup {
        plant,
        ctrl,
        form,
        ctx,
        quant,
        sampler,
        sk,
        key_q,
        key_qp,
    })
}

/// Initial controller state: Enc(Pack(round(x_ini / (r s)) / L mod q)).
fn encrypt_initial_state(
    form: &ReEncryptedForm,
    quant: &QuantizationParams,
    layout: &PackingLayout,
    key: &RingKey,
    sampler: &mut NoiseSampler,
) -> Result<RlweCiphertext> {
    let msgs: Vec<i128> = form
        .x_ini
        .iter()
        .map(|&v| round_half_away(v / (quant.r() * quant.s())) * quant.inv_l() as i128)
        .collect();
    let pt = pack_coeff(&msgs, layout, key.ctx())?;
    rlwe_enc(&pt, key, sampler)
}

/// The recursive encrypted loop with coefficient packing.
pub fn run_rgsw_loop(cfg: &RunConfig) -> Result<TrajectoryLog> {
    let report = check_params(cfg)?;
    if !report.passes_for(Scheme::RgswPacked) {
        return Err(Error::BudgetRefusal(report.render()));
    }
    let RgswSetup {
        plant,
        ctrl,
        form,
        ctx,
        quant,
        mut sampler,
        sk,
        key_q,
        key_qp,
    } = rgsw_setup(cfg)?;
    let (n, m, l) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    let layout = PackingLayout::for_dims(n.max(m).max(l), ctx.ring_q().n())?;

    let galois = ctx.gen_galois_keys(
        &sk,
        &unpack_galois_elements(layout.tau()),
        &key_qp,
        &mut sampler,
    )?;

    // offline: column-packed encryptions of the control parameters
    let s = quant.s();
    let controller = PackedController {
        f_cols: ctx.enc_pack_matrix(&to_rows(&form.f_bar), None, &layout, &key_qp, &mut sampler, 1e-9)?,
        g_cols: ctx.enc_pack_matrix(&to_rows(&form.g), Some(s), &layout, &key_qp, &mut sampler, 1e-9)?,
        h_cols: ctx.enc_pack_matrix(&to_rows(&form.h), Some(s), &layout, &key_qp, &mut sampler, 1e-9)?,
        r_cols: ctx.enc_pack_matrix(&to_rows(&form.r), Some(s), &layout, &key_qp, &mut sampler, 1e-9)?,
        ctx,
        galois,
        layout,
        n,
        l,
    };
    let secret = SecretSide {
        key: key_q,
        quant,
        layout,
    };
    let mut x_ct = encrypt_initial_state(&form, &quant, &layout, &secret.key, &mut sampler)?;

    let mut xp = plant.x_ini.clone();
    let mut baseline = BaselineState::new(&plant, &ctrl);
    let mut log = TrajectoryLog::default();
    for t in 0..cfg.steps {
        let y = &plant.c_out * &xp;
        let y_arr: Vec<f64> = y.iter().copied().collect();

        let t0 = Instant::now();
        let y_ct = secret.encrypt_output(&y_arr, &mut sampler)?;
        let (u_ct, x_parts, y_parts) = controller.input_phase(&x_ct, &y_ct)?;
        let u = secret.decrypt_input(&u_ct, m)?;
        let u_reenc = secret.reencrypt(&u, &mut sampler)?;
        x_ct = controller.state_phase(&x_parts, &y_parts, &u_reenc)?;
        let latency_ms = t0.elapsed().as_secs_f64() * 1e3;

        xp = &plant.a * &xp + &plant.b * &DVector::from_vec(u.clone());
        let (_, u_b) = baseline.step(&plant, &ctrl);
        let u_base: Vec<f64> = u_b.iter().copied().collect();
        let err_inf = u
            .iter()
            .zip(&u_base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        log.push_with_anomaly_check(
            StepRecord {
                t,
                y: y_arr,
                u_enc: u,
                u_base,
                err_inf,
                latency_ms,
            },
            quant.r(),
        );
    }
    Ok(log)
}

/// Entry-wise encrypted matrices acting on vectors of constant ciphertexts.
struct NopackController {
    ctx: RgswContext,
    f_rows: Vec<Vec<RgswCiphertext>>,
    g_rows: Vec<Vec<RgswCiphertext>>,
    h_rows: Vec<Vec<RgswCiphertext>>,
    r_rows: Vec<Vec<RgswCiphertext>>,
}

impl NopackController {
    fn add_vecs(
        a: Vec<RlweCiphertext>,
        b: Vec<RlweCiphertext>,
        c: Vec<RlweCiphertext>,
    ) -> Result<Vec<RlweCiphertext>> {
        a.iter()
            .zip(b.iter().zip(&c))
            .map(|(x, (y, z))| rlwe_add3(x, y, z))
            .collect()
    }
}

/// The recursive encrypted loop without packing: one RGSW ciphertext per
/// matrix entry, one RLWE ciphertext per vector component, no Galois keys.
pub fn run_rgsw_nopack_loop(cfg: &RunConfig) -> Result<TrajectoryLog> {
    let report = check_params(cfg)?;
    if !report.passes_for(Scheme::RgswNopack) {
        return Err(Error::BudgetRefusal(report.render()));
    }
    let RgswSetup {
        plant,
        ctrl,
        form,
        ctx,
        quant,
        mut sampler,
        sk: _,
        key_q,
        key_qp,
    } = rgsw_setup(cfg)?;
    let (n, m, l) = (plant.state_dim(), plant.input_dim(), plant.output_dim());

    let enc_matrix = |rows: &Vec<Vec<f64>>,
                      scale: Option<f64>,
                      ctx: &RgswContext,
                      sampler: &mut NoiseSampler|
     -> Result<Vec<Vec<RgswCiphertext>>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        let int = match scale {
                            Some(s) => round_half_away(v / s),
                            None => {
                                let r = v.round();
                                if (v - r).abs() > 1e-9 {
                                    return Err(Error::Integrality {
                                        max_deviation: (v - r).abs(),
                                        tol: 1e-9,
                                    });
                                }
                                r as i128
                            }
                        };
                        ctx.rgsw_enc(&Poly::constant(ctx.ring_q(), int), &key_qp, sampler)
                    })
                    .collect()
            })
            .collect()
    };

    let s = quant.s();
    let controller = NopackController {
        f_rows: enc_matrix(&to_rows(&form.f_bar), None, &ctx, &mut sampler)?,
        g_rows: enc_matrix(&to_rows(&form.g), Some(s), &ctx, &mut sampler)?,
        h_rows: enc_matrix(&to_rows(&form.h), Some(s), &ctx, &mut sampler)?,
        r_rows: enc_matrix(&to_rows(&form.r), Some(s), &ctx, &mut sampler)?,
        ctx,
    };

    // x(0): one constant ciphertext per component
    let x_init: Vec<f64> = form.x_ini.iter().copied().collect();
    let init_quant = QuantizationParams::new(quant.r() * quant.s(), quant.s(), quant.l())
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut x_cts = reencrypt_input(&x_init, &init_quant, &key_q, &mut sampler)?;

    let mut xp = plant.x_ini.clone();
    let mut baseline = BaselineState::new(&plant, &ctrl);
    let mut log = TrajectoryLog::default();
    for t in 0..cfg.steps {
        let y = &plant.c_out * &xp;
        let y_arr: Vec<f64> = y.iter().copied().collect();

        let t0 = Instant::now();
        let y_cts = reencrypt_input(&y_arr, &quant, &key_q, &mut sampler)?;
        debug_assert_eq!(y_cts.len(), l);
        let u_cts = controller.ctx.matvec_ext_nopack(&controller.h_rows, &x_cts)?;
        let u = actuator_decrypt_each(&u_cts, quant.decode_factor(), &key_q);
        debug_assert_eq!(u.len(), m);
        let u_reenc = reencrypt_input(&u, &quant, &key_q, &mut sampler)?;
        let fx = controller.ctx.matvec_ext_nopack(&controller.f_rows, &x_cts)?;
        let gy = controller.ctx.matvec_ext_nopack(&controller.g_rows, &y_cts)?;
        let ru = controller.ctx.matvec_ext_nopack(&controller.r_rows, &u_reenc)?;
        x_cts = NopackController::add_vecs(fx, gy, ru)?;
        debug_assert_eq!(x_cts.len(), n);
        let latency_ms = t0.elapsed().as_secs_f64() * 1e3;

        xp = &plant.a * &xp + &plant.b * &DVector::from_vec(u.clone());
        let (_, u_b) = baseline.step(&plant, &ctrl);
        let u_base: Vec<f64> = u_b.iter().copied().collect();
        let err_inf = u
            .iter()
            .zip(&u_base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        log.push_with_anomaly_check(
            StepRecord {
                t,
                y: y_arr,
                u_enc: u,
                u_base,
                err_inf,
                latency_ms,
            },
            quant.r(),
        );
    }
    Ok(log)
}

/// Quantizes, duplicates across segments, packs into slots, and encrypts.
fn bgv_encrypt_signal(
    v: &DVector<f64>,
    m: usize,
    h_pad: usize,
    r: f64,
    params: &BgvParams,
    codec: &SlotCodec,
    keys: &BgvKeys,
    sampler: &mut NoiseSampler,
) -> Result<BgvCiphertext> {
    let padded = dup_pad(v, m, h_pad);
    let half_p = params.plaintext_modulus() as i128 / 2;
    let msgs: Vec<i128> = padded
        .iter()
        .map(|&x| {
            let q = round_half_away(x / r);
            if q.abs() > half_p {
                return Err(Error::Overflow(format!(
                    "quantized signal {q} exceeds p/2 = {half_p}"
                )));
            }
            Ok(q)
        })
        .collect::<Result<_>>()?;
    bgv_enc(&codec.pack_ntt(&msgs)?, params, keys, sampler)
}

/// The non-recursive input-output loop over the exact scheme.
pub fn run_bgv_loop(cfg: &RunConfig) -> Result<TrajectoryLog> {
    let report = check_params(cfg)?;
    if !report.passes_for(Scheme::Bgv) {
        return Err(Error::BudgetRefusal(report.render()));
    }
    let plant = cfg.plant()?;
    let ctrl = cfg.controller()?;
    let io = io_form(&ctrl)?;
    let params = cfg.bgv_params()?;
    let quant = cfg.bgv_quant()?;
    let (n, m) = (io.horizon(), plant.input_dim());
    let h_pad = io.h_pad;
    if m * h_pad > params.n() {
        return Err(Error::CapacityExceeded {
            requested: m * h_pad,
            capacity: params.n(),
        });
    }

    let mut sampler = NoiseSampler::with_params(
        cfg.seed,
        cfg.crypto.gaussian_std,
        cfg.crypto.gaussian_bound,
    );
    let sk = keygen(params.n(), &mut sampler);
    let keys = BgvKeys::new(sk.ring_key(params.ring_q()));
    let codec = SlotCodec::new(params.ring_p().clone());
    let p = params.plaintext_modulus() as u128;

    // offline: vectorized, quantized, packed coefficient matrices
    let enc_coeff = |mat: &nalgebra::DMatrix<f64>, sampler: &mut NoiseSampler| -> Result<BgvCiphertext> {
        let padded = vec_pad(mat, h_pad);
        let msgs: Vec<i128> = padded
            .iter()
            .map(|&v| round_half_away(v / quant.s()))
            .collect();
        bgv_enc(&codec.pack_ntt(&msgs)?, &params, &keys, &mut *sampler)
    };
    let hu_cts: Vec<BgvCiphertext> = io
        .hu
        .iter()
        .map(|m| enc_coeff(m, &mut sampler))
        .collect::<Result<_>>()?;
    let hy_cts: Vec<BgvCiphertext> = io
        .hy
        .iter()
        .map(|m| enc_coeff(m, &mut sampler))
        .collect::<Result<_>>()?;

    // offline: encrypted initial trajectories, oldest first
    let mut u_buf: Vec<BgvCiphertext> = io
        .u_init
        .iter()
        .map(|u| bgv_encrypt_signal(u, m, h_pad, quant.r(), &params, &codec, &keys, &mut sampler))
        .collect::<Result<_>>()?;
    let mut y_buf: Vec<BgvCiphertext> = io
        .y_init
        .iter()
        .map(|y| bgv_encrypt_signal(y, m, h_pad, quant.r(), &params, &codec, &keys, &mut sampler))
        .collect::<Result<_>>()?;

    let mut xp = plant.x_ini.clone();
    let mut baseline = BaselineState::new(&plant, &ctrl);
    let mut log = TrajectoryLog::default();
    for t in 0..cfg.steps {
        let y = &plant.c_out * &xp;
        let y_arr: Vec<f64> = y.iter().copied().collect();

        let t0 = Instant::now();
        let y_ct = bgv_encrypt_signal(&y, m, h_pad, quant.r(), &params, &codec, &keys, &mut sampler)?;
        // u(t) = sum_i Hu_i u(t-i) + Hy_i y(t-i); buffers hold t-n .. t-1
        let mut acc = bgv_mul(&hy_cts[n - 1], &y_buf[0])?;
        mul_then_add(&hu_cts[n - 1], &u_buf[0], &mut acc)?;
        for j in 1..n {
            mul_then_add(&hy_cts[n - 1 - j], &y_buf[j], &mut acc)?;
            mul_then_add(&hu_cts[n - 1 - j], &u_buf[j], &mut acc)?;
        }
        let slots = codec.unpack_ntt(&bgv_dec(&acc, &params, &keys)?)?;
        let u: Vec<f64> = (0..m)
            .map(|k| {
                let sum = slots[k * h_pad..(k + 1) * h_pad]
                    .iter()
                    .fold(0i128, |s, &v| cmod(s + v, p));
                sum as f64 * (quant.r() * quant.s())
            })
            .collect();
        let u_ct = bgv_encrypt_signal(
            &DVector::from_vec(u.clone()),
            m,
            h_pad,
            quant.r(),
            &params,
            &codec,
            &keys,
            &mut sampler,
        )?;
        y_buf.remove(0);
        y_buf.push(y_ct);
        u_buf.remove(0);
        u_buf.push(u_ct);
        let latency_ms = t0.elapsed().as_secs_f64() * 1e3;

        xp = &plant.a * &xp + &plant.b * &DVector::from_vec(u.clone());
        let (_, u_b) = baseline.step(&plant, &ctrl);
        let u_base: Vec<f64> = u_b.iter().copied().collect();
        let err_inf = u
            .iter()
            .zip(&u_base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        log.push_with_anomaly_check(
            StepRecord {
                t,
                y: y_arr,
                u_enc: u,
                u_base,
                err_inf,
                latency_ms,
            },
            quant.r(),
        );
    }
    Ok(log)
}
