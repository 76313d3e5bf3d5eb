//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//! The tests share a gate so timing-sensitive runs never overlap.

use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use encctl::bgv::{bgv_dec, bgv_enc, bgv_mul, bgv_setup, BgvKeys, SlotCodec};
use encctl::control::{
    four_tank_controller, four_tank_plant, io_form, random_system, simulate_baseline,
    simulate_io_closed_loop, to_integer_state,
};
use encctl::harness::{
    check_params, four_tank_config, run_bgv_loop, run_rgsw_loop, run_rgsw_nopack_loop, Scheme,
    BGV_MAX_ERR_LIMIT, BGV_MEAN_ERR_LIMIT, RGSW_MAX_ERR_LIMIT, RGSW_MEAN_ERR_LIMIT,
};
use encctl::rgsw::{unpack_galois_elements, GadgetParams, RgswContext};
use encctl::ring::{
    centered_mod, poly_mul, validate_ring_params, MulPath, NoiseSampler, Poly, RingCtx,
    SampleKind,
};
use encctl::rlwe::{keygen, pack_coeff, rlwe_dec, rlwe_enc, unpack_pt_coeff, PackingLayout};

fn cmod(a: i128, m: u128) -> i128 {
    centered_mod(a, m).unwrap()
}

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: &str, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

const FIXTURE_Q: u64 = 72057594037616641;
const FIXTURE_P: u64 = 2251799813554177;
const FIXTURE_N: usize = 1 << 13;

#[test]
fn criterion_01_fresh_encryption_error_bound() {
    let _g = gate();
    let t0 = Instant::now();
    let ring = RingCtx::new(FIXTURE_N, vec![FIXTURE_Q]).unwrap();
    let mut sampler = NoiseSampler::new(1001);
    let key = keygen(FIXTURE_N, &mut sampler).ring_key(&ring);
    let mut max_err = 0u128;
    for _ in 0..1000 {
        let m = sampler.sample_poly(SampleKind::Uniform, &ring);
        let ct = rlwe_enc(&m, &key, &mut sampler).unwrap();
        max_err = max_err.max(rlwe_dec(&ct, &key).sub(&m).unwrap().inf_norm());
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        "01 (fresh encryption error bound)",
        max_err <= 19 && secs < 60.0,
        format!("max coefficient error {max_err} <= 19 over 1000 messages in {secs:.1}s (< 60s)"),
    );
}

#[test]
fn criterion_02_external_product_error_bound() {
    let _g = gate();
    let t0 = Instant::now();
    let params = validate_ring_params(FIXTURE_N, FIXTURE_Q, Some(FIXTURE_P)).unwrap();
    let ctx = RgswContext::new(&params, GadgetParams::identity(FIXTURE_Q)).unwrap();
    let budget = ctx.budget(19.2, 4);
    // the bound comes from the formula at test time; the frozen value pins
    // the exact rational (96 d N nu) / (5 P) + (N+1)/2
    assert!((budget.mult_bound - 5037261.300271222).abs() < 1e-3);

    let mut sampler = NoiseSampler::new(1002);
    let sk = keygen(FIXTURE_N, &mut sampler);
    let key_q = sk.ring_key(ctx.ring_q());
    let key_qp = sk.ring_key(ctx.ring_qp());
    let mut worst = 0u128;
    for _ in 0..100 {
        let m = sampler.sample_poly(SampleKind::Uniform, ctx.ring_q());
        let pt = sampler.sample_poly(SampleKind::Uniform, ctx.ring_q());
        let c = ctx.rgsw_enc(&m, &key_qp, &mut sampler).unwrap();
        let ct = rlwe_enc(&pt, &key_q, &mut sampler).unwrap();
        let out = ctx.external_product(&c, &ct).unwrap();
        let want = poly_mul(&m, &rlwe_dec(&ct, &key_q), MulPath::Ntt).unwrap();
        worst = worst.max(rlwe_dec(&out, &key_q).sub(&want).unwrap().inf_norm());
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        "02 (external product error bound)",
        (worst as f64) <= budget.mult_bound && secs < 120.0,
        format!(
            "max error {worst} <= {:.1} over 100 pairs in {secs:.1}s (< 120s)",
            budget.mult_bound
        ),
    );
}

#[test]
fn criterion_03_homomorphic_unpacking_bound() {
    let _g = gate();
    let params = validate_ring_params(FIXTURE_N, FIXTURE_Q, Some(FIXTURE_P)).unwrap();
    let ctx = RgswContext::new(&params, GadgetParams::identity(FIXTURE_Q)).unwrap();
    let tau = 4;
    let layout = PackingLayout::new(tau, FIXTURE_N).unwrap();
    let bound = ctx.budget(19.2, tau).unpack_bound;

    let mut sampler = NoiseSampler::new(1003);
    let sk = keygen(FIXTURE_N, &mut sampler);
    let key_q = sk.ring_key(ctx.ring_q());
    let key_qp = sk.ring_key(ctx.ring_qp());
    let keys = ctx
        .gen_galois_keys(&sk, &unpack_galois_elements(tau), &key_qp, &mut sampler)
        .unwrap();

    let q = ctx.ring_q().modulus();
    let mut worst = 0i128;
    for trial in 0..100 {
        let vals: Vec<i128> = (0..tau)
            .map(|i| cmod(0x9e3779b97f4a7c15u64 as i128 * (trial * tau + i + 1) as i128, q))
            .collect();
        let ct = rlwe_enc(
            &pack_coeff(&vals, &layout, ctx.ring_q()).unwrap(),
            &key_q,
            &mut sampler,
        )
        .unwrap();
        let reference = unpack_pt_coeff(&rlwe_dec(&ct, &key_q), tau, &layout).unwrap();
        let outs = ctx.unpack_ct(&ct, tau, &layout, &keys).unwrap();
        for (i, out) in outs.iter().enumerate() {
            let got = rlwe_dec(out, &key_q).coeff_vec()[0];
            worst = worst.max(cmod(got - reference[i], q).abs());
        }
    }
    verdict(
        "03 (homomorphic unpacking bound)",
        (worst as f64) <= bound,
        format!("max per-slot error {worst} <= {bound:.1} over 100 packed ciphertexts at tau=4"),
    );
}

#[test]
fn criterion_04_ntt_schoolbook_equivalence() {
    let _g = gate();
    let ring = RingCtx::new(16, vec![97]).unwrap();
    let mut sampler = NoiseSampler::new(1004);
    let mut all_equal = true;
    for _ in 0..200 {
        let a = sampler.sample_poly(SampleKind::Uniform, &ring);
        let b = sampler.sample_poly(SampleKind::Uniform, &ring);
        let ntt = poly_mul(&a, &b, MulPath::Ntt).unwrap();
        let school = poly_mul(&a, &b, MulPath::Schoolbook).unwrap();
        all_equal &= ntt == school;
    }
    verdict(
        "04 (negacyclic product oracle equivalence)",
        all_equal,
        "NTT path equals schoolbook path exactly on 200 random pairs at N=16".into(),
    );
}

#[test]
fn criterion_05_exact_scheme_properties() {
    let _g = gate();
    let params = bgv_setup(12, 28, &[37, 37]).unwrap();
    assert_eq!(params.plaintext_modulus(), 268460033);
    let p = params.plaintext_modulus() as i128;
    let mut sampler = NoiseSampler::new(1005);
    let keys = BgvKeys::new(keygen(params.n(), &mut sampler).ring_key(params.ring_q()));

    let mut value_rng = NoiseSampler::new(2005);
    let mut random_pt = |params: &encctl::bgv::BgvParams| {
        let u = value_rng.sample_poly(SampleKind::Uniform, params.ring_p());
        Poly::from_coeffs(
            params.ring_p(),
            u.coeff_vec().iter().map(|&c| cmod(c, p as u128)).collect(),
        )
    };

    let mut dec_exact = true;
    for _ in 0..1000 {
        let m = random_pt(&params);
        let ct = bgv_enc(&m, &params, &keys, &mut sampler).unwrap();
        dec_exact &= bgv_dec(&ct, &params, &keys).unwrap() == m;
    }

    let mut mul_exact = true;
    for _ in 0..100 {
        let m1 = random_pt(&params);
        let m2 = random_pt(&params);
        let c1 = bgv_enc(&m1, &params, &keys, &mut sampler).unwrap();
        let c2 = bgv_enc(&m2, &params, &keys, &mut sampler).unwrap();
        let want = poly_mul(&m1, &m2, MulPath::Ntt).unwrap();
        mul_exact &= bgv_dec(&bgv_mul(&c1, &c2).unwrap(), &params, &keys).unwrap() == want;
    }

    // slot properties at N=16 (small prime) and at N=2^12 (fixture prime)
    let mut slots_exact = true;
    for (ring, modulus) in [
        (RingCtx::new(16, vec![97]).unwrap(), 97u128),
        (params.ring_p().clone(), p as u128),
    ] {
        let codec = SlotCodec::new(ring.clone());
        let n = ring.n();
        for trial in 0..20 {
            let a: Vec<i128> = (0..n)
                .map(|i| cmod((trial * n + i) as i128 * 2654435761, modulus))
                .collect();
            let b: Vec<i128> = (0..n)
                .map(|i| cmod((trial * n + i) as i128 * 40503 + 7, modulus))
                .collect();
            let pa = codec.pack_ntt(&a).unwrap();
            let pb = codec.pack_ntt(&b).unwrap();
            slots_exact &= codec.unpack_ntt(&pa).unwrap() == a;
            let sum = codec.unpack_ntt(&pa.add(&pb).unwrap()).unwrap();
            let had = codec
                .unpack_ntt(&poly_mul(&pa, &pb, MulPath::Ntt).unwrap())
                .unwrap();
            for j in 0..n {
                slots_exact &= sum[j] == cmod(a[j] + b[j], modulus);
                slots_exact &= had[j] == cmod(a[j] * b[j], modulus);
            }
        }
    }

    verdict(
        "05 (exact scheme correctness)",
        dec_exact && mul_exact && slots_exact,
        format!(
            "decryption exact on 1000 plaintexts: {dec_exact}; products exact on 100 pairs: \
             {mul_exact}; slot properties exact at N=16 and N=4096: {slots_exact}"
        ),
    );
}

#[test]
fn criterion_06_integer_state_conversion() {
    let _g = gate();
    let ctrl = four_tank_controller();
    let form = to_integer_state(&ctrl, 1e-9).unwrap();
    // recompute the pre-rounding deviation from the returned transform
    let t_inv = form.transform.clone().try_inverse().unwrap();
    let f_canon = &form.transform * &ctrl.f * &t_inv;
    let raw = &f_canon - &form.r * &form.h;
    let deviation = raw.iter().map(|v| (v - v.round()).abs()).fold(0.0, f64::max);
    verdict(
        "06 (integer state conversion)",
        deviation <= 1e-9,
        format!("max deviation of F - R H from the integers: {deviation:.3e} <= 1e-9"),
    );
}

#[test]
fn criterion_07_io_form_equivalence() {
    let _g = gate();
    let plant = four_tank_plant();
    let ctrl = four_tank_controller();
    let io = io_form(&ctrl).unwrap();
    let ss = simulate_baseline(&plant, &ctrl, 500);
    let io_us = simulate_io_closed_loop(&plant, &io, 500);
    let fixture_worst = ss
        .u
        .iter()
        .zip(&io_us)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);

    let mut random_worst: f64 = 0.0;
    for seed in 0..50u64 {
        let n = 2 + (seed % 3) as usize; // n in {2, 3, 4}
        let sys = random_system(n, 2, 2, 3000 + seed);
        let io = io_form(&sys).unwrap();
        let mut x = sys.x_ini.clone();
        let mut u_hist = io.u_init.clone();
        let mut y_hist = io.y_init.clone();
        for t in 0..500 {
            let y = DVector::from_fn(2, |i, _| ((t * 2 + i) as f64 * 0.21).sin());
            let want = &sys.h * &x;
            let got = io.eval(&u_hist, &y_hist);
            random_worst = random_worst.max((&want - &got).amax());
            x = &sys.f * &x + &sys.g * &y;
            u_hist.remove(0);
            u_hist.push(got);
            y_hist.remove(0);
            y_hist.push(y);
        }
    }
    verdict(
        "07 (input-output form equivalence)",
        fixture_worst <= 1e-6 && random_worst <= 1e-6,
        format!(
            "fixture rollout deviation {fixture_worst:.3e} <= 1e-6 over 500 steps; 50 random \
             systems worst {random_worst:.3e} <= 1e-6"
        ),
    );
}

#[test]
fn criterion_08_recursive_closed_loop() {
    let _g = gate();
    let t0 = Instant::now();
    let cfg = four_tank_config();
    assert_eq!(cfg.scheme, Scheme::RgswPacked);
    assert_eq!(cfg.steps, 1000);
    let log = run_rgsw_loop(&cfg).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let (max, mean) = (log.max_err(), log.mean_err());
    verdict(
        "08 (recursive encrypted closed loop)",
        max <= RGSW_MAX_ERR_LIMIT
            && mean <= RGSW_MEAN_ERR_LIMIT
            && log.anomalies.is_empty()
            && secs < 600.0,
        format!(
            "1000 steps: max error {max:.6} <= {RGSW_MAX_ERR_LIMIT}, mean {mean:.6} <= \
             {RGSW_MEAN_ERR_LIMIT}, {} anomaly flags, {secs:.0}s (< 600s)",
            log.anomalies.len()
        ),
    );
}

#[test]
fn criterion_09_io_closed_loop() {
    let _g = gate();
    let mut cfg = four_tank_config();
    cfg.scheme = Scheme::Bgv;
    let log = run_bgv_loop(&cfg).unwrap();
    let (max, mean) = (log.max_err(), log.mean_err());
    verdict(
        "09 (input-output encrypted closed loop)",
        max <= BGV_MAX_ERR_LIMIT && mean <= BGV_MEAN_ERR_LIMIT && log.anomalies.is_empty(),
        format!(
            "1000 steps at r=2e-4, s=1e-4: max error {max:.6} <= {BGV_MAX_ERR_LIMIT}, mean \
             {mean:.6} <= {BGV_MEAN_ERR_LIMIT}, {} anomaly flags",
            log.anomalies.len()
        ),
    );
}

#[test]
fn criterion_10_packing_speedup_and_latency_ceilings() {
    let _g = gate();
    let mut cfg = four_tank_config();
    cfg.steps = 30;
    let packed = run_rgsw_loop(&cfg).unwrap();
    let nopack = run_rgsw_nopack_loop(&cfg).unwrap();
    cfg.scheme = Scheme::Bgv;
    cfg.steps = 50;
    let bgv = run_bgv_loop(&cfg).unwrap();

    let ratio = nopack.median_latency_ms() / packed.median_latency_ms();
    let packed_ms = packed.median_latency_ms();
    let bgv_ms = bgv.median_latency_ms();
    verdict(
        "10 (packing speedup and latency ceilings)",
        ratio > 1.0 && packed_ms <= 200.0 && bgv_ms <= 100.0,
        format!(
            "median per-step latency: packed {packed_ms:.1} ms (<= 200), no-packing {:.1} ms, \
             ratio {ratio:.2} (> 1); exact-scheme loop {bgv_ms:.1} ms (<= 100)",
            nopack.median_latency_ms()
        ),
    );
}

#[test]
fn criterion_11_overflow_checker() {
    let _g = gate();
    let cfg = four_tank_config();
    let report = check_params(&cfg).unwrap();
    let margin = |r: &encctl::harness::BudgetReport| {
        r.lines
            .iter()
            .find(|l| l.name.starts_with("io overflow"))
            .unwrap()
            .clone()
    };
    let line = margin(&report);
    let pass_case = line.value == 1e8 && line.pass() == Some(true);

    let mut tight = cfg.clone();
    let bq = tight.bgv_quantization.as_mut().unwrap();
    bq.r /= 10.0;
    bq.s /= 10.0;
    let line2 = margin(&check_params(&tight).unwrap());
    let fail_case = line2.value == 1e10 && line2.pass() == Some(false);

    verdict(
        "11 (overflow checker)",
        pass_case && fail_case,
        format!(
            "|u|/(r s) = {:.0} < p/2 = {:.1} passes; scales reduced 10x gives {:.0} which fails",
            line.value,
            line.limit.unwrap(),
            line2.value
        ),
    );
}

/// The committed fixture file must stay in sync with the built-in fixture.
#[test]
fn fixture_config_file_matches_builtin() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/four_tank.json");
    let from_file = encctl::harness::RunConfig::from_file(&path).unwrap();
    let builtin = four_tank_config();
    assert_eq!(from_file.crypto.rgsw.q, builtin.crypto.rgsw.q);
    assert_eq!(
        from_file.crypto.bgv.plaintext_modulus,
        builtin.crypto.bgv.plaintext_modulus
    );
    assert_eq!(from_file.plant.a, builtin.plant.a);
    assert_eq!(from_file.controller.k, builtin.controller.k);
    assert_eq!(from_file.quantization.r, builtin.quantization.r);
    let io_quant = from_file.bgv_quantization.unwrap();
    assert_eq!(io_quant.r, 2e-4);

    // the four-tank matrices pin the fixture numerically
    let a = DMatrix::from_fn(4, 4, |i, j| builtin.plant.a[i][j]);
    assert_eq!(a[(0, 0)], 0.9984);
    assert_eq!(a[(1, 3)], -0.0033);
}
