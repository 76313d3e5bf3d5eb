//! JSON run configuration: scheme selection, crypto parameters (exact
//! moduli win over bit targets), quantization scales, plant and controller
//! matrices, and signal bounds for the budget checker.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{ControllerSS, PlantModel};
use crate::error::{Error, Result};
use crate::ring::{validate_ring_params, RingParams, SearchDirection};
use crate::rlwe::QuantizationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "rgsw-packed")]
    RgswPacked,
    #[serde(rename = "rgsw-nopack")]
    RgswNopack,
    #[serde(rename = "bgv")]
    Bgv,
    #[serde(rename = "baseline")]
    Baseline,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::RgswPacked => "rgsw-packed",
            Scheme::RgswNopack => "rgsw-nopack",
            Scheme::Bgv => "bgv",
            Scheme::Baseline => "baseline",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgsw-packed" => Ok(Scheme::RgswPacked),
            "rgsw-nopack" => Ok(Scheme::RgswNopack),
            "bgv" => Ok(Scheme::Bgv),
            "baseline" => Ok(Scheme::Baseline),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RgswCrypto {
    pub log_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special_p: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special_p_bits: Option<u32>,
    #[serde(default = "default_one")]
    pub gadget_digits: usize,
    /// None selects the degenerate base nu = q.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gadget_base: Option<u128>,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BgvCrypto {
    pub log_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plaintext_modulus: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plaintext_bits: Option<u32>,
    pub chain_bits: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CryptoConfig {
    pub rgsw: RgswCrypto,
    pub bgv: BgvCrypto,
    #[serde(default = "default_std")]
    pub gaussian_std: f64,
    #[serde(default = "default_bound")]
    pub gaussian_bound: f64,
}

fn default_std() -> f64 {
    3.2
}
fn default_bound() -> f64 {
    19.2
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuantConfig {
    pub r: f64,
    pub s: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub x_ini: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub k: Vec<Vec<f64>>,
    pub l_gain: Vec<Vec<f64>>,
    pub x_ini: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignalBounds {
    pub u_max: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub steps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub crypto: CryptoConfig,
    /// Scales for the recursive (RGSW) pipeline.
    pub quantization: QuantConfig,
    /// Scales for the input-output (BGV) pipeline; falls back to
    /// `quantization` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bgv_quantization: Option<QuantConfig>,
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub signal_bounds: SignalBounds,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("matrix '{what}' is empty or ragged")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant()?;
        self.controller()?;
        self.rgsw_quant()?;
        self.bgv_quant()?;
        if self.crypto.bgv.plaintext_modulus.is_none() && self.crypto.bgv.plaintext_bits.is_none()
        {
            return Err(Error::Config(
                "bgv needs plaintext_modulus or plaintext_bits".into(),
            ));
        }
        if self.crypto.rgsw.q.is_none() && self.crypto.rgsw.q_bits.is_none() {
            return Err(Error::Config("rgsw needs q or q_bits".into()));
        }
        if self.crypto.rgsw.special_p.is_none() && self.crypto.rgsw.special_p_bits.is_none() {
            return Err(Error::Config("rgsw needs special_p or special_p_bits".into()));
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<PlantModel> {
        let a = matrix(&self.plant.a, "plant.a")?;
        let b = matrix(&self.plant.b, "plant.b")?;
        let c = matrix(&self.plant.c, "plant.c")?;
        let x_ini = DVector::from_vec(self.plant.x_ini.clone());
        PlantModel::new(a, b, c, x_ini).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn controller(&self) -> Result<ControllerSS> {
        let plant = self.plant()?;
        let k = matrix(&self.controller.k, "controller.k")?;
        let l_gain = matrix(&self.controller.l_gain, "controller.l_gain")?;
        let x_ini = DVector::from_vec(self.controller.x_ini.clone());
        ControllerSS::from_gains(&plant, &k, &l_gain, x_ini)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Exact moduli win over bit targets; bit targets search downward,
    /// matching the defaults that produced the fixture values.
    pub fn ring_params(&self) -> Result<RingParams> {
        let c = &self.crypto.rgsw;
        let n = 1usize << c.log_n;
        let q = match c.q {
            Some(q) => q,
            None => crate::ring::find_ntt_prime(
                c.q_bits.expect("validated"),
                n,
                SearchDirection::Down,
            )?,
        };
        let special = match c.special_p {
            Some(p) => p,
            None => crate::ring::find_ntt_prime(
                c.special_p_bits.expect("validated"),
                n,
                SearchDirection::Down,
            )?,
        };
        validate_ring_params(n, q, Some(special))
    }

    pub fn gadget(&self) -> Result<crate::rgsw::GadgetParams> {
        let params = self.ring_params()?;
        let base = self
            .crypto
            .rgsw
            .gadget_base
            .unwrap_or(params.q as u128);
        crate::rgsw::GadgetParams::new(self.crypto.rgsw.gadget_digits, base, params.q)
    }

    pub fn bgv_params(&self) -> Result<crate::bgv::BgvParams> {
        let c = &self.crypto.bgv;
        if let Some(p) = c.plaintext_modulus {
            let n = 1usize << c.log_n;
            validate_ring_params(n, p, None)?;
            // reuse the search machinery for the chain only
            let mut cfg = c.clone();
            cfg.plaintext_modulus = None;
            cfg.plaintext_bits = Some((64 - p.leading_zeros() - 1).max(2));
            let params = crate::bgv::bgv_setup(c.log_n, cfg.plaintext_bits.unwrap(), &c.chain_bits)?;
            if params.plaintext_modulus() == p {
                return Ok(params);
            }
            return Err(Error::Config(format!(
                "exact plaintext modulus {p} is not the first upward prime; \
                 drop it or use plaintext_bits"
            )));
        }
        crate::bgv::bgv_setup(
            c.log_n,
            c.plaintext_bits.expect("validated"),
            &c.chain_bits,
        )
    }

    pub fn rgsw_quant(&self) -> Result<QuantizationParams> {
        QuantizationParams::new(self.quantization.r, self.quantization.s, self.quantization.l)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bgv_quant(&self) -> Result<QuantizationParams> {
        let q = self.bgv_quantization.unwrap_or(self.quantization);
        QuantizationParams::new(q.r, q.s, q.l).map_err(|e| Error::Config(e.to_string()))
    }
}

/// The four-tank fixture with the parameter set used throughout the tests:
/// N = 2^13 with exact 56/51-bit moduli for the recursive pipeline, N = 2^12
/// with a 28-bit plaintext prime over a [37, 37] chain for the I/O pipeline.
pub fn four_tank_config() -> RunConfig {
    let plant = crate::control::four_tank_plant();
    let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    };
    let k = DMatrix::from_row_slice(
        2,
        4,
        &[
            -0.7905, 0.1579, -0.2745, -0.2686, //
            -0.1552, -0.7874, -0.3427, 0.3137,
        ],
    );
    let l_gain = DMatrix::from_row_slice(
        4,
        2,
        &[
            0.7815, 0.0, //
            0.0, 0.7816, //
            0.3190, 0.0, //
            0.0, -0.3199,
        ],
    );
    RunConfig {
        scheme: Scheme::RgswPacked,
        steps: 1000,
        seed: 42,
        output: None,
        crypto: CryptoConfig {
            rgsw: RgswCrypto {
                log_n: 13,
                q: Some(72057594037616641),
                q_bits: Some(56),
                special_p: Some(2251799813554177),
                special_p_bits: Some(51),
                gadget_digits: 1,
                gadget_base: None,
            },
            bgv: BgvCrypto {
                log_n: 12,
                plaintext_modulus: Some(268460033),
                plaintext_bits: Some(28),
                chain_bits: vec![37, 37],
            },
            gaussian_std: 3.2,
            gaussian_bound: 19.2,
        },
        quantization: QuantConfig {
            r: 1e-4,
            s: 1e-4,
            l: 1e-4,
        },
        bgv_quantization: Some(QuantConfig {
            r: 2e-4,
            s: 1e-4,
            l: 1e-4,
        }),
        plant: PlantConfig {
            a: to_rows(&plant.a),
            b: to_rows(&plant.b),
            c: to_rows(&plant.c_out),
            x_ini: vec![1.0, 1.0, 1.0, 1.0],
        },
        controller: ControllerConfig {
            k: to_rows(&k),
            l_gain: to_rows(&l_gain),
            x_ini: vec![0.0, 0.0, 0.0, 0.0],
        },
        signal_bounds: SignalBounds {
            u_max: 2.0,
            x_max: 5.0,
            y_max: 2.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_config_roundtrips_through_json() {
        let cfg = four_tank_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.scheme, Scheme::RgswPacked);
        assert_eq!(back.crypto.rgsw.q, Some(72057594037616641));
        assert_eq!(back.plant.a, cfg.plant.a);
    }

    #[test]
    fn exact_modulus_wins_over_bits() {
        let mut cfg = four_tank_config();
        cfg.crypto.rgsw.q_bits = Some(40); // would give a different prime
        let params = cfg.ring_params().unwrap();
        assert_eq!(params.q, 72057594037616641);

        cfg.crypto.rgsw.q = None;
        cfg.crypto.rgsw.q_bits = Some(56);
        let params = cfg.ring_params().unwrap();
        assert_eq!(params.q, 72057594037616641); // downward search finds it
    }

    #[test]
    fn config_rejects_garbage() {
        assert!(RunConfig::from_json("{").is_err());
        let mut cfg = four_tank_config();
        cfg.plant.a[0].pop(); // ragged
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(matches!(RunConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn fixture_controller_builds() {
        let cfg = four_tank_config();
        let ctrl = cfg.controller().unwrap();
        assert_eq!(ctrl.state_dim(), 4);
        assert!(ctrl.is_observable(1e-9));
        let bgv = cfg.bgv_params().unwrap();
        assert_eq!(bgv.plaintext_modulus(), 268460033);
    }
}
