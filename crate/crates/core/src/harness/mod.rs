//! Closed-loop runners, the parameter budget checker, trajectory logging
//! with CSV output, and the JSON configuration schema behind the CLI.

pub mod budget;
pub mod config;
pub mod log;
pub mod loops;

pub use budget::{check_params, BudgetLine, BudgetReport};
pub use config::{four_tank_config, RunConfig, Scheme};
pub use log::{performance_error, StepRecord, TrajectoryLog};
pub use loops::{run, run_baseline_loop, run_bgv_loop, run_rgsw_loop, run_rgsw_nopack_loop};

use crate::control::{io_form, to_integer_state};
use crate::error::Result;

/// Error ceilings enforced by `run --assert` and the acceptance suite.
pub const RGSW_MAX_ERR_LIMIT: f64 = 0.02;
pub const RGSW_MEAN_ERR_LIMIT: f64 = 0.01;
pub const BGV_MAX_ERR_LIMIT: f64 = 0.05;
pub const BGV_MEAN_ERR_LIMIT: f64 = 0.008;

/// (max, mean) ceilings for the scheme, when it has any.
pub fn error_limits(scheme: Scheme) -> Option<(f64, f64)> {
    match scheme {
        Scheme::RgswPacked | Scheme::RgswNopack => {
            Some((RGSW_MAX_ERR_LIMIT, RGSW_MEAN_ERR_LIMIT))
        }
        Scheme::Bgv => Some((BGV_MAX_ERR_LIMIT, BGV_MEAN_ERR_LIMIT)),
        Scheme::Baseline => None,
    }
}

/// Caps the rayon worker count from ENCCTL_THREADS (0 or unset = automatic).
/// Safe to call repeatedly; only the first call takes effect.
pub fn init_threads_from_env() {
    if let Ok(v) = std::env::var("ENCCTL_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn rows_json(m: &nalgebra::DMatrix<f64>) -> serde_json::Value {
    serde_json::json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<f64>>())
        .collect::<Vec<_>>())
}

fn vecs_json(vs: &[nalgebra::DVector<f64>]) -> serde_json::Value {
    serde_json::json!(vs
        .iter()
        .map(|v| v.iter().copied().collect::<Vec<f64>>())
        .collect::<Vec<_>>())
}

/// Both controller conversions as JSON: the integer-state realization and
/// the moving-average form with its initial trajectories.
pub fn conversion_report(cfg: &RunConfig) -> Result<serde_json::Value> {
    let ctrl = cfg.controller()?;
    let form = to_integer_state(&ctrl, 1e-9)?;
    let io = io_form(&ctrl)?;
    let f_bar_int: Vec<Vec<i64>> = (0..form.f_bar.nrows())
        .map(|i| {
            (0..form.f_bar.ncols())
                .map(|j| form.f_bar[(i, j)] as i64)
                .collect()
        })
        .collect();
    Ok(serde_json::json!({
        "reencrypted": {
            "f_bar": f_bar_int,
            "g": rows_json(&form.g),
            "h": rows_json(&form.h),
            "r": rows_json(&form.r),
            "transform": rows_json(&form.transform),
            "x_ini": form.x_ini.iter().copied().collect::<Vec<f64>>(),
        },
        "io_form": {
            "h_u": io.hu.iter().map(rows_json).collect::<Vec<_>>(),
            "h_y": io.hy.iter().map(rows_json).collect::<Vec<_>>(),
            "u_init": vecs_json(&io.u_init),
            "y_init": vecs_json(&io.y_init),
            "h_pad": io.h_pad,
        },
    }))
}
