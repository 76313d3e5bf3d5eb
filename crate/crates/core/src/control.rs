//! Plant and controller models, the integer-state-matrix conversion that
//! re-encrypts the controller output, the input-output form conversion with
//! initial-trajectory reconstruction, the padded Hadamard matrix-vector
//! identity, and the unencrypted baseline simulator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Discrete-time plant x+ = A x + B u, y = C x.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c_out: DMatrix<f64>,
    pub x_ini: DVector<f64>,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c_out: DMatrix<f64>,
        x_ini: DVector<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c_out.ncols() != n || x_ini.len() != n {
            return Err(Error::ShapeMismatch("plant matrices".into()));
        }
        Ok(Self {
            a,
            b,
            c_out,
            x_ini,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c_out.nrows()
    }
}

/// Observer-based controller x+ = F x + G y, u = H x.
#[derive(Debug, Clone)]
pub struct ControllerSS {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub x_ini: DVector<f64>,
}

impl ControllerSS {
    /// F = A + B K - L C, G = L, H = K.
    pub fn from_gains(
        plant: &PlantModel,
        k: &DMatrix<f64>,
        l_gain: &DMatrix<f64>,
        x_ini: DVector<f64>,
    ) -> Result<Self> {
        let n = plant.state_dim();
        if k.ncols() != n || k.nrows() != plant.input_dim() {
            return Err(Error::ShapeMismatch("state feedback gain".into()));
        }
        if l_gain.nrows() != n || l_gain.ncols() != plant.output_dim() {
            return Err(Error::ShapeMismatch("observer gain".into()));
        }
        let f = &plant.a + &plant.b * k - l_gain * &plant.c_out;
        Ok(Self {
            f,
            g: l_gain.clone(),
            h: k.clone(),
            x_ini,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.h.nrows()
    }
    pub fn output_dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn is_observable(&self, tol: f64) -> bool {
        observability_matrix(&self.h, &self.f).rank(tol) == self.state_dim()
    }

    pub fn is_controllable(&self, tol: f64) -> bool {
        controllability_matrix(&self.f, &self.g).rank(tol) == self.state_dim()
    }
}

/// The four-tank plant discretized at 100 ms.
pub fn four_tank_plant() -> PlantModel {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.9984, 0.0, 0.0042, 0.0, //
            0.0, 0.9989, 0.0, -0.0033, //
            0.0, 0.0, 0.9958, 0.0, //
            0.0, 0.0, 0.0, 0.9967,
        ],
    );
    let b = DMatrix::from_row_slice(
        4,
        2,
        &[
            0.0083, 0.0, //
            0.0, 0.0063, //
            0.0, 0.0048, //
            0.0031, 0.0,
        ],
    );
    let c_out = DMatrix::from_row_slice(2, 4, &[0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
    PlantModel::new(a, b, c_out, DVector::from_element(4, 1.0)).unwrap()
}

/// The stabilizing observer-based controller for the four-tank plant.
pub fn four_tank_controller() -> ControllerSS {
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
    ControllerSS::from_gains(&four_tank_plant(), &k, &l_gain, DVector::zeros(4)).unwrap()
}

/// Controller realization whose state matrix splits as an integer matrix
/// plus R * H, so the state update F_bar x + G y + R u runs over encrypted
/// integers with u re-encrypted each step.
#[derive(Debug, Clone)]
pub struct ReEncryptedForm {
    /// Integer-valued state matrix (rounded after the integrality check).
    pub f_bar: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// State map from the original coordinates (identity when no conversion
    /// was applied).
    pub transform: DMatrix<f64>,
    pub x_ini: DVector<f64>,
}

/// Checks that F - R H is integer within `tol` and rounds it.
pub fn make_reencrypted_form(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
) -> Result<ReEncryptedForm> {
    let n = f.nrows();
    if f.ncols() != n || h.ncols() != n || r.nrows() != n || r.ncols() != h.nrows() {
        return Err(Error::ShapeMismatch("re-encrypted form inputs".into()));
    }
    let f_bar_raw = f - r * h;
    let max_deviation = f_bar_raw
        .iter()
        .map(|v| (v - v.round()).abs())
        .fold(0.0, f64::max);
    if max_deviation > tol {
        return Err(Error::Integrality { max_deviation, tol });
    }
    Ok(ReEncryptedForm {
        f_bar: f_bar_raw.map(f64::round),
        g: g.clone(),
        h: h.clone(),
        r: r.clone(),
        transform: DMatrix::identity(n, n),
        x_ini: DVector::zeros(n),
    })
}

/// Converts the controller to observable canonical coordinates and reads off
/// the R that cancels the coefficient columns, leaving an exactly integer
/// state matrix. The returned realization is similar to the input, so the
/// closed loop is unchanged.
pub fn to_integer_state(ctrl: &ControllerSS, tol: f64) -> Result<ReEncryptedForm> {
    let n = ctrl.state_dim();
    let m = ctrl.input_dim();
    let ad = ctrl.f.transpose();
    let bd = ctrl.h.transpose();

    // breadth-first selection of independent chain vectors b_i, A b_i, ...
    let rank_tol = 1e-10;
    let mut basis: Vec<DVector<f64>> = Vec::new(); // orthonormal
    let mut chains: Vec<Vec<DVector<f64>>> = vec![Vec::new(); m];
    let mut alive = vec![true; m];
    let mut vs: Vec<DVector<f64>> = (0..m).map(|i| bd.column(i).into_owned()).collect();
    let mut total = 0;
    while total < n && alive.iter().any(|&a| a) {
        for i in 0..m {
            if !alive[i] || total >= n {
                continue;
            }
            let mut residual = vs[i].clone();
            for b in &basis {
                let coef = b.dot(&residual);
                residual -= b * coef;
            }
            if residual.norm() > rank_tol * vs[i].norm().max(1.0) {
                basis.push(residual.normalize());
                chains[i].push(vs[i].clone());
                total += 1;
            } else {
                alive[i] = false;
            }
        }
        for v in vs.iter_mut() {
            *v = &ad * &*v;
        }
    }
    if total < n {
        return Err(Error::Conversion(format!(
            "controller pair is unobservable: reachable dimension {total} < {n}"
        )));
    }
    let mu: Vec<usize> = chains.iter().map(|c| c.len()).collect();

    let mut s = DMatrix::zeros(n, n);
    let mut col = 0;
    for chain in &chains {
        for v in chain {
            s.set_column(col, v);
            col += 1;
        }
    }
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Conversion("chain basis is singular".into()))?;

    // transform rows: the last row of each chain block propagated by Ad
    let mut td = DMatrix::zeros(n, n);
    let mut row = 0;
    let mut acc = 0;
    for &mu_i in &mu {
        if mu_i == 0 {
            continue;
        }
        acc += mu_i;
        let q = s_inv.row(acc - 1).into_owned();
        let mut cur = q;
        for _ in 0..mu_i {
            td.set_row(row, &cur);
            row += 1;
            cur = &cur * &ad;
        }
    }

    let td_inv = td
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Conversion("canonical transform is singular".into()))?;
    let t = td_inv.transpose();
    let t_inv = td.transpose();

    let f_o = &t * &ctrl.f * &t_inv;
    let h_o = &ctrl.h * &t_inv;
    let g_o = &t * &ctrl.g;

    // coefficient columns sit at the chain ends; cancel them through H
    let end_cols: Vec<usize> = mu
        .iter()
        .filter(|&&mu_i| mu_i > 0)
        .scan(0usize, |acc, &mu_i| {
            *acc += mu_i;
            Some(*acc - 1)
        })
        .collect();
    let f_sel = f_o.select_columns(end_cols.iter());
    let h_sel = h_o.select_columns(end_cols.iter());
    let h_sel_inv = h_sel
        .try_inverse()
        .ok_or_else(|| Error::Conversion("output selector is singular".into()))?;
    let r = f_sel * h_sel_inv;

    let mut form = make_reencrypted_form(&f_o, &g_o, &h_o, &r, tol)?;
    form.x_ini = &t * &ctrl.x_ini;
    form.transform = t;
    Ok(form)
}

/// Stacked observability matrix [H; HF; ...; HF^(n-1)].
pub fn observability_matrix(h: &DMatrix<f64>, f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    let m = h.nrows();
    let mut out = DMatrix::zeros(m * n, n);
    let mut block = h.clone();
    for i in 0..n {
        out.view_mut((i * m, 0), (m, n)).copy_from(&block);
        block = &block * f;
    }
    out
}

/// Strictly lower block-triangular impulse matrix with blocks H F^(i-j-1) G.
pub fn io_toeplitz_matrix(
    h: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    n: usize,
) -> DMatrix<f64> {
    let m = h.nrows();
    let l = g.ncols();
    let mut out = DMatrix::zeros(m * n, l * n);
    // H F^k G for k = 0..n-2
    let mut markov = Vec::with_capacity(n.saturating_sub(1));
    let mut hfk = h.clone();
    for _ in 0..n.saturating_sub(1) {
        markov.push(&hfk * g);
        hfk = &hfk * f;
    }
    for i in 0..n {
        for j in 0..i {
            out.view_mut((i * m, j * l), (m, l)).copy_from(&markov[i - j - 1]);
        }
    }
    out
}

/// Controllability matrix [F^(n-1) G, ..., F G, G].
pub fn controllability_matrix(f: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    let l = g.ncols();
    let mut out = DMatrix::zeros(n, l * n);
    let mut block = g.clone();
    for j in (0..n).rev() {
        out.view_mut((0, j * l), (n, l)).copy_from(&block);
        block = f * &block;
    }
    out
}

/// Moore-Penrose inverse via SVD with a relative singular-value threshold.
pub fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.iter().all(|&v| v == 0.0) {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.pseudo_inverse(tol * max_sv)
        .expect("svd requested both factors")
}

/// Moving-average coefficients of u(t) = sum_i Hu_i u(t-i) + Hy_i y(t-i);
/// returns (Hu, Hy) with index 0 holding the lag-1 matrices.
pub fn io_conversion(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let n = f.nrows();
    let m = h.nrows();
    let l = g.ncols();
    let f_n = {
        let mut acc = DMatrix::identity(n, n);
        for _ in 0..n {
            acc = f * acc;
        }
        acc
    };
    let obs = observability_matrix(h, f);
    // F^n = 0 annihilates the pseudo-inverse term, so nilpotent state
    // matrices are fine even when the pair is unobservable
    if obs.rank(1e-9) < n && f_n.amax() > 1e-12 {
        return Err(Error::Conversion(
            "observability matrix is rank-deficient".into(),
        ));
    }
    let obs_pinv = pinv(&obs, 1e-12);
    let toep = io_toeplitz_matrix(h, f, g, n);
    let ctrb = controllability_matrix(f, g);
    let hu_flat = h * &f_n * &obs_pinv; // [Hu_n ... Hu_1]
    let hy_flat = h * (&ctrb - &f_n * &obs_pinv * &toep); // [Hy_n ... Hy_1]
    let hu = (1..=n)
        .map(|i| hu_flat.view((0, m * (n - i)), (m, m)).into_owned())
        .collect();
    let hy = (1..=n)
        .map(|i| hy_flat.view((0, l * (n - i)), (m, l)).into_owned())
        .collect();
    Ok((hu, hy))
}

/// Fictitious past trajectories that seed the moving-average form so it
/// reproduces the state-space controller from t = 0: the stacked outputs are
/// pinv(C) x_ini and the stacked inputs T pinv(C) x_ini.
pub fn initial_io_trajectories(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    x_ini: &DVector<f64>,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n = f.nrows();
    let m = h.nrows();
    let l = g.ncols();
    let ctrb = controllability_matrix(f, g);
    if ctrb.rank(1e-9) < n {
        return Err(Error::Conversion("controllability matrix is rank-deficient".into()));
    }
    let y_stack = pinv(&ctrb, 1e-12) * x_ini;
    let u_stack = io_toeplitz_matrix(h, f, g, n) * &y_stack;
    let y_init = (0..n)
        .map(|i| y_stack.rows(i * l, l).into_owned())
        .collect();
    let u_init = (0..n)
        .map(|i| u_stack.rows(i * m, m).into_owned())
        .collect();
    Ok((y_init, u_init))
}

/// The controller in moving-average (input-output) form.
#[derive(Debug, Clone)]
pub struct IoForm {
    /// hu[i-1] multiplies u(t-i).
    pub hu: Vec<DMatrix<f64>>,
    /// hy[i-1] multiplies y(t-i).
    pub hy: Vec<DMatrix<f64>>,
    /// u(-n), ..., u(-1)
    pub u_init: Vec<DVector<f64>>,
    /// y(-n), ..., y(-1)
    pub y_init: Vec<DVector<f64>>,
    /// segment width max(m, l) used by the padded vectorizations
    pub h_pad: usize,
}

/// Converts a state-space controller into its equivalent moving-average form.
pub fn io_form(ctrl: &ControllerSS) -> Result<IoForm> {
    let (hu, hy) = io_conversion(&ctrl.f, &ctrl.g, &ctrl.h)?;
    let (y_init, u_init) = initial_io_trajectories(&ctrl.f, &ctrl.g, &ctrl.h, &ctrl.x_ini)?;
    Ok(IoForm {
        hu,
        hy,
        u_init,
        y_init,
        h_pad: ctrl.input_dim().max(ctrl.output_dim()),
    })
}

impl IoForm {
    pub fn horizon(&self) -> usize {
        self.hu.len()
    }

    /// u(t) from the newest-last histories u(t-n..t-1), y(t-n..t-1).
    pub fn eval(&self, u_hist: &[DVector<f64>], y_hist: &[DVector<f64>]) -> DVector<f64> {
        let n = self.horizon();
        let mut u = DVector::zeros(self.hu[0].nrows());
        for i in 1..=n {
            u += &self.hu[i - 1] * &u_hist[n - i] + &self.hy[i - 1] * &y_hist[n - i];
        }
        u
    }
}

/// Row-major vectorization of a matrix with each row zero-padded to width h.
pub fn vec_pad(m: &DMatrix<f64>, h: usize) -> DVector<f64> {
    assert!(h >= m.ncols());
    let mut out = DVector::zeros(m.nrows() * h);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * h + j] = m[(i, j)];
        }
    }
    out
}

/// m copies of b, each zero-padded to width h.
pub fn dup_pad(b: &DVector<f64>, m: usize, h: usize) -> DVector<f64> {
    assert!(h >= b.len());
    let mut out = DVector::zeros(m * h);
    for seg in 0..m {
        for j in 0..b.len() {
            out[seg * h + j] = b[j];
        }
    }
    out
}

/// A b computed as segment sums of vec_pad(A) (Hadamard) dup_pad(b): the
/// element-wise product route used by the slot-packed pipeline.
pub fn hadamard_matvec(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    assert_eq!(a.ncols(), b.len());
    let m = a.nrows();
    let h = a.ncols().max(m);
    let va = vec_pad(a, h);
    let vb = dup_pad(b, m, h);
    let prod = va.component_mul(&vb);
    DVector::from_iterator(m, (0..m).map(|i| prod.rows(i * h, h).sum()))
}

/// Per-step record of the unencrypted closed loop.
#[derive(Debug, Clone)]
pub struct BaselineLog {
    pub y: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub x_plant: Vec<DVector<f64>>,
}

/// Exact double-precision rollout of the plant driven by the state-space
/// controller.
pub fn simulate_baseline(plant: &PlantModel, ctrl: &ControllerSS, steps: usize) -> BaselineLog {
    let mut xp = plant.x_ini.clone();
    let mut x = ctrl.x_ini.clone();
    let mut log = BaselineLog {
        y: Vec::with_capacity(steps),
        u: Vec::with_capacity(steps),
        x_plant: Vec::with_capacity(steps),
    };
    for _ in 0..steps {
        let y = &plant.c_out * &xp;
        let u = &ctrl.h * &x;
        x = &ctrl.f * &x + &ctrl.g * &y;
        xp = &plant.a * &xp + &plant.b * &u;
        log.y.push(y);
        log.u.push(u);
        log.x_plant.push(xp.clone());
    }
    log
}

/// Closed-loop rollout with the controller in moving-average form.
pub fn simulate_io_closed_loop(plant: &PlantModel, io: &IoForm, steps: usize) -> Vec<DVector<f64>> {
    let mut xp = plant.x_ini.clone();
    let mut u_hist = io.u_init.clone();
    let mut y_hist = io.y_init.clone();
    let mut us = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = &plant.c_out * &xp;
        let u = io.eval(&u_hist, &y_hist);
        xp = &plant.a * &xp + &plant.b * &u;
        u_hist.remove(0);
        u_hist.push(u.clone());
        y_hist.remove(0);
        y_hist.push(y);
        us.push(u);
    }
    us
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Random stable observable and controllable system for property tests;
/// redraws on rank deficiency.
pub fn random_system(n: usize, m: usize, l: usize, seed: u64) -> ControllerSS {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let mut f = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let rho = spectral_radius(&f);
        if rho > 0.0 {
            let target = rng.gen_range(0.3..0.95);
            f *= target / rho;
        }
        let g = DMatrix::from_fn(n, l, |_, _| rng.gen_range(-1.0..1.0));
        let h = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let x_ini = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let ctrl = ControllerSS { f, g, h, x_ini };
        if ctrl.is_observable(1e-6) && ctrl.is_controllable(1e-6) {
            return ctrl;
        }
    }
}
