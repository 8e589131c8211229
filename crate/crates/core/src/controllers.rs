//! Benchmark controllers: hybrid P and PI laws plus condensed-QP MPC for the
//! longitudinal function, and pole-placed state feedback (with and without
//! integral action) plus MPC for the lateral function.
//!
//! Gains and horizons follow the tabulated test matrix; lateral pole sets are
//! interpreted as discrete-time closed-loop poles of the 0.1 s ZOH model.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{solve_qp, QpProblem, SolveStatus};
use crate::plant::{
    acc_linear_matrices, lk_matrices, saturate, zoh_discretize, AccParams, Controller, LkParams,
    ACC_H, ACC_V, LK_Y,
};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("({0}) is not controllable: conditioning {1:.3e}")]
    Uncontrollable(String, f64),
    #[error("pole list must have one pole per state and conjugate-closed complex pairs")]
    BadPoles,
    #[error("unknown controller variant `{0}`")]
    UnknownVariant(String),
}

/// Ackermann single-input pole placement: returns the row gain `k` with
/// `spec(A − B kᵀ)` equal to the requested poles.
pub fn place_poles(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    poles: &[Complex<f64>],
) -> Result<DVector<f64>, ControllerError> {
    let n = a.nrows();
    if poles.len() != n {
        return Err(ControllerError::BadPoles);
    }
    // Characteristic polynomial from the pole list; imaginary parts must
    // cancel (conjugate-closed input).
    let mut coeffs: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0)];
    for p in poles {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c * (-p);
            next[i + 1] += c;
        }
        coeffs = next;
    }
    if coeffs.iter().any(|c| c.im.abs() > 1e-9) {
        return Err(ControllerError::BadPoles);
    }
    let coeffs: Vec<f64> = coeffs.iter().map(|c| c.re).collect();

    // Controllability matrix C = [b, Ab, ..., A^{n-1} b].
    let mut ctrb = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = a * col;
    }
    let svd = ctrb.clone().svd(false, false);
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    if smin <= 1e-12 * smax.max(1.0) {
        return Err(ControllerError::Uncontrollable("A, B".into(), smin));
    }

    // φ(A) = Σ coeffs[i] A^i  (coeffs[n] = 1).
    let mut phi = DMatrix::zeros(n, n);
    let mut apow = DMatrix::identity(n, n);
    for c in coeffs.iter().take(n + 1) {
        phi += *c * &apow;
        apow = &apow * a;
    }
    // k = e_nᵀ C⁻¹ φ(A).
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let y = ctrb
        .transpose()
        .full_piv_lu()
        .solve(&e_n)
        .ok_or(ControllerError::Uncontrollable("A, B".into(), smin))?;
    Ok(phi.transpose() * y)
}

/// One tabulated controller variant, addressed by its table name
/// (`P_ACC#1` … `MPC_LK#3`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ControllerSpec {
    pub name: String,
    pub kind: ControllerKind,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum ControllerKind {
    AccP { k_p: f64 },
    AccPi { k_p: f64, k_i: f64 },
    AccMpc { horizon: usize },
    /// Discrete closed-loop poles as (re, im) pairs.
    LkP { poles: Vec<(f64, f64)> },
    LkPi { poles: Vec<(f64, f64)> },
    LkMpc { horizon: usize },
}

impl ControllerSpec {
    /// Resolves a table name. Unknown names are an error so campaign configs
    /// fail fast.
    pub fn tabled(name: &str) -> Result<ControllerSpec, ControllerError> {
        use ControllerKind::*;
        let kind = match name {
            "P_ACC#1" => AccP { k_p: 600.0 },
            "P_ACC#2" => AccP { k_p: 1800.0 },
            "P_ACC#3" => AccP { k_p: 4000.0 },
            "PI_ACC#1" => AccPi { k_p: 600.0, k_i: 200.0 },
            "PI_ACC#2" => AccPi { k_p: 1800.0, k_i: 400.0 },
            "PI_ACC#3" => AccPi { k_p: 4000.0, k_i: 2000.0 },
            "MPC_ACC#1" => AccMpc { horizon: 2 },
            "MPC_ACC#2" => AccMpc { horizon: 8 },
            "MPC_ACC#3" => AccMpc { horizon: 20 },
            "P_LK#1" => LkP {
                poles: vec![(-0.93, 0.0), (0.92, 0.0), (0.9, 0.0), (0.8, 0.0)],
            },
            "P_LK#2" => LkP {
                poles: vec![(-0.6, 0.1), (-0.6, -0.1), (0.65, 0.2), (0.65, -0.2)],
            },
            "P_LK#3" => LkP {
                poles: vec![(0.003, 0.0), (0.66, 0.34), (0.66, -0.34), (0.4, 0.0)],
            },
            "PI_LK#1" => LkPi {
                poles: vec![(-0.93, 0.0), (0.92, 0.0), (0.9, 0.0), (0.8, 0.0), (0.7, 0.0)],
            },
            "PI_LK#2" => LkPi {
                poles: vec![(-0.6, 0.1), (-0.6, -0.1), (0.65, 0.2), (0.65, -0.2), (0.7, 0.0)],
            },
            "PI_LK#3" => LkPi {
                poles: vec![(0.002, 0.0), (0.6, 0.4), (0.6, -0.4), (0.4, 0.0), (0.7, 0.0)],
            },
            "MPC_LK#1" => LkMpc { horizon: 2 },
            "MPC_LK#2" => LkMpc { horizon: 5 },
            "MPC_LK#3" => LkMpc { horizon: 20 },
            other => return Err(ControllerError::UnknownVariant(other.into())),
        };
        Ok(ControllerSpec { name: name.to_string(), kind })
    }

    /// All ACC or LK variant names in table order.
    pub fn table_names(acc: bool) -> Vec<&'static str> {
        if acc {
            vec![
                "P_ACC#1", "P_ACC#2", "P_ACC#3", "PI_ACC#1", "PI_ACC#2", "PI_ACC#3", "MPC_ACC#1",
                "MPC_ACC#2", "MPC_ACC#3",
            ]
        } else {
            vec![
                "P_LK#1", "P_LK#2", "P_LK#3", "PI_LK#1", "PI_LK#2", "PI_LK#3", "MPC_LK#1",
                "MPC_LK#2", "MPC_LK#3",
            ]
        }
    }

    pub fn is_acc(&self) -> bool {
        matches!(
            self.kind,
            ControllerKind::AccP { .. } | ControllerKind::AccPi { .. } | ControllerKind::AccMpc { .. }
        )
    }

    /// Instantiates a runnable controller for the given plant parameters.
    pub fn build_acc(&self, p: &AccParams, dt: f64) -> Result<Box<dyn Controller>, ControllerError> {
        match &self.kind {
            ControllerKind::AccP { k_p } => {
                Ok(Box::new(AccP::new(self.name.clone(), p.clone(), *k_p)))
            }
            ControllerKind::AccPi { k_p, k_i } => {
                Ok(Box::new(AccPi::new(self.name.clone(), p.clone(), *k_p, *k_i)))
            }
            ControllerKind::AccMpc { horizon } => {
                Ok(Box::new(AccMpc::new(self.name.clone(), p.clone(), dt, *horizon)))
            }
            _ => Err(ControllerError::UnknownVariant(format!("{} is not an ACC variant", self.name))),
        }
    }

    pub fn build_lk(&self, p: &LkParams, dt: f64) -> Result<Box<dyn Controller>, ControllerError> {
        match &self.kind {
            ControllerKind::LkP { poles } => {
                let gain = lk_p_gain(p, dt, &to_complex(poles))?;
                Ok(Box::new(LkStateFeedback::new(self.name.clone(), p.clone(), gain, None, dt)))
            }
            ControllerKind::LkPi { poles } => {
                let gain = lk_pi_gain(p, dt, &to_complex(poles))?;
                let (g_x, g_e) = (gain.rows(0, 4).into_owned(), gain[4]);
                Ok(Box::new(LkStateFeedback::new(
                    self.name.clone(),
                    p.clone(),
                    g_x,
                    Some(g_e),
                    dt,
                )))
            }
            ControllerKind::LkMpc { horizon } => {
                Ok(Box::new(LkMpc::new(self.name.clone(), p.clone(), dt, *horizon)))
            }
            _ => Err(ControllerError::UnknownVariant(format!("{} is not an LK variant", self.name))),
        }
    }
}

fn to_complex(poles: &[(f64, f64)]) -> Vec<Complex<f64>> {
    poles.iter().map(|&(re, im)| Complex::new(re, im)).collect()
}

/// Discrete ZOH matrices of the lateral model.
fn lk_discrete(p: &LkParams, dt: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (ac, bc, ec, kc) = lk_matrices(p);
    let (ad, bd, _, _) = zoh_discretize(&ac, &bc, &ec, &kc, dt);
    (ad, DVector::from_fn(4, |i, _| bd[(i, 0)]))
}

/// Feedback gain `g` with `u = gᵀ x` placing the discrete closed-loop poles.
pub fn lk_p_gain(
    p: &LkParams,
    dt: f64,
    poles: &[Complex<f64>],
) -> Result<DVector<f64>, ControllerError> {
    let (ad, bd) = lk_discrete(p, dt);
    Ok(-place_poles(&ad, &bd, poles)?)
}

/// Gain over the augmented state `[x; e]` with `ė = y`.
pub fn lk_pi_gain(
    p: &LkParams,
    dt: f64,
    poles: &[Complex<f64>],
) -> Result<DVector<f64>, ControllerError> {
    let (a_aug, b_aug) = lk_augmented_discrete(p, dt);
    Ok(-place_poles(&a_aug, &b_aug, poles)?)
}

/// ZOH discretization of the integral-augmented lateral model.
pub fn lk_augmented_discrete(p: &LkParams, dt: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (ac, bc, _, _) = lk_matrices(p);
    let mut a_aug = DMatrix::zeros(5, 5);
    a_aug.view_mut((0, 0), (4, 4)).copy_from(&ac);
    a_aug[(4, LK_Y)] = 1.0;
    let mut b_aug = DMatrix::zeros(5, 1);
    b_aug.view_mut((0, 0), (4, 1)).copy_from(&bc);
    let (ad, bd, _, _) = zoh_discretize(
        &a_aug,
        &b_aug,
        &DMatrix::zeros(5, 1),
        &DVector::zeros(5),
        dt,
    );
    (ad, DVector::from_fn(5, |i, _| bd[(i, 0)]))
}

// ---------------------------------------------------------------------------
// ACC controllers
// ---------------------------------------------------------------------------

/// Feedback-linearizing hybrid proportional law:
/// `u = f0 + f2 v² − k_P (v − min(v_des, h/ω_des))`, saturated to the
/// comfort force bounds.
pub struct AccP {
    name: String,
    p: AccParams,
    k_p: f64,
}

impl AccP {
    pub fn new(name: String, p: AccParams, k_p: f64) -> Self {
        Self { name, p, k_p }
    }

    fn raw(&self, x: &DVector<f64>) -> f64 {
        let v = x[ACC_V];
        let target = self.p.target_velocity(x[ACC_H]);
        self.p.f0 + self.p.f2 * v * v - self.k_p * (v - target)
    }
}

impl Controller for AccP {
    fn name(&self) -> &str {
        &self.name
    }
    fn control(&mut self, x: &DVector<f64>) -> f64 {
        saturate(self.raw(x), self.p.fw_c_min, self.p.fw_c_max)
    }
    fn reset(&mut self) {}
}

/// Hybrid PI law; the error integral freezes while the output saturates.
pub struct AccPi {
    name: String,
    p: AccParams,
    k_p: f64,
    k_i: f64,
    err_sum: f64,
}

impl AccPi {
    pub fn new(name: String, p: AccParams, k_p: f64, k_i: f64) -> Self {
        Self { name, p, k_p, k_i, err_sum: 0.0 }
    }
}

impl Controller for AccPi {
    fn name(&self) -> &str {
        &self.name
    }
    fn control(&mut self, x: &DVector<f64>) -> f64 {
        let v = x[ACC_V];
        let err = v - self.p.target_velocity(x[ACC_H]);
        let candidate = self.err_sum + err;
        let u = self.p.f0 + self.p.f2 * v * v - self.k_p * err - self.k_i * candidate;
        let f = saturate(u, self.p.fw_c_min, self.p.fw_c_max);
        if (u - f).abs() < 1e-12 {
            self.err_sum = candidate;
        }
        f
    }
    fn reset(&mut self) {
        self.err_sum = 0.0;
    }
}

/// Condensed-QP MPC on the drag-linearized discrete model with the target
/// velocity frozen at `min(v_des, h(0)/ω_des)` over the horizon. Falls back
/// to the saturated P law when the QP is infeasible.
pub struct AccMpc {
    name: String,
    p: AccParams,
    horizon: usize,
    /// Stacked prediction: Z = f_mat · z0 + g_mat · U + w_vec.
    f_mat: DMatrix<f64>,
    g_mat: DMatrix<f64>,
    w_vec: DVector<f64>,
    fallback: AccP,
}

impl AccMpc {
    pub fn new(name: String, p: AccParams, dt: f64, horizon: usize) -> Self {
        let (ac, bc, ec, kc) = acc_linear_matrices(&p);
        let (ad, bd, _, kd) = zoh_discretize(&ac, &bc, &ec, &kc, dt);
        let n = 3;
        let t = horizon.max(1);
        let mut f_mat = DMatrix::zeros(t * n, n);
        let mut g_mat = DMatrix::zeros(t * n, t);
        let mut w_vec = DVector::zeros(t * n);
        let mut apow = ad.clone();
        let mut wrow = kd.clone();
        for step in 0..t {
            f_mat.view_mut((step * n, 0), (n, n)).copy_from(&apow);
            w_vec.rows_mut(step * n, n).copy_from(&wrow);
            // Column j gets A^{step-j} B for j <= step.
            let mut col = bd.clone();
            for j in (0..=step).rev() {
                g_mat.view_mut((step * n, j), (n, 1)).copy_from(&col);
                col = &ad * col;
            }
            apow = &ad * &apow;
            wrow = &ad * &wrow + &kd;
        }
        let fallback = AccP::new(format!("{name}-fallback"), p.clone(), 1800.0);
        Self { name, p, horizon: t, f_mat, g_mat, w_vec, fallback }
    }

    fn qp_at(&self, x: &DVector<f64>) -> QpProblem {
        let t = self.horizon;
        let n = 3;
        let v_target = self.p.target_velocity(x[ACC_H]);
        // Row selectors for v and h across the stacked prediction.
        let sel = |coord: usize| {
            let mut m = DMatrix::zeros(t, t * n);
            for s in 0..t {
                m[(s, s * n + coord)] = 1.0;
            }
            m
        };
        let sv = sel(ACC_V);
        let sh = sel(ACC_H);
        let gv = &sv * &self.g_mat;
        let gh = &sh * &self.g_mat;
        let ov = &sv * (&self.f_mat * x + &self.w_vec);
        let oh = &sh * (&self.f_mat * x + &self.w_vec);

        let h_qp = 2.0 * gv.transpose() * &gv;
        let f_qp = 2.0 * gv.transpose() * (&ov - DVector::from_element(t, v_target));

        // Constraints: force bounds, velocity range, nonnegative headway.
        let mut rows = DMatrix::zeros(2 * t + 2 * t + t, t);
        let mut rhs = DVector::zeros(5 * t);
        for j in 0..t {
            rows[(j, j)] = 1.0;
            rhs[j] = self.p.fw_c_max;
            rows[(t + j, j)] = -1.0;
            rhs[t + j] = -self.p.fw_c_min;
        }
        rows.view_mut((2 * t, 0), (t, t)).copy_from(&gv);
        rhs.rows_mut(2 * t, t)
            .copy_from(&(DVector::from_element(t, self.p.v_max) - &ov));
        rows.view_mut((3 * t, 0), (t, t)).copy_from(&(-&gv));
        rhs.rows_mut(3 * t, t)
            .copy_from(&(&ov - DVector::from_element(t, self.p.v_min)));
        rows.view_mut((4 * t, 0), (t, t)).copy_from(&(-&gh));
        rhs.rows_mut(4 * t, t).copy_from(&oh);

        QpProblem::new(h_qp, f_qp, rows, rhs).expect("MPC cost is PSD by construction")
    }
}

impl Controller for AccMpc {
    fn name(&self) -> &str {
        &self.name
    }
    fn control(&mut self, x: &DVector<f64>) -> f64 {
        match solve_qp(&self.qp_at(x)) {
            SolveStatus::Optimal { x: u, .. } => u[0],
            _ => self.fallback.control(x),
        }
    }
    fn reset(&mut self) {}
}

// ---------------------------------------------------------------------------
// LK controllers
// ---------------------------------------------------------------------------

/// Saturated state feedback `δ_f = sat(gᵀ x [+ g_e e])`, optionally with an
/// integral state `ė = y` accumulated at the control period.
pub struct LkStateFeedback {
    name: String,
    p: LkParams,
    gain: DVector<f64>,
    gain_e: Option<f64>,
    dt: f64,
    err_int: f64,
}

impl LkStateFeedback {
    pub fn new(name: String, p: LkParams, gain: DVector<f64>, gain_e: Option<f64>, dt: f64) -> Self {
        Self { name, p, gain, gain_e, dt, err_int: 0.0 }
    }
}

impl Controller for LkStateFeedback {
    fn name(&self) -> &str {
        &self.name
    }
    fn control(&mut self, x: &DVector<f64>) -> f64 {
        let mut u = self.gain.dot(x);
        if let Some(ge) = self.gain_e {
            u += ge * self.err_int;
            self.err_int += self.dt * x[LK_Y];
        }
        saturate(u, self.p.theta_min, self.p.theta_max)
    }
    fn reset(&mut self) {
        self.err_int = 0.0;
    }
}

/// Condensed-QP lateral MPC: `min Σ y² + u²` with steering bounds as
/// constraints; the first input is applied unsaturated.
pub struct LkMpc {
    name: String,
    p: LkParams,
    horizon: usize,
    f_mat: DMatrix<f64>,
    g_mat: DMatrix<f64>,
}

impl LkMpc {
    pub fn new(name: String, p: LkParams, dt: f64, horizon: usize) -> Self {
        let (ad, bd) = lk_discrete(&p, dt);
        let n = 4;
        let t = horizon.max(1);
        let mut f_mat = DMatrix::zeros(t * n, n);
        let mut g_mat = DMatrix::zeros(t * n, t);
        let mut apow = ad.clone();
        for step in 0..t {
            f_mat.view_mut((step * n, 0), (n, n)).copy_from(&apow);
            let mut col = DMatrix::from_column_slice(n, 1, bd.as_slice());
            for j in (0..=step).rev() {
                g_mat.view_mut((step * n, j), (n, 1)).copy_from(&col);
                col = &ad * col;
            }
            apow = &ad * &apow;
        }
        Self { name, p, horizon: t, f_mat, g_mat }
    }

    fn qp_at(&self, x: &DVector<f64>) -> QpProblem {
        let t = self.horizon;
        let n = 4;
        let mut sy = DMatrix::zeros(t, t * n);
        for s in 0..t {
            sy[(s, s * n + LK_Y)] = 1.0;
        }
        let gy = &sy * &self.g_mat;
        let oy = &sy * (&self.f_mat * x);
        let h_qp = 2.0 * (gy.transpose() * &gy + DMatrix::identity(t, t));
        let f_qp = 2.0 * gy.transpose() * &oy;
        let mut rows = DMatrix::zeros(2 * t, t);
        let mut rhs = DVector::zeros(2 * t);
        for j in 0..t {
            rows[(j, j)] = 1.0;
            rhs[j] = self.p.theta_max;
            rows[(t + j, j)] = -1.0;
            rhs[t + j] = -self.p.theta_min;
        }
        QpProblem::new(h_qp, f_qp, rows, rhs).expect("MPC cost is PD by construction")
    }
}

impl Controller for LkMpc {
    fn name(&self) -> &str {
        &self.name
    }
    fn control(&mut self, x: &DVector<f64>) -> f64 {
        match solve_qp(&self.qp_at(x)) {
            SolveStatus::Optimal { x: u, .. } => u[0],
            // The lateral QP has only box constraints on u; infeasibility
            // would be a solver fault. Centered steering is the benign reply.
            _ => 0.0,
        }
    }
    fn reset(&mut self) {}
}
