//! Adaptive-cruise-control longitudinal model.
//!
//! State `(v, h, v_L)`: following-car velocity, headway, lead-car velocity.
//! The nonlinear plant keeps the quadratic drag term; synthesis uses the
//! linearization around `v_ref` with the linearization residual bounded over
//! the velocity range and added to the disturbance set as an extra interval.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::zoh_discretize;
use crate::polytope::Polytope;
use crate::synthesis::{ClampKind, LinearSystem, StateClamp, SynthesisError};

/// State indices.
pub const ACC_V: usize = 0;
pub const ACC_H: usize = 1;
pub const ACC_VL: usize = 2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccParams {
    /// Car + cargo mass (kg).
    pub m: f64,
    /// Friction/drag terms (N, N·s/m, N·s²/m²).
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    /// Velocity range for both cars (m/s).
    pub v_min: f64,
    pub v_max: f64,
    /// Desired velocity (m/s).
    pub v_des: f64,
    /// Comfort wheel-force bounds (N) — also the specification input set.
    pub fw_c_min: f64,
    pub fw_c_max: f64,
    /// Physical wheel-force bounds (N).
    pub fw_p_min: f64,
    pub fw_p_max: f64,
    /// Lead-car acceleration bounds (m/s²).
    pub al_min: f64,
    pub al_max: f64,
    /// Minimal time headway (s).
    pub omega_min: f64,
    /// Minimal headway (m).
    pub h_min: f64,
    /// Desired time headway (s); no tabulated value, configuration-chosen.
    pub omega_des: f64,
    /// Headway crop for bounded set computations (m).
    pub h_cap: f64,
    /// Linearization velocity for synthesis (m/s).
    pub v_ref: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            m: 1462.0,
            f0: 51.0,
            f1: 1.2567,
            f2: 0.4342,
            v_min: 0.0,
            v_max: 25.0,
            v_des: 20.0,
            fw_c_min: -4305.9,
            fw_c_max: 2870.6,
            fw_p_min: -11482.5,
            fw_p_max: 7176.6,
            al_min: -0.97,
            al_max: 0.65,
            omega_min: 1.7,
            h_min: 4.0,
            omega_des: 2.0,
            h_cap: 200.0,
            v_ref: 20.0,
        }
    }
}

impl AccParams {
    /// Drag linearization residual `f2 (v - v_ref)²` (N); always ≥ 0.
    pub fn drag_residual(&self, v: f64) -> f64 {
        self.f2 * (v - self.v_ref) * (v - self.v_ref)
    }

    /// Upper bound of the residual over the velocity range.
    pub fn drag_residual_bound(&self) -> f64 {
        let lo = self.drag_residual(self.v_min);
        let hi = self.drag_residual(self.v_max);
        lo.max(hi)
    }

    /// Target velocity of the tabulated controllers:
    /// `min(v_des, h / omega_des)`.
    pub fn target_velocity(&self, h: f64) -> f64 {
        self.v_des.min(h / self.omega_des)
    }
}

/// Right-hand side of the nonlinear longitudinal dynamics.
pub fn acc_derivative(p: &AccParams, x: &DVector<f64>, f_w: f64, a_l: f64) -> DVector<f64> {
    let v = x[ACC_V];
    let vl = x[ACC_VL];
    DVector::from_vec(vec![
        (f_w - p.f0 - p.f1 * v - p.f2 * v * v) / p.m,
        vl - v,
        a_l,
    ])
}

/// Continuous-time matrices of the drag-linearized model with disturbance
/// `d = (a_L, r)` where `r ∈ [0, residual bound]` absorbs the linearization
/// error: `dv/dt = (F_w − f0 + f2 v_ref² − (f1 + 2 f2 v_ref) v − r) / m`.
pub fn acc_linear_matrices(
    p: &AccParams,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            -(p.f1 + 2.0 * p.f2 * p.v_ref) / p.m,
            0.0,
            0.0,
            -1.0,
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
        ],
    );
    let b = DMatrix::from_row_slice(3, 1, &[1.0 / p.m, 0.0, 0.0]);
    let e = DMatrix::from_row_slice(3, 2, &[0.0, -1.0 / p.m, 0.0, 0.0, 1.0, 0.0]);
    let k = DVector::from_vec(vec![(-p.f0 + p.f2 * p.v_ref * p.v_ref) / p.m, 0.0, 0.0]);
    (a, b, e, k)
}

/// ZOH-discretized synthesis system: domain cropped at `h_cap`, comfort force
/// bounds as the input set, lead acceleration plus drag residual as the
/// disturbance box. The lead velocity is a plant-enforced clamp (its
/// acceleration is zeroed at the rails); the headway cap is a monotone model
/// crop.
pub fn acc_synthesis_system(p: &AccParams, dt: f64) -> Result<LinearSystem, SynthesisError> {
    let (ac, bc, ec, kc) = acc_linear_matrices(p);
    let (a, b, e, k) = zoh_discretize(&ac, &bc, &ec, &kc, dt);
    let x_dom = Polytope::from_bounds(
        &[p.v_min, p.h_min, p.v_min],
        &[p.v_max, p.h_cap, p.v_max],
    )?;
    let u_set = Polytope::from_bounds(&[p.fw_c_min], &[p.fw_c_max])?;
    let d_set = Polytope::from_bounds(&[p.al_min, 0.0], &[p.al_max, p.drag_residual_bound()])?;
    LinearSystem::new(a, b, e, k, x_dom, u_set, d_set, dt)?.with_clamps(vec![
        StateClamp { dim: ACC_VL, lo: p.v_min, hi: p.v_max, kind: ClampKind::PlantEnforced },
        StateClamp { dim: ACC_H, lo: f64::NEG_INFINITY, hi: p.h_cap, kind: ClampKind::ModelMonotone },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn derivative_at_cruise() {
        let p = AccParams::default();
        let d = acc_derivative(&p, &dvector![20.0, 50.0, 20.0], 0.0, 0.0);
        // dv = -(51 + 1.2567*20 + 0.4342*400) / 1462
        let expected = -(51.0 + 25.134 + 173.68) / 1462.0;
        assert_abs_diff_eq!(d[ACC_V], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(d[ACC_H], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[ACC_VL], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn derivative_force_balance() {
        let p = AccParams::default();
        let d = acc_derivative(&p, &dvector![0.0, 10.0, 0.0], p.f0, 0.0);
        assert_abs_diff_eq!(d[ACC_V], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn derivative_headway_rate() {
        let p = AccParams::default();
        let d = acc_derivative(&p, &dvector![20.0, 30.0, 25.0], 0.0, 0.0);
        assert_abs_diff_eq!(d[ACC_H], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn linearization_residual_is_exact_error() {
        let p = AccParams::default();
        for v in [0.0, 5.0, 12.5, 20.0, 25.0] {
            let exact = p.f2 * v * v;
            let linear = p.f2 * (2.0 * p.v_ref * v - p.v_ref * p.v_ref);
            assert_abs_diff_eq!(exact - linear, p.drag_residual(v), epsilon = 1e-10);
            assert!(p.drag_residual(v) <= p.drag_residual_bound() + 1e-12);
        }
        assert_abs_diff_eq!(p.drag_residual_bound(), 0.4342 * 400.0, epsilon = 1e-12);
    }

    #[test]
    fn synthesis_system_shape() {
        let p = AccParams::default();
        let sys = acc_synthesis_system(&p, 0.1).unwrap();
        assert_eq!(sys.state_dim(), 3);
        assert_eq!(sys.input_dim(), 1);
        assert_eq!(sys.dist_dim(), 2);
        assert_eq!(sys.clamps.len(), 2);
        // The discretized lead-velocity row integrates a_L over dt.
        assert_abs_diff_eq!(sys.e[(ACC_VL, 0)], 0.1, epsilon = 1e-12);
        // Cruise near v_ref with zero force drifts as the linear model says.
        let x = dvector![20.0, 50.0, 20.0];
        let succ = sys.successor(&x, &dvector![0.0], &dvector![0.0, 0.0]);
        let cont = acc_derivative(&p, &x, 0.0, 0.0);
        assert_abs_diff_eq!(succ[ACC_V], 20.0 + 0.1 * cont[ACC_V], epsilon = 1e-4);
    }
}
