//! Lane-keeping lateral model.
//!
//! State `(y, ν, ΔΨ, r)`: lateral deviation, lateral velocity, yaw-angle
//! deviation and yaw rate at fixed longitudinal speed `v_N`. The model is
//! linear; the desired yaw rate `r_d` (road curvature) enters as the
//! disturbance through `(0, 0, −1, 0)ᵀ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::zoh_discretize;
use crate::polytope::Polytope;
use crate::synthesis::{LinearSystem, SynthesisError};

/// State indices.
pub const LK_Y: usize = 0;
pub const LK_NU: usize = 1;
pub const LK_DPSI: usize = 2;
pub const LK_R: usize = 3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LkParams {
    /// Nominal longitudinal velocity (m/s).
    pub v_n: f64,
    /// Car + cargo mass (kg).
    pub m: f64,
    /// Yaw moment of inertia (kg·m²).
    pub i_z: f64,
    /// Front/rear axle distances from the center of gravity (m).
    pub a: f64,
    pub b: f64,
    /// Front/rear cornering stiffness (N/rad).
    pub c_af: f64,
    pub c_ar: f64,
    /// Domain bounds.
    pub y_max: f64,
    pub nu_max: f64,
    pub dpsi_max: f64,
    pub r_max: f64,
    /// Steering-angle bounds (rad).
    pub theta_min: f64,
    pub theta_max: f64,
    /// Desired-yaw-rate (road curvature) disturbance bound (rad/s); not
    /// tabulated — derived from v_N over a 230 m minimum curve radius.
    pub rd_max: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            v_n: 20.0,
            m: 1462.0,
            i_z: 2500.0,
            a: 1.08,
            b: 1.62,
            c_af: 85400.0,
            c_ar: 90000.0,
            y_max: 0.9,
            nu_max: 1.0,
            dpsi_max: 0.15,
            r_max: 0.27,
            theta_min: -0.26,
            theta_max: 0.26,
            rd_max: 0.087,
        }
    }
}

/// Continuous-time `(A, B, E, K)` of the lateral dynamics.
pub fn lk_matrices(p: &LkParams) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let mv = p.m * p.v_n;
    let izv = p.i_z * p.v_n;
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            p.v_n,
            0.0,
            0.0,
            -(p.c_af + p.c_ar) / mv,
            0.0,
            (p.b * p.c_ar - p.a * p.c_af) / mv - p.v_n,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
            (p.b * p.c_ar - p.a * p.c_af) / izv,
            0.0,
            -(p.a * p.a * p.c_af + p.b * p.b * p.c_ar) / izv,
        ],
    );
    let b = DMatrix::from_row_slice(4, 1, &[0.0, p.c_af / p.m, 0.0, p.a * p.c_af / p.i_z]);
    let e = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, -1.0, 0.0]);
    let k = DVector::zeros(4);
    (a, b, e, k)
}

/// Right-hand side of the lateral dynamics.
pub fn lk_derivative(p: &LkParams, x: &DVector<f64>, delta_f: f64, r_d: f64) -> DVector<f64> {
    let (a, b, e, _) = lk_matrices(p);
    a * x + b * DVector::from_element(1, delta_f) + e * DVector::from_element(1, r_d)
}

/// ZOH-discretized synthesis system over the domain box with steering bounds
/// as the input set and the curvature interval as the disturbance.
pub fn lk_synthesis_system(p: &LkParams, dt: f64) -> Result<LinearSystem, SynthesisError> {
    let (ac, bc, ec, kc) = lk_matrices(p);
    let (a, b, e, k) = zoh_discretize(&ac, &bc, &ec, &kc, dt);
    let x_dom = Polytope::from_bounds(
        &[-p.y_max, -p.nu_max, -p.dpsi_max, -p.r_max],
        &[p.y_max, p.nu_max, p.dpsi_max, p.r_max],
    )?;
    let u_set = Polytope::from_bounds(&[p.theta_min], &[p.theta_max])?;
    let d_set = Polytope::from_bounds(&[-p.rd_max], &[p.rd_max])?;
    LinearSystem::new(a, b, e, k, x_dom, u_set, d_set, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn equilibrium() {
        let p = LkParams::default();
        let d = lk_derivative(&p, &DVector::zeros(4), 0.0, 0.0);
        assert_abs_diff_eq!(d.abs().max(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn curvature_enters_yaw_angle_only() {
        let p = LkParams::default();
        let d = lk_derivative(&p, &DVector::zeros(4), 0.0, 0.1);
        assert_abs_diff_eq!(d[LK_DPSI], -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(d[LK_Y], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[LK_NU], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[LK_R], 0.0, epsilon = 1e-12);
    }

    /// Independent scalar assembly of each entry against the matrix builder.
    #[test]
    fn matrices_match_scalar_assembly() {
        let p = LkParams::default();
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let x = DVector::from_fn(4, |_, _| rng.random_range(-0.5..0.5));
            let u: f64 = rng.random_range(-0.26..0.26);
            let rd: f64 = rng.random_range(-0.1..0.1);
            let d = lk_derivative(&p, &x, u, rd);
            let (y, nu, dpsi, r) = (x[0], x[1], x[2], x[3]);
            let _ = y;
            let dy = nu + p.v_n * dpsi;
            let dnu = -(p.c_af + p.c_ar) / (p.m * p.v_n) * nu
                + ((p.b * p.c_ar - p.a * p.c_af) / (p.m * p.v_n) - p.v_n) * r
                + p.c_af / p.m * u;
            let ddpsi = r - rd;
            let dr = (p.b * p.c_ar - p.a * p.c_af) / (p.i_z * p.v_n) * nu
                - (p.a * p.a * p.c_af + p.b * p.b * p.c_ar) / (p.i_z * p.v_n) * r
                + p.a * p.c_af / p.i_z * u;
            assert_abs_diff_eq!(d[0], dy, epsilon = 1e-10);
            assert_abs_diff_eq!(d[1], dnu, epsilon = 1e-10);
            assert_abs_diff_eq!(d[2], ddpsi, epsilon = 1e-10);
            assert_abs_diff_eq!(d[3], dr, epsilon = 1e-10);
        }
    }

    #[test]
    fn discretization_inverse_identity() {
        let p = LkParams::default();
        let (ac, bc, ec, kc) = lk_matrices(&p);
        let (ad_f, _, _, _) = zoh_discretize(&ac, &bc, &ec, &kc, 0.1);
        let (ad_b, _, _, _) = zoh_discretize(&ac, &bc, &ec, &kc, -0.1);
        let id = &ad_f * &ad_b;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(id[(i, j)], expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn synthesis_system_shape() {
        let sys = lk_synthesis_system(&LkParams::default(), 0.1).unwrap();
        assert_eq!(sys.state_dim(), 4);
        assert_eq!(sys.input_dim(), 1);
        assert_eq!(sys.dist_dim(), 1);
        assert!(sys.clamps.is_empty());
    }
}
