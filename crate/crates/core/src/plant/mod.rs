//! Vehicle models, discretization, and the closed-loop simulation harness.
//!
//! The harness rolls out the nonlinear plant (classical fixed-step RK4 at
//! `dt / substeps`) under a sampled controller, an optional invariant-set
//! supervisor, and a disturbance policy held constant over each control
//! period. Specification monitors need every substep state, so each step
//! record carries the substep extrema of the monitored functionals instead of
//! the raw substep trace.

mod acc;
mod lk;

pub use acc::{
    acc_derivative, acc_linear_matrices, acc_synthesis_system, AccParams, ACC_H, ACC_V, ACC_VL,
};
pub use lk::{lk_derivative, lk_matrices, lk_synthesis_system, LkParams, LK_DPSI, LK_NU, LK_R, LK_Y};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::polytope::Tolerances;
use crate::synthesis::{SupervisorMap, SynthesisError};

/// Exact zero-order-hold discretization of `ẋ = A x + B u + E d + K` with
/// `u`, `d` held constant: computed from one augmented matrix exponential
/// (scaling-and-squaring Padé).
pub fn zoh_discretize(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    e: &DMatrix<f64>,
    k: &DVector<f64>,
    dt: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let p = e.ncols();
    let aug = n + m + p + 1;
    let mut big = DMatrix::zeros(aug, aug);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, m)).copy_from(b);
    big.view_mut((0, n + m), (n, p)).copy_from(e);
    big.view_mut((0, n + m + p), (n, 1)).copy_from(&DMatrix::from_column_slice(n, 1, k.as_slice()));
    let exp = (big * dt).exp();
    let a_d = exp.view((0, 0), (n, n)).into_owned();
    let b_d = exp.view((0, n), (n, m)).into_owned();
    let e_d = exp.view((0, n + m), (n, p)).into_owned();
    let k_d = DVector::from_fn(n, |i, _| exp[(i, n + m + p)]);
    (a_d, b_d, e_d, k_d)
}

/// Clamp to `[lo, hi]`.
pub fn saturate(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        lo
    } else if x >= hi {
        hi
    } else {
        x
    }
}

/// Which vehicle function a trajectory belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseStudy {
    Acc,
    Lk,
}

/// Nonlinear (ACC) or linear (LK) rollout plant.
#[derive(Clone, Debug)]
pub enum PlantModel {
    Acc(AccParams),
    Lk(LkParams),
}

impl PlantModel {
    pub fn case(&self) -> CaseStudy {
        match self {
            PlantModel::Acc(_) => CaseStudy::Acc,
            PlantModel::Lk(_) => CaseStudy::Lk,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            PlantModel::Acc(_) => 3,
            PlantModel::Lk(_) => 4,
        }
    }

    fn derivative(&self, x: &DVector<f64>, u: f64, d: f64) -> DVector<f64> {
        match self {
            PlantModel::Acc(p) => acc_derivative(p, x, u, d),
            PlantModel::Lk(p) => lk_derivative(p, x, u, d),
        }
    }

    /// Saturates the disturbance into its admissible interval and, for ACC,
    /// zeroes the lead acceleration at the velocity rails so the lead car
    /// never leaves its range over the coming period.
    fn clip_disturbance(&self, x: &DVector<f64>, d: f64, dt: f64) -> f64 {
        match self {
            PlantModel::Acc(p) => {
                let a = saturate(d, p.al_min, p.al_max);
                let vl = x[ACC_VL];
                saturate(a, (p.v_min - vl) / dt, (p.v_max - vl) / dt)
            }
            PlantModel::Lk(p) => saturate(d, -p.rd_max, p.rd_max),
        }
    }

    /// Hard stop: the ACC crash condition `h < 0`.
    fn crashed(&self, x: &DVector<f64>) -> bool {
        match self {
            PlantModel::Acc(_) => x[ACC_H] < 0.0,
            PlantModel::Lk(_) => false,
        }
    }

    fn extrema_init(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut acc = match self {
            PlantModel::Acc(_) => vec![f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
            PlantModel::Lk(_) => vec![0.0; 4],
        };
        self.extrema_update(&mut acc, x);
        acc
    }

    /// Substep extrema of the monitored functionals. Layouts:
    /// ACC: `[min h, max (v − h/ω_min), min v, max v, min v_L, max v_L]`;
    /// LK: `[max |y|, max |ν|, max |ΔΨ|, max |r|]`.
    fn extrema_update(&self, acc: &mut [f64], x: &DVector<f64>) {
        match self {
            PlantModel::Acc(p) => {
                let (v, h, vl) = (x[ACC_V], x[ACC_H], x[ACC_VL]);
                acc[0] = acc[0].min(h);
                acc[1] = acc[1].max(v - h / p.omega_min);
                acc[2] = acc[2].min(v);
                acc[3] = acc[3].max(v);
                acc[4] = acc[4].min(vl);
                acc[5] = acc[5].max(vl);
            }
            PlantModel::Lk(_) => {
                for j in 0..4 {
                    acc[j] = acc[j].max(x[j].abs());
                }
            }
        }
    }
}

/// Sampled-data controller: one actuator command per control period.
pub trait Controller {
    fn name(&self) -> &str;
    /// Actuator command at the sampled state (already saturated as the
    /// controller family defines).
    fn control(&mut self, x: &DVector<f64>) -> f64;
    /// Clears per-episode state (integrators, warm starts).
    fn reset(&mut self);
}

/// Disturbance generator: one playable disturbance value per control period,
/// held constant over the period.
pub trait DisturbancePolicy {
    fn name(&self) -> &str;
    /// The applied input `u` for the period is known (taken from the loop).
    fn disturbance(&mut self, x: &DVector<f64>, u: f64) -> f64;
    fn reset(&mut self);
}

/// Simulation controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: usize,
    pub dt: f64,
    pub substeps: usize,
    /// Margin applied to the supervisor's invariant target rows.
    pub supervisor_margin: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { horizon: 300, dt: 0.1, substeps: 10, supervisor_margin: 0.0 }
    }
}

/// One control period of a rollout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// Sampled state at the start of the period.
    pub state: Vec<f64>,
    /// Controller output before supervision.
    pub u_raw: f64,
    /// Input actually applied.
    pub u_applied: f64,
    /// Playable disturbance actually applied (after rail clipping).
    pub d: f64,
    /// Substep extrema of the monitored functionals over the period.
    pub extrema: Vec<f64>,
    pub supervisor_active: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fault: Option<String>,
}

/// Closed-loop rollout record at a uniform control period.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub case: CaseStudy,
    pub dt: f64,
    pub substeps: usize,
    pub steps: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    /// Step at which supervision became impossible (state left the
    /// invariant set); the rollout continues unsupervised from there.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub supervision_failed_at: Option<usize>,
    /// Step at which the rollout stopped early on a crash.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub early_stop: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn supervisor_overrides(&self) -> usize {
        self.steps.iter().filter(|s| s.supervisor_active).count()
    }
}

/// Classical fixed-step 4th-order step.
fn rk4_step(plant: &PlantModel, x: &DVector<f64>, u: f64, d: f64, h: f64) -> DVector<f64> {
    let k1 = plant.derivative(x, u, d);
    let k2 = plant.derivative(&(x + 0.5 * h * &k1), u, d);
    let k3 = plant.derivative(&(x + 0.5 * h * &k2), u, d);
    let k4 = plant.derivative(&(x + h * &k3), u, d);
    x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Rolls out the closed loop: per control period the controller evaluates on
/// the sampled state, the optional supervisor filters the input, the
/// disturbance policy emits a value held constant over the period, and the
/// plant integrates at `dt / substeps` while the monitors' extrema track
/// every substep state. Stops early only on the ACC crash condition.
pub fn simulate(
    plant: &PlantModel,
    x0: &DVector<f64>,
    controller: &mut dyn Controller,
    scheme: &mut dyn DisturbancePolicy,
    supervisor: Option<&SupervisorMap>,
    opts: &SimOptions,
    tol: &Tolerances,
) -> Trajectory {
    controller.reset();
    scheme.reset();
    let h = opts.dt / opts.substeps as f64;
    let mut x = x0.clone();
    let mut steps = Vec::with_capacity(opts.horizon);
    let mut supervision_failed_at = None;
    let mut early_stop = None;

    for step in 0..opts.horizon {
        let u_raw = controller.control(&x);
        let mut fault = None;
        let (u_applied, supervisor_active) = match supervisor {
            None => (u_raw, false),
            Some(map) => {
                let legacy = DVector::from_element(1, u_raw);
                match map.supervise(&legacy, &x, opts.supervisor_margin, tol) {
                    Ok(u) => {
                        let overridden = (u[0] - u_raw).abs() > 1e-12;
                        (u[0], overridden)
                    }
                    Err(SynthesisError::SupervisionImpossible) => {
                        if supervision_failed_at.is_none() {
                            supervision_failed_at = Some(step);
                        }
                        (u_raw, false)
                    }
                    Err(err) => {
                        fault = Some(format!("supervisor: {err}"));
                        (u_raw, false)
                    }
                }
            }
        };
        let d = plant.clip_disturbance(&x, scheme.disturbance(&x, u_applied), opts.dt);

        let mut extrema = plant.extrema_init(&x);
        let state_before: Vec<f64> = x.iter().copied().collect();
        let mut crashed = false;
        for _ in 0..opts.substeps {
            x = rk4_step(plant, &x, u_applied, d, h);
            plant.extrema_update(&mut extrema, &x);
            if plant.crashed(&x) {
                crashed = true;
                break;
            }
        }
        steps.push(StepRecord {
            t: step as f64 * opts.dt,
            state: state_before,
            u_raw,
            u_applied,
            d,
            extrema,
            supervisor_active,
            fault,
        });
        if crashed {
            early_stop = Some(step);
            break;
        }
    }

    Trajectory {
        case: plant.case(),
        dt: opts.dt,
        substeps: opts.substeps,
        steps,
        final_state: x.iter().copied().collect(),
        supervision_failed_at,
        early_stop,
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Constant-output controller for harness tests.
    pub struct ConstController(pub f64);

    impl Controller for ConstController {
        fn name(&self) -> &str {
            "const"
        }
        fn control(&mut self, _x: &DVector<f64>) -> f64 {
            self.0
        }
        fn reset(&mut self) {}
    }

    /// Constant-output disturbance policy.
    pub struct ConstScheme(pub f64);

    impl DisturbancePolicy for ConstScheme {
        fn name(&self) -> &str {
            "const"
        }
        fn disturbance(&mut self, _x: &DVector<f64>, _u: f64) -> f64 {
            self.0
        }
        fn reset(&mut self) {}
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn zoh_trivial_cases() {
        // A = 0, B = I: A_d = I, B_d = dt·I.
        let (a_d, b_d, _, _) = zoh_discretize(
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 1),
            &DVector::zeros(2),
            0.1,
        );
        assert_abs_diff_eq!(a_d[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a_d[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b_d[(0, 0)], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(b_d[(1, 1)], 0.1, epsilon = 1e-12);
        // Scalar A = -1: A_d = exp(-0.1).
        let (a_d, _, _, _) = zoh_discretize(
            &dmatrix![-1.0],
            &DMatrix::zeros(1, 1),
            &DMatrix::zeros(1, 1),
            &DVector::zeros(1),
            0.1,
        );
        assert_abs_diff_eq!(a_d[(0, 0)], (-0.1f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn saturation() {
        assert_eq!(saturate(2.0, -1.0, 1.0), 1.0);
        assert_eq!(saturate(0.0, -1.0, 1.0), 0.0);
        assert_eq!(saturate(-3.0, -1.0, 1.0), -1.0);
    }

    #[test]
    fn lk_equilibrium_stays_constant() {
        let plant = PlantModel::Lk(LkParams::default());
        let mut ctrl = ConstController(0.0);
        let mut sch = ConstScheme(0.0);
        let opts = SimOptions { horizon: 50, ..Default::default() };
        let tr = simulate(
            &plant,
            &DVector::zeros(4),
            &mut ctrl,
            &mut sch,
            None,
            &opts,
            &Tolerances::default(),
        );
        assert_eq!(tr.len(), 50);
        assert!(tr.final_state.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn acc_max_brake_closes_headway() {
        // Faster follower, braking lead: headway strictly decreases.
        let p = AccParams::default();
        let plant = PlantModel::Acc(p.clone());
        let mut ctrl = ConstController(0.0);
        let mut sch = ConstScheme(p.al_min);
        let opts = SimOptions { horizon: 40, ..Default::default() };
        let tr = simulate(
            &plant,
            &dvector![20.0, 100.0, 10.0],
            &mut ctrl,
            &mut sch,
            None,
            &opts,
            &Tolerances::default(),
        );
        let mut last_h = f64::INFINITY;
        for s in &tr.steps {
            assert!(s.state[ACC_H] < last_h);
            last_h = s.state[ACC_H];
        }
    }

    #[test]
    fn lead_velocity_clipped_at_rails() {
        let p = AccParams::default();
        let plant = PlantModel::Acc(p.clone());
        let mut ctrl = ConstController(0.0);
        let mut sch = ConstScheme(p.al_min); // brake forever
        let opts = SimOptions { horizon: 300, ..Default::default() };
        let tr = simulate(
            &plant,
            &dvector![0.0, 150.0, 5.0],
            &mut ctrl,
            &mut sch,
            None,
            &opts,
            &Tolerances::default(),
        );
        for s in &tr.steps {
            assert!(s.extrema[4] >= -1e-12, "v_L dipped below 0: {}", s.extrema[4]);
            assert!(s.extrema[5] <= 25.0 + 1e-12);
        }
    }

    #[test]
    fn crash_stops_early() {
        let p = AccParams::default();
        let plant = PlantModel::Acc(p);
        let mut ctrl = ConstController(2870.0); // full throttle
        let mut sch = ConstScheme(-0.97);
        let opts = SimOptions { horizon: 300, ..Default::default() };
        let tr = simulate(
            &plant,
            &dvector![25.0, 5.0, 0.0],
            &mut ctrl,
            &mut sch,
            None,
            &opts,
            &Tolerances::default(),
        );
        assert!(tr.early_stop.is_some());
        assert!(tr.len() < 300);
    }

    #[test]
    fn zoh_consistency_with_integrated_linear_plant() {
        // The LK plant is linear: one RK4-integrated control period must match
        // the ZOH one-step prediction to integrator accuracy.
        let p = LkParams::default();
        let plant = PlantModel::Lk(p.clone());
        let (ac, bc, ec, kc) = lk_matrices(&p);
        let (ad, bd, ed, kd) = zoh_discretize(&ac, &bc, &ec, &kc, 0.1);
        let x0 = dvector![0.3, -0.2, 0.05, 0.1];
        let (u, d) = (0.1, -0.05);
        // Integrate finely enough that RK4 error stays below the 1e-8 budget
        // for the stiff lateral modes.
        let mut x = x0.clone();
        for _ in 0..40 {
            x = rk4_step(&plant, &x, u, d, 0.1 / 40.0);
        }
        let pred = &ad * &x0
            + &bd * DVector::from_element(1, u)
            + &ed * DVector::from_element(1, d)
            + &kd;
        assert!((x - pred).abs().max() < 1e-8);
    }

    #[test]
    fn integrator_order_check() {
        // Halving the substep changes the terminal state below 1e-6.
        let p = AccParams::default();
        let plant = PlantModel::Acc(p);
        let x0 = dvector![15.0, 60.0, 20.0];
        let run = |substeps: usize| {
            let mut ctrl = ConstController(500.0);
            let mut sch = ConstScheme(0.3);
            let opts = SimOptions { horizon: 100, substeps, ..Default::default() };
            simulate(
                &PlantModel::Acc(AccParams::default()),
                &x0,
                &mut ctrl,
                &mut sch,
                None,
                &opts,
                &Tolerances::default(),
            )
            .final_state
        };
        let _ = &plant;
        let a = run(10);
        let b = run(20);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
