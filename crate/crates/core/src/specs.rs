//! Safety-specification sets and trajectory monitors.
//!
//! The longitudinal specification combines an input bound with membership in
//! the safe set `S = {v ≤ h/ω_min, h ≥ h_min}` inside the state domain; its
//! graded aspects are small time headway, small distance headway, and crash.
//! The lateral specification is domain membership, with the lateral-deviation
//! bound counted separately. Monitors evaluate on the substep extrema carried
//! by each trajectory step, so inter-sample excursions count.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::plant::{AccParams, CaseStudy, LkParams, Trajectory};
use crate::polytope::{GeometryError, Polytope, Tolerances, UnionRegion};

/// Longitudinal specification sets.
#[derive(Clone, Debug)]
pub struct AccSpecSets {
    /// Lead-car-close region `M = {v_des > h/ω_des}`.
    pub m_set: Polytope,
    /// Safe set `S = {v ≤ h/ω_min, h ≥ h_min}`.
    pub s_set: Polytope,
    /// Input bound `S_U = [F_min, F_max]` (comfort).
    pub input_set: Polytope,
    /// State domain with the headway crop.
    pub domain: Polytope,
}

impl AccSpecSets {
    pub fn new(p: &AccParams) -> Result<Self, GeometryError> {
        // M: h < v_des * omega_des (closure).
        let m_set = Polytope::new(
            DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
            DVector::from_vec(vec![p.v_des * p.omega_des]),
        )?;
        let s_set = Polytope::new(
            DMatrix::from_row_slice(2, 3, &[p.omega_min, -1.0, 0.0, 0.0, -1.0, 0.0]),
            DVector::from_vec(vec![0.0, -p.h_min]),
        )?;
        let input_set = Polytope::from_bounds(&[p.fw_c_min], &[p.fw_c_max])?;
        let domain = Polytope::from_bounds(
            &[p.v_min, p.h_min, p.v_min],
            &[p.v_max, p.h_cap, p.v_max],
        )?;
        Ok(Self { m_set, s_set, input_set, domain })
    }
}

/// Synthesis safe region for ACC: `S ∩ X` with the headway crop, one
/// polytope over `(v, h, v_L)`.
pub fn acc_safe_region(p: &AccParams, tol: &Tolerances) -> Result<UnionRegion, GeometryError> {
    let sets = AccSpecSets::new(p)?;
    Ok(UnionRegion::from_polytope(sets.s_set.intersect(&sets.domain, tol)?))
}

/// Unsafe target region for the ACC dual game: the headway-safety complement
/// `{ω_min v ≥ h}` ∪ `{h ≤ h_min}`, shifted `margin` into the violation so
/// reached states violate strictly.
pub fn acc_unsafe_region(p: &AccParams, margin: f64) -> Result<UnionRegion, GeometryError> {
    let time_headway = Polytope::new(
        DMatrix::from_row_slice(1, 3, &[-p.omega_min, 1.0, 0.0]),
        DVector::from_vec(vec![-margin]),
    )?;
    let distance = Polytope::new(
        DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
        DVector::from_vec(vec![p.h_min - margin]),
    )?;
    Ok(UnionRegion::new(vec![time_headway, distance]))
}

/// Synthesis safe region for LK: the state-domain box.
pub fn lk_safe_region(p: &LkParams) -> Result<UnionRegion, GeometryError> {
    Ok(UnionRegion::from_polytope(Polytope::from_bounds(
        &[-p.y_max, -p.nu_max, -p.dpsi_max, -p.r_max],
        &[p.y_max, p.nu_max, p.dpsi_max, p.r_max],
    )?))
}

/// Unsafe target region for the LK dual game: one part per violated domain
/// face, shifted `margin` into the violation.
pub fn lk_unsafe_region(p: &LkParams, margin: f64) -> Result<UnionRegion, GeometryError> {
    let bounds = [p.y_max, p.nu_max, p.dpsi_max, p.r_max];
    let mut parts = Vec::new();
    for (dim, &b) in bounds.iter().enumerate() {
        for sign in [1.0f64, -1.0] {
            let mut row = [0.0; 4];
            row[dim] = -sign;
            parts.push(Polytope::new(
                DMatrix::from_row_slice(1, 4, &row),
                DVector::from_vec(vec![-b - margin]),
            )?);
        }
    }
    Ok(UnionRegion::new(parts))
}

/// Per-specification verdicts with first-violation step indices.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ViolationReport {
    /// Small time headway: `∃t, v > h/ω_min`.
    pub phi_acc_1: Option<usize>,
    /// Small distance headway: `∃t, h < h_min`.
    pub phi_acc_2: Option<usize>,
    /// Crash: `∃t, h < 0`.
    pub phi_acc_3: Option<usize>,
    /// Conjunction: input bound and `S ∩ X` membership at all times.
    pub phi_acc: Option<usize>,
    /// Lateral deviation bound `|y| ≤ y_max`.
    pub phi_lk_1: Option<usize>,
    /// Lateral domain membership.
    pub phi_lk: Option<usize>,
}

impl ViolationReport {
    pub fn violated(&self, spec: SpecId) -> bool {
        self.first_violation(spec).is_some()
    }

    pub fn first_violation(&self, spec: SpecId) -> Option<usize> {
        match spec {
            SpecId::PhiAcc1 => self.phi_acc_1,
            SpecId::PhiAcc2 => self.phi_acc_2,
            SpecId::PhiAcc3 => self.phi_acc_3,
            SpecId::PhiAcc => self.phi_acc,
            SpecId::PhiLk1 => self.phi_lk_1,
            SpecId::PhiLk => self.phi_lk,
        }
    }
}

/// Stable specification identifiers (also the campaign CSV column names).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecId {
    PhiAcc1,
    PhiAcc2,
    PhiAcc3,
    PhiAcc,
    PhiLk1,
    PhiLk,
}

impl SpecId {
    pub fn column(&self) -> &'static str {
        match self {
            SpecId::PhiAcc1 => "phi_acc_1",
            SpecId::PhiAcc2 => "phi_acc_2",
            SpecId::PhiAcc3 => "phi_acc_3",
            SpecId::PhiAcc => "phi_acc",
            SpecId::PhiLk1 => "phi_lk_1",
            SpecId::PhiLk => "phi_lk",
        }
    }

    pub fn for_case(case: CaseStudy) -> Vec<SpecId> {
        match case {
            CaseStudy::Acc => vec![SpecId::PhiAcc1, SpecId::PhiAcc2, SpecId::PhiAcc3, SpecId::PhiAcc],
            CaseStudy::Lk => vec![SpecId::PhiLk1, SpecId::PhiLk],
        }
    }
}

/// Strictness slack for monitor comparisons: a state exactly on a bound does
/// not violate.
const MON_EPS: f64 = 1e-9;

/// Evaluates the longitudinal specifications on the substep extrema of a
/// trajectory. The input bound is checked on the applied (post-supervision)
/// input.
pub fn monitor_acc(tr: &Trajectory, p: &AccParams) -> ViolationReport {
    assert_eq!(tr.case, CaseStudy::Acc, "monitor_acc needs an ACC trajectory");
    let mut report = ViolationReport::default();
    for (k, step) in tr.steps.iter().enumerate() {
        // Extrema layout: [min h, max (v - h/omega_min), min v, max v,
        // min v_L, max v_L].
        let min_h = step.extrema[0];
        let max_th = step.extrema[1];
        let (min_v, max_v) = (step.extrema[2], step.extrema[3]);
        let (min_vl, max_vl) = (step.extrema[4], step.extrema[5]);
        if report.phi_acc_1.is_none() && max_th > MON_EPS {
            report.phi_acc_1 = Some(k);
        }
        if report.phi_acc_2.is_none() && min_h < p.h_min - MON_EPS {
            report.phi_acc_2 = Some(k);
        }
        if report.phi_acc_3.is_none() && min_h < -MON_EPS {
            report.phi_acc_3 = Some(k);
        }
        if report.phi_acc.is_none() {
            let input_out =
                step.u_applied > p.fw_c_max + MON_EPS || step.u_applied < p.fw_c_min - MON_EPS;
            let domain_out = min_v < p.v_min - MON_EPS
                || max_v > p.v_max + MON_EPS
                || min_vl < p.v_min - MON_EPS
                || max_vl > p.v_max + MON_EPS;
            let s_out = max_th > MON_EPS || min_h < p.h_min - MON_EPS;
            if input_out || domain_out || s_out {
                report.phi_acc = Some(k);
            }
        }
    }
    report
}

/// Evaluates the lateral specifications on the substep extrema.
pub fn monitor_lk(tr: &Trajectory, p: &LkParams) -> ViolationReport {
    assert_eq!(tr.case, CaseStudy::Lk, "monitor_lk needs an LK trajectory");
    let mut report = ViolationReport::default();
    let bounds = [p.y_max, p.nu_max, p.dpsi_max, p.r_max];
    for (k, step) in tr.steps.iter().enumerate() {
        // Extrema layout: [max |y|, max |nu|, max |dpsi|, max |r|].
        if report.phi_lk_1.is_none() && step.extrema[0] > p.y_max + MON_EPS {
            report.phi_lk_1 = Some(k);
        }
        if report.phi_lk.is_none() {
            let out = step
                .extrema
                .iter()
                .zip(bounds.iter())
                .any(|(v, b)| *v > b + MON_EPS);
            if out {
                report.phi_lk = Some(k);
            }
        }
    }
    report
}

/// Monitor dispatch on the trajectory's case study.
pub fn monitor(tr: &Trajectory, acc: &AccParams, lk: &LkParams) -> ViolationReport {
    match tr.case {
        CaseStudy::Acc => monitor_acc(tr, acc),
        CaseStudy::Lk => monitor_lk(tr, lk),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{StepRecord, Trajectory};
    use nalgebra::dvector;

    fn acc_step(t: f64, extrema: Vec<f64>, u: f64) -> StepRecord {
        StepRecord {
            t,
            state: vec![0.0; 3],
            u_raw: u,
            u_applied: u,
            d: 0.0,
            extrema,
            supervisor_active: false,
            fault: None,
        }
    }

    fn acc_traj(steps: Vec<StepRecord>) -> Trajectory {
        Trajectory {
            case: CaseStudy::Acc,
            dt: 0.1,
            substeps: 10,
            steps,
            final_state: vec![0.0; 3],
            supervision_failed_at: None,
            early_stop: None,
        }
    }

    #[test]
    fn safe_region_membership() {
        let p = AccParams::default();
        let tol = Tolerances::default();
        let region = acc_safe_region(&p, &tol).unwrap();
        // 10 <= 17.1/1.7 (boundary within slack) and h >= 4.
        assert!(region.contains_point(&dvector![10.0, 17.1, 5.0], 1e-6));
        // 10 > 16/1.7: outside.
        assert!(!region.contains_point(&dvector![10.0, 16.0, 5.0], 1e-6));
        // Corner of the domain.
        assert!(region.contains_point(&dvector![0.0, 4.0, 0.0], 1e-9));
    }

    #[test]
    fn distance_headway_violation_without_crash() {
        let p = AccParams::default();
        let tr = acc_traj(vec![
            acc_step(0.0, vec![10.0, -5.0, 5.0, 5.0, 5.0, 5.0], 0.0),
            acc_step(0.1, vec![3.0, -2.0, 5.0, 5.0, 5.0, 5.0], 0.0),
        ]);
        let r = monitor_acc(&tr, &p);
        assert_eq!(r.phi_acc_2, Some(1));
        assert_eq!(r.phi_acc_3, None);
        assert_eq!(r.phi_acc, Some(1));
    }

    #[test]
    fn all_safe_trajectory_reports_nothing() {
        let p = AccParams::default();
        let tr = acc_traj(vec![
            acc_step(0.0, vec![50.0, -20.0, 10.0, 10.0, 10.0, 10.0], 100.0),
            acc_step(0.1, vec![50.0, -20.0, 10.0, 10.0, 10.0, 10.0], 100.0),
        ]);
        let r = monitor_acc(&tr, &p);
        assert_eq!(r, ViolationReport::default());
    }

    #[test]
    fn crash_implies_all_headway_specs() {
        // Monotone descent: time headway first, then distance, then crash.
        let p = AccParams::default();
        let tr = acc_traj(vec![
            acc_step(0.0, vec![20.0, -1.0, 15.0, 15.0, 5.0, 5.0], 0.0),
            acc_step(0.1, vec![10.0, 2.0, 15.0, 15.0, 5.0, 5.0], 0.0),
            acc_step(0.2, vec![3.0, 5.0, 15.0, 15.0, 5.0, 5.0], 0.0),
            acc_step(0.3, vec![-0.5, 10.0, 15.0, 15.0, 5.0, 5.0], 0.0),
        ]);
        let r = monitor_acc(&tr, &p);
        let (t1, t2, t3) = (r.phi_acc_1.unwrap(), r.phi_acc_2.unwrap(), r.phi_acc_3.unwrap());
        assert!(t1 <= t2 && t2 <= t3);
        // Implication chain on verdicts.
        assert!(r.violated(SpecId::PhiAcc3) && r.violated(SpecId::PhiAcc2));
        assert!(r.violated(SpecId::PhiAcc));
    }

    #[test]
    fn input_bound_check_uses_applied_input() {
        let p = AccParams::default();
        let mut step = acc_step(0.0, vec![50.0, -20.0, 10.0, 10.0, 10.0, 10.0], 0.0);
        step.u_applied = p.fw_c_max + 100.0;
        let tr = acc_traj(vec![step]);
        let r = monitor_acc(&tr, &p);
        assert_eq!(r.phi_acc, Some(0));
        assert_eq!(r.phi_acc_1, None);
    }

    fn lk_step(extrema: Vec<f64>) -> StepRecord {
        StepRecord {
            t: 0.0,
            state: vec![0.0; 4],
            u_raw: 0.0,
            u_applied: 0.0,
            d: 0.0,
            extrema,
            supervisor_active: false,
            fault: None,
        }
    }

    fn lk_traj(steps: Vec<StepRecord>) -> Trajectory {
        Trajectory {
            case: CaseStudy::Lk,
            dt: 0.1,
            substeps: 10,
            steps,
            final_state: vec![0.0; 4],
            supervision_failed_at: None,
            early_stop: None,
        }
    }

    #[test]
    fn lateral_deviation_violates_both() {
        let p = LkParams::default();
        let tr = lk_traj(vec![lk_step(vec![0.95, 0.1, 0.01, 0.01])]);
        let r = monitor_lk(&tr, &p);
        assert_eq!(r.phi_lk_1, Some(0));
        assert_eq!(r.phi_lk, Some(0));
    }

    #[test]
    fn yaw_rate_violates_domain_only() {
        let p = LkParams::default();
        let tr = lk_traj(vec![lk_step(vec![0.1, 0.1, 0.01, 0.3])]);
        let r = monitor_lk(&tr, &p);
        assert_eq!(r.phi_lk_1, None);
        assert_eq!(r.phi_lk, Some(0));
    }

    #[test]
    fn all_zero_lateral_trajectory_clean() {
        let p = LkParams::default();
        let tr = lk_traj(vec![lk_step(vec![0.0; 4]), lk_step(vec![0.0; 4])]);
        let r = monitor_lk(&tr, &p);
        assert_eq!(r, ViolationReport::default());
    }

    /// Monitors are pure: the same trajectory yields identical reports.
    #[test]
    fn monitor_purity() {
        let p = AccParams::default();
        let tr = acc_traj(vec![
            acc_step(0.0, vec![20.0, -1.0, 15.0, 15.0, 5.0, 5.0], 0.0),
            acc_step(0.1, vec![3.5, 2.0, 15.0, 15.0, 5.0, 5.0], 0.0),
        ]);
        assert_eq!(monitor_acc(&tr, &p), monitor_acc(&tr, &p));
    }

    #[test]
    fn unsafe_regions_cover_violations() {
        let p = AccParams::default();
        let unsafe_acc = acc_unsafe_region(&p, 1e-4).unwrap();
        assert!(unsafe_acc.contains_point(&dvector![20.0, 10.0, 5.0], 1e-9)); // 34 > 10
        assert!(unsafe_acc.contains_point(&dvector![1.0, 2.0, 5.0], 1e-9)); // h < 4
        assert!(!unsafe_acc.contains_point(&dvector![5.0, 50.0, 5.0], 1e-9));
        let p = LkParams::default();
        let unsafe_lk = lk_unsafe_region(&p, 1e-4).unwrap();
        assert!(unsafe_lk.contains_point(&dvector![0.95, 0.0, 0.0, 0.0], 1e-9));
        assert!(unsafe_lk.contains_point(&dvector![0.0, 0.0, 0.0, -0.3], 1e-9));
        assert!(!unsafe_lk.contains_point(&dvector![0.0, 0.0, 0.0, 0.0], 1e-9));
    }
}
