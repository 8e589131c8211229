//! Primal active-set method for convex QPs.
//!
//! Classic equality-constrained-subproblem iteration: solve the KKT system on
//! the working set, step to the nearest blocking constraint, drop working
//! constraints with negative multipliers (lowest index first, mirroring
//! Bland's rule in the LP). Feasible starting points come from a phase-one LP.

use nalgebra::{DMatrix, DVector};

use super::{LpProblem, QpProblem, SolveStatus};

const STEP_TOL: f64 = 1e-11;
const MULT_TOL: f64 = 1e-9;
const ACT_TOL: f64 = 1e-9;

/// Solves `min ½xᵀHx + fᵀx s.t. Ax ≤ b, A_eq x = b_eq`.
pub fn solve_qp(p: &QpProblem) -> SolveStatus {
    let n = p.f.len();
    let m = p.a.nrows();
    let meq = p.a_eq.nrows();

    if m == 0 && meq == 0 {
        return unconstrained_min(p);
    }

    // Phase one: any feasible point.
    let mut x = match feasible_point(p) {
        Ok(x) => x,
        Err(status) => return status,
    };

    // Working set holds inequality row indices; equalities are always active.
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (n + m + meq) + 100;

    for _ in 0..max_iter {
        let grad = &p.h * &x + &p.f;
        let n_act = meq + working.len();

        // KKT system for the equality-constrained subproblem.
        let mut kkt = DMatrix::zeros(n + n_act, n + n_act);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
        for (r, row) in (0..meq).map(|i| (i, p.a_eq.row(i))).chain(
            working.iter().enumerate().map(|(k, &i)| (meq + k, p.a.row(i))),
        ) {
            for j in 0..n {
                kkt[(n + r, j)] = row[j];
                kkt[(j, n + r)] = row[j];
            }
        }
        let mut rhs = DVector::zeros(n + n_act);
        rhs.rows_mut(0, n).copy_from(&(-&grad));

        let sol = match kkt.clone().full_piv_lu().solve(&rhs) {
            Some(s) => s,
            None => {
                // Singular KKT: tiny Tikhonov bump, then give up.
                let mut kkt2 = kkt;
                for j in 0..n {
                    kkt2[(j, j)] += 1e-10;
                }
                match kkt2.full_piv_lu().solve(&rhs) {
                    Some(s) => s,
                    None => return SolveStatus::NumericalFailure,
                }
            }
        };
        let step = sol.rows(0, n).into_owned();

        if step.abs().max() <= STEP_TOL * (1.0 + x.abs().max()) {
            // Stationary on the working set: check inequality multipliers.
            let lambda = sol.rows(n, n_act);
            let mut drop_k: Option<usize> = None;
            for (k, &row) in working.iter().enumerate() {
                let _ = row;
                if lambda[meq + k] < -MULT_TOL && drop_k.is_none() {
                    drop_k = Some(k);
                }
            }
            match drop_k {
                None => {
                    let value = 0.5 * (&x).dot(&(&p.h * &x)) + p.f.dot(&x);
                    return SolveStatus::Optimal { x, value };
                }
                Some(k) => {
                    working.remove(k);
                }
            }
        } else {
            // Step toward the subproblem minimizer; stop at the first
            // blocking inequality not already in the working set.
            let mut alpha = 1.0f64;
            let mut blocking: Option<usize> = None;
            for i in 0..m {
                if working.contains(&i) {
                    continue;
                }
                let incr = (p.a.row(i) * &step)[0];
                if incr > STEP_TOL {
                    let slack = p.b[i] - (p.a.row(i) * &x)[0];
                    let ratio = (slack / incr).max(0.0);
                    if ratio < alpha - 1e-14 {
                        alpha = ratio;
                        blocking = Some(i);
                    } else if (ratio - alpha).abs() <= 1e-14 {
                        // Deterministic tie-break: lowest row index.
                        if let Some(bi) = blocking {
                            if i < bi {
                                blocking = Some(i);
                            }
                        }
                    }
                }
            }
            x += alpha * &step;
            if let Some(i) = blocking {
                if alpha < 1.0 {
                    working.push(i);
                    working.sort_unstable();
                }
            }
        }
    }
    SolveStatus::NumericalFailure
}

fn unconstrained_min(p: &QpProblem) -> SolveStatus {
    let n = p.f.len();
    match p.h.clone().cholesky() {
        Some(ch) => {
            let x = ch.solve(&(-&p.f));
            let value = 0.5 * x.dot(&(&p.h * &x)) + p.f.dot(&x);
            SolveStatus::Optimal { x, value }
        }
        None => {
            // Singular PSD cost: least-squares stationary point if one exists.
            let eig = p.h.clone().symmetric_eigen();
            let mut y = DVector::zeros(n);
            let rhs = eig.eigenvectors.transpose() * (-&p.f);
            for i in 0..n {
                if eig.eigenvalues[i] > 1e-12 {
                    y[i] = rhs[i] / eig.eigenvalues[i];
                } else if rhs[i].abs() > 1e-9 {
                    return SolveStatus::Unbounded;
                }
            }
            let x = &eig.eigenvectors * y;
            let value = 0.5 * x.dot(&(&p.h * &x)) + p.f.dot(&x);
            SolveStatus::Optimal { x, value }
        }
    }
}

fn feasible_point(p: &QpProblem) -> Result<DVector<f64>, SolveStatus> {
    let n = p.f.len();
    let meq = p.a_eq.nrows();
    let mut a = DMatrix::zeros(p.a.nrows() + 2 * meq, n);
    let mut b = DVector::zeros(p.a.nrows() + 2 * meq);
    a.view_mut((0, 0), (p.a.nrows(), n)).copy_from(&p.a);
    b.rows_mut(0, p.a.nrows()).copy_from(&p.b);
    for i in 0..meq {
        for j in 0..n {
            a[(p.a.nrows() + 2 * i, j)] = p.a_eq[(i, j)];
            a[(p.a.nrows() + 2 * i + 1, j)] = -p.a_eq[(i, j)];
        }
        b[p.a.nrows() + 2 * i] = p.b_eq[i];
        b[p.a.nrows() + 2 * i + 1] = -p.b_eq[i];
    }
    let lp = LpProblem { c: DVector::zeros(n), a, b };
    match super::solve_lp(&lp) {
        SolveStatus::Optimal { x, .. } => {
            // Nudge exactly-feasible answer in case of round-off on equalities.
            let viol = (0..p.a.nrows())
                .map(|i| ((p.a.row(i) * &x)[0] - p.b[i]).max(0.0))
                .fold(0.0f64, f64::max);
            if viol > 100.0 * ACT_TOL {
                Err(SolveStatus::NumericalFailure)
            } else {
                Ok(x)
            }
        }
        SolveStatus::Infeasible => Err(SolveStatus::Infeasible),
        _ => Err(SolveStatus::NumericalFailure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn halfline_projection() {
        // min x^2 s.t. x >= 1  ->  x = 1
        let p = QpProblem::new(dmatrix![2.0], dvector![0.0], dmatrix![-1.0], dvector![-1.0])
            .unwrap();
        let (x, v) = solve_qp(&p).optimal().unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn unconstrained_parabola() {
        // min (x-2)^2 = x^2 - 4x + 4 (constant dropped)
        let p = QpProblem::new(
            dmatrix![2.0],
            dvector![-4.0],
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let (x, _) = solve_qp(&p).optimal().unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_box() {
        let p = QpProblem::new(
            dmatrix![2.0],
            dvector![0.0],
            dmatrix![1.0; -1.0],
            dvector![-1.0, 0.0],
        )
        .unwrap();
        assert_eq!(solve_qp(&p), SolveStatus::Infeasible);
    }

    #[test]
    fn equality_constrained() {
        // min x^2 + y^2 s.t. x + y = 2 -> (1, 1)
        let p = QpProblem::with_equalities(
            DMatrix::identity(2, 2) * 2.0,
            DVector::zeros(2),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            dmatrix![1.0, 1.0],
            dvector![2.0],
        )
        .unwrap();
        let (x, _) = solve_qp(&p).optimal().unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn asymmetric_cost_rejected() {
        let r = QpProblem::new(
            dmatrix![1.0, 0.5; 0.0, 1.0],
            DVector::zeros(2),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        );
        assert!(r.is_err());
    }

    /// min ||x - x0||^2 over a random box equals the componentwise clamp.
    #[test]
    fn box_projection_matches_clamp() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.random_range(1..5usize);
            let mut a = DMatrix::zeros(2 * n, n);
            let mut b = DVector::zeros(2 * n);
            let mut lo = vec![0.0f64; n];
            let mut hi = vec![0.0; n];
            for j in 0..n {
                lo[j] = rng.random_range(-2.0..0.0);
                hi[j] = rng.random_range(0.0..2.0);
                a[(2 * j, j)] = 1.0;
                b[2 * j] = hi[j];
                a[(2 * j + 1, j)] = -1.0;
                b[2 * j + 1] = -lo[j];
            }
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-4.0f64..4.0));
            let p = QpProblem::new(
                DMatrix::identity(n, n) * 2.0,
                -2.0 * &x0,
                a,
                b,
            )
            .unwrap();
            let (x, _) = solve_qp(&p).optimal().unwrap();
            for j in 0..n {
                let clamp = x0[j].clamp(lo[j], hi[j]);
                assert_abs_diff_eq!(x[j], clamp, epsilon = 1e-7);
            }
        }
    }

    /// KKT residuals at returned solutions stay below 1e-6.
    #[test]
    fn kkt_residuals() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..4usize);
            // Random PD cost via LLᵀ + I.
            let l = DMatrix::from_fn(n, n, |i, j| {
                if i >= j { rng.random_range(-1.0..1.0) } else { 0.0 }
            });
            let h = &l * l.transpose() + DMatrix::identity(n, n);
            let f = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let m = rng.random_range(1..6usize);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(m, |_, _| rng.random_range(0.1..2.0));
            let p = QpProblem::new(h.clone(), f.clone(), a.clone(), b.clone()).unwrap();
            if let SolveStatus::Optimal { x, .. } = solve_qp(&p) {
                // Primal feasibility.
                for i in 0..m {
                    assert!((a.row(i) * &x)[0] <= b[i] + 1e-7);
                }
                // Stationarity: grad must lie in the cone of active rows.
                let grad = &h * &x + &f;
                let active: Vec<usize> = (0..m)
                    .filter(|&i| ((a.row(i) * &x)[0] - b[i]).abs() < 1e-6)
                    .collect();
                if active.is_empty() {
                    assert!(grad.abs().max() < 1e-6, "free minimum not stationary");
                } else {
                    // Solve least squares for multipliers, then check residual
                    // and sign.
                    let at = DMatrix::from_fn(n, active.len(), |r, k| a[(active[k], r)]);
                    let lam = at
                        .clone()
                        .svd(true, true)
                        .solve(&(-&grad), 1e-12)
                        .unwrap();
                    let res = (&at * &lam) + &grad;
                    assert!(res.abs().max() < 1e-6, "KKT residual {}", res.abs().max());
                    for v in lam.iter() {
                        assert!(*v > -1e-6, "negative multiplier {v}");
                    }
                }
            } else {
                panic!("random PD QP should be solvable");
            }
        }
    }
}
