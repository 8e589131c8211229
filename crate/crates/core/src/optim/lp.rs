//! Two-phase dense simplex with Bland's rule.
//!
//! Free variables are split as `x = x⁺ − x⁻`; rows with negative right-hand
//! side are negated and given an artificial variable. Bland's rule (lowest
//! eligible index enters, lowest basic index breaks leaving ties) prevents
//! cycling on the degenerate LPs that Fourier–Motzkin redundancy pruning
//! produces in quantity.

use nalgebra::{DMatrix, DVector};

use super::{LpProblem, SolveStatus};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

struct Tableau {
    /// m x ncols constraint coefficients, kept in eliminated form.
    a: DMatrix<f64>,
    /// Right-hand side, invariant: entries stay ≥ -tol.
    rhs: DVector<f64>,
    /// Basic column index per row.
    basis: Vec<usize>,
    /// Maintained reduced-cost row and objective value for the active phase.
    cost: DVector<f64>,
    cost_value: f64,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[(row, col)];
        let ncols = self.a.ncols();
        for j in 0..ncols {
            self.a[(row, j)] /= piv;
        }
        self.rhs[row] /= piv;
        for r in 0..self.a.nrows() {
            if r == row {
                continue;
            }
            let factor = self.a[(r, col)];
            if factor.abs() > 0.0 {
                for j in 0..ncols {
                    self.a[(r, j)] -= factor * self.a[(row, j)];
                }
                self.rhs[r] -= factor * self.rhs[row];
            }
        }
        let factor = self.cost[col];
        if factor.abs() > 0.0 {
            for j in 0..ncols {
                self.cost[j] -= factor * self.a[(row, j)];
            }
            self.cost_value -= factor * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations until optimality, unboundedness, or the
    /// iteration cap. `allowed` masks columns that may enter the basis.
    fn run(&mut self, allowed: &[bool], max_iter: usize) -> SimplexOutcome {
        for _ in 0..max_iter {
            // Bland: lowest-index column with a negative reduced cost.
            let entering = (0..self.a.ncols())
                .find(|&j| allowed[j] && self.cost[j] < -COST_TOL);
            let Some(col) = entering else {
                return SimplexOutcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.nrows() {
                let coeff = self.a[(r, col)];
                if coeff > PIVOT_TOL {
                    let ratio = self.rhs[r] / coeff;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - PIVOT_TOL
                                || (ratio < lratio + PIVOT_TOL
                                    && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return SimplexOutcome::Unbounded,
            }
        }
        SimplexOutcome::IterationLimit
    }
}

enum SimplexOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Solves `min cᵀx s.t. Ax ≤ b` with `x` free.
pub fn solve_lp(p: &LpProblem) -> SolveStatus {
    solve_lp_with_dual(p).0
}

/// Like [`solve_lp`], but on optimality also returns the dual multipliers
/// `y ≥ 0` satisfying `Aᵀy = −c` and complementary slackness. Used by tests
/// that check optimality certificates.
pub fn solve_lp_with_dual(p: &LpProblem) -> (SolveStatus, Option<DVector<f64>>) {
    let n = p.c.len();
    let m = p.a.nrows();

    if m == 0 {
        // Unconstrained: optimal at the origin iff the cost is zero.
        return if p.c.iter().all(|&v| v.abs() <= COST_TOL) {
            (
                SolveStatus::Optimal { x: DVector::zeros(n), value: 0.0 },
                Some(DVector::zeros(0)),
            )
        } else {
            (SolveStatus::Unbounded, None)
        };
    }

    // Equality form: sigma_i * (A_i (x⁺ - x⁻)) + sigma_i * s_i = sigma_i b_i,
    // with sigma chosen so the right-hand side is nonnegative. Rows flipped
    // this way get an artificial variable to start from.
    let mut sigma = vec![1.0f64; m];
    let mut art_rows = Vec::new();
    for i in 0..m {
        if p.b[i] < 0.0 {
            sigma[i] = -1.0;
            art_rows.push(i);
        }
    }
    let n_art = art_rows.len();
    let ncols = 2 * n + m + n_art;
    let slack0 = 2 * n;
    let art0 = 2 * n + m;

    let mut a = DMatrix::zeros(m, ncols);
    let mut rhs = DVector::zeros(m);
    let mut basis = vec![0usize; m];
    for i in 0..m {
        for j in 0..n {
            let v = sigma[i] * p.a[(i, j)];
            a[(i, j)] = v;
            a[(i, n + j)] = -v;
        }
        a[(i, slack0 + i)] = sigma[i];
        rhs[i] = sigma[i] * p.b[i];
        basis[i] = slack0 + i;
    }
    for (k, &i) in art_rows.iter().enumerate() {
        a[(i, art0 + k)] = 1.0;
        basis[i] = art0 + k;
    }

    let max_iter = 50 * (m + ncols) + 200;

    let mut tab = Tableau { a, rhs, basis, cost: DVector::zeros(ncols), cost_value: 0.0 };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for k in 0..n_art {
            tab.cost[art0 + k] = 1.0;
        }
        // Price out the artificial basis.
        for (k, &i) in art_rows.iter().enumerate() {
            let _ = k;
            for j in 0..ncols {
                tab.cost[j] -= tab.a[(i, j)];
            }
            tab.cost_value -= tab.rhs[i];
        }
        let allowed = vec![true; ncols];
        match tab.run(&allowed, max_iter) {
            SimplexOutcome::Optimal => {}
            SimplexOutcome::Unbounded => return (SolveStatus::NumericalFailure, None),
            SimplexOutcome::IterationLimit => return (SolveStatus::NumericalFailure, None),
        }
        if -tab.cost_value > FEAS_TOL {
            return (SolveStatus::Infeasible, None);
        }
        // Drive any artificial still basic (at zero) out of the basis.
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(col) =
                    (0..art0).find(|&j| tab.a[(r, j)].abs() > PIVOT_TOL)
                {
                    tab.pivot(r, col);
                }
            }
        }
    }

    // Phase 2: minimize the real objective; artificials barred from entering.
    let mut cost = DVector::zeros(ncols);
    for j in 0..n {
        cost[j] = p.c[j];
        cost[n + j] = -p.c[j];
    }
    let mut cost_value = 0.0;
    for r in 0..m {
        let b = tab.basis[r];
        let cb = cost[b];
        if cb.abs() > 0.0 {
            for j in 0..ncols {
                cost[j] -= cb * tab.a[(r, j)];
            }
            cost_value -= cb * tab.rhs[r];
        }
    }
    tab.cost = cost;
    tab.cost_value = cost_value;

    let mut allowed = vec![true; ncols];
    for j in art0..ncols {
        allowed[j] = false;
    }
    match tab.run(&allowed, max_iter) {
        SimplexOutcome::Optimal => {}
        SimplexOutcome::Unbounded => return (SolveStatus::Unbounded, None),
        SimplexOutcome::IterationLimit => return (SolveStatus::NumericalFailure, None),
    }

    let mut x = DVector::zeros(n);
    for r in 0..m {
        let b = tab.basis[r];
        if b < n {
            x[b] += tab.rhs[r];
        } else if b < 2 * n {
            x[b - n] -= tab.rhs[r];
        }
    }
    let value = p.c.dot(&x);

    // Dual multipliers from the optimal basis: solve Bᵀπ = c_B on the
    // original equality-form columns, then y_i = -sigma_i π_i.
    let dual = {
        let mut bmat = DMatrix::zeros(m, m);
        let mut cb = DVector::zeros(m);
        for (r, &bj) in tab.basis.iter().enumerate() {
            for i in 0..m {
                bmat[(i, r)] = original_column(p, &sigma, slack0, art0, bj, i);
            }
            cb[r] = if bj < n {
                p.c[bj]
            } else if bj < 2 * n {
                -p.c[bj - n]
            } else {
                0.0
            };
        }
        bmat.transpose().lu().solve(&cb).map(|pi| {
            DVector::from_fn(m, |i, _| (-sigma[i] * pi[i]).max(0.0))
        })
    };

    (SolveStatus::Optimal { x, value }, dual)
}

fn original_column(
    p: &LpProblem,
    sigma: &[f64],
    slack0: usize,
    art0: usize,
    col: usize,
    row: usize,
) -> f64 {
    let n = p.c.len();
    if col < n {
        sigma[row] * p.a[(row, col)]
    } else if col < 2 * n {
        -sigma[row] * p.a[(row, col - n)]
    } else if col < art0 {
        if col - slack0 == row {
            sigma[row]
        } else {
            0.0
        }
    } else {
        // Artificial columns are unit vectors on their defining row.
        let art_index = col - art0;
        let mut k = 0;
        for (i, &s) in sigma.iter().enumerate() {
            if s < 0.0 {
                if k == art_index {
                    return if i == row { 1.0 } else { 0.0 };
                }
                k += 1;
            }
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn lp(c: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>) -> LpProblem {
        LpProblem::new(DVector::from_vec(c), a, DVector::from_vec(b)).unwrap()
    }

    #[test]
    fn bounded_segment() {
        // min -x s.t. x <= 3, -x <= 0  ->  x = 3, value -3
        let p = lp(vec![-1.0], dmatrix![1.0; -1.0], vec![3.0, 0.0]);
        let (x, v) = solve_lp(&p).optimal().unwrap();
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v, -3.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_bounds() {
        // min x s.t. x <= -1, -x <= 0
        let p = lp(vec![1.0], dmatrix![1.0; -1.0], vec![-1.0, 0.0]);
        assert_eq!(solve_lp(&p), SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        // min -x s.t. -x <= 0
        let p = lp(vec![-1.0], dmatrix![-1.0], vec![0.0]);
        assert_eq!(solve_lp(&p), SolveStatus::Unbounded);
    }

    #[test]
    fn simplex_vertex() {
        // max x+2y+3z over the 3-simplex -> 3 at e3; as min of the negation.
        let a = dmatrix![
            -1.0, 0.0, 0.0;
            0.0, -1.0, 0.0;
            0.0, 0.0, -1.0;
            1.0, 1.0, 1.0
        ];
        let p = lp(vec![-1.0, -2.0, -3.0], a, vec![0.0, 0.0, 0.0, 1.0]);
        let (x, v) = solve_lp(&p).optimal().unwrap();
        assert_abs_diff_eq!(v, -3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_square_does_not_cycle() {
        // Redundant duplicated rows force degenerate pivots.
        let a = dmatrix![
            1.0, 0.0;
            1.0, 0.0;
            0.0, 1.0;
            -1.0, 0.0;
            0.0, -1.0;
            1.0, 1.0
        ];
        let p = lp(vec![-1.0, -1.0], a, vec![1.0, 1.0, 1.0, 0.0, 0.0, 2.0]);
        let (x, _) = solve_lp(&p).optimal().unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-9);
    }

    /// Random LPs over boxes: compare against coordinate-wise closed form and
    /// check the dual certificate (feasibility + complementary slackness).
    #[test]
    fn random_box_duals() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.random_range(1..5usize);
            let mut rows = Vec::new();
            let mut b = Vec::new();
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for j in 0..n {
                let l: f64 = rng.random_range(-3.0..0.0);
                let h: f64 = rng.random_range(0.0..3.0);
                lo.push(l);
                hi.push(h);
                let mut up = vec![0.0; n];
                up[j] = 1.0;
                rows.push(up);
                b.push(h);
                let mut dn = vec![0.0; n];
                dn[j] = -1.0;
                rows.push(dn);
                b.push(-l);
            }
            let a = DMatrix::from_fn(2 * n, n, |i, j| rows[i][j]);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = lp(c.clone(), a.clone(), b.clone());
            let (status, dual) = solve_lp_with_dual(&p);
            let (x, v) = status.optimal().unwrap();
            let expected: f64 = (0..n)
                .map(|j| if c[j] >= 0.0 { c[j] * lo[j] } else { c[j] * hi[j] })
                .sum();
            assert_abs_diff_eq!(v, expected, epsilon = 1e-8);
            let y = dual.unwrap();
            // Dual feasibility: Aᵀy = -c, y >= 0.
            let res = (a.transpose() * &y) + DVector::from_vec(c.clone());
            assert!(res.abs().max() < 1e-6, "dual residual {res}");
            // Complementary slackness.
            for i in 0..2 * n {
                let slack = b[i] - (a.row(i) * &x)[0];
                assert!((y[i] * slack).abs() < 1e-6);
            }
        }
    }
}
