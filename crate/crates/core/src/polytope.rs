//! H-polytope geometry kernel.
//!
//! Every set this crate manipulates (safe sets, invariant sets, dual-game
//! layers, admissible-input sets) is an intersection of half-spaces
//! `{x : Ax ≤ b}` or a finite union of such polytopes. Constraint rows are
//! scaled to unit Euclidean norm on construction so that all tolerances are
//! geometric distances. Projection is Fourier–Motzkin with LP redundancy
//! pruning after every eliminated dimension; dimensions stay small (≤ 5 plus
//! inputs) so the exactness is worth the blow-up.
//!
//! Vertex enumeration (`enumerate_vertices`) exists for test oracles and for
//! the one-shot enclosing-ellipsoid fit; fixed-point iterations never call it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{solve_lp, LpProblem, SolveStatus};

/// Geometric tolerances shared by the set predicates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// LP-based feasibility / containment tolerance.
    pub feas: f64,
    /// Facet-membership tolerance (boundary tests).
    pub facet: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas: 1e-7, facet: 1e-6 }
    }
}

/// Coefficient magnitude below which a (unit-norm) row is treated as not
/// involving a dimension.
const ZERO_COEFF: f64 = 1e-9;
/// Vertex deduplication distance.
const VERTEX_DEDUP: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("operation requires a non-empty polytope")]
    EmptySet,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("LP solver failure: {status:?} while {context}")]
    Solver { status: SolveStatus, context: &'static str },
    #[error("vertex enumeration limited to small systems ({0})")]
    TooLarge(String),
}

/// Convex polyhedron `{x ∈ R^dim : Ax ≤ b}` with unit-norm rows.
///
/// Zero rows are resolved at construction: trivially true ones are dropped,
/// trivially false ones collapse the polytope to a canonical empty set.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    dim: usize,
}

impl Serialize for Polytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = PolytopeRepr {
            a: self.a.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect(),
            b: self.b.iter().copied().collect(),
            dim: self.dim,
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PolytopeRepr::deserialize(d)?;
        let m = repr.b.len();
        if repr.a.len() != m * repr.dim {
            return Err(serde::de::Error::custom("A is not m*dim row-major"));
        }
        let a = DMatrix::from_row_slice(m, repr.dim, &repr.a);
        Polytope::new(a, DVector::from_vec(repr.b)).map_err(serde::de::Error::custom)
    }
}

impl Polytope {
    /// Builds a polytope from raw rows; rows are normalized to unit norm.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, GeometryError> {
        if a.nrows() != b.len() {
            return Err(GeometryError::Dimension(format!(
                "A has {} rows, b has {}",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("polytope data"));
        }
        let dim = a.ncols();
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(a.nrows());
        for i in 0..a.nrows() {
            let r = a.row(i).transpose();
            let norm = r.norm();
            if norm <= ZERO_COEFF {
                if b[i] < -ZERO_COEFF {
                    return Ok(Self::empty(dim));
                }
                continue; // 0 ≤ b: vacuous
            }
            rows.push((r / norm, b[i] / norm));
        }
        let m = rows.len();
        let a = DMatrix::from_fn(m, dim, |i, j| rows[i].0[j]);
        let b = DVector::from_fn(m, |i, _| rows[i].1);
        Ok(Self { a, b, dim })
    }

    /// The full space of the given dimension (no constraints).
    pub fn full_space(dim: usize) -> Self {
        Self { a: DMatrix::zeros(0, dim), b: DVector::zeros(0), dim }
    }

    /// A canonical empty polytope of the given dimension.
    pub fn empty(dim: usize) -> Self {
        assert!(dim >= 1, "empty polytope needs at least one dimension");
        let mut a = DMatrix::zeros(2, dim);
        a[(0, 0)] = 1.0;
        a[(1, 0)] = -1.0;
        Self { a, b: DVector::from_vec(vec![-1.0, 0.0]), dim }
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`. Non-finite bounds are omitted.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::Dimension("box bounds length mismatch".into()));
        }
        let dim = lo.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for j in 0..dim {
            if hi[j].is_finite() {
                let mut r = vec![0.0; dim];
                r[j] = 1.0;
                rows.push(r);
                rhs.push(hi[j]);
            }
            if lo[j].is_finite() {
                let mut r = vec![0.0; dim];
                r[j] = -1.0;
                rows.push(r);
                rhs.push(-lo[j]);
            }
        }
        let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(a, DVector::from_vec(rhs))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn rows(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a, &self.b)
    }

    /// True iff `{x : Ax ≤ b} = ∅`, decided by LP feasibility with slack
    /// `tol.feas` on every row.
    pub fn is_empty(&self, tol: &Tolerances) -> Result<bool, GeometryError> {
        if self.a.nrows() == 0 {
            return Ok(false);
        }
        let relaxed = &self.b + DVector::from_element(self.b.len(), tol.feas);
        let lp = LpProblem { c: DVector::zeros(self.dim), a: self.a.clone(), b: relaxed };
        match solve_lp(&lp) {
            SolveStatus::Optimal { .. } => Ok(false),
            SolveStatus::Infeasible => Ok(true),
            status => Err(GeometryError::Solver { status, context: "emptiness check" }),
        }
    }

    /// Maximum of `c·x` over the polytope.
    pub fn support(&self, c: &DVector<f64>) -> Result<Support, GeometryError> {
        if c.len() != self.dim {
            return Err(GeometryError::Dimension("support direction".into()));
        }
        let lp = LpProblem { c: -c, a: self.a.clone(), b: self.b.clone() };
        match solve_lp(&lp) {
            SolveStatus::Optimal { x, value } => Ok(Support::Bounded { value: -value, arg: x }),
            SolveStatus::Unbounded => Ok(Support::Unbounded),
            SolveStatus::Infeasible => Err(GeometryError::EmptySet),
            status => Err(GeometryError::Solver { status, context: "support function" }),
        }
    }

    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.a.nrows()).all(|i| (self.a.row(i) * x)[0] <= self.b[i] + tol)
    }

    /// Stacks constraints and prunes redundancy.
    pub fn intersect(&self, other: &Polytope, tol: &Tolerances) -> Result<Polytope, GeometryError> {
        if other.dim != self.dim {
            return Err(GeometryError::Dimension("intersect dims differ".into()));
        }
        let m = self.a.nrows() + other.a.nrows();
        let mut a = DMatrix::zeros(m, self.dim);
        a.view_mut((0, 0), (self.a.nrows(), self.dim)).copy_from(&self.a);
        a.view_mut((self.a.nrows(), 0), (other.a.nrows(), self.dim)).copy_from(&other.a);
        let mut b = DVector::zeros(m);
        b.rows_mut(0, self.b.len()).copy_from(&self.b);
        b.rows_mut(self.b.len(), other.b.len()).copy_from(&other.b);
        Polytope::new(a, b)?.remove_redundant(tol)
    }

    /// True iff `other ⊆ self`: every row of `self` is satisfied by the
    /// support of `other` up to `tol.feas`. The empty set is contained in
    /// everything.
    pub fn contains_polytope(
        &self,
        other: &Polytope,
        tol: &Tolerances,
    ) -> Result<bool, GeometryError> {
        if other.dim != self.dim {
            return Err(GeometryError::Dimension("containment dims differ".into()));
        }
        if other.is_empty(tol)? {
            return Ok(true);
        }
        for i in 0..self.a.nrows() {
            match other.support(&self.a.row(i).transpose())? {
                Support::Bounded { value, .. } => {
                    if value > self.b[i] + tol.feas {
                        return Ok(false);
                    }
                }
                Support::Unbounded => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Removes rows that cannot change the feasible set. Exact duplicates are
    /// collapsed first; each surviving row is then tested by maximizing its
    /// left-hand side subject to the remaining rows.
    pub fn remove_redundant(&self, tol: &Tolerances) -> Result<Polytope, GeometryError> {
        if self.a.nrows() <= 1 {
            return Ok(self.clone());
        }
        if self.is_empty(tol)? {
            return Ok(Polytope::empty(self.dim));
        }
        // Duplicate / dominated-parallel collapse.
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        'outer: for i in 0..self.a.nrows() {
            let n_i = self.a.row(i).transpose();
            let b_i = self.b[i];
            for (n_j, b_j) in rows.iter_mut() {
                if (&n_i - &*n_j).norm() < ZERO_COEFF {
                    *b_j = b_j.min(b_i);
                    continue 'outer;
                }
            }
            rows.push((n_i, b_i));
        }
        // Sequential LP pruning over the live set.
        let mut keep: Vec<bool> = vec![true; rows.len()];
        for i in 0..rows.len() {
            let mut a_rows = Vec::new();
            let mut b_rows = Vec::new();
            for (j, r) in rows.iter().enumerate() {
                if j != i && keep[j] {
                    a_rows.push(r.0.clone());
                    b_rows.push(r.1);
                }
            }
            if a_rows.is_empty() {
                continue;
            }
            // Cap the objective so the test LP is never unbounded.
            a_rows.push(rows[i].0.clone());
            b_rows.push(rows[i].1 + 1.0);
            let m = a_rows.len();
            let a = DMatrix::from_fn(m, self.dim, |r, c| a_rows[r][c]);
            let lp = LpProblem {
                c: -rows[i].0.clone(),
                a,
                b: DVector::from_vec(b_rows),
            };
            match solve_lp(&lp) {
                SolveStatus::Optimal { value, .. } => {
                    if -value <= rows[i].1 + tol.feas {
                        keep[i] = false;
                    }
                }
                SolveStatus::Infeasible => {
                    // Remaining rows alone are infeasible.
                    return Ok(Polytope::empty(self.dim));
                }
                status => {
                    return Err(GeometryError::Solver { status, context: "redundancy check" })
                }
            }
        }
        let kept: Vec<usize> = (0..rows.len()).filter(|&i| keep[i]).collect();
        let a = DMatrix::from_fn(kept.len(), self.dim, |r, c| rows[kept[r]].0[c]);
        let b = DVector::from_fn(kept.len(), |r, _| rows[kept[r]].1);
        Polytope::new(a, b)
    }

    /// Exact orthogonal projection onto the (ascending-sorted) kept
    /// dimensions via Fourier–Motzkin elimination, pruning redundancy after
    /// each eliminated dimension.
    pub fn project(&self, keep_dims: &[usize], tol: &Tolerances) -> Result<Polytope, GeometryError> {
        if keep_dims.is_empty() {
            return Err(GeometryError::Dimension("keep_dims must be non-empty".into()));
        }
        let mut keep: Vec<usize> = keep_dims.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.iter().any(|&d| d >= self.dim) {
            return Err(GeometryError::Dimension("keep_dims out of range".into()));
        }
        let mut current = self.clone();
        // Map from current column index to original dimension.
        let mut cols: Vec<usize> = (0..self.dim).collect();
        while cols.len() > keep.len() {
            // Pick the cheapest elimination: minimize pos*neg fan-out.
            let candidates: Vec<usize> = (0..cols.len())
                .filter(|&c| !keep.contains(&cols[c]))
                .collect();
            let col = *candidates
                .iter()
                .min_by_key(|&&c| {
                    let (mut pos, mut neg) = (0usize, 0usize);
                    for i in 0..current.a.nrows() {
                        let v = current.a[(i, c)];
                        if v > ZERO_COEFF {
                            pos += 1;
                        } else if v < -ZERO_COEFF {
                            neg += 1;
                        }
                    }
                    pos * neg
                })
                .expect("at least one dimension to eliminate");
            current = current.eliminate_column(col)?.remove_redundant(tol)?;
            cols.remove(col);
        }
        // Columns are already in ascending original order; nothing to permute.
        Ok(current)
    }

    /// One Fourier–Motzkin step: eliminates column `col`.
    fn eliminate_column(&self, col: usize) -> Result<Polytope, GeometryError> {
        let m = self.a.nrows();
        let mut zero_rows = Vec::new();
        let mut pos_rows = Vec::new();
        let mut neg_rows = Vec::new();
        for i in 0..m {
            let v = self.a[(i, col)];
            if v > ZERO_COEFF {
                pos_rows.push(i);
            } else if v < -ZERO_COEFF {
                neg_rows.push(i);
            } else {
                zero_rows.push(i);
            }
        }
        let new_dim = self.dim - 1;
        let keep_cols: Vec<usize> = (0..self.dim).filter(|&c| c != col).collect();
        let mut rows = Vec::with_capacity(zero_rows.len() + pos_rows.len() * neg_rows.len());
        let mut rhs = Vec::with_capacity(rows.capacity());
        for &i in &zero_rows {
            rows.push(keep_cols.iter().map(|&c| self.a[(i, c)]).collect::<Vec<_>>());
            rhs.push(self.b[i]);
        }
        for &p in &pos_rows {
            let wp = self.a[(p, col)];
            for &q in &neg_rows {
                let wq = -self.a[(q, col)];
                let row: Vec<f64> = keep_cols
                    .iter()
                    .map(|&c| self.a[(p, c)] / wp + self.a[(q, c)] / wq)
                    .collect();
                rows.push(row);
                rhs.push(self.b[p] / wp + self.b[q] / wq);
            }
        }
        let a = DMatrix::from_fn(rows.len(), new_dim, |i, j| rows[i][j]);
        Polytope::new(a, DVector::from_vec(rhs))
    }

    /// The interval `{x_n : (y, x_n) ∈ P}` obtained by fixing the first
    /// `n − 1` coordinates to `y`.
    pub fn slice_last_dim(&self, y: &DVector<f64>, tol: &Tolerances) -> Interval1D {
        assert!(self.dim >= 2, "slice_last_dim needs dim >= 2");
        assert_eq!(y.len(), self.dim - 1);
        let n = self.dim;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.a.nrows() {
            let coeff = self.a[(i, n - 1)];
            let fixed: f64 = (0..n - 1).map(|j| self.a[(i, j)] * y[j]).sum();
            let rhs = self.b[i] - fixed;
            if coeff > ZERO_COEFF {
                hi = hi.min(rhs / coeff);
            } else if coeff < -ZERO_COEFF {
                lo = lo.max(rhs / coeff);
            } else if rhs < -tol.feas {
                return Interval1D::Empty;
            }
        }
        if lo > hi + tol.feas {
            Interval1D::Empty
        } else {
            Interval1D::Range { lo: lo.min(hi), hi }
        }
    }

    /// Chebyshev center and radius: the deepest ball inside the polytope.
    /// A negative radius signals emptiness; `None` means the LP degenerated
    /// (e.g. unbounded radius on a full-dimensional cone).
    pub fn chebyshev(&self) -> Option<(DVector<f64>, f64)> {
        let n = self.dim;
        let m = self.a.nrows();
        if m == 0 {
            return None;
        }
        // Variables (x, r): A x + r ≤ b, maximize r.
        let mut a = DMatrix::zeros(m, n + 1);
        a.view_mut((0, 0), (m, n)).copy_from(&self.a);
        for i in 0..m {
            a[(i, n)] = 1.0;
        }
        let mut c = DVector::zeros(n + 1);
        c[n] = -1.0;
        let lp = LpProblem { c, a, b: self.b.clone() };
        match solve_lp(&lp) {
            SolveStatus::Optimal { x, .. } => {
                let center = x.rows(0, n).into_owned();
                let radius = x[n];
                Some((center, radius))
            }
            _ => None,
        }
    }

    /// All vertices by brute-force row-subset enumeration. Test oracle and
    /// one-shot ellipsoid input only; guards reject sizes where the
    /// combinatorics explode.
    pub fn enumerate_vertices(&self, tol: &Tolerances) -> Result<Vec<DVector<f64>>, GeometryError> {
        let n = self.dim;
        let m = self.a.nrows();
        if n > 6 || m > 48 {
            return Err(GeometryError::TooLarge(format!("m={m}, n={n}")));
        }
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..n).collect();
        if m < n {
            return Ok(vertices);
        }
        loop {
            let sub = DMatrix::from_fn(n, n, |r, c| self.a[(idx[r], c)]);
            let rhs = DVector::from_fn(n, |r, _| self.b[idx[r]]);
            let lu = sub.clone().full_piv_lu();
            if lu.is_invertible() {
                if let Some(x) = lu.solve(&rhs) {
                    let residual = (&sub * &x - &rhs).abs().max();
                    if x.iter().all(|v| v.is_finite())
                        && residual < 1e-7
                        && self.contains_point(&x, tol.feas.max(1e-7))
                        && !vertices.iter().any(|v| (v - &x).norm() < VERTEX_DEDUP)
                    {
                        vertices.push(x);
                    }
                }
            }
            // Next n-combination of m rows.
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(vertices);
                }
                k -= 1;
                if idx[k] != k + m - n {
                    idx[k] += 1;
                    for j in k + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Block product `self × other` over concatenated coordinates.
    pub fn cartesian_product(&self, other: &Polytope) -> Polytope {
        let dim = self.dim + other.dim;
        let m = self.a.nrows() + other.a.nrows();
        let mut a = DMatrix::zeros(m, dim);
        a.view_mut((0, 0), (self.a.nrows(), self.dim)).copy_from(&self.a);
        a.view_mut((self.a.nrows(), self.dim), (other.a.nrows(), other.dim))
            .copy_from(&other.a);
        let mut b = DVector::zeros(m);
        b.rows_mut(0, self.b.len()).copy_from(&self.b);
        b.rows_mut(self.b.len(), other.b.len()).copy_from(&other.b);
        Polytope { a, b, dim }
    }

    /// Reorders coordinates: new column `j` is old column `perm[j]`.
    pub fn permute_dims(&self, perm: &[usize]) -> Result<Polytope, GeometryError> {
        if perm.len() != self.dim {
            return Err(GeometryError::Dimension("permutation length".into()));
        }
        let a = DMatrix::from_fn(self.a.nrows(), self.dim, |i, j| self.a[(i, perm[j])]);
        Ok(Polytope { a, b: self.b.clone(), dim: self.dim })
    }

    /// Complement of this polytope within `domain`, as the union of one part
    /// per negated row. Empty parts are pruned.
    pub fn complement_within(
        &self,
        domain: &Polytope,
        tol: &Tolerances,
    ) -> Result<UnionRegion, GeometryError> {
        let mut parts = Vec::new();
        for i in 0..self.a.nrows() {
            let neg = Polytope::new(
                DMatrix::from_fn(1, self.dim, |_, j| -self.a[(i, j)]),
                DVector::from_element(1, -self.b[i]),
            )?;
            let part = neg.intersect(domain, tol)?;
            if !part.is_empty(tol)? {
                parts.push(part);
            }
        }
        Ok(UnionRegion::new(parts))
    }
}

/// Result of a support-function evaluation.
#[derive(Clone, Debug)]
pub enum Support {
    Bounded { value: f64, arg: DVector<f64> },
    Unbounded,
}

impl Support {
    pub fn value(&self) -> Option<f64> {
        match self {
            Support::Bounded { value, .. } => Some(*value),
            Support::Unbounded => None,
        }
    }
}

/// Finite union of same-dimension polytopes. Parts may overlap.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(transparent)]
pub struct UnionRegion {
    parts: Vec<Polytope>,
}

impl UnionRegion {
    pub fn new(parts: Vec<Polytope>) -> Self {
        if let Some(first) = parts.first() {
            let d = first.dim();
            assert!(parts.iter().all(|p| p.dim() == d), "union parts must share dim");
        }
        Self { parts }
    }

    pub fn from_polytope(p: Polytope) -> Self {
        Self { parts: vec![p] }
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[Polytope] {
        &self.parts
    }

    pub fn dim(&self) -> Option<usize> {
        self.parts.first().map(|p| p.dim())
    }

    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.parts.iter().any(|p| p.contains_point(x, tol))
    }

    pub fn is_empty(&self, tol: &Tolerances) -> Result<bool, GeometryError> {
        for p in &self.parts {
            if !p.is_empty(tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Drops parts that are empty within tolerance.
    pub fn prune_empty(self, tol: &Tolerances) -> Result<Self, GeometryError> {
        let mut parts = Vec::with_capacity(self.parts.len());
        for p in self.parts {
            if !p.is_empty(tol)? {
                parts.push(p);
            }
        }
        Ok(Self { parts })
    }

    /// True iff `x` lies strictly inside some part: `Ax ≤ b − margin`
    /// componentwise (rows are unit-norm, so `margin` is a distance).
    pub fn in_interior(&self, x: &DVector<f64>, margin: f64) -> bool {
        assert!(margin > 0.0, "interior margin must be positive");
        self.parts.iter().any(|p| {
            (0..p.a.nrows()).all(|i| (p.a.row(i) * x)[0] <= p.b[i] - margin)
        })
    }

    /// Indices of parts whose Chebyshev radius is below `tol` — numerically
    /// degenerate (lower-dimensional) pieces worth flagging in diagnostics.
    pub fn thin_parts(&self, tol: f64) -> Vec<usize> {
        self.parts
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.chebyshev(), Some((_, r)) if r < tol))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Closed interval or the empty set; the 1-D result of slicing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interval1D {
    Empty,
    Range { lo: f64, hi: f64 },
}

impl Interval1D {
    pub fn is_empty(&self) -> bool {
        matches!(self, Interval1D::Empty)
    }

    pub fn endpoints(&self) -> Option<(f64, f64)> {
        match self {
            Interval1D::Empty => None,
            Interval1D::Range { lo, hi } => Some((*lo, *hi)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn unit_box(dim: usize) -> Polytope {
        Polytope::from_bounds(&vec![0.0; dim], &vec![1.0; dim]).unwrap()
    }

    #[test]
    fn emptiness() {
        // {x <= 1, -x <= -2} is contradictory.
        let p = Polytope::new(dmatrix![1.0; -1.0], dvector![1.0, -2.0]).unwrap();
        assert!(p.is_empty(&tols()).unwrap());
        assert!(!unit_box(2).is_empty(&tols()).unwrap());
        assert!(!Polytope::full_space(3).is_empty(&tols()).unwrap());
        assert!(Polytope::empty(4).is_empty(&tols()).unwrap());
    }

    #[test]
    fn support_values() {
        let b = Polytope::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let s = b.support(&dvector![1.0, 1.0]).unwrap().value().unwrap();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-9);
        let s0 = b.support(&dvector![0.0, 0.0]).unwrap().value().unwrap();
        assert_abs_diff_eq!(s0, 0.0, epsilon = 1e-9);
        // 3-simplex, c=(1,2,3): max at e3.
        let sx = Polytope::new(
            dmatrix![-1.0,0.0,0.0; 0.0,-1.0,0.0; 0.0,0.0,-1.0; 1.0,1.0,1.0],
            dvector![0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let s3 = sx.support(&dvector![1.0, 2.0, 3.0]).unwrap().value().unwrap();
        assert_abs_diff_eq!(s3, 3.0, epsilon = 1e-8);
        // Unbounded direction.
        let half = Polytope::new(dmatrix![-1.0, 0.0], dvector![0.0]).unwrap();
        assert!(matches!(half.support(&dvector![1.0, 0.0]).unwrap(), Support::Unbounded));
    }

    #[test]
    fn projection_square_and_triangle() {
        let sq = unit_box(2);
        let p = sq.project(&[0], &tols()).unwrap();
        assert_eq!(p.dim(), 1);
        assert!(p.contains_point(&dvector![0.5], 1e-9));
        assert!(!p.contains_point(&dvector![1.1], 1e-9));
        assert!(!p.contains_point(&dvector![-0.1], 1e-9));

        // Triangle x>=0, y>=0, x+y<=1 projected onto y gives [0,1].
        let tri = Polytope::new(
            dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0],
            dvector![0.0, 0.0, 1.0],
        )
        .unwrap();
        let py = tri.project(&[1], &tols()).unwrap();
        let hi = py.support(&dvector![1.0]).unwrap().value().unwrap();
        let lo = -py.support(&dvector![-1.0]).unwrap().value().unwrap();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn intersect_intervals() {
        let a = Polytope::from_bounds(&[0.0], &[2.0]).unwrap();
        let b = Polytope::from_bounds(&[1.0], &[3.0]).unwrap();
        let c = a.intersect(&b, &tols()).unwrap();
        assert!(c.contains_point(&dvector![1.5], 1e-9));
        assert!(!c.contains_point(&dvector![0.5], 1e-9));
        assert!(!c.contains_point(&dvector![2.5], 1e-9));
        // Intersection with the full space is the identity.
        let full = Polytope::full_space(1);
        let d = a.intersect(&full, &tols()).unwrap();
        assert!(a.contains_polytope(&d, &tols()).unwrap());
        assert!(d.contains_polytope(&a, &tols()).unwrap());
        // Disjoint boxes are empty.
        let e = Polytope::from_bounds(&[5.0], &[6.0]).unwrap();
        assert!(a.intersect(&e, &tols()).unwrap().is_empty(&tols()).unwrap());
    }

    #[test]
    fn containment() {
        let small = Polytope::from_bounds(&[0.0], &[1.0]).unwrap();
        let big = Polytope::from_bounds(&[0.0], &[2.0]).unwrap();
        assert!(big.contains_polytope(&small, &tols()).unwrap());
        assert!(!small.contains_polytope(&big, &tols()).unwrap());
        assert!(small.contains_polytope(&small, &tols()).unwrap());
    }

    #[test]
    fn slicing() {
        let sq = unit_box(2);
        let s = sq.slice_last_dim(&dvector![0.5], &tols());
        assert_eq!(s.endpoints(), Some((0.0, 1.0)));
        let outside = sq.slice_last_dim(&dvector![2.0], &tols());
        assert!(outside.is_empty());
        let tri = Polytope::new(
            dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0],
            dvector![0.0, 0.0, 1.0],
        )
        .unwrap();
        let (lo, hi) = tri.slice_last_dim(&dvector![0.5], &tols()).endpoints().unwrap();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn interior_membership() {
        let r = UnionRegion::from_polytope(unit_box(2));
        assert!(r.in_interior(&dvector![0.5, 0.5], 1e-9));
        assert!(!r.in_interior(&dvector![0.0, 0.5], 1e-9)); // on a facet
        assert!(!r.in_interior(&dvector![2.0, 0.5], 1e-9)); // outside
    }

    #[test]
    fn redundancy_removal_is_minimal() {
        // Unit square plus three redundant rows.
        let a = dmatrix![
            1.0, 0.0;
            0.0, 1.0;
            -1.0, 0.0;
            0.0, -1.0;
            1.0, 0.0;      // duplicate
            1.0, 1.0;      // dominated by x<=1, y<=1
            0.5, 0.5       // parallel to previous, slack
        ];
        let b = dvector![1.0, 1.0, 0.0, 0.0, 2.0, 3.0, 4.0];
        let p = Polytope::new(a, b).unwrap().remove_redundant(&tols()).unwrap();
        assert_eq!(p.num_rows(), 4);
        // Idempotent.
        let p2 = p.remove_redundant(&tols()).unwrap();
        assert_eq!(p2.num_rows(), 4);
    }

    #[test]
    fn chebyshev_center_of_box() {
        let b = Polytope::from_bounds(&[0.0, 0.0], &[2.0, 4.0]).unwrap();
        let (c, r) = b.chebyshev().unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-9);
        // Empty set gives a negative radius.
        let e = Polytope::empty(2);
        let (_, r) = e.chebyshev().unwrap();
        assert!(r < 0.0);
    }

    #[test]
    fn vertex_enumeration_square() {
        let sq = unit_box(2);
        let mut vs = sq.enumerate_vertices(&tols()).unwrap();
        assert_eq!(vs.len(), 4);
        vs.sort_by(|a, b| (a[0], a[1]).partial_cmp(&(b[0], b[1])).unwrap());
        assert_abs_diff_eq!(vs[0][0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vs[3][1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn complement_of_interval() {
        let dom = Polytope::from_bounds(&[-5.0], &[5.0]).unwrap();
        let mid = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let comp = mid.complement_within(&dom, &tols()).unwrap();
        assert_eq!(comp.parts().len(), 2);
        assert!(comp.contains_point(&dvector![3.0], 1e-9));
        assert!(comp.contains_point(&dvector![-3.0], 1e-9));
        assert!(!comp.contains_point(&dvector![0.0], 1e-9));
    }

    #[test]
    fn serde_round_trip() {
        let p = unit_box(3);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"A\""));
        let q: Polytope = serde_json::from_str(&s).unwrap();
        assert!(p.contains_polytope(&q, &tols()).unwrap());
        assert!(q.contains_polytope(&p, &tols()).unwrap());
        let u = UnionRegion::new(vec![p, q]);
        let su = serde_json::to_string(&u).unwrap();
        assert!(su.starts_with('['));
        let _u2: UnionRegion = serde_json::from_str(&su).unwrap();
    }
}
