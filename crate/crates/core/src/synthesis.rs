//! Robust controlled-invariance synthesis and the dual reachability game.
//!
//! All computations run on discrete-time affine dynamics
//! `x⁺ = A x + B u + E d + K` with polytopic state domain `X`, input set `U`
//! and disturbance set `D`. Disturbance quantifiers are eliminated row-wise
//! with support functions, which is exact for H-polytopes; the input
//! quantifier in the robust predecessor is eliminated by Fourier–Motzkin
//! projection.
//!
//! Saturated state coordinates (a lead car that cannot reverse, a headway
//! axis cropped for boundedness) are declared via [`StateClamp`]. The
//! predecessor operators drop successor rows that the clamp box already
//! implies, and the dual game restricts the disturbance player to moves whose
//! clamped coordinates stay off the rails, so both sides stay sound for the
//! saturated plant.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{solve_qp, QpProblem, SolveStatus};
use crate::polytope::{GeometryError, Polytope, Support, Tolerances, UnionRegion};

/// How a clamped state coordinate is kept inside its bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClampKind {
    /// The physical plant saturates this coordinate (e.g. the lead car's
    /// velocity never leaves its range because its acceleration is zeroed at
    /// the rails).
    PlantEnforced,
    /// Pure modeling crop along an axis in which the safety constraints are
    /// monotone (e.g. a headway cap: larger headway is never less safe).
    /// Set-membership tests project the state back into the crop.
    ModelMonotone,
}

/// Saturation bounds on one state coordinate. Use ±infinity for a one-sided
/// clamp.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StateClamp {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub kind: ClampKind,
}

/// Discrete-time affine dynamics with polytopic sets.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub k: DVector<f64>,
    /// State domain (states must remain here).
    pub x_dom: Polytope,
    /// Admissible inputs.
    pub u_set: Polytope,
    /// Disturbance set.
    pub d_set: Polytope,
    /// Discretization step in seconds.
    pub dt: f64,
    /// Saturated state coordinates (may be empty).
    pub clamps: Vec<StateClamp>,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        e: DMatrix<f64>,
        k: DVector<f64>,
        x_dom: Polytope,
        u_set: Polytope,
        d_set: Polytope,
        dt: f64,
    ) -> Result<Self, SynthesisError> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || e.nrows() != n
            || k.len() != n
            || x_dom.dim() != n
            || u_set.dim() != b.ncols()
            || d_set.dim() != e.ncols()
        {
            return Err(SynthesisError::BadSystem("inconsistent dimensions".into()));
        }
        if !(dt > 0.0) {
            return Err(SynthesisError::BadSystem("dt must be positive".into()));
        }
        let tol = Tolerances::default();
        for (set, name) in [(&x_dom, "X"), (&u_set, "U"), (&d_set, "D")] {
            if set.is_empty(&tol)? {
                return Err(SynthesisError::BadSystem(format!("{name} is empty")));
            }
        }
        Ok(Self { a, b, e, k, x_dom, u_set, d_set, dt, clamps: Vec::new() })
    }

    pub fn with_clamps(mut self, clamps: Vec<StateClamp>) -> Result<Self, SynthesisError> {
        let n = self.state_dim();
        for c in &clamps {
            if c.dim >= n || c.lo > c.hi {
                return Err(SynthesisError::BadSystem("invalid state clamp".into()));
            }
        }
        self.clamps = clamps;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn dist_dim(&self) -> usize {
        self.e.ncols()
    }

    /// One-step successor of the linear model (no clamping).
    pub fn successor(&self, x: &DVector<f64>, u: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.e * d + &self.k
    }

    /// Maps a state into the clamp box (identity when no clamps bind).
    pub fn clamp_state(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for c in &self.clamps {
            out[c.dim] = out[c.dim].clamp(c.lo, c.hi);
        }
        out
    }

    /// True when the row `c·z ≤ rhs` over successor states already follows
    /// from a monotone model crop (so predecessor operators need not enforce
    /// it; membership maps the state back into the crop instead).
    fn row_implied_by_crop(&self, c: &DVector<f64>, rhs: f64, tol: &Tolerances) -> bool {
        let crops: Vec<&StateClamp> =
            self.clamps.iter().filter(|cl| cl.kind == ClampKind::ModelMonotone).collect();
        if crops.is_empty() {
            return false;
        }
        let mut sup = 0.0;
        for j in 0..c.len() {
            let v = c[j];
            if v.abs() <= 1e-12 {
                continue;
            }
            let Some(cl) = crops.iter().find(|cl| cl.dim == j) else {
                return false;
            };
            let bound = if v > 0.0 { cl.hi } else { cl.lo };
            if !bound.is_finite() {
                return false;
            }
            sup += v * bound;
        }
        sup <= rhs + tol.feas
    }

    /// Plant-enforced clamps must ride on saturated-integrator coordinates:
    /// `x_j⁺ = x_j + η d_ℓ` with nothing else touching `x_j`. Returns the
    /// decomposition used for exact state-dependent robustification.
    pub(crate) fn integrator_clamps(&self) -> Result<Vec<IntegratorClamp>, SynthesisError> {
        let mut out = Vec::new();
        for cl in self.clamps.iter().filter(|c| c.kind == ClampKind::PlantEnforced) {
            let j = cl.dim;
            if !cl.lo.is_finite() || !cl.hi.is_finite() {
                return Err(SynthesisError::BadSystem(
                    "plant-enforced clamps need finite bounds".into(),
                ));
            }
            if self.b.row(j).amax() > 1e-9 || self.k[j].abs() > 1e-9 {
                return Err(SynthesisError::ClampTouchedByInput(j));
            }
            for c in 0..self.state_dim() {
                let expect = if c == j { 1.0 } else { 0.0 };
                if (self.a[(j, c)] - expect).abs() > 1e-9 {
                    return Err(SynthesisError::ClampTouchedByInput(j));
                }
            }
            let mut coord = None;
            for l in 0..self.dist_dim() {
                if self.e[(j, l)].abs() > 1e-9 {
                    if coord.is_some() {
                        return Err(SynthesisError::ClampTouchedByInput(j));
                    }
                    coord = Some(l);
                }
            }
            let Some(l) = coord else {
                return Err(SynthesisError::ClampTouchedByInput(j));
            };
            let eta = self.e[(j, l)];
            if eta <= 0.0 {
                return Err(SynthesisError::BadSystem(
                    "saturated integrator needs a positive disturbance gain".into(),
                ));
            }
            let mut dir = DVector::zeros(self.dist_dim());
            dir[l] = 1.0;
            let d_hi = match self.d_set.support(&dir)? {
                Support::Bounded { value, .. } => value,
                Support::Unbounded => return Err(SynthesisError::UnboundedDisturbance),
            };
            dir[l] = -1.0;
            let d_lo = match self.d_set.support(&dir)? {
                Support::Bounded { value, .. } => -value,
                Support::Unbounded => return Err(SynthesisError::UnboundedDisturbance),
            };
            if d_lo > 0.0 || d_hi < 0.0 {
                return Err(SynthesisError::BadSystem(
                    "saturated integrator needs the disturbance range to straddle zero".into(),
                ));
            }
            let lambda = cl.lo - eta * d_lo;
            let mu = cl.hi - eta * d_hi;
            if lambda > mu {
                return Err(SynthesisError::BadSystem(
                    "clamp rails overlap: disturbance step exceeds the clamp width".into(),
                ));
            }
            out.push(IntegratorClamp {
                dim: j,
                dist_coord: l,
                eta,
                d_lo,
                d_hi,
                lo: cl.lo,
                hi: cl.hi,
                lambda,
                mu,
            });
        }
        Ok(out)
    }

    /// Robustified "successor lands in `target` for every admissible d" rows
    /// over the joint (x, u) space, exact on the given rail-slab assignment
    /// of the saturated-integrator coordinates. Crop-implied rows are
    /// dropped. Returns `None` when `D` is unbounded along a needed
    /// direction. Also returns the slab-membership rows over x.
    fn successor_rows_on_slabs(
        &self,
        target: &Polytope,
        clamps: &[IntegratorClamp],
        slabs: &[Slab],
        tol: &Tolerances,
    ) -> Result<Option<SuccessorRows>, SynthesisError> {
        let (h, hb) = target.rows();
        let n = self.state_dim();
        let nu = self.input_dim();
        let mut gx_rows: Vec<DVector<f64>> = Vec::new();
        let mut gu_rows: Vec<DVector<f64>> = Vec::new();
        let mut g: Vec<f64> = Vec::new();
        for i in 0..h.nrows() {
            let c = h.row(i).transpose();
            if self.row_implied_by_crop(&c, hb[i], tol) {
                continue;
            }
            let mut w = self.e.transpose() * &c;
            let mut gx = self.a.transpose() * &c;
            let mut rhs = hb[i] - c.dot(&self.k);
            // Saturated-integrator coordinates: exact per-slab treatment.
            for (cl, slab) in clamps.iter().zip(slabs.iter()) {
                let wi = w[cl.dist_coord];
                w[cl.dist_coord] = 0.0;
                match slab {
                    Slab::Mid => rhs -= (wi * cl.d_lo).max(wi * cl.d_hi),
                    Slab::Low => {
                        if wi >= 0.0 {
                            rhs -= wi * cl.d_hi;
                        } else {
                            // Worst case at the state-dependent lower rail
                            // (lo − x_j)/η.
                            gx[cl.dim] -= wi / cl.eta;
                            rhs -= wi * cl.lo / cl.eta;
                        }
                    }
                    Slab::High => {
                        if wi <= 0.0 {
                            rhs -= wi * cl.d_lo;
                        } else {
                            gx[cl.dim] -= wi / cl.eta;
                            rhs -= wi * cl.hi / cl.eta;
                        }
                    }
                }
            }
            // Remaining coordinates: support over D with the handled
            // coordinates zeroed (exact for product disturbance sets).
            if w.amax() > 1e-12 {
                match self.d_set.support(&w)? {
                    Support::Bounded { value, .. } => rhs -= value,
                    Support::Unbounded => return Ok(None),
                }
            }
            gx_rows.push(gx);
            gu_rows.push(self.b.transpose() * &c);
            g.push(rhs);
        }
        // Slab membership over x.
        let mut sx_rows: Vec<DVector<f64>> = Vec::new();
        let mut s_rhs: Vec<f64> = Vec::new();
        for (cl, slab) in clamps.iter().zip(slabs.iter()) {
            let mut up = DVector::zeros(n);
            let mut dn = DVector::zeros(n);
            up[cl.dim] = 1.0;
            dn[cl.dim] = -1.0;
            match slab {
                Slab::Low => {
                    sx_rows.push(up);
                    s_rhs.push(cl.lambda);
                }
                Slab::Mid => {
                    sx_rows.push(dn);
                    s_rhs.push(-cl.lambda);
                    sx_rows.push(up);
                    s_rhs.push(cl.mu);
                }
                Slab::High => {
                    sx_rows.push(dn);
                    s_rhs.push(-cl.mu);
                }
            }
        }
        let m = g.len();
        Ok(Some(SuccessorRows {
            gx: DMatrix::from_fn(m, n, |r, j| gx_rows[r][j]),
            gu: DMatrix::from_fn(m, nu, |r, j| gu_rows[r][j]),
            g: DVector::from_vec(g),
            slab_x: DMatrix::from_fn(sx_rows.len(), n, |r, j| sx_rows[r][j]),
            slab_rhs: DVector::from_vec(s_rhs),
        }))
    }

    /// Pointwise-exact robustified input rows at a concrete state: the
    /// admissible disturbance interval of each saturated integrator is
    /// evaluated numerically at `x`.
    fn input_rows_at(
        &self,
        target: &Polytope,
        clamps: &[IntegratorClamp],
        x: &DVector<f64>,
        tol: &Tolerances,
    ) -> Result<Option<(DMatrix<f64>, DVector<f64>)>, SynthesisError> {
        let (h, hb) = target.rows();
        let nu = self.input_dim();
        let mut gu_rows: Vec<DVector<f64>> = Vec::new();
        let mut g: Vec<f64> = Vec::new();
        for i in 0..h.nrows() {
            let c = h.row(i).transpose();
            if self.row_implied_by_crop(&c, hb[i], tol) {
                continue;
            }
            let mut w = self.e.transpose() * &c;
            let gx = self.a.transpose() * &c;
            let mut rhs = hb[i] - c.dot(&self.k) - gx.dot(x);
            for cl in clamps {
                let wi = w[cl.dist_coord];
                w[cl.dist_coord] = 0.0;
                let lo = cl.d_lo.max((cl.lo - x[cl.dim]) / cl.eta);
                let hi = cl.d_hi.min((cl.hi - x[cl.dim]) / cl.eta);
                rhs -= (wi * lo).max(wi * hi);
            }
            if w.amax() > 1e-12 {
                match self.d_set.support(&w)? {
                    Support::Bounded { value, .. } => rhs -= value,
                    Support::Unbounded => return Ok(None),
                }
            }
            gu_rows.push(self.b.transpose() * &c);
            g.push(rhs);
        }
        let m = g.len();
        Ok(Some((DMatrix::from_fn(m, nu, |r, j| gu_rows[r][j]), DVector::from_vec(g))))
    }
}

/// Saturated-integrator decomposition of a plant-enforced clamp.
#[derive(Clone, Copy, Debug)]
pub(crate) struct IntegratorClamp {
    pub dim: usize,
    pub dist_coord: usize,
    pub eta: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub lo: f64,
    pub hi: f64,
    /// Below `lambda` the lower rail restricts the disturbance.
    pub lambda: f64,
    /// Above `mu` the upper rail restricts the disturbance.
    pub mu: f64,
}

/// Rail-slab of a saturated integrator coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Slab {
    Low,
    Mid,
    High,
}

struct SuccessorRows {
    gx: DMatrix<f64>,
    gu: DMatrix<f64>,
    g: DVector<f64>,
    slab_x: DMatrix<f64>,
    slab_rhs: DVector<f64>,
}

fn slab_assignments(count: usize) -> Vec<Vec<Slab>> {
    let mut out = vec![Vec::new()];
    for _ in 0..count {
        let mut next = Vec::with_capacity(out.len() * 3);
        for prefix in &out {
            for s in [Slab::Low, Slab::Mid, Slab::High] {
                let mut v = prefix.clone();
                v.push(s);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Result of the maximal controlled-invariant-set fixed point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantResult {
    pub s_inv: UnionRegion,
    pub iterations: usize,
    pub converged: bool,
}

/// One layer of the dual game for one unsafe part ("chain").
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualLayerPart {
    /// Polytope over (x, d_playable).
    pub lifted: Polytope,
    /// Its projection onto the state space.
    pub projection: Polytope,
    /// Which unsafe part this sequence started from.
    pub chain: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualLayer {
    pub index: usize,
    pub parts: Vec<DualLayerPart>,
}

/// Winning sets of the dual game: layer `i` contains states from which the
/// disturbance can force the unsafe set within `i` steps against any input.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualWinningSets {
    pub layers: Vec<DualLayer>,
    /// Union of all layer projections (including the unsafe set cropped to X).
    pub union: UnionRegion,
    /// Disturbance coordinates the adversary actually chooses; the rest are
    /// treated as uncontrolled model error and robustified away.
    pub playable: Vec<usize>,
    /// How far inside the unsafe set the game targets (strict violations).
    pub unsafe_margin: f64,
}

impl DualWinningSets {
    /// Union of layer projections for layers ≥ 1 (states that are not yet
    /// unsafe but from which falsification is guaranteed).
    pub fn union_from_layer_one(&self) -> UnionRegion {
        let parts = self
            .layers
            .iter()
            .filter(|l| l.index >= 1)
            .flat_map(|l| l.parts.iter().map(|p| p.projection.clone()))
            .collect();
        UnionRegion::new(parts)
    }
}

/// Decision of the dual strategy at a state.
#[derive(Clone, Debug, PartialEq)]
pub enum DualMove {
    /// Playable disturbance coordinates to apply this step.
    Disturbance(DVector<f64>),
    /// The state is already in the unsafe set; no input needed.
    AlreadyFalsified,
    /// The state is outside every winning layer.
    OutsideWinningSet,
}

/// Admissible-input map of the invariant-set supervisor: one (x, u) polytope
/// per target part of the invariant set, input-set rows appended last.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupervisorMap {
    pub parts: Vec<SupervisorPart>,
    pub state_dim: usize,
    pub input_dim: usize,
    pub clamps: Vec<StateClamp>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupervisorPart {
    /// Rows over (x, u); the first `target_rows` rows come from the invariant
    /// target (margin applies to those), the rest bound u ∈ U.
    pub poly: Polytope,
    pub target_rows: usize,
}

/// Report of a sampling-based invariance check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub samples_drawn: usize,
    pub violations: usize,
    /// Up to 16 violating states, for diagnostics.
    pub examples: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid system: {0}")]
    BadSystem(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("disturbance set unbounded along a constraint normal")]
    UnboundedDisturbance,
    #[error("no admissible input exists at the queried state")]
    SupervisionImpossible,
    #[error("QP failure during supervision: {0:?}")]
    SupervisionSolver(SolveStatus),
    #[error("clamped coordinate {0} is affected by the input; cannot restrict the dual game")]
    ClampTouchedByInput(usize),
}

/// Robust controllable predecessor of a union, part by part:
/// `{x ∈ X : ∃u ∈ U, ∀ admissible d, A x + B u + E d + K ∈ part}` unioned
/// over parts. Saturated-integrator coordinates contribute one predecessor
/// piece per rail slab (the admissible disturbance interval is affine in the
/// state on each slab, so each piece is exactly polyhedral). Per-part
/// treatment under-approximates the true predecessor of the union, which
/// keeps the fixed point sound.
pub fn robust_pre(
    s: &UnionRegion,
    sys: &LinearSystem,
    tol: &Tolerances,
) -> Result<UnionRegion, SynthesisError> {
    let n = sys.state_dim();
    let nu = sys.input_dim();
    let clamps = sys.integrator_clamps()?;
    let assignments = slab_assignments(clamps.len());
    let mut parts = Vec::new();
    for target in s.parts() {
        if target.is_empty(tol)? {
            continue;
        }
        let mut pieces: Vec<Option<Polytope>> = Vec::with_capacity(assignments.len());
        for slabs in &assignments {
            let Some(rows) = sys.successor_rows_on_slabs(target, &clamps, slabs, tol)? else {
                return Err(SynthesisError::UnboundedDisturbance);
            };
            // Stack [Gx Gu] ≤ g with u ∈ U and the slab rows over (x, u).
            let (ua, ub) = sys.u_set.rows();
            let mg = rows.g.len();
            let ms = rows.slab_rhs.len();
            let m = mg + ua.nrows() + ms;
            let mut a = DMatrix::zeros(m, n + nu);
            let mut b = DVector::zeros(m);
            a.view_mut((0, 0), (mg, n)).copy_from(&rows.gx);
            a.view_mut((0, n), (mg, nu)).copy_from(&rows.gu);
            b.rows_mut(0, mg).copy_from(&rows.g);
            a.view_mut((mg, n), (ua.nrows(), nu)).copy_from(ua);
            b.rows_mut(mg, ub.len()).copy_from(ub);
            a.view_mut((mg + ua.nrows(), 0), (ms, n)).copy_from(&rows.slab_x);
            b.rows_mut(mg + ua.nrows(), ms).copy_from(&rows.slab_rhs);
            let lifted = Polytope::new(a, b)?;
            if lifted.is_empty(tol)? {
                pieces.push(None);
                continue;
            }
            let keep: Vec<usize> = (0..n).collect();
            let pre = lifted.project(&keep, tol)?;
            let pre = pre.intersect(&sys.x_dom, tol)?;
            if pre.is_empty(tol)? {
                pieces.push(None);
            } else {
                pieces.push(Some(pre));
            }
        }
        parts.extend(merge_slab_pieces(pieces, &clamps, &assignments, tol)?);
    }
    absorb_parts(parts, tol)
}

/// Reassembles the per-slab predecessor pieces of one target into a single
/// polytope. First try: the intersection of all piece rows valid for every
/// piece, exact when its slice in each rail cell is contained in that cell's
/// piece (the cells tile the clamped coordinates). When the union is
/// genuinely nonconvex, fall back to the convex under-approximation that
/// enforces every piece's non-slab rows globally; keeping the iterate in one
/// part per target prevents rail-slab fragments from becoming artificial
/// per-part targets in later iterations (which would erode the fixed point).
fn merge_slab_pieces(
    pieces: Vec<Option<Polytope>>,
    clamps: &[IntegratorClamp],
    assignments: &[Vec<Slab>],
    tol: &Tolerances,
) -> Result<Vec<Polytope>, SynthesisError> {
    let live: Vec<&Polytope> = pieces.iter().flatten().collect();
    if clamps.is_empty() || live.len() <= 1 {
        return Ok(pieces.into_iter().flatten().collect());
    }
    let dim = live[0].dim();
    // Rows valid for the whole union.
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for piece in &live {
        let (pa, pb) = piece.rows();
        'row: for i in 0..pa.nrows() {
            let normal = pa.row(i).transpose();
            for other in &live {
                match other.support(&normal)? {
                    Support::Bounded { value, .. } => {
                        if value > pb[i] + tol.feas {
                            continue 'row;
                        }
                    }
                    Support::Unbounded => continue 'row,
                }
            }
            rows.push((normal, pb[i]));
        }
    }
    if rows.is_empty() {
        return under_merge(pieces, clamps, assignments, tol);
    }
    let candidate = Polytope::new(
        DMatrix::from_fn(rows.len(), dim, |r, c| rows[r].0[c]),
        DVector::from_fn(rows.len(), |r, _| rows[r].1),
    )?
    .remove_redundant(tol)?;
    // Exactness check cell by cell.
    for (slabs, piece) in assignments.iter().zip(pieces.iter()) {
        let cell = cell_polytope(dim, clamps, slabs)?;
        let slice = candidate.intersect(&cell, tol)?;
        if slice.is_empty(tol)? {
            continue;
        }
        match piece {
            None => return under_merge(pieces, clamps, assignments, tol),
            Some(p) => {
                if !p.contains_polytope(&slice, tol)? {
                    return under_merge(pieces, clamps, assignments, tol);
                }
            }
        }
    }
    Ok(vec![candidate])
}

/// Rail-cell membership rows for one slab assignment.
fn cell_polytope(
    dim: usize,
    clamps: &[IntegratorClamp],
    slabs: &[Slab],
) -> Result<Polytope, SynthesisError> {
    let mut cell_rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for (cl, slab) in clamps.iter().zip(slabs.iter()) {
        let mut up = DVector::zeros(dim);
        up[cl.dim] = 1.0;
        match slab {
            Slab::Low => cell_rows.push((up, cl.lambda)),
            Slab::Mid => {
                cell_rows.push((-up.clone(), -cl.lambda));
                cell_rows.push((up, cl.mu));
            }
            Slab::High => cell_rows.push((-up, -cl.mu)),
        }
    }
    Ok(Polytope::new(
        DMatrix::from_fn(cell_rows.len(), dim, |r, c| cell_rows[r].0[c]),
        DVector::from_fn(cell_rows.len(), |r, _| cell_rows[r].1),
    )?)
}

/// Convex under-approximation of a nonconvex piece union: enforce every
/// piece's rows globally, except the rail-cell tag rows. Each rail slice of
/// the result then satisfies its own piece's constraints, so the result is a
/// sound subset of the union. Empty slabs are cut away; an absent interior
/// slab would split the set, in which case the widest piece wins.
fn under_merge(
    pieces: Vec<Option<Polytope>>,
    clamps: &[IntegratorClamp],
    assignments: &[Vec<Slab>],
    tol: &Tolerances,
) -> Result<Vec<Polytope>, SynthesisError> {
    let dim = pieces.iter().flatten().next().map(|p| p.dim()).unwrap_or(0);
    if dim == 0 {
        return Ok(Vec::new());
    }
    // Rows that look like rail-cell tags: supported on a single clamped
    // coordinate with a bound matching a cell edge.
    let is_cell_tag = |normal: &DVector<f64>, rhs: f64| -> bool {
        for cl in clamps {
            let coeff = normal[cl.dim];
            if coeff.abs() < 1.0 - 1e-9 {
                continue;
            }
            let others = (0..dim).filter(|&c| c != cl.dim).map(|c| normal[c].abs()).sum::<f64>();
            if others > 1e-9 {
                continue;
            }
            let bound = rhs / coeff;
            for edge in [cl.lambda, cl.mu] {
                if (bound - edge).abs() < 1e-9 {
                    return true;
                }
            }
        }
        false
    };
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut missing: Vec<&Vec<Slab>> = Vec::new();
    for (slabs, piece) in assignments.iter().zip(pieces.iter()) {
        match piece {
            None => missing.push(slabs),
            Some(p) => {
                let (pa, pb) = p.rows();
                for i in 0..pa.nrows() {
                    let normal = pa.row(i).transpose();
                    if !is_cell_tag(&normal, pb[i]) {
                        rows.push((normal, pb[i]));
                    }
                }
            }
        }
    }
    // Absent slabs must be excluded. Edge slabs cut cleanly; an absent
    // interior slab cannot (the remainder would be disconnected), so fall
    // back to the single widest piece.
    for slabs in &missing {
        let interior = slabs.iter().any(|s| *s == Slab::Mid);
        if interior {
            let best = pieces
                .iter()
                .flatten()
                .max_by(|a, b| {
                    let ra = a.chebyshev().map(|(_, r)| r).unwrap_or(-1.0);
                    let rb = b.chebyshev().map(|(_, r)| r).unwrap_or(-1.0);
                    ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal)
                })
                .cloned();
            return Ok(best.into_iter().collect());
        }
        for (cl, slab) in clamps.iter().zip(slabs.iter()) {
            let mut up = DVector::zeros(dim);
            up[cl.dim] = 1.0;
            match slab {
                Slab::Low => rows.push((-up, -cl.lambda)),
                Slab::High => rows.push((up, cl.mu)),
                Slab::Mid => {}
            }
        }
    }
    let merged = Polytope::new(
        DMatrix::from_fn(rows.len(), dim, |r, c| rows[r].0[c]),
        DVector::from_fn(rows.len(), |r, _| rows[r].1),
    )?
    .remove_redundant(tol)?;
    if merged.is_empty(tol)? {
        return Ok(Vec::new());
    }
    // Soundness check: every rail slice must land inside its piece.
    for (slabs, piece) in assignments.iter().zip(pieces.iter()) {
        let cell = cell_polytope(dim, clamps, slabs)?;
        let slice = merged.intersect(&cell, tol)?;
        if slice.is_empty(tol)? {
            continue;
        }
        let ok = match piece {
            None => false,
            Some(p) => p.contains_polytope(&slice, tol)?,
        };
        if !ok {
            let best = pieces
                .iter()
                .flatten()
                .max_by(|a, b| {
                    let ra = a.chebyshev().map(|(_, r)| r).unwrap_or(-1.0);
                    let rb = b.chebyshev().map(|(_, r)| r).unwrap_or(-1.0);
                    ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal)
                })
                .cloned();
            return Ok(best.into_iter().collect());
        }
    }
    Ok(vec![merged])
}

/// Drops parts contained in another part (keeps unions small across fixed-
/// point iterations).
fn absorb_parts(parts: Vec<Polytope>, tol: &Tolerances) -> Result<UnionRegion, SynthesisError> {
    let mut keep = vec![true; parts.len()];
    for i in 0..parts.len() {
        if !keep[i] {
            continue;
        }
        for j in 0..parts.len() {
            if i == j || !keep[j] {
                continue;
            }
            if parts[j].contains_polytope(&parts[i], tol)? {
                keep[i] = false;
                break;
            }
        }
    }
    Ok(UnionRegion::new(
        parts
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| if k { Some(p) } else { None })
            .collect(),
    ))
}

/// Fixed point `S_{k+1} = S_k ∩ Pre(S_k)` from `S_0 = safe`. Stops on mutual
/// containment within tolerance (for unions, the conservative per-part
/// check: every part of `S_k` inside some part of `S_{k+1}`), or at
/// `max_iter` with `converged = false`.
pub fn max_invariant_set(
    safe: &UnionRegion,
    sys: &LinearSystem,
    max_iter: usize,
    tol: &Tolerances,
) -> Result<InvariantResult, SynthesisError> {
    let mut current = UnionRegion::new(
        safe.parts().iter().map(|p| p.remove_redundant(tol)).collect::<Result<_, _>>()?,
    )
    .prune_empty(tol)?;
    if current.parts().is_empty() {
        return Ok(InvariantResult { s_inv: current, iterations: 0, converged: true });
    }
    for iter in 1..=max_iter {
        let pre = robust_pre(&current, sys, tol)?;
        let mut next_parts = Vec::new();
        for p in current.parts() {
            for q in pre.parts() {
                let inter = p.intersect(q, tol)?;
                if !inter.is_empty(tol)? {
                    next_parts.push(inter);
                }
            }
        }
        let next = absorb_parts(next_parts, tol)?;
        let shrunk = !union_contained_in(&current, &next, tol)?;
        current = next;
        if !shrunk {
            return Ok(InvariantResult { s_inv: current, iterations: iter, converged: true });
        }
        if current.parts().is_empty() {
            return Ok(InvariantResult { s_inv: current, iterations: iter, converged: true });
        }
    }
    Ok(InvariantResult { s_inv: current, iterations: max_iter, converged: false })
}

/// Conservative union containment: every part of `a` inside some part of `b`.
fn union_contained_in(
    a: &UnionRegion,
    b: &UnionRegion,
    tol: &Tolerances,
) -> Result<bool, SynthesisError> {
    'parts: for p in a.parts() {
        for q in b.parts() {
            if q.contains_polytope(p, tol)? {
                continue 'parts;
            }
        }
        return Ok(false);
    }
    Ok(true)
}

/// Draws `n_samples` states from `s` (rejection sampling in each part's
/// bounding box) and checks that some admissible input keeps the successor in
/// `s` for every disturbance. A converged invariant set must report zero
/// violations.
pub fn verify_invariance(
    s: &UnionRegion,
    sys: &LinearSystem,
    n_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<InvarianceReport, SynthesisError> {
    let mut rng = StdRng::seed_from_u64(seed);
    let points = sample_states(s, n_samples, &mut rng, tol)?;
    let mut violations = 0usize;
    let mut examples = Vec::new();
    for x in &points {
        if !admissible_input_exists(x, s, sys, tol)? {
            violations += 1;
            if examples.len() < 16 {
                examples.push(x.iter().copied().collect());
            }
        }
    }
    Ok(InvarianceReport { samples_drawn: points.len(), violations, examples })
}

/// Rejection-samples states from a union region. Exposed for campaign use
/// (episode initial conditions).
pub fn sample_states(
    s: &UnionRegion,
    n_samples: usize,
    rng: &mut StdRng,
    tol: &Tolerances,
) -> Result<Vec<DVector<f64>>, SynthesisError> {
    let mut live: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (idx, part) in s.parts().iter().enumerate() {
        if part.is_empty(tol)? {
            continue;
        }
        let dim = part.dim();
        let mut box_bounds = Vec::with_capacity(dim);
        let mut bounded = true;
        for j in 0..dim {
            let mut c = DVector::zeros(dim);
            c[j] = 1.0;
            let hi = match part.support(&c)? {
                Support::Bounded { value, .. } => value,
                Support::Unbounded => {
                    bounded = false;
                    break;
                }
            };
            c[j] = -1.0;
            let lo = match part.support(&c)? {
                Support::Bounded { value, .. } => -value,
                Support::Unbounded => {
                    bounded = false;
                    break;
                }
            };
            box_bounds.push((lo, hi));
        }
        if bounded {
            live.push((idx, box_bounds));
        }
    }
    if live.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let (idx, bounds) = &live[k % live.len()];
        let part = &s.parts()[*idx];
        let mut found = None;
        for _ in 0..2000 {
            let x = DVector::from_fn(part.dim(), |j, _| {
                let (lo, hi) = bounds[j];
                if hi > lo { rng.random_range(lo..hi) } else { lo }
            });
            if part.contains_point(&x, tol.feas) {
                found = Some(x);
                break;
            }
        }
        match found {
            Some(x) => out.push(x),
            None => {
                // Thin part: fall back to its Chebyshev center.
                if let Some((c, r)) = part.chebyshev() {
                    if r > -tol.feas {
                        out.push(c);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn admissible_input_exists(
    x: &DVector<f64>,
    s: &UnionRegion,
    sys: &LinearSystem,
    tol: &Tolerances,
) -> Result<bool, SynthesisError> {
    let clamps = sys.integrator_clamps()?;
    for target in s.parts() {
        let Some((gu, rhs)) = sys.input_rows_at(target, &clamps, x, tol)? else {
            return Err(SynthesisError::UnboundedDisturbance);
        };
        let (ua, ub) = sys.u_set.rows();
        let m = rhs.len() + ua.nrows();
        let nu = sys.input_dim();
        let mut a = DMatrix::zeros(m, nu);
        let mut b = DVector::zeros(m);
        a.view_mut((0, 0), (rhs.len(), nu)).copy_from(&gu);
        b.rows_mut(0, rhs.len()).copy_from(&rhs);
        a.view_mut((rhs.len(), 0), (ua.nrows(), nu)).copy_from(ua);
        b.rows_mut(rhs.len(), ub.len()).copy_from(ub);
        let feasible = !Polytope::new(a, b)?.is_empty(tol)?;
        if feasible {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Solves the dual reachability game: computes per unsafe part the sequence
/// `P_{i+1} = {(x, d) ∈ X × D : ∀u ∈ U, A x + B u + E d + K ∈ proj_X(P_i)}`,
/// robustifying over non-playable disturbance coordinates as well, and
/// unions the X-projections across parts and steps.
///
/// `playable` selects which disturbance coordinates the adversary commands;
/// `D` is treated as a product between playable and robust coordinates (true
/// for the box disturbance sets used here). `unsafe_margin` shrinks the
/// target so reached states violate the specification strictly.
pub fn dual_winning(
    unsafe_region: &UnionRegion,
    sys: &LinearSystem,
    n_steps: usize,
    playable: &[usize],
    unsafe_margin: f64,
    tol: &Tolerances,
) -> Result<DualWinningSets, SynthesisError> {
    let n = sys.state_dim();
    let p = sys.dist_dim();
    let mut playable = playable.to_vec();
    playable.sort_unstable();
    playable.dedup();
    if playable.is_empty() || playable.iter().any(|&j| j >= p) {
        return Err(SynthesisError::BadSystem("invalid playable disturbance dims".into()));
    }
    let robust: Vec<usize> = (0..p).filter(|j| !playable.contains(j)).collect();
    let d_play = sys.d_set.project(&playable, tol)?;
    let d_rob = if robust.is_empty() { None } else { Some(sys.d_set.project(&robust, tol)?) };
    let e_play = select_columns(&sys.e, &playable);
    let e_rob = select_columns(&sys.e, &robust);
    let np = playable.len();

    // The disturbance player may not drive plant-enforced clamped
    // coordinates off their rails: lo ≤ (A x + E d + K)_dim ≤ hi, expressible
    // over (x, d_play) only when neither the input nor a robust disturbance
    // coordinate touches that state dimension.
    let mut adm_rows: Vec<DVector<f64>> = Vec::new();
    let mut adm_rhs: Vec<f64> = Vec::new();
    for cl in sys.clamps.iter().filter(|c| c.kind == ClampKind::PlantEnforced) {
        let j = cl.dim;
        if sys.b.row(j).amax() > 1e-12 {
            return Err(SynthesisError::ClampTouchedByInput(j));
        }
        if !robust.is_empty() && e_rob.row(j).amax() > 1e-12 {
            return Err(SynthesisError::ClampTouchedByInput(j));
        }
        for sign in [1.0f64, -1.0] {
            let bound = if sign > 0.0 { cl.hi } else { -cl.lo };
            if !bound.is_finite() {
                continue;
            }
            let mut row = DVector::zeros(n + np);
            for c in 0..n {
                row[c] = sign * sys.a[(j, c)];
            }
            for (col, &dj) in playable.iter().enumerate() {
                row[n + col] = sign * sys.e[(j, dj)];
            }
            adm_rows.push(row);
            adm_rhs.push(bound - sign * sys.k[j]);
        }
    }

    let xd_domain = {
        let prod = sys.x_dom.cartesian_product(&d_play);
        if adm_rows.is_empty() {
            prod
        } else {
            let extra = Polytope::new(
                DMatrix::from_fn(adm_rows.len(), n + np, |r, c| adm_rows[r][c]),
                DVector::from_vec(adm_rhs.clone()),
            )?;
            prod.intersect(&extra, tol)?
        }
    };

    // Layer 0: the (shrunk) unsafe parts themselves.
    let mut layers: Vec<DualLayer> = Vec::new();
    let mut layer0 = DualLayer { index: 0, parts: Vec::new() };
    let mut frontiers: Vec<Option<Polytope>> = Vec::new();
    for (ci, part) in unsafe_region.parts().iter().enumerate() {
        let (pa, pb) = part.rows();
        let shrunk = Polytope::new(
            pa.clone(),
            pb - DVector::from_element(pb.len(), unsafe_margin),
        )?;
        if shrunk.is_empty(tol)? {
            frontiers.push(None);
            continue;
        }
        layer0.parts.push(DualLayerPart {
            lifted: shrunk.cartesian_product(&d_play),
            projection: shrunk.clone(),
            chain: ci,
        });
        frontiers.push(Some(shrunk));
    }
    layers.push(layer0);

    let mut cumulative: Vec<Polytope> = Vec::new();
    for i in 1..=n_steps {
        let mut layer = DualLayer { index: i, parts: Vec::new() };
        let mut any_new = false;
        for (ci, frontier) in frontiers.iter_mut().enumerate() {
            let Some(target) = frontier.as_ref() else { continue };
            let lifted = dual_step(target, sys, &e_play, &e_rob, d_rob.as_ref(), &playable, tol)?;
            let lifted = lifted.intersect(&xd_domain, tol)?;
            if lifted.is_empty(tol)? {
                *frontier = None;
                continue;
            }
            let keep: Vec<usize> = (0..n).collect();
            let projection = lifted.project(&keep, tol)?;
            if projection.is_empty(tol)? {
                *frontier = None;
                continue;
            }
            // Stop a chain once it adds nothing beyond already-known layers.
            let mut covered = false;
            for prev in &cumulative {
                if prev.contains_polytope(&projection, tol)? {
                    covered = true;
                    break;
                }
            }
            *frontier = Some(projection.clone());
            if covered {
                *frontier = None;
                continue;
            }
            cumulative.push(projection.clone());
            layer.parts.push(DualLayerPart { lifted, projection, chain: ci });
            any_new = true;
        }
        if !any_new {
            break;
        }
        layers.push(layer);
    }

    let mut union_parts: Vec<Polytope> = Vec::new();
    for l in &layers {
        for part in &l.parts {
            let proj = if l.index == 0 {
                part.projection.intersect(&sys.x_dom, tol)?
            } else {
                part.projection.clone()
            };
            if !proj.is_empty(tol)? {
                union_parts.push(proj);
            }
        }
    }

    Ok(DualWinningSets {
        layers,
        union: UnionRegion::new(union_parts),
        playable,
        unsafe_margin,
    })
}

/// One backward step of the dual game for a single target part: the set of
/// (x, d_playable) from which every input and every robust disturbance lands
/// in the target.
fn dual_step(
    target: &Polytope,
    sys: &LinearSystem,
    e_play: &DMatrix<f64>,
    e_rob: &DMatrix<f64>,
    d_rob: Option<&Polytope>,
    playable: &[usize],
    tol: &Tolerances,
) -> Result<Polytope, SynthesisError> {
    let _ = tol;
    let n = sys.state_dim();
    let np = playable.len();
    let (h, hb) = target.rows();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..h.nrows() {
        let c = h.row(i).transpose();
        // Robustify against every input.
        let hbu = sys.b.transpose() * &c;
        let u_shift = match sys.u_set.support(&hbu)? {
            Support::Bounded { value, .. } => value,
            Support::Unbounded => return Err(SynthesisError::UnboundedDisturbance),
        };
        // Robustify against non-playable disturbance coordinates.
        let r_shift = match d_rob {
            None => 0.0,
            Some(dr) => {
                let her = e_rob.transpose() * &c;
                match dr.support(&her)? {
                    Support::Bounded { value, .. } => value,
                    Support::Unbounded => return Err(SynthesisError::UnboundedDisturbance),
                }
            }
        };
        let mut row = DVector::zeros(n + np);
        let ha = sys.a.transpose() * &c;
        for j in 0..n {
            row[j] = ha[j];
        }
        let hep = e_play.transpose() * &c;
        for j in 0..np {
            row[n + j] = hep[j];
        }
        rows.push(row);
        rhs.push(hb[i] - c.dot(&sys.k) - u_shift - r_shift);
    }
    Ok(Polytope::new(
        DMatrix::from_fn(rows.len(), n + np, |r, c| rows[r][c]),
        DVector::from_vec(rhs),
    )?)
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Dual strategy: find the smallest layer `i ≥ 1` whose projection contains
/// `x` and return the Chebyshev center of the feasible playable-disturbance
/// slice of its lifted polytope. States inside layer 0 are already falsified.
pub fn dual_strategy(
    x: &DVector<f64>,
    w: &DualWinningSets,
    sys: &LinearSystem,
    tol: &Tolerances,
) -> DualMove {
    let xc = sys.clamp_state(x);
    if let Some(l0) = w.layers.first() {
        if l0.parts.iter().any(|p| p.projection.contains_point(&xc, tol.feas)) {
            return DualMove::AlreadyFalsified;
        }
    }
    let n = sys.state_dim();
    let np = w.playable.len();
    for layer in w.layers.iter().filter(|l| l.index >= 1) {
        for part in &layer.parts {
            if !part.projection.contains_point(&xc, tol.feas) {
                continue;
            }
            // Slice the lifted polytope at x: rows G_d d ≤ g - G_x x (+ tol).
            let (ga, gb) = part.lifted.rows();
            let mut a = DMatrix::zeros(ga.nrows(), np);
            let mut b = DVector::zeros(ga.nrows());
            for r in 0..ga.nrows() {
                let mut fixed = 0.0;
                for j in 0..n {
                    fixed += ga[(r, j)] * xc[j];
                }
                for j in 0..np {
                    a[(r, j)] = ga[(r, n + j)];
                }
                b[r] = gb[r] - fixed + tol.feas;
            }
            let Ok(slice) = Polytope::new(a, b) else { continue };
            if let Some((center, radius)) = slice.chebyshev() {
                if radius > -tol.feas {
                    return DualMove::Disturbance(center);
                }
            }
        }
    }
    DualMove::OutsideWinningSet
}

/// Builds the admissible-input map `P = {(x, u) : A x + B u + E d + K ∈
/// S_inv ∀ admissible d, u ∈ U}`: one (x, u) polytope per target part and
/// rail-slab assignment (the slab rows make exactly the pieces matching the
/// queried state feasible).
pub fn supervisor_map(
    s_inv: &UnionRegion,
    sys: &LinearSystem,
    tol: &Tolerances,
) -> Result<SupervisorMap, SynthesisError> {
    let n = sys.state_dim();
    let nu = sys.input_dim();
    let clamps = sys.integrator_clamps()?;
    let assignments = slab_assignments(clamps.len());
    let mut parts = Vec::new();
    for target in s_inv.parts() {
        for slabs in &assignments {
            let Some(rows) = sys.successor_rows_on_slabs(target, &clamps, slabs, tol)? else {
                return Err(SynthesisError::UnboundedDisturbance);
            };
            let (ua, ub) = sys.u_set.rows();
            let mg = rows.g.len();
            let ms = rows.slab_rhs.len();
            let m = mg + ms + ua.nrows();
            let mut a = DMatrix::zeros(m, n + nu);
            let mut b = DVector::zeros(m);
            a.view_mut((0, 0), (mg, n)).copy_from(&rows.gx);
            a.view_mut((0, n), (mg, nu)).copy_from(&rows.gu);
            b.rows_mut(0, mg).copy_from(&rows.g);
            a.view_mut((mg, 0), (ms, n)).copy_from(&rows.slab_x);
            b.rows_mut(mg, ms).copy_from(&rows.slab_rhs);
            a.view_mut((mg + ms, n), (ua.nrows(), nu)).copy_from(ua);
            b.rows_mut(mg + ms, ub.len()).copy_from(ub);
            // Margin applies to the successor-target rows only; the slab
            // rows are pure-state feasibility gates.
            parts.push(SupervisorPart { poly: Polytope::new(a, b)?, target_rows: mg });
        }
    }
    Ok(SupervisorMap { parts, state_dim: n, input_dim: nu, clamps: sys.clamps.clone() })
}

impl SupervisorMap {
    /// Admissible-input polytope at `x` for one target part, with the target
    /// rows tightened by `margin`.
    fn input_slice(&self, part: &SupervisorPart, x: &DVector<f64>, margin: f64) -> Polytope {
        let (ga, gb) = part.poly.rows();
        let m = ga.nrows();
        let mut a = DMatrix::zeros(m, self.input_dim);
        let mut b = DVector::zeros(m);
        for r in 0..m {
            let mut fixed = 0.0;
            for j in 0..self.state_dim {
                fixed += ga[(r, j)] * x[j];
            }
            for j in 0..self.input_dim {
                a[(r, j)] = ga[(r, self.state_dim + j)];
            }
            b[r] = gb[r] - fixed - if r < part.target_rows { margin } else { 0.0 };
        }
        Polytope::new(a, b).expect("slice rows are finite")
    }

    fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for c in &self.clamps {
            out[c.dim] = out[c.dim].clamp(c.lo, c.hi);
        }
        out
    }

    /// True when `(x, u)` is admissible with the given margin on target rows.
    pub fn admissible(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        margin: f64,
        tol: &Tolerances,
    ) -> bool {
        let xc = self.clamp(x);
        self.parts
            .iter()
            .any(|p| self.input_slice(p, &xc, margin).contains_point(u, tol.feas))
    }

    /// Minimally intrusive supervision: pass `u_legacy` through when it is
    /// admissible, otherwise return the admissible input minimizing
    /// `‖u − u_legacy‖²` (best across parts). `margin` tightens the invariant
    /// target rows; when no input survives the margin the override retries
    /// with margin 0 before giving up.
    pub fn supervise(
        &self,
        u_legacy: &DVector<f64>,
        x: &DVector<f64>,
        margin: f64,
        tol: &Tolerances,
    ) -> Result<DVector<f64>, SynthesisError> {
        let xc = self.clamp(x);
        if self
            .parts
            .iter()
            .any(|p| self.input_slice(p, &xc, margin).contains_point(u_legacy, tol.feas))
        {
            return Ok(u_legacy.clone());
        }
        for try_margin in [margin, 0.0] {
            let mut best: Option<(f64, DVector<f64>)> = None;
            for part in &self.parts {
                let slice = self.input_slice(part, &xc, try_margin);
                let (sa, sb) = slice.rows();
                let qp = QpProblem::new(
                    DMatrix::identity(self.input_dim, self.input_dim) * 2.0,
                    -2.0 * u_legacy,
                    sa.clone(),
                    sb.clone(),
                );
                let Ok(qp) = qp else { continue };
                match solve_qp(&qp) {
                    SolveStatus::Optimal { x: u, value } => {
                        if best.as_ref().map_or(true, |(v, _)| value < *v) {
                            best = Some((value, u));
                        }
                    }
                    SolveStatus::Infeasible => continue,
                    status => return Err(SynthesisError::SupervisionSolver(status)),
                }
            }
            if let Some((_, u)) = best {
                return Ok(u);
            }
            if try_margin == 0.0 {
                break;
            }
        }
        Err(SynthesisError::SupervisionImpossible)
    }
}

/// Feasibility check used by tests and campaign pre-flight: does any
/// admissible input keep `x`'s successor inside `s` for all disturbances?
pub fn has_admissible_input(
    x: &DVector<f64>,
    s: &UnionRegion,
    sys: &LinearSystem,
    tol: &Tolerances,
) -> Result<bool, SynthesisError> {
    admissible_input_exists(x, s, sys, tol)
}

/// Chebyshev-center seed of a polytope part, used when interior points are
/// needed from winning-set layers.
pub fn part_center(p: &Polytope) -> Option<DVector<f64>> {
    p.chebyshev().and_then(|(c, r)| if r > -1e-9 { Some(c) } else { None })
}
