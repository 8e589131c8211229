//! Polyhedral control synthesis and falsification toolkit.
//!
//! The crate computes maximal robust controlled invariant sets and dual-game
//! winning sets for discrete-time linear systems with bounded polytopic
//! disturbances, samples initial conditions from invariant-set boundaries,
//! generates adversarial disturbance inputs (dual strategy, enclosing-ellipsoid
//! level climbing, domain heuristics), supervises unsafe controllers, and runs
//! falsification campaigns against benchmark adaptive-cruise-control and
//! lane-keeping controllers.
//!
//! Module map:
//! - [`polytope`]: H-polytope geometry kernel (projection, containment, slicing).
//! - [`optim`]: dense LP (two-phase simplex) and convex QP (active set).
//! - [`synthesis`]: robust predecessors, invariant fixed points, dual games,
//!   supervision.
//! - [`sampling`]: boundary and interior sampling of polyhedral unions.
//! - [`strategy`]: falsifying-input generation schemes.
//! - [`plant`]: ACC and LK vehicle models, discretization, closed-loop simulation.
//! - [`controllers`]: benchmark P / PI / MPC controllers and pole placement.
//! - [`specs`]: safety-specification sets and trajectory monitors.
//! - [`campaign`]: experiment orchestration, rate tables, artifact I/O.

pub mod campaign;
pub mod controllers;
pub mod optim;
pub mod plant;
pub mod polytope;
pub mod sampling;
pub mod specs;
pub mod strategy;
pub mod synthesis;

pub use optim::{LpProblem, QpProblem, SolveStatus};
pub use polytope::{Interval1D, Polytope, Tolerances, UnionRegion};
