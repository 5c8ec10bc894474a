//! Planar (2D) Cosserat elasticity with a single unit director.
//!
//! The crate couples a nematic-elastomer stored-energy density to two
//! variational solvers for stretched rectangular strips, plus a stability
//! certification layer that scans rank-one perturbations of computed fields:
//!
//! * [`tensor2`] — fixed-size 2-vector / 2×2-matrix algebra.
//! * [`material`] — energy density, stresses, frame-invariance residual,
//!   Legendre–Hadamard quadratic form, rank-one convexity residual.
//! * [`stability`] — pointwise and whole-field ellipticity certification.
//! * [`graddiff`] — forward-mode spatial derivatives through small MLPs and
//!   reverse accumulation of parameter gradients over that augmented pass.
//! * [`network`] — the two solution networks (deformation and director
//!   angle), boundary-exact solution ansatz, initialization, checkpoints.
//! * [`nnsolver`] — deep energy method: minimize total potential energy over
//!   a fixed quadrature set by full-batch Adam with an optional L-BFGS finish.
//! * [`refsolver`] — bilinear quadrilateral finite elements with staggered
//!   (alternating u / φ) minimization under incremental loading.
//! * [`field`] — sampled solution grids, CSV/JSON export, cross-solver
//!   comparison metrics.
//! * [`harness`] — case orchestration shared by the CLI and the test suite.
//!
//! All arithmetic is `f64`. Solver entry points take an explicit
//! `parallel` switch; parallel and serial execution produce bitwise
//! identical results because reductions are chunked in a fixed order
//! (see [`chunks`]).

pub mod chunks;
pub mod field;
pub mod graddiff;
pub mod harness;
pub mod material;
pub mod network;
pub mod nnsolver;
pub mod opt;
pub mod refsolver;
pub mod stability;
pub mod tensor2;

pub use material::{KinematicState, MaterialParams, StressSet};
pub use tensor2::{Mat2, Vec2};
