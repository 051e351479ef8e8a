//! Numerical differential geometry on flat tori and annuli.
//!
//! The crate is organised around six layers:
//!
//! * [`lattice`] — uniform periodic/bounded grids, fields, finite-difference
//!   and spectral derivatives, Lie brackets and quadrature;
//! * [`geometry`] — metric fields, adapted orthonormal frames, orthonormal
//!   Christoffel symbols, a coordinate-based curvature oracle and the family
//!   of scalars attached to a metric/distribution pair;
//! * [`deform`] — the switch/stretch/conform/change metric surgeries and
//!   evaluators for their predicted transformation laws;
//! * [`upsilon`] — the semilinear elliptic operator built from those
//!   surgeries, its inverse map and its analytic linearisation;
//! * [`solve`] — sub/supersolution scans, monotone iteration, damped Newton
//!   with continuation, the 2-d Lorentz-surface solvers and torus
//!   diffeomorphism pullbacks;
//! * [`cli`] — JSON-configured scenario execution with machine-readable
//!   reports.

pub mod cli;
pub mod deform;
pub mod geometry;
pub mod lattice;
pub mod solve;
pub mod upsilon;
pub mod util;

pub use lattice::{Grid, Scheme};
