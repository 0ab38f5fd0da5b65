//! Level curves of harmonic functions on surfaces.
//!
//! The crate evaluates, at desk scale, the length functional `L(t)` of the
//! level sets `{u = t}` of a harmonic function on a conformal or warped
//! surface chart, its first two derivatives through level-set integrals, the
//! log-convexity and curvature-bound checks that go with it, the geodesic
//! curvature PDEs of level curves and steepest-descent lines, and the
//! conical-singularity setting where the conformal factor is only
//! subharmonic.
//!
//! Module map:
//!
//! - [`geometry`]: charts, fields, Gaussian curvature, pointwise identities
//! - [`harmonic`]: Dirichlet solutions on annuli, a field catalog, critical points
//! - [`levelsets`]: level curves, `L`, `L'`, `L''`, profiles and bound checks
//! - [`curvature_flow`]: `k`, `h`, their PDE residuals and principle audits
//! - [`bic`]: conical factors, mollification and singular length profiles
//!
//! With the default `parallel` feature, per-level and per-point sweeps run on
//! the rayon pool; results do not depend on the number of threads.

pub mod bic;
pub mod curvature_flow;
mod error;
pub mod geometry;
pub mod harmonic;
pub mod jet;
pub mod levelsets;
pub mod par;
pub mod quadrature;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{Chart, ConformalChart, Point2, ScalarField, WarpedChart};
pub use harmonic::{DirichletSpec, HarmonicField};
pub use levelsets::{LengthProfile, LevelCurve};
