//! Numerical laboratory for the least-gradient Dirichlet problem on 2D
//! Riemannian domains and the minimal laminations carried by its solutions.
//!
//! The pipeline runs `solver` (primal-dual total variation minimisation with a
//! calibration field), `lamination` (level-set leaves, curvature, flow boxes),
//! `transverse` (transverse measures and Ruelle-Sullivan currents), `gorny`
//! (absolutely continuous / Cantor / jump splitting of transverse profiles) and
//! `convergence` (Thurston, flow-box and vague convergence of sequences).

pub mod domain;
pub mod error;
pub mod expr;
pub mod family;
pub mod flowbox;
pub mod gorny;
pub mod geometry;
pub mod hyperbolic;
pub mod io;
pub mod lamination;
pub mod plot;
pub mod scenario;
pub mod shortest;
pub mod solver;
pub mod transverse;
pub mod testforms;
pub mod contour;
pub mod convergence;

pub use domain::{DomainConfig, EdgeField, MetricDomain, MetricKind, NodeField};
pub use error::{LaminaError, Result};
