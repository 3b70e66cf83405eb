use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Report-style operations (disjointness, perturbation tests, convergence
/// checks) never fail through this type; they return reports with the
/// violations recorded instead.
#[derive(Debug, Error)]
pub enum LaminaError {
    #[error("grid spacing must be positive, got {0}")]
    NonpositiveSpacing(f64),
    #[error("domain mask has no active cells")]
    EmptyMask,
    #[error("domain mask is not 4-connected ({components} components)")]
    DisconnectedMask { components: usize },
    #[error("conformal factor is not positive at node ({i}, {j}): {value}")]
    NonpositiveConformalFactor { i: usize, j: usize, value: f64 },
    #[error("curvature bound / injectivity radius inconsistent with metric: {0}")]
    InconsistentMetric(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("geodesic endpoints coincide")]
    IdenticalEndpoints,
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),
    #[error("invalid boundary data: {0}")]
    InvalidBoundaryData(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("threshold {y} outside the range [{min}, {max}] of the field")]
    ThresholdOutOfRange { y: f64, min: f64, max: f64 },
    #[error("polyline too short for curvature estimation ({0} vertices)")]
    TooShort(usize),
    #[error("no leaves within reach of ({0}, {1})")]
    NoLeavesNearby(f64, f64),
    #[error("flow box shrank below the minimum size ({0})")]
    BoxDegenerate(f64),
    #[error("leaves cross: {0}")]
    DisjointnessViolated(String),
    #[error("window radius {radius} too small (minimum {min})")]
    WindowTooSmall { radius: f64, min: f64 },
    #[error("profile is not monotone: witness labels k1={k1} (sign -1), k2={k2} (sign +1)")]
    NonMonotoneProfile { k1: f64, k2: f64 },
    #[error("profile does not belong to the given flow box")]
    BoxMismatch,
    #[error("transverse measures disagree across overlapping boxes: {0}")]
    InconsistentMeasures(String),
    #[error("current is not closed: max cell curl {0}")]
    NotClosed(f64),
    #[error("domain is not simply connected")]
    NotSimplyConnected,
    #[error("too few profile samples: {got} < {min}")]
    TooFewSamples { got: usize, min: usize },
    #[error("per-box components disagree on overlap: {0}")]
    OverlapMismatch(String),
    #[error("leaf {index} is not a geodesic: max |kappa_g| = {kappa}")]
    LeafNotGeodesic { index: usize, kappa: f64 },
    #[error("geodesic-space measures must be atomic: {0}")]
    NonAtomicMeasure(String),
    #[error("flow box construction failed for sequence item {index}: {source}")]
    BoxConstructionFailed {
        index: usize,
        #[source]
        source: Box<LaminaError>,
    },
    #[error("boundary data has no feasible cut: {0}")]
    InfeasibleBoundary(String),
    #[error("unknown plot kind {0:?}")]
    UnknownKind(String),
    #[error("invalid configuration at {pointer}: {message}")]
    ConfigInvalid { pointer: String, message: String },
    #[error("expression error: {0}")]
    Expression(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV {path} line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LaminaError>;

impl LaminaError {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        LaminaError::ConfigInvalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LaminaError::Io {
            path: path.into(),
            source,
        }
    }
}
