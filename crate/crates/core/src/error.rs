use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("evaluation hit a pole at s = {0}")]
    PoleHit(Complex64),

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("algebraic loop: 1 + a·b vanishes identically")]
    AlgebraicLoop,

    #[error("zero on the imaginary axis at s = {0}; mirror is ambiguous")]
    AmbiguousMirror(Complex64),

    #[error("pole at |p| = {modulus} lies within the boundary band of r = {radius}")]
    BoundaryAmbiguity { modulus: f64, radius: f64 },

    #[error("root finder residual {residual:e} exceeds tolerance")]
    RootAccuracy { residual: f64 },

    #[error("near cancellation of a right-half-plane pole/zero pair at s = {0}")]
    RhpCancellation(Complex64),

    #[error("transfer function is not proper: {0}")]
    Improper(String),

    #[error("model matching failed: residual {0:e}")]
    ModelMatching(f64),

    #[error("unstable turbine model: k_stab = {k_stab} must exceed z = {z}")]
    UnstableTurbineModel { k_stab: f64, z: f64 },

    #[error("network is not connected (second eigenvalue {0:e})")]
    Disconnected(f64),

    #[error("Kron reduction failed: {0}")]
    Reduction(String),

    #[error("normalization failed: bus {0} has zero diagonal entry")]
    Normalization(usize),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("agent {0} is an algebraic node (no inertia, actuators or angle feedback)")]
    AlgebraicNode(usize),

    #[error("contour construction: {0}")]
    Contour(String),

    #[error("point {point} lies on the curve (distance {distance:e})")]
    MarginalStability { point: Complex64, distance: f64 },

    #[error("contour undersampled near sample {index}: argument step {step} rad")]
    Undersampled { index: usize, step: f64 },

    #[error("agent {agent} has a pole on the contour at s = {s}; re-route the contour")]
    PoleOnContour { agent: usize, s: Complex64 },

    #[error("realization failed: {0}")]
    Realization(String),

    #[error("integrator configuration: {0}")]
    IntegratorConfig(String),

    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },
}
