//! Nyquist contours, eigenloci sweeps and stability checks.

mod checks;
mod contour;
mod hull;
mod sweep;
mod winding;

pub use checks::{
    build_contour, decentralized_check, default_outer_radius, fov_check, fov_min_radius, lossy_exponential_check,
    theorem1_check, unstable_pole_count, ClosestApproach, Hyperplane, Outcome, Policy, SweepOptions,
    Verdict, Violation, CLOSURE_TOL, GATE_PADE_ORDER, RAY_BAND,
};
pub use contour::{
    close_conjugate, make_contour, ArcRole, Contour, ContourKind, ContourSample, Indentation, Piece,
    DEFAULT_DENSITY, INDENT_REL, MIN_DENSITY,
};
pub use hull::{convex_hull, leftmost_real_crossing, segment_real_crossing};
pub use sweep::{
    adaptive_sweep, eigenloci_sweep, hungarian, match_branches, sweep_matrix, vertex_sweep,
    vertices_at, Approach, LociEvaluator, LociSweep, LoopMatrix, MAX_REFINE_LEVELS,
};
pub use winding::{segment_distance, winding_number, ON_CURVE_TOL};
