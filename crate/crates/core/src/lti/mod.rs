//! Rational transfer functions with optional output delay.

mod poly;
mod tf;

pub use poly::Polynomial;
pub use tf::{
    combine, mp_mirror, pade_delay, rhp_poles_in_region, Combination, TransferFunction, AXIS_TOL,
    BOUNDARY_BAND,
};
#[allow(unused_imports)]
pub(crate) use tf::poles_in_region;
