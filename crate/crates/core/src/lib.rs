//! Energy management for parallel hybrid-electric aircraft by convex
//! shrinking-horizon model predictive control.
//!
//! Flight plans and aerodynamics reduce the drive power of each stage to a
//! quadratic in aircraft mass ([`flight_dynamics`]). Shaft speeds from a fan map
//! select the loss- and fuel-map coefficients ([`scheduling`]). The optimal
//! power split over the remaining flight is a convex program ([`ocp`]), solved
//! again at every step of the closed loop ([`control`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod flight_dynamics;
pub mod ocp;
pub mod powertrain;
pub mod scheduling;
