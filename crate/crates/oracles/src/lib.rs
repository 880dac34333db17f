//! Brute-force and closed-form reference values.
//!
//! Nothing in this crate depends on the main library; every routine here is
//! written from its defining representation so that it can be used to check
//! the production code paths.

pub mod bessel;
pub mod gaussian;
pub mod oscillator;
pub mod quad;
pub mod riesz;
pub mod well;

pub use bessel::bessel_integral_oracle;
pub use oscillator::{oscillator_green_oracle, oscillator_heat_oracle};
pub use riesz::ball_riesz_oracle;
pub use well::square_well_ground_state;
