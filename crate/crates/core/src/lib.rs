//! Simulation of movable-antenna arrays for secure wireless links.
//!
//! The crate is layered bottom-up:
//!
//! - [`geometry`]: element positions, moving regions and placement constraints.
//! - [`channel`]: far-field steering vectors, near-field spherical-wave
//!   responses and multipath channels.
//! - [`beamforming`]: MRT and zero-forcing weights, beam patterns, focus maps
//!   and secrecy metrics.
//! - [`optimize`]: position optimizers (projected gradient, greedy placement,
//!   particle swarm, alternating updates, exhaustive search).
//! - [`scenario`]: JSON experiment configs and the runners behind the `masim`
//!   command-line tool.
//!
//! ```
//! use masim::channel::{steering_vector, CarrierSpec, Direction};
//! use masim::geometry::make_ula;
//!
//! let carrier = CarrierSpec::from_wavelength(0.01)?;
//! let ula = make_ula(8, 0.005, 0.0)?;
//! let a = steering_vector(&ula, &Direction::axis(90.0)?, &carrier)?;
//! assert!((a.norm_sqr() - 8.0).abs() < 1e-12);
//! # Ok::<(), masim::Error>(())
//! ```

pub mod beamforming;
pub mod channel;
mod error;
pub mod geometry;
pub mod optimize;
pub mod scenario;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/beamforming.md")]
    mod beamforming {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
