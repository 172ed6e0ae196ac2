//! Certification toolkit for interconnected discrete-time systems.
//!
//! The crate is organized around a small number of building blocks:
//!
//! * [`kfun`]: exact piecewise-linear algebra for comparison functions
//!   (class K / K∞ gains, rates and bounds, and KL decay envelopes).
//! * [`dtsim`]: discrete-time systems, interconnections, measurement
//!   functions, input signals, and trajectory generation.
//! * [`gaingraph`]: gain digraphs, simple-cycle enumeration, the cyclic
//!   small-gain test, and constructive per-node scalings.
//! * [`certify`]: sampled falsification of Lyapunov-type inequalities and
//!   constructive conversions between the three decrease forms.
//! * [`composer`]: composition of subsystem estimates into a network
//!   certificate and the reverse decomposition of a certificate into
//!   subsystem gains.
//! * [`scenarios`]: ready-made application systems (coupled max-type maps,
//!   polar convergence, oscillator synchronization, incremental stability,
//!   distributed observers) with their bundled certificates and gains.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the command
//! line live in the companion `sgk-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod certify;
pub mod composer;
pub mod dtsim;
pub mod gaingraph;
pub mod kfun;
pub mod scenarios;
