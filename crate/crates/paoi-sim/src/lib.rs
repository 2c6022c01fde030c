//! Slot-level simulator for peak age of information over an
//! interference-limited field of transmitter–receiver pairs.
//!
//! The simulator exists to check the analytic layer in `paoi-core` against
//! mechanically generated sample paths, so it favors exactness and
//! reproducibility over raw speed:
//!
//! * every random decision is a pure function of `(seed, stream, counters)`
//!   ([`rng`]), making runs bit-identical regardless of mode or iteration
//!   order;
//! * both queue disciplines are tracked in a single pass over one shared
//!   random stream, because a zero-buffer queue is busy on exactly the same
//!   slots whether a new arrival replaces the packet in service or is
//!   dropped ([`queue`]);
//! * delivery outcomes are drawn from the exact conditional success
//!   probability given the set of active interferers, which has the same
//!   joint law as drawing every fading gain individually ([`run`]).
//!
//! [`run::run`] consumes a [`config::SimConfig`] and produces a
//! [`summary::SpatialSummary`] plus optional per-delivery traces.

pub mod config;
pub mod network;
pub mod queue;
pub mod rng;
pub mod run;
pub mod summary;

pub use config::{Mode, SimConfig, SimError};
pub use run::{run, SimOutput};
pub use summary::SpatialSummary;
