//! Analytic core for peak-age-of-information (PAoI) statistics in slotted,
//! interference-limited wireless networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — special functions and numerical kernels (generalized
//!   binomials, regularized incomplete beta, adaptive quadrature, series
//!   summation, bracketed root finding);
//! * [`model`] — validated parameter types shared by the analytic layer and
//!   the simulator (network geometry, traffic, activity moments);
//! * [`analytic`] — moments of the conditional success probability, the beta
//!   approximation of its spatial distribution, and the two-step
//!   dominant-system bounding procedure;
//! * [`paoi`] — conditional and spatial PAoI statistics for preemptive and
//!   non-preemptive zero-buffer queues.

pub mod analytic;
pub mod model;
pub mod numerics;
pub mod paoi;
