//! Linear transceiver design for the Gaussian MISO broadcast channel with
//! imperfect transmitter CSI.
//!
//! A base station with `N` antennas serves `K` single-antenna users. Receivers
//! know their own channels perfectly; the transmitter only knows a conditional
//! channel distribution (mean plus Gaussian error covariance per user). All
//! conditional expectations are evaluated by Monte Carlo over an ensemble of
//! `M` channel realizations.
//!
//! The crate provides:
//!
//! - [`power_min`]: minimize total transmit power subject to per-user average
//!   rate targets, enforced conservatively as average-MMSE ceilings. The solver
//!   alternates between broadcast-channel MMSE receivers, an MSE-preserving
//!   conversion to the dual multiple-access channel, a fixed-point power
//!   update built on standard interference functions, and the conversion back.
//! - [`feasibility`]: a sum-MMSE lower bound and polytope test deciding
//!   whether a target tuple is achievable with finite power, fixed-point
//!   existence conditions, and the boundary characterization for `N < K`.
//! - [`balancing`]: maximize a common scaling of all rate targets under a
//!   total power budget by bisection around the power-minimization solver.
//! - [`analysis`]: beta-distribution moment fits for the MMSE distribution,
//!   the rate-vs-bound gap estimate, and the separate-expectation SINR
//!   approximation used as a comparison metric.
//!
//! Hot loops over the realization ensemble run on rayon when the `parallel`
//! feature (default) is enabled and fall back to sequential iteration without
//! it. Reductions use fixed chunking in both modes, so results are
//! bit-identical regardless of mode or thread count.

pub mod analysis;
pub mod balancing;
pub mod bc_model;
pub mod channel;
pub mod duality;
pub mod feasibility;
pub mod mac_model;
pub mod numerics;
pub mod par;
pub mod power_min;

pub use num_complex::Complex64;
