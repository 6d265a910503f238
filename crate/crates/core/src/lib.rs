//! Lifetime-maximizing resource allocation for a UAV-enabled cognitive NOMA
//! uplink.
//!
//! A single UAV hovers at a fixed altitude and collects data from `K` ground
//! devices over spectrum licensed to a primary network. The crate computes the
//! UAV horizontal position, per-device transmit powers and the SIC decoding
//! order that maximize the minimum device lifetime, subject to per-device QoS
//! rates and a probabilistic interference cap at the primary receiver.
//!
//! Solvers:
//!
//! * [`exact`]: per-order closed-form powers plus a Lagrange dual solved with a
//!   constrained ellipsoid method, enumerated over all `K!` decoding orders.
//! * [`sca`]: binary decode-before matrix reformulation, penalty relaxation and
//!   successive convex approximation.
//! * [`baselines`]: NOMA with the UAV pinned at the device centroid, and
//!   equal-bandwidth FDMA with a jointly optimized position.
//!
//! [`kernel`] is the small convex-program solver the others lean on, and
//! [`experiment`] holds scenario generation and sweep harness logic shared
//! with the CLI.

pub mod baselines;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod kernel;
pub mod model;
pub mod par;
pub mod sca;

pub use error::{Error, Result};
pub use model::{DecodingOrder, FeasibilityReport, PlacementSolution, Point, Scenario};
