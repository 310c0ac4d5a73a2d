//! Beam-hopping pattern design for multi-beam LEO satellites with
//! grant-free random access.
//!
//! A multi-beam satellite illuminates at most `N_b` of its `N_c` serving
//! cells per time slot over a window of `N_slot` slots; devices in each
//! cell transmit without a handshake on a random (slot, resource-block)
//! pair. The library designs the binary illumination pattern `X`
//! (cells x slots) that maximizes the minimum per-cell success
//! transmission probability:
//!
//! - [`scenario`] — cell geometry, traffic demand and the average
//!   channel-gain matrix from the link budget.
//! - [`metrics`] — collision avoidance rate, decoding-success lower
//!   bound, success reports and the quadratic interference matrix.
//! - [`bisection`] — max-min beam-slot allocation by bisection.
//! - [`admm`] — constrained binary quadratic pattern solver (rounding
//!   projection ADMM).
//! - [`l2box`] — box + l2-sphere reformulation of the binary constraint;
//!   X-update through a Sylvester equation.
//! - [`sylvester`] — Bartels-Stewart solver for `AX + XB = C` with a
//!   dense Kronecker oracle.
//! - [`ao`] — alternating-optimization driver with greedy feasibility
//!   repair.
//! - [`baselines`] — random, round-robin, greedy and genetic pattern
//!   generators.
//! - [`simulator`] — Monte-Carlo simulation of the access process.

pub mod admm;
pub mod ao;
pub mod baselines;
pub mod bisection;
pub mod error;
pub mod l2box;
pub mod metrics;
pub mod scenario;
pub mod simulator;
pub mod sylvester;

pub use error::{Error, Result};
