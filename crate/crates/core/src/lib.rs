//! Certifiable GNSS/local frame rotation alignment from raw Doppler shifts.
//!
//! A GNSS receiver measures Doppler shifts that project the receiver's ECEF
//! velocity onto satellite lines of sight, while odometry or VIO reports the
//! same motion in a local world frame. This crate estimates the rotation
//! between the two frames (plus the receiver clock drift rate) by assembling
//! the measurements into a homogeneous quadratic cost, relaxing the SO(3)
//! constraints into a small semidefinite program, and certifying global
//! optimality of the recovered rotation through the eigenvalue structure of
//! the dual certificate matrix.
//!
//! Module map:
//! - [`geom`]: rotations, vectorization, ENU bases, angle metrics.
//! - [`model`]: Doppler forward model and measurement reduction.
//! - [`qcqp`]: cost assembly, SO(3) quadratic constraints, observability.
//! - [`sdpcore`]: dense primal-dual interior-point SDP solver.
//! - [`solver`]: the certifiable pipeline (relax, solve, recover, certify).
//! - [`baselines`]: single-point velocity + registration (VOBA) and a
//!   Gauss-Newton local solver for comparison.
//! - [`sim`]: constellation/trajectory simulator and Monte Carlo harness.
//! - [`io`]: dataset files, sliding windows, run records, summaries.
//!
//! All numerical code is generic over the scalar type through
//! [`float::Float`] (`f32` or `f64`); the aliases at the crate root fix the
//! default `f64` lane used by the simulator, file formats, and CLI.
//!
//! ```
//! use cert_align::sim::{generate_dataset, SimConfig};
//! use cert_align::solver::{align, AlignOptions};
//!
//! let gt = generate_dataset(&SimConfig { seed: 7, ..SimConfig::default() })?;
//! let result = align(&gt.epochs, &AlignOptions::default())?;
//! assert!(result.certificate.certified);
//! assert!(result.primal_cost - result.dual_value < 1e-8);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod baselines;
pub mod float;
pub mod geom;
pub mod io;
pub mod model;
pub mod qcqp;
pub mod sdpcore;
pub mod sim;
pub mod solver;

pub use float::Float;

/// f64 rotation alias for the common concrete lane.
pub type Rotation = geom::RotationMatrix<f64>;
/// f64 measurement alias.
pub type Measurement = model::ReducedMeasurement<f64>;
/// f64 epoch alias.
pub type Epoch = model::Epoch<f64>;
/// f64 alignment result alias.
pub type Alignment = solver::AlignmentResult<f64>;
