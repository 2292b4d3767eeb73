//! Selection-region relay routing for random ad hoc networks.
//!
//! Nodes form a Poisson process of density `λ`; under slotted ALOHA each is a
//! transmitter with probability `p`. A transmitter forwards to the nearest
//! receiver inside an annular sector of opening `φ` that excludes the disk of
//! radius `r_m` and points at the destination. The crate provides
//!
//! * [`model`]: success probability, hop-distance law and the closed-form
//!   expected density of progress, with a quadrature oracle;
//! * [`optimize`]: stationarity conditions, the analytic bound on `r_m` and
//!   the joint optimiser over `(φ, r_m)`;
//! * [`sim`]: a deterministic parallel Monte Carlo engine for hops, routes,
//!   physical SIR validation and candidate counting;
//! * [`geometry`]: point-process sampling on disks and annular sectors.

pub mod error;
pub mod geometry;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{AnnularSector, Point2, PointField, Region, RelayDraw};
pub use model::{
    composite_k, expected_density_numeric, expected_density_of_progress, hop_distance_cdf,
    interference_constant_t, success_probability, DerivedConstants, NetworkConfig, SelectionRegion,
};
pub use optimize::{
    joint_residual, optimal_phi_nearest_neighbor, optimal_rm_given_phi, optimize_joint,
    rm_from_phi_closed_form, rm_upper_bound, stationarity_residual_rm, BoundResult,
    OptimizationResult, PhiGrid, RmOptimum, Tolerances,
};
pub use rng::{StreamKey, TrialRng};
pub use sim::{FarField, HopOutcome, Mode, ProtocolSpec, RelaySampling, RouteTrace, SimSettings};
pub use special::incomplete_gamma_3_2;
pub use stats::EstimateWithCI;
