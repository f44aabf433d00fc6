//! Simulation and verification of the joint limit laws of the first crossing
//! point `Υ` and the last exit time `τ` of Gaussian order-statistics
//! sequences crossing the linear boundaries `±βi`.
//!
//! The analytic layers ([`limits`], [`numerics`], [`quadrature`], [`stats`],
//! [`crossing`]) are generic over [`Real`]; the aliases below fix them to
//! `f64`, which is what the samplers produce.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod acceptance;
pub mod covariance;
pub mod crossing;
pub mod error;
pub mod experiment;
pub mod limits;
pub mod numerics;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod stats;

pub use covariance::{build_model, CovarianceKind, CovarianceModel, DependenceClass, RegimeReport};
pub use crossing::{extract_crossings, truncation_horizon};
pub use error::{Error, Result};
pub use experiment::{emit_results, run_experiment, ExperimentConfig, ExperimentResult, OutputFormat};
pub use limits::{a_of_beta, fully_mixed_cdf, gumbel_joint_cdf, strong_mixture_cdf_r1, strong_mixture_cdf_rd, Regime};
pub use sampler::{sample_mixture_window, sample_order_stat_window, sample_window, GaussianWindow, RngStream};
pub use scalar::Real;
pub use stats::{Coordinate, GridSpec};

pub type NormalizationParams = limits::NormalizationParams<f64>;
pub type LimitLaw = limits::LimitLaw<f64>;
pub type CrossingSample = crossing::CrossingSample<f64>;
pub type HorizonCertificate = crossing::HorizonCertificate<f64>;
pub type EmpiricalJointLaw = stats::EmpiricalJointLaw<f64>;
pub type ComparisonInstance = numerics::ComparisonInstance<f64>;
