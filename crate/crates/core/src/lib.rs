//! Second-order quadratic-variation machinery for self-similar Gaussian
//! processes: exact simulation of fBm/sfBm/bifBm trajectories, Orey-index
//! estimation from a single path, closed-form asymptotic covariances of the
//! scaled V statistics, numerical verification of the CLT hypotheses, and a
//! seeded Monte Carlo harness.

pub mod asymptotics;
pub mod conditions;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod montecarlo;
pub mod pathgen;
pub mod quadvar;
pub mod stats;

pub use asymptotics::AsymptoticCovariance;
pub use conditions::{CheckKind, ConditionReport, Verdict};
pub use error::{Error, Result};
pub use estimator::EstimateResult;
pub use kernels::CovarianceModel;
pub use montecarlo::{McConfig, McReport, McStatistic};
pub use pathgen::{Generator, GridPath};
pub use quadvar::{CoefficientSet, NormalizationMode};
