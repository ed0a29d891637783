//! Simulation and asymptotics for extremes of order-statistic processes
//! driven by self-similar Gaussian and skew-Gaussian processes.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! kernels  ->  pathsim  ->  functionals  ->  harness
//!    \             \                            /
//!     \             `-- conditions probes -----'
//!      `-- asymptotics (closed forms + limit-cluster Monte Carlo)
//! ```
//!
//! * [`kernels`] — covariance kernels of the self-similar processes, their
//!   Lamperti-transformed stationary forms, local expansions, marginal laws
//!   and level/time scaling schemes.
//! * [`pathsim`] — exact Gaussian path simulation (Cholesky, circulant
//!   embedding, Brownian increments), skew-Gaussian assembly, order-statistic
//!   path extraction and conditional tail sampling.
//! * [`functionals`] — supremum, sojourn time and the excess-integral
//!   transform of normalized sojourns.
//! * [`asymptotics`] — exact and first-order tail/sojourn formulas, the
//!   limit-cluster occupation tail `Θ_r`, its derivative at zero and the
//!   resulting supremum-probability predictions.
//! * [`conditions`] — numerical probes of the qualitative hypotheses (A, B,
//!   C, C*) behind the asymptotic predictions.
//! * [`harness`] — reproducible parallel Monte-Carlo experiments and
//!   convergence tables.

pub mod asymptotics;
pub mod conditions;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod kernels;
pub mod pathsim;
pub mod quad;
pub mod rng;
pub mod special;

pub use error::CoreError;
