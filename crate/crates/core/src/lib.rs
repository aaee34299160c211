//! Adversarial online learning with kernel losses.
//!
//! The player picks actions `a` from a set in `R^d`, the adversary picks `w`
//! in an RKHS, and the loss is `<Phi(a), w>`. The crate provides:
//!
//! - [`kernel`]: kernels, losses and explicit feature maps.
//! - [`proxy`]: finite-dimensional proxy kernels by kernel PCA.
//! - [`design`]: D-optimal exploration and covariance handling.
//! - [`bandit`]: exponential weights under bandit feedback.
//! - [`fullinfo`]: full-information exponential weights and the online
//!   conditional-gradient method, with an FTRL reference solver.
//! - [`quadprog`]: unit-ball trust-region solver and the quadratic
//!   exponential-weights sampler.
//! - [`harness`]: adversaries, regret accounting and experiments.
//!
//! All randomness flows through [`rng::StreamRng`].

// `!(x > 0.0)` style checks are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod design;
pub mod error;
pub mod fullinfo;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod proxy;
pub mod quadprog;
pub mod rng;
pub mod weights;

pub use bandit::{configure_bandit, BanditConfig, BanditSetup, ScheduleKind};
pub use design::{Covariance, DiscreteDistribution};
pub use error::{Error, ErrorClass, Result};
pub use fullinfo::{ActionSet, CgConfig, ConvexCombination};
pub use harness::{Adversary, ExperimentConfig, RegretTrace};
pub use kernel::{AdversaryAction, KernelKind, KernelSpec, Point};
pub use proxy::{EigendecayProfile, SampleBasis};
pub use quadprog::QuadraticObjective;
pub use rng::StreamRng;
pub use weights::WeightState;
