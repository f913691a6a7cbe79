//! Time-distributed MPC with projected-gradient solvers: condensed QP
//! construction, certified contraction constants, closed-loop simulation,
//! and gap bounds against the exactly solved benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certificates;
pub mod closed_loop;
pub mod condensed;
pub mod error;
pub mod gap;
pub mod numerics;
pub mod pgm;
pub mod plant;
pub mod probe;
pub mod scalar;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use scalar::Real;

pub use certificates::{Certificates, EdissConstants};
pub use closed_loop::{ClosedLoopRun, IterationSchedule, RunOptions, RunStatus};
pub use condensed::{build_condensed, CondensedQp};
pub use gap::{GapReport, RateVector};
pub use pgm::{PgmConfig, StepRule};
pub use plant::{BoxSet, ConvexSet, LtiModel};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type LtiModel64 = LtiModel<f64>;
pub type CondensedQp64 = CondensedQp<f64>;
pub type PgmConfig64 = PgmConfig<f64>;
pub type Certificates64 = Certificates<f64>;
pub type ClosedLoopRun64 = ClosedLoopRun<f64>;
pub type GapReport64 = GapReport<f64>;
