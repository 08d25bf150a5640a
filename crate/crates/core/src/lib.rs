//! Total-power minimization for downlink NOMA with receiver decoding power.
//!
//! A base station serves `M` users over `N` subcarriers. Users sharing a
//! subcarrier are decoded by successive interference cancellation in
//! ascending order of channel gain, and every user spends decoding power
//! proportional to all the rate it decodes (its own plus the weaker users'
//! it has to cancel). Multiplexing more users per subcarrier saves
//! transmission power but costs decoding power; the solvers here choose the
//! per-subcarrier user clusters and the rate split jointly.
//!
//! Working in the rate domain makes the demand constraints linear: the
//! powers are a closed-form function of the rates ([`transform`]). The
//! cluster-size limit becomes a penalty on the ℓ0 norm of each subcarrier's
//! rate vector, smoothed by a logarithm and linearized around the current
//! iterate ([`objective`]). [`solver::jpcuc`] minimizes the resulting convex
//! majorizers in sequence, and [`oracle::oracle_optimum`] finds the global
//! optimum of small instances by enumerating clusterings.
//!
//! ```
//! use noma_power::prelude::*;
//!
//! let cfg = SystemConfig::uniform(3, 3, 4.0, 2);
//! let geometry = DropGeometry::uniform(3, 300.0, 1);
//! let channels = generate_channels(&cfg, &geometry, &ChannelOptions::default(), 1).unwrap();
//! let report = jpcuc(&cfg, &channels, &SolverOptions::default()).unwrap();
//! assert!(report.objective.total > 0.0);
//! for u in 0..3 {
//!     let served = report.rates.user_total(&channels, u);
//!     assert!((served - 4.0).abs() < 1e-6 * 4.0);
//! }
//! ```
//!
//! Units: rates in Mbit/s, powers in W, decoder efficiency in J/Mbit.

pub mod bench;
pub mod channel;
pub mod config;
pub mod error;
pub mod objective;
pub mod oracle;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bench::{run_experiment, ExperimentSpec, SolverKind, SweepAxis};
    pub use crate::channel::{generate_channels, ChannelOptions, ChannelSet, DropGeometry};
    pub use crate::config::SystemConfig;
    pub use crate::objective::{total_power, ObjectiveBreakdown};
    pub use crate::oracle::{oma_baseline, oracle_optimum};
    pub use crate::solver::{jpcuc, SolveReport, SolverOptions};
    pub use crate::transform::{rates_to_powers, PowerAllocation, RateAllocation};
}
