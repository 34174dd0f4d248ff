//! Models of malaria transmission under sugar-bait paratransgenesis.
//!
//! Hosts follow SIS dynamics; mosquitoes follow SIRS dynamics with a fixed
//! incubation delay, where the "removed" compartment holds mosquitoes that
//! ingested parasite-killing bacteria from a sugar bait. The crate provides:
//!
//! - closed-form reproduction numbers and equilibria ([`analytics`]),
//! - a fixed-step Euler integrator for the delay-differential systems
//!   ([`dde`]),
//! - a per-mosquito discrete-time Monte Carlo simulator ([`stochastic`]),
//! - host attractiveness profiles for heterogeneous biting ([`profile`]),
//! - an optimal targeted bait allocator with a brute-force oracle
//!   ([`allocation`]),
//! - a scenario file format and CSV/SVG output helpers for the CLI
//!   ([`scenario`], [`output`]).

pub mod allocation;
pub mod analytics;
pub mod dde;
pub mod output;
pub mod params;
pub mod profile;
pub mod scenario;
pub mod stochastic;

pub use allocation::BaitAllocation;
pub use analytics::{EquilibriumResult, R0Result, StabilityVerdict};
pub use dde::{HomogeneousState, Trajectory};
pub use params::ModelParams;
pub use profile::{AttractivenessProfile, PowerLawSpec};
