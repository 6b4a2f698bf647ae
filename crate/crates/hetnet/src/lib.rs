//! Analysis and simulation of a two-tier heterogeneous cellular network
//! with LoS/NLoS propagation and multi-antenna base stations.
//!
//! The crate has two independent evaluation routes for the same physical
//! model:
//!
//! * closed-form/quadrature analysis of association probabilities,
//!   serving-distance laws, and the achievable downlink rate under pilot
//!   contamination (`association`, `rate`);
//! * an event-level Monte Carlo simulator that samples deployments,
//!   schedules users, runs uplink MMSE training, and accumulates exact
//!   downlink SINR for the typical user (`montecarlo`).
//!
//! `experiments` layers parameter sweeps and optimizers on top, and `io`
//! provides the deterministic CSV/JSON emission used by the CLI.

pub mod association;
pub mod config;
pub mod error;
pub mod montecarlo;
pub mod profile;
pub mod propagation;
pub mod quad;
pub mod rate;

pub use association::{
    association_probabilities, conditional_moment, mean_loads, zeta1, zeta2, AssociationReport, Branch,
    ServingDistanceDensity,
};
pub use config::{apply_set, apply_set_list, parse_config, parse_config_str, AnalysisOptions, NetworkConfig, ParsedConfig};
pub use error::{Error, Result};
pub use montecarlo::{estimate_rate, run_simulation, simulate_association, RateEstimate, SimConfig, SinrSample};
pub use profile::LoSProfile;
pub use propagation::{default_3gpp_model, derived_constants, DerivedConstants, PropagationModel, Tier};
pub use rate::{
    achievable_rate, achievable_rate_with, interferer_density, psi_kernel, rate_constants, xi_kernel, RateConstants,
    RateReport, RateTolerances,
};
