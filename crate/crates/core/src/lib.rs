//! Coverage analysis for a high-speed-train downlink assisted by a
//! reconfigurable intelligent surface (RIS): closed-form coverage from the
//! channel moments, a Monte Carlo cross-check, discrete phase search, RIS
//! placement search and a CSV sweep harness.

pub mod analytics;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod optimizer;
pub mod rng;
pub mod scenario;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
pub use scenario::{load_scenario, ScenarioConfig};
