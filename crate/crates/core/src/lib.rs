//! Discrete-event simulator for a single-gateway LoRaWAN class A network
//! with confirmed traffic, acknowledgements and regional duty-cycle limits.

pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod sweep;

pub use engine::{Scheduler, SimTime};
pub use error::{ConfigError, MetricsError, PhyError};
pub use scenario::ScenarioConfig;
pub use sim::{run, RunOutput, SimError};
pub use sweep::{run_sweep, SweepSpec};
