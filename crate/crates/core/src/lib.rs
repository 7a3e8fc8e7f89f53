//! Joint communication and computation resource allocation for maritime
//! mobile edge computing, with a slotted simulator and baseline policies.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod decision;
pub mod error;
pub mod jcora;
pub mod oracle;
pub mod policy;
pub mod queueing;
pub mod scenario;
pub mod sim;

pub use decision::Decision;
pub use error::{Error, Result};
pub use policy::{LinkBudget, Scheduler, SlotContext};
pub use queueing::NetworkState;
pub use scenario::{Policy, ScenarioConfig, Topology};
pub use sim::{run_simulation, RunSummary, Simulation, SlotRecord};
