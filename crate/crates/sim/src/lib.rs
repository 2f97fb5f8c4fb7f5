//! Deterministic in-process simulation: one relay, scripted peers, a virtual
//! clock and an in-memory transport, all driving the same protocol state
//! machines as the networked client.

pub mod check;
pub mod fuzz;
pub mod gen;
pub mod harness;
pub mod scenarios;
pub mod script;

pub use gen::gen_catalog;
pub use harness::{run_scenario, Outcome, SimError};
pub use script::{Action, PeerSetup, Script, TimedAction};
