//! Deterministic single-CPU scheduling simulator with per-request
//! unhappiness accounting.

pub mod acceptance;
pub mod analytics;
pub mod model;
pub mod presets;
pub mod sched;
pub mod sim;
pub mod time;

pub use time::SimTime;
