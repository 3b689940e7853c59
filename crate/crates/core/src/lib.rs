//! Two-stage virtual energy-storage sharing.
//!
//! Users buy virtual capacity at a daily unit price and dispatch it against a
//! demand-charge tariff; an aggregator nets their dispatch, sizes physical
//! storage and prices the capacity. The crate covers both stages, the
//! threshold-price structure linking them, and a physical-storage benchmark.

pub mod aggregator;
pub mod benchmark;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod peak;
pub mod solver;
pub mod user;

pub use error::{Error, Result};
