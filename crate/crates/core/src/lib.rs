//! Sequential heat and electricity market clearing with electricity-aware
//! heat unit commitment.

pub mod bidding;
pub mod io;
pub mod market;
pub mod solver;
pub mod system;
pub mod uc;
