//! Library surface of the sweep tool, exposed so integration tests can
//! drive sweeps without shelling out.

pub mod config;
pub mod output;
pub mod sweep;
