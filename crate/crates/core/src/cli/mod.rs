//! Command implementations behind the `stabgame` binary.

pub mod analyze;
pub mod config;
pub mod frames;
pub mod lookup;
pub mod run;
pub mod selftest;

pub use analyze::cmd_analyze;
pub use config::SweepConfig;
pub use frames::cmd_frames;
pub use lookup::cmd_lookup_build;
pub use run::cmd_run;
pub use selftest::cmd_selftest;
