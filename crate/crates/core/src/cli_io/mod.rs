//! Command-line plumbing: configuration, traces, plots and verification.

pub mod config;
pub mod run;
pub mod svg;
pub mod trace;
pub mod verify;

pub use config::{Command, RunConfig};
pub use run::{catalog_entry, error_kind, exit_code, run, RunOutcome};
pub use svg::{render_phase_portrait, PlotStyle};
pub use trace::{read_trace, write_trace, FlowTrace};
pub use verify::{run_check, CheckReport, CHECKS};

/// Exit status when every step succeeded but a verification check failed.
pub const EXIT_VERIFY_FAILED: i32 = 4;
