//! Runs every acceptance criterion and prints one line per criterion.
//! Built without the libtest harness so the lines always reach stdout.

use std::process::ExitCode;

use bundleflow::cli_io::{run_check, CHECKS};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for name in CHECKS {
        match run_check(name) {
            Ok(report) => {
                println!("{}", report.line());
                if !report.passed {
                    failed.push(name.to_string());
                }
            }
            Err(e) => {
                println!("FAIL {name}: {e}");
                failed.push(name.to_string());
            }
        }
    }
    println!("acceptance: {} of {} passed", CHECKS.len() - failed.len(), CHECKS.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
