//! Prints one pass/fail line per acceptance criterion and fails if any
//! criterion does.

use std::process::ExitCode;

use lor_harness::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for (id, name, _) in CRITERIA {
        match run_criterion(id) {
            Ok(outcome) => {
                println!("{outcome}");
                if !outcome.passed {
                    failed.push(name);
                }
            }
            Err(e) => {
                println!("criterion {id} {name:<22} FAIL error: {e}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
