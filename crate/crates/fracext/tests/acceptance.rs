//! Runs every acceptance criterion and prints one PASS/FAIL line each.

use std::process::ExitCode;

use fracext::verify::{run_criterion, VerifyOptions, CRITERIA};

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let r = run_criterion(id, &opts);
        println!("{}", r.line());
        if !r.passed {
            println!("    details: {}", r.details);
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
