//! Acceptance suite: one PASS/FAIL line per criterion A1–A11 on the
//! canonical spec. Exits non-zero when any criterion fails.

use std::process::ExitCode;

use cascade_verify::{run_one, Context, ALL};
use cascade_core::presets;

fn main() -> ExitCode {
    let ctx = Context::new(presets::canonical());
    println!("acceptance suite on spec '{}'", ctx.spec.label());
    let mut failed = Vec::new();
    for id in ALL {
        let outcome = run_one(&ctx, id);
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(outcome.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", ALL.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of {} criteria failed: {}", failed.len(), ALL.len(), failed.join(", "));
        ExitCode::FAILURE
    }
}
