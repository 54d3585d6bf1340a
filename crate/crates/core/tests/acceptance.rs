//! One line per acceptance check. Set ACCEPT_VERBOSE=1 for per-scenario rows.

use std::process::ExitCode;

use appease_core::acceptance::{check, CRITERIA};

fn main() -> ExitCode {
    let verbose = std::env::var_os("ACCEPT_VERBOSE").is_some();
    let only: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, title) in CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        match check(id).expect("listed criterion") {
            Ok(outcome) => {
                println!("{outcome}");
                if verbose {
                    for row in &outcome.rows {
                        println!("    {row}");
                    }
                }
                failed += usize::from(!outcome.pass);
            }
            Err(e) => {
                println!("FAIL {id:>2} {title}: {e}");
                failed += 1;
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} check(s) failed");
        ExitCode::FAILURE
    }
}
