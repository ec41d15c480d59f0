//! Acceptance criteria, one line each. Exits non-zero if any fails.
//!
//! `cargo test -p lrpr-harness --test acceptance -- 1 4` runs a subset.

use lrpr_harness::acceptance::{run_criteria_with, CRITERIA};

fn main() {
    let picked: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let ids = if picked.is_empty() {
        CRITERIA.to_vec()
    } else {
        picked
    };
    let results = run_criteria_with(&ids, |r| println!("{r}"));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
