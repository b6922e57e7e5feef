//! Finite-difference check of every parameter gradient on small end-to-end models.
//!
//! `cargo run --release --example gradcheck -- [seed]`

use mssan::harness::{standard_cases, CheckSettings};

fn main() -> mssan::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let mut all = true;
    for case in standard_cases(seed) {
        let report = case.run(CheckSettings::default(), None)?;
        all &= report.passed();
        print!("{report}");
    }
    println!(
        "{}",
        if all {
            "all gradients match"
        } else {
            "gradient mismatch"
        }
    );
    Ok(())
}
