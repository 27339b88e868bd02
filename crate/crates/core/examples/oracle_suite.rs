//! The table `cmflow verify` prints, at a chosen base resolution.

use cmflow::harness::{verify, VerifyOptions};

fn main() {
    let resolution = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    let rep = verify(VerifyOptions {
        resolution,
        ..VerifyOptions::default()
    });
    print!("{}", rep.table());
    println!(
        "{}",
        if rep.all_passed() {
            "all checks pass"
        } else {
            "some checks failed"
        }
    );
}
