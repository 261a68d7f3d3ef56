//! 64-bit central finite-difference check of every parameter gradient of
//! the total loss on a random kink-free 8x8 fixture.
//!
//! `cargo run --release --example gradient_check -- [seed]`

use pwzs::nn::DenoiserParams;
use pwzs::zerotrain::gradcheck::{check_total_loss, kink_free_fixture, parameter_indices, TOLERANCE};

fn main() -> pwzs::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(0);
    let params = DenoiserParams::<f64>::init(seed);
    let mut inputs = kink_free_fixture(&params, seed)?;
    let report = check_total_loss(&params, &mut inputs, 0.25, &parameter_indices(1))?;
    println!(
        "checked {} parameters, kink margin {:.2e}, max relative error {:.3e} (parameter {})",
        report.checked, report.kink_margin, report.max_relative_error, report.worst_parameter
    );
    println!("{}", if report.max_relative_error <= TOLERANCE { "PASS" } else { "FAIL" });
    Ok(())
}
