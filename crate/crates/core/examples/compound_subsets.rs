//! Angle selection, parity split and the recombination identity
//! `(3 S1 + 2 S2) / 5 = Y` on the simulated 5-angle stack.
//!
//! `cargo run --release --example compound_subsets`

use pwzs::compounding::{compound, compound_all, make_pair, parity_partition, select_angles, DEFAULT_DYNAMIC_RANGE_DB};
use pwzs::simulator::Fixture;

fn main() -> pwzs::Result<()> {
    let fx = Fixture::standard();
    let idx = select_angles(fx.angles_deg.len(), fx.k)?;
    let angles: Vec<f64> = idx.iter().map(|&i| fx.angles_deg[i]).collect();
    println!("working indices {idx:?} -> angles {angles:.2?}");

    let stack = fx.working_stack()?;
    let (i1, i2) = parity_partition(stack.k())?;
    println!("I1 = {i1:?}, I2 = {i2:?}");

    let s1 = compound(&stack, &i1)?;
    let s2 = compound(&stack, &i2)?;
    let y = compound_all(&stack);
    let (n1, n2) = (i1.len() as f64, i2.len() as f64);
    let worst = s1
        .as_slice()
        .iter()
        .zip(s2.as_slice())
        .zip(y.as_slice())
        .map(|((&a, &b), &c)| {
            let r = (n1 * a as f64 + n2 * b as f64) / (n1 + n2);
            (r - c as f64).abs() / (c as f64).abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    println!("max relative error of the recombined compound: {worst:.3e}");

    let pair = make_pair(&stack, DEFAULT_DYNAMIC_RANGE_DB)?;
    let diff = pair.s1.pixels().mean_abs_diff(pair.s2.pixels())?;
    println!("mean |s1 - s2| after log compression: {diff:.4}");
    Ok(())
}
