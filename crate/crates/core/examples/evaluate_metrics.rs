//! CNR, gCNR and the KS speckle test, first on hand-sized samples and then
//! with the windowed protocol on the simulated compounds.
//!
//! `cargo run --release --example evaluate_metrics`

use pwzs::metrics::{cnr_db, evaluate, gcnr, ks_two_sample};
use pwzs::simulator::Fixture;

fn main() -> pwzs::Result<()> {
    println!("CNR([0.1, 0.3] vs [0.4, 0.6]) = {:.4} dB", cnr_db(&[0.1, 0.3], &[0.4, 0.6])?);
    println!("gCNR(disjoint) = {}", gcnr(&[0.1, 0.2], &[0.8, 0.9], 256)?);
    let ks = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0])?;
    println!("KS D = {}, p = {:.4}", ks.statistic, ks.p_value);

    let fx = Fixture::standard();
    let refs = fx.references()?;
    for (name, img) in [("5 angles", &refs.y_low), ("75 angles", &refs.y_all), ("truth", &refs.truth)] {
        let r = evaluate(img, &refs.y_low, &fx.roi, 20, 10, 0)?;
        print!("{name:>10}: {}", r.to_text().replace('\n', "  "));
        println!();
    }
    Ok(())
}
