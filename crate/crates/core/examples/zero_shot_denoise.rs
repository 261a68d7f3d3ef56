//! Trains the denoiser on the standard simulated fixture and scores the
//! result against the noisy compound, the all-angle compound and the truth.
//!
//! `cargo run --release --example zero_shot_denoise -- [iterations]`

use std::time::Instant;

use pwzs::compounding::{full_bmode, DEFAULT_DYNAMIC_RANGE_DB};
use pwzs::metrics::evaluate;
use pwzs::simulator::Fixture;
use pwzs::zerotrain::{denoise, train_zero_shot_with, TrainConfig};

fn main() -> pwzs::Result<()> {
    let iterations = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be an integer"))
        .unwrap_or(1000);
    let fx = Fixture::standard();
    let stack = fx.working_stack()?;
    let refs = fx.references()?;
    let y = full_bmode(&stack, DEFAULT_DYNAMIC_RANGE_DB)?;

    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let every = (iterations / 10).max(1);
    let (params, trace) = train_zero_shot_with(&stack, &cfg, |it, r| {
        if it % every == 0 {
            println!("iter {it:5}  residual {:.5}  consistency {:.5}  total {:.5}", r.residual, r.consistency, r.total);
        }
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "trained {} iterations in {elapsed:.1} s ({:.3} s/iter), final total {:.5}",
        trace.len(),
        elapsed / iterations as f64,
        trace.last().unwrap().total
    );
    let x = denoise(&params, &y)?;

    for (name, img) in [("noisy", &y), ("denoised", &x), ("all-angle", &refs.y_all), ("truth", &refs.truth)] {
        let r = evaluate(img, &y, &fx.roi, 20, 10, 0)?;
        println!(
            "{name:>10}: gCNR {:.3} ± {:.3}  CNR {:6.2} ± {:.2} dB  KS D {:.4} p {:.3}",
            r.gcnr_mean, r.gcnr_std, r.cnr_db_mean, r.cnr_db_std, r.ks_statistic, r.ks_p_value
        );
    }
    let truth = refs.truth.pixels();
    println!(
        "mean |x - truth| {:.4}   mean |y - truth| {:.4}",
        x.pixels().mean_abs_diff(truth)?,
        y.pixels().mean_abs_diff(truth)?
    );
    Ok(())
}
