//! Simulates the standard speckle/cyst scene and writes its full angle stack
//! and PGM previews of the truth, the 5-angle and the 75-angle compounds.
//!
//! `cargo run --release --example simulate_phantom -- [output_dir]`

use std::path::PathBuf;

use pwzs::io::{pgm, stackfile};
use pwzs::metrics::gcnr;
use pwzs::simulator::Fixture;
use pwzs::BModeImage;

fn main() -> pwzs::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pwzs_simulate"));
    std::fs::create_dir_all(&out).expect("create output directory");

    let fx = Fixture::standard();
    let stack = fx.full_stack()?;
    let (h, w) = stack.shape();
    println!("{} frames of {h}x{w}, angles {:.2}..{:.2} deg", stack.k(), stack.angles_deg()[0], stack.angles_deg()[stack.k() - 1]);
    stackfile::save(&stack, out.join("stack.pwzs"))?;

    let refs = fx.references()?;
    let roi = fx.roi.roi_mask(h, w);
    let bg = fx.roi.background_mask(h, w);
    let region_gcnr = |b: &BModeImage| {
        let pick = |m: &[bool]| -> Vec<f64> {
            b.pixels().as_slice().iter().zip(m).filter(|(_, &k)| k).map(|(&v, _)| v as f64).collect()
        };
        gcnr(&pick(&roi), &pick(&bg), 256)
    };
    for (name, img) in [("y5", &refs.y_low), ("y75", &refs.y_all), ("truth", &refs.truth)] {
        pgm::save(img, out.join(format!("{name}.pgm")))?;
        println!("{name:>6}: gCNR over the whole ROI {:.3}", region_gcnr(img)?);
    }
    println!("wrote {}", out.display());
    Ok(())
}
