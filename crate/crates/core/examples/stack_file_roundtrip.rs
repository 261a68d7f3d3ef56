//! Writes and re-reads every on-disk format: angle stack, f32 raster,
//! PGM preview, network checkpoint and run configuration.
//!
//! `cargo run --release --example stack_file_roundtrip`

use pwzs::compounding::{full_bmode, DEFAULT_DYNAMIC_RANGE_DB};
use pwzs::io::{pgm, raster, stackfile, RunConfig};
use pwzs::nn::{checkpoint, DenoiserParams};
use pwzs::simulator::Fixture;

fn main() -> pwzs::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let stack = Fixture::standard().working_stack()?;

    let sp = dir.path().join("stack.pwzs");
    stackfile::save(&stack, &sp)?;
    let back = stackfile::load(&sp)?;
    println!("stack: {} bytes, frames identical: {}", std::fs::metadata(&sp).unwrap().len(), back.frames() == stack.frames());

    let y = full_bmode(&stack, DEFAULT_DYNAMIC_RANGE_DB)?;
    let rp = dir.path().join("y.f32");
    raster::save(y.pixels(), &rp)?;
    println!("raster identical: {}", &raster::load(&rp)? == y.pixels());
    pgm::save(&y, dir.path().join("y.pgm"))?;

    let params = DenoiserParams::<f32>::init(3);
    let cp = dir.path().join("net.pwzc");
    checkpoint::save(&params, &cp)?;
    println!("checkpoint identical: {}", checkpoint::load(&cp)?.to_flat() == params.to_flat());

    let cfg = RunConfig::parse(&RunConfig::default().to_text())?;
    println!("config identical: {}", cfg == RunConfig::default());
    Ok(())
}
