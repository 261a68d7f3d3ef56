//! The `pwzs` command line: `simulate`, `denoise` and `evaluate`.
//!
//! Every flag overrides the matching key of the `--config` file; `--set
//! key=value` reaches any other key. Exit codes: 0 success, 2 usage, config
//! or data error, 3 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::compounding::{full_bmode, select_angles, BModeImage, DEFAULT_DYNAMIC_RANGE_DB};
use crate::error::{Error, Result};
use crate::io::{pgm, raster, stackfile, RunConfig};
use crate::metrics::{evaluate, MetricsReport};
use crate::nn::checkpoint;
use crate::zerotrain::{denoise, train_zero_shot_with};

#[derive(Debug, Parser)]
#[command(name = "pwzs", version, about = "Zero-shot denoising of low-angle plane-wave compounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a speckle/cyst scene and write its full angle stack to `input`.
    Simulate(CommonArgs),
    /// Train on the k working angles of `input` and write the denoised image.
    Denoise(CommonArgs),
    /// Score `image` against the k-angle compound of `input`.
    Evaluate(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for the phantom, the frames and network initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of SGD iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Weight of the gradient-consistency loss.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// SGD learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Number of working steering angles.
    #[arg(long)]
    pub k: Option<usize>,
    /// Angle stack file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = Some(v.clone());
        }
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericFailure { .. } => 3,
        _ => 2,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be ≥ 2, got {k}")));
    }
    Ok(())
}

/// Writes the full angle stack plus `truth.pgm` / `truth.f32`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    check_k(cfg.k)?;
    let fx = cfg.fixture()?;
    let input = cfg.input()?.to_path_buf();
    let out = cfg.output_dir()?;
    ensure_dir(out)?;
    if let Some(parent) = input.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let stack = fx.full_stack()?;
    stackfile::save(&stack, &input)?;
    let truth = fx.references()?.truth;
    let (tp, tf) = (out.join("truth.pgm"), out.join("truth.f32"));
    pgm::save(&truth, &tp)?;
    raster::save(truth.pixels(), &tf)?;
    Ok(vec![input, tp, tf])
}

/// Trains on the working angles and writes `y.pgm`, `denoised.pgm`,
/// `denoised.f32`, `trace.txt` and the optional checkpoint.
pub fn cmd_denoise(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<Vec<PathBuf>> {
    check_k(cfg.k)?;
    let train = cfg.train_config();
    train.validate()?;
    let out = cfg.output_dir()?;
    let all = stackfile::load(cfg.input()?)?;
    let stack = all.select(&select_angles(all.k(), cfg.k)?)?;
    let y = full_bmode(&stack, DEFAULT_DYNAMIC_RANGE_DB)?;
    let every = (train.iterations / 10).max(1);
    let (params, trace) = train_zero_shot_with(&stack, &train, |it, r| {
        if it % every == 0 || it + 1 == train.iterations {
            progress(&format!(
                "iteration {it}: residual {:.6} consistency {:.6} total {:.6}",
                r.residual, r.consistency, r.total
            ));
        }
    })?;
    let x = denoise(&params, &y)?;

    ensure_dir(out)?;
    let paths: Vec<PathBuf> = ["y.pgm", "denoised.pgm", "denoised.f32", "trace.txt"]
        .iter()
        .map(|n| out.join(n))
        .collect();
    pgm::save(&y, &paths[0])?;
    pgm::save(&x, &paths[1])?;
    raster::save(x.pixels(), &paths[2])?;
    trace.write(&paths[3])?;
    let mut written = paths;
    if let Some(ck) = &cfg.checkpoint {
        checkpoint::save(&params, ck)?;
        written.push(ck.clone());
    }
    Ok(written)
}

/// Reports for the scored image and for the k-angle reference itself.
pub fn evaluate_config(cfg: &RunConfig) -> Result<(MetricsReport, MetricsReport)> {
    check_k(cfg.k)?;
    let all = stackfile::load(cfg.input()?)?;
    let stack = all.select(&select_angles(all.k(), cfg.k)?)?;
    let reference = full_bmode(&stack, DEFAULT_DYNAMIC_RANGE_DB)?;
    let image = BModeImage::new(raster::load(cfg.image_path()?)?, DEFAULT_DYNAMIC_RANGE_DB)?;
    let roi = cfg.roi();
    let seed = cfg.seed;
    let img = evaluate(&image, &reference, &roi, cfg.n_windows, cfg.window_radius, seed)?;
    let refr = evaluate(&reference, &reference, &roi, cfg.n_windows, cfg.window_radius, seed)?;
    Ok((img, refr))
}

pub fn metrics_csv(image: &MetricsReport, reference: &MetricsReport) -> String {
    format!(
        "name,{}\nimage,{}\nreference,{}\n",
        MetricsReport::CSV_HEADER,
        image.csv_row(),
        reference.csv_row()
    )
}

/// Writes `metrics.txt` (image report) and `metrics.csv` (image and
/// reference rows).
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(Vec<PathBuf>, String)> {
    let (img, refr) = evaluate_config(cfg)?;
    let out = cfg.output_dir()?;
    ensure_dir(out)?;
    let (txt, csv) = (out.join("metrics.txt"), out.join("metrics.csv"));
    let text = img.to_text();
    crate::io::write_bytes(&txt, text.as_bytes())?;
    crate::io::write_bytes(&csv, metrics_csv(&img, &refr).as_bytes())?;
    Ok((vec![txt, csv], text))
}

/// Runs one parsed invocation, printing written paths to stdout and
/// progress to stderr.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => {
            for p in cmd_simulate(&a.resolve()?)? {
                println!("{}", p.display());
            }
        }
        Command::Denoise(a) => {
            for p in cmd_denoise(&a.resolve()?, |m| eprintln!("{m}"))? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate(a) => {
            let (paths, text) = cmd_evaluate(&a.resolve()?)?;
            print!("{text}");
            for p in paths {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "pwzs", "denoise", "--seed", "4", "--iterations", "7", "--lr", "0.01", "--k", "3",
            "--alpha", "0", "--input", "a", "--output-dir", "o", "--set", "n_windows=3",
        ])
        .unwrap();
        let Command::Denoise(a) = cli.command else { panic!() };
        let cfg = a.resolve().unwrap();
        assert_eq!((cfg.seed, cfg.iterations, cfg.k, cfg.n_windows), (4, 7, 3, 3));
        assert_eq!((cfg.learning_rate, cfg.alpha), (0.01, 0.0));
        assert_eq!(cfg.input().unwrap(), Path::new("a"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), 2);
        assert_eq!(
            exit_code(&Error::NumericFailure { location: "a".into(), detail: "b".into() }),
            3
        );
    }

    #[test]
    fn zero_iterations_rejected() {
        let cfg = RunConfig { iterations: 0, input: Some("x".into()), output_dir: Some("o".into()), ..RunConfig::default() };
        assert!(cmd_denoise(&cfg, |_| {}).unwrap_err().to_string().contains("iterations"));
    }
}
