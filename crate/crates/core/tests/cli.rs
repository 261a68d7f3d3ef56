//! The `pwzs` binary: outputs, exit codes and error messages.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pwzs::io::{raster, stackfile};

fn pwzs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwzs")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small scene so that training finishes in a second or two.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "input = {}\noutput_dir = {}\nheight = 48\nwidth = 64\ncysts = 24,32,10,0\n\
             n_angles = 11\nk = 5\niterations = 5\nroi_circles = 24,32,8\n\
             background_circles = 24,8,6; 24,56,6\nspeckle_rect = 2,2,12,20\n\
             n_windows = 3\nwindow_radius = 3\n{extra}",
            dir.join("stack.pwzs").display(),
            dir.join("out").display()
        ),
    )
    .unwrap();
    cfg
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_default_config_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let stack = dir.path().join("default.pwzs");
    let out = dir.path().join("o");
    let r = pwzs(&["simulate", "--input", s(&stack), "--output-dir", s(&out)]);
    assert!(r.status.success(), "{}", stderr(&r));
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("default.pwzs") && stdout.contains("truth.pgm"));

    let loaded = stackfile::load(&stack).unwrap();
    assert_eq!(loaded.k(), 75);
    assert_eq!(loaded.shape(), (300, 384));
    assert_eq!(stackfile::encode(&loaded).unwrap(), std::fs::read(&stack).unwrap());
    assert_eq!(raster::load(out.join("truth.f32")).unwrap().shape(), (300, 384));
    let pgm = std::fs::read(out.join("truth.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n384 300\n255\n"));
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "seed = 3\n");
    let a = dir.path().join("a.pwzs");
    let b = dir.path().join("b.pwzs");
    let c = dir.path().join("c.pwzs");
    for (p, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert!(pwzs(&["simulate", "--config", s(&cfg), "--input", s(p), "--seed", seed]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn k_below_two_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    std::fs::write(&cfg, std::fs::read_to_string(&cfg).unwrap().replace("k = 5", "k = 1")).unwrap();
    let r = pwzs(&["simulate", "--config", s(&cfg)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("k must be ≥ 2"), "{}", stderr(&r));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let r = pwzs(&["simulate", "--config", s(&cfg), "--output-dir", s(&blocker.join("sub"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("i/o error"));
}

#[test]
fn denoise_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("net.pwzc");
    let cfg = small_config(dir.path(), &format!("checkpoint = {}\n", ck.display()));
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    let r = pwzs(&["denoise", "--config", s(&cfg)]);
    assert!(r.status.success(), "{}", stderr(&r));
    let out = dir.path().join("out");
    for name in ["y.pgm", "denoised.pgm", "denoised.f32", "trace.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(raster::load(out.join("denoised.f32")).unwrap().shape(), (48, 64));
    let trace = std::fs::read_to_string(out.join("trace.txt")).unwrap();
    assert_eq!(trace.lines().count(), 5);
    assert!(trace.starts_with("0 "));
    assert_eq!(pwzs::nn::checkpoint::load(&ck).unwrap().param_count(), 21_313);
}

#[test]
fn denoise_rejects_zero_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    let r = pwzs(&["denoise", "--config", s(&cfg), "--iterations", "0"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("iterations must be >= 1"));
}

#[test]
fn denoise_rejects_corrupt_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    let stack = dir.path().join("stack.pwzs");
    let mut bytes = std::fs::read(&stack).unwrap();
    bytes[0] = b'Q';
    std::fs::write(&stack, &bytes).unwrap();
    let r = pwzs(&["denoise", "--config", s(&cfg)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("malformed file"));
}

#[test]
fn non_finite_loss_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    let r = pwzs(&["denoise", "--config", s(&cfg), "--lr", "1e38", "--iterations", "20"]);
    assert_eq!(r.status.code(), Some(3), "{}", stderr(&r));
    assert!(stderr(&r).contains("numeric failure"));
}

#[test]
fn evaluate_image_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    assert!(pwzs(&["denoise", "--config", s(&cfg)]).status.success());
    // score y itself: write the reference compound as the image
    let y = dir.path().join("y.f32");
    let stack = stackfile::load(dir.path().join("stack.pwzs")).unwrap();
    let work = stack.select(&pwzs::compounding::select_angles(stack.k(), 5).unwrap()).unwrap();
    let yb = pwzs::compounding::full_bmode(&work, 80.0).unwrap();
    raster::save(yb.pixels(), &y).unwrap();
    let r = pwzs(&["evaluate", "--config", s(&cfg), "--set", &format!("image={}", y.display())]);
    assert!(r.status.success(), "{}", stderr(&r));
    let text = std::fs::read_to_string(dir.path().join("out/metrics.txt")).unwrap();
    assert!(text.contains("ks_statistic = 0.000000\n"));
    assert!(text.contains("ks_pass = true\n"));
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("name,gcnr_mean,"));
    assert_eq!(lines[1].split_once(',').unwrap().1, lines[2].split_once(',').unwrap().1);
}

#[test]
fn evaluate_csv_orders_truth_above_noisy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    let truth = dir.path().join("out/truth.f32");
    let r = pwzs(&["evaluate", "--config", s(&cfg), "--set", &format!("image={}", truth.display())]);
    assert!(r.status.success(), "{}", stderr(&r));
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let gcnr = |row: &str| -> f64 { row.split(',').nth(1).unwrap().parse().unwrap() };
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[1].starts_with("image,") && lines[2].starts_with("reference,"));
    assert!(gcnr(lines[1]) > gcnr(lines[2]), "{csv}");
}

#[test]
fn evaluate_rejects_roi_outside_image() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(pwzs(&["simulate", "--config", s(&cfg)]).status.success());
    let truth = dir.path().join("out/truth.f32");
    let r = pwzs(&[
        "evaluate",
        "--config",
        s(&cfg),
        "--set",
        &format!("image={}", truth.display()),
        "--set",
        "roi_circles=24,60,10",
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("not fully inside"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# header\nk = 5\nthis line is wrong\n").unwrap();
    let r = pwzs(&["evaluate", "--config", s(&cfg)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("config line 3"), "{}", stderr(&r));
}

#[test]
fn help_documents_flags() {
    let r = pwzs(&["denoise", "--help"]);
    let text = String::from_utf8_lossy(&r.stdout);
    for flag in ["--seed", "--iterations", "--alpha", "--lr", "--k", "--config", "--set"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixture.cfg");
    let mut cfg = pwzs::io::RunConfig::load(&path).unwrap();
    assert!(cfg.input.is_some() && cfg.output_dir.is_some());
    cfg.input = None;
    cfg.output_dir = None;
    assert_eq!(cfg.to_text(), pwzs::io::RunConfig::default().to_text());
}
