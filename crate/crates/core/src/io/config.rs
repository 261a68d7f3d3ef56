//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Circle lists are `z,x,r` triples separated by `;`, cysts are
//! `z,x,r,scale` quadruples, and `speckle_rect` is `z0,x0,height,width`.
//! Every key has a default except `input` and `output_dir`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{Circle, Rect, RoiSpec};
use crate::simulator::{linspace_angles, Cyst, Fixture, NoiseModel, PhantomSpec};
use crate::zerotrain::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Denoised raster to score; defaults to `output_dir/denoised.f32`.
    pub image: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub k: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    /// Master seed: phantom `seed`, frames `seed + 1`, network init `seed`.
    pub seed: u64,
    pub verify_gradients: bool,
    pub height: usize,
    pub width: usize,
    pub cysts: Vec<Cyst>,
    pub background_echogenicity: f64,
    pub noise_sigma: f64,
    pub artifact_amplitude: f64,
    pub artifact_period: f64,
    pub n_angles: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub roi_circles: Vec<Circle>,
    pub background_circles: Vec<Circle>,
    pub speckle_rect: Rect,
    pub n_windows: usize,
    pub window_radius: usize,
}

pub const KEYS: &[&str] = &[
    "input",
    "output_dir",
    "image",
    "checkpoint",
    "k",
    "iterations",
    "learning_rate",
    "alpha",
    "seed",
    "verify_gradients",
    "height",
    "width",
    "cysts",
    "background_echogenicity",
    "noise_sigma",
    "artifact_amplitude",
    "artifact_period",
    "n_angles",
    "angle_min",
    "angle_max",
    "roi_circles",
    "background_circles",
    "speckle_rect",
    "n_windows",
    "window_radius",
];

impl Default for RunConfig {
    /// The standard simulation fixture with the default training setup.
    fn default() -> Self {
        let fx = Fixture::standard();
        let train = TrainConfig::default();
        RunConfig {
            input: None,
            output_dir: None,
            image: None,
            checkpoint: None,
            k: fx.k,
            iterations: train.iterations,
            learning_rate: train.learning_rate,
            alpha: train.alpha,
            seed: fx.phantom.seed,
            verify_gradients: false,
            height: fx.phantom.height,
            width: fx.phantom.width,
            cysts: fx.phantom.cysts,
            background_echogenicity: fx.phantom.background_echogenicity,
            noise_sigma: fx.noise.white_noise_sigma,
            artifact_amplitude: fx.noise.artifact_amplitude,
            artifact_period: fx.noise.artifact_period_px,
            n_angles: fx.angles_deg.len(),
            angle_min: fx.angles_deg[0],
            angle_max: *fx.angles_deg.last().unwrap(),
            roi_circles: fx.roi.roi_circles,
            background_circles: fx.roi.background_circles,
            speckle_rect: fx.roi.speckle_rect,
            n_windows: 20,
            window_radius: 10,
        }
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?} as a number"))
}

fn tuple(v: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated values in {v:?}"));
    }
    parts.into_iter().map(num::<f64>).collect()
}

fn list(v: &str, n: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| tuple(s, n))
        .collect()
}

fn circles(v: &str) -> std::result::Result<Vec<Circle>, String> {
    Ok(list(v, 3)?.into_iter().map(|t| Circle::new(t[0], t[1], t[2])).collect())
}

fn fmt_circles(c: &[Circle]) -> String {
    c.iter()
        .map(|c| format!("{},{},{}", c.center_z, c.center_x, c.radius))
        .collect::<Vec<_>>()
        .join("; ")
}

impl RunConfig {
    /// Parses `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                detail: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line: line_no,
                    detail: format!("duplicate key {key:?}"),
                });
            }
            cfg.set(key, value.trim()).map_err(|detail| Error::Config { line: line_no, detail })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Assigns one key; the error is a human-readable reason.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "input" => self.input = Some(v.into()),
            "output_dir" => self.output_dir = Some(v.into()),
            "image" => self.image = Some(v.into()),
            "checkpoint" => self.checkpoint = Some(v.into()),
            "k" => self.k = num(v)?,
            "iterations" => self.iterations = num(v)?,
            "learning_rate" => self.learning_rate = num(v)?,
            "alpha" => self.alpha = num(v)?,
            "seed" => self.seed = num(v)?,
            "verify_gradients" => {
                self.verify_gradients = v.parse().map_err(|_| format!("expected true or false, got {v:?}"))?
            }
            "height" => self.height = num(v)?,
            "width" => self.width = num(v)?,
            "cysts" => {
                self.cysts = list(v, 4)?
                    .into_iter()
                    .map(|t| Cyst {
                        center_z: t[0],
                        center_x: t[1],
                        radius: t[2],
                        echogenicity_scale: t[3],
                    })
                    .collect()
            }
            "background_echogenicity" => self.background_echogenicity = num(v)?,
            "noise_sigma" => self.noise_sigma = num(v)?,
            "artifact_amplitude" => self.artifact_amplitude = num(v)?,
            "artifact_period" => self.artifact_period = num(v)?,
            "n_angles" => self.n_angles = num(v)?,
            "angle_min" => self.angle_min = num(v)?,
            "angle_max" => self.angle_max = num(v)?,
            "roi_circles" => self.roi_circles = circles(v)?,
            "background_circles" => self.background_circles = circles(v)?,
            "speckle_rect" => {
                let t = tuple(v, 4)?;
                if t.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
                    return Err(format!("speckle_rect needs non-negative integers, got {v:?}"));
                }
                self.speckle_rect = Rect {
                    z0: t[0] as usize,
                    x0: t[1] as usize,
                    height: t[2] as usize,
                    width: t[3] as usize,
                };
            }
            "n_windows" => self.n_windows = num(v)?,
            "window_radius" => self.window_radius = num(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
            .map_err(|e| Error::invalid(format!("override {assignment:?}: {e}")))
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::invalid("missing required key `input`"))
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Error::invalid("missing required key `output_dir`"))
    }

    pub fn image_path(&self) -> Result<PathBuf> {
        match &self.image {
            Some(p) => Ok(p.clone()),
            None => Ok(self.output_dir()?.join("denoised.f32")),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            alpha: self.alpha,
            seed: self.seed,
            verify_gradients: self.verify_gradients,
        }
    }

    pub fn roi(&self) -> RoiSpec {
        RoiSpec {
            roi_circles: self.roi_circles.clone(),
            background_circles: self.background_circles.clone(),
            speckle_rect: self.speckle_rect,
        }
    }

    pub fn fixture(&self) -> Result<Fixture> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be ≥ 2, got {}", self.k)));
        }
        Ok(Fixture {
            phantom: PhantomSpec {
                height: self.height,
                width: self.width,
                cysts: self.cysts.clone(),
                background_echogenicity: self.background_echogenicity,
                seed: self.seed,
            },
            noise: NoiseModel {
                white_noise_sigma: self.noise_sigma,
                artifact_amplitude: self.artifact_amplitude,
                artifact_period_px: self.artifact_period,
            },
            angles_deg: linspace_angles(self.angle_min, self.angle_max, self.n_angles)?,
            k: self.k,
            stack_seed: self.seed.wrapping_add(1),
            roi: self.roi(),
        })
    }

    /// Serializes every key; parsing the result yields `self` again.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (k, v) in [
            ("input", path(&self.input)),
            ("output_dir", path(&self.output_dir)),
            ("image", path(&self.image)),
            ("checkpoint", path(&self.checkpoint)),
        ] {
            if let Some(v) = v {
                writeln!(s, "{k} = {v}").unwrap();
            }
        }
        writeln!(s, "k = {}", self.k).unwrap();
        writeln!(s, "iterations = {}", self.iterations).unwrap();
        writeln!(s, "learning_rate = {}", self.learning_rate).unwrap();
        writeln!(s, "alpha = {}", self.alpha).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "verify_gradients = {}", self.verify_gradients).unwrap();
        writeln!(s, "height = {}", self.height).unwrap();
        writeln!(s, "width = {}", self.width).unwrap();
        let cysts: Vec<String> = self
            .cysts
            .iter()
            .map(|c| format!("{},{},{},{}", c.center_z, c.center_x, c.radius, c.echogenicity_scale))
            .collect();
        writeln!(s, "cysts = {}", cysts.join("; ")).unwrap();
        writeln!(s, "background_echogenicity = {}", self.background_echogenicity).unwrap();
        writeln!(s, "noise_sigma = {}", self.noise_sigma).unwrap();
        writeln!(s, "artifact_amplitude = {}", self.artifact_amplitude).unwrap();
        writeln!(s, "artifact_period = {}", self.artifact_period).unwrap();
        writeln!(s, "n_angles = {}", self.n_angles).unwrap();
        writeln!(s, "angle_min = {}", self.angle_min).unwrap();
        writeln!(s, "angle_max = {}", self.angle_max).unwrap();
        writeln!(s, "roi_circles = {}", fmt_circles(&self.roi_circles)).unwrap();
        writeln!(s, "background_circles = {}", fmt_circles(&self.background_circles)).unwrap();
        let r = self.speckle_rect;
        writeln!(s, "speckle_rect = {},{},{},{}", r.z0, r.x0, r.height, r.width).unwrap();
        writeln!(s, "n_windows = {}", self.n_windows).unwrap();
        writeln!(s, "window_radius = {}", self.window_radius).unwrap();
        s
    }
}
