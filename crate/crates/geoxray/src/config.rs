//! Experiment configuration: presets plus a line-oriented `key = value`
//! format with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! name = ex4
//! grid.n = 96
//! landweber.k_max = 51
//! ```
//!
//! `name` selects the preset the remaining keys are applied to, so it is
//! read first wherever it appears.

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use geoxray_core::{AttenuationKind, NoiseSpec, PhantomSpec, SpeedConvention, SpeedKind, Vec2};

use crate::RunError;

pub const PRESETS: [&str; 10] = [
    "ex1",
    "ex2",
    "ex3",
    "ex4",
    "ex5",
    "ex_local",
    "ex6_clean",
    "ex6_gauss",
    "ex6_poisson",
    "custom",
];

/// Peak of the Gaussian attenuation used by the positive-attenuation presets.
pub const PRESET_BUMP_A0: f64 = 5.0;
pub const PRESET_CUTOFF: (f64, f64) = (0.75, 0.99);
pub const PRESET_RAYS: (usize, usize) = (512, 256);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// `safety / ||L||^2` from a power-method estimate.
    Auto { safety: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub n: usize,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub speed: SpeedKind,
    pub convention: SpeedConvention,
    pub attenuation: AttenuationKind,
    pub phantom: PhantomSpec,
    pub noise: NoiseSpec,
    pub gamma: GammaMode,
    pub k_max: usize,
    pub snapshots: Vec<usize>,
    pub opnorm_iters: usize,
    pub cutoff: (f64, f64),
    /// Run the conjugate-pair census on the experiment's rays.
    pub census: bool,
    /// Directions per seed when tracing the conjugate locus for the mask.
    pub mask_dirs: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

fn gaussian_bump(a0: f64) -> AttenuationKind {
    match AttenuationKind::gaussian_bump() {
        AttenuationKind::GaussianBump { center, width, .. } => {
            AttenuationKind::GaussianBump { a0, center, width }
        }
        other => other,
    }
}

/// `disk2` moved onto the geodesics that join the ex_local phantom to the
/// lower component of its conjugate locus.
pub fn local_disk() -> AttenuationKind {
    match AttenuationKind::disk2() {
        AttenuationKind::Disk { value, rolloff, .. } => AttenuationKind::Disk {
            value,
            center: Vec2::new(-0.05, -0.40),
            radius: 0.25,
            rolloff,
        },
        other => other,
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, RunError> {
        let c1 = SpeedKind::C1;
        let ex4_center = Vec2::new(-0.7, 0.0);
        let mut cfg = ExperimentConfig {
            name: name.to_string(),
            n: 128,
            n_beta: PRESET_RAYS.0,
            n_alpha: PRESET_RAYS.1,
            speed: c1,
            convention: SpeedConvention::Index,
            attenuation: AttenuationKind::Zero,
            phantom: PhantomSpec::Zero,
            noise: NoiseSpec::None,
            gamma: GammaMode::Auto {
                safety: geoxray_core::landweber::DEFAULT_SAFETY,
            },
            k_max: 101,
            snapshots: vec![1, 101, 201],
            opnorm_iters: 40,
            cutoff: PRESET_CUTOFF,
            census: true,
            mask_dirs: 512,
            seed: 1,
            out_dir: None,
        };
        match name {
            "ex1" => cfg.phantom = PhantomSpec::ellipse(Vec2::new(-0.5, 0.0)),
            "ex2" => {
                cfg.phantom = PhantomSpec::ellipse(Vec2::new(-0.5, 0.0));
                cfg.attenuation = gaussian_bump(PRESET_BUMP_A0);
            }
            "ex3" => {
                cfg.speed = SpeedKind::C2;
                cfg.phantom = PhantomSpec::coherent(Vec2::new(0.05, 0.1));
            }
            "ex4" => cfg.phantom = PhantomSpec::coherent(ex4_center),
            "ex5" => {
                cfg.phantom = PhantomSpec::coherent(ex4_center);
                cfg.attenuation = gaussian_bump(PRESET_BUMP_A0);
                cfg.k_max = 201;
            }
            "ex_local" => {
                cfg.speed = SpeedKind::C3;
                cfg.phantom = PhantomSpec::bump(Vec2::new(-0.75, 0.0));
                cfg.attenuation = local_disk();
            }
            "ex6_clean" => {
                cfg.phantom = PhantomSpec::coherent_positive(Vec2::ZERO);
                cfg.k_max = 201;
            }
            "ex6_gauss" => {
                cfg.phantom = PhantomSpec::coherent_positive(Vec2::ZERO);
                cfg.noise = NoiseSpec::Gaussian {
                    level: 0.17,
                    seed: cfg.seed,
                };
            }
            "ex6_poisson" => {
                cfg.phantom = PhantomSpec::coherent_positive(Vec2::ZERO);
                cfg.noise = NoiseSpec::Poisson {
                    peak: 10.0,
                    seed: cfg.seed,
                };
            }
            "custom" => {}
            _ => {
                return Err(RunError::Config(format!(
                    "unknown preset {name:?} (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(cfg)
    }

    /// Parses a config file body.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                RunError::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let name = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "name")
            .map(|(_, v)| v.as_str())
            .unwrap_or("custom");
        let mut cfg = Self::preset(name)?;
        for (k, v) in &pairs {
            if k != "name" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        let bad = |what: &str| RunError::Config(format!("{key}: {what} {value:?}"));
        let float = || value.parse::<f64>().map_err(|_| bad("expected a number, got"));
        let uint = || value.parse::<usize>().map_err(|_| bad("expected an integer, got"));
        match key {
            "name" => {
                *self = Self::preset(value)?;
            }
            "grid.n" => self.n = uint()?,
            "rays.n_beta" => self.n_beta = uint()?,
            "rays.n_alpha" => self.n_alpha = uint()?,
            "speed.kind" => {
                self.speed = SpeedKind::from_name(value).ok_or_else(|| bad("unknown speed"))?
            }
            "speed.convention" => {
                self.convention =
                    SpeedConvention::from_name(value).ok_or_else(|| bad("unknown convention"))?
            }
            "attenuation.kind" => {
                self.attenuation = match value {
                    "zero" => AttenuationKind::Zero,
                    "gaussian_bump" => gaussian_bump(PRESET_BUMP_A0),
                    "disk2" => AttenuationKind::disk2(),
                    _ => return Err(bad("unknown attenuation")),
                }
            }
            "attenuation.a0" => match &mut self.attenuation {
                AttenuationKind::GaussianBump { a0, .. } => *a0 = float()?,
                _ => return Err(bad("only applies to gaussian_bump, got")),
            },
            "attenuation.value" => match &mut self.attenuation {
                AttenuationKind::Disk { value: v, .. } => *v = float()?,
                _ => return Err(bad("only applies to disk2, got")),
            },
            "attenuation.radius" => match &mut self.attenuation {
                AttenuationKind::Disk { radius, .. } => *radius = float()?,
                _ => return Err(bad("only applies to disk2, got")),
            },
            "attenuation.center" => {
                let c = parse_point(value).ok_or_else(|| bad("expected x,y, got"))?;
                match &mut self.attenuation {
                    AttenuationKind::GaussianBump { center, .. } | AttenuationKind::Disk { center, .. } => {
                        *center = c
                    }
                    AttenuationKind::Zero => return Err(bad("does not apply to zero attenuation, got")),
                }
            }
            "phantom.kind" => {
                let c = self.phantom.center();
                self.phantom = match value {
                    "zero" => PhantomSpec::Zero,
                    "ellipse" => PhantomSpec::ellipse(c),
                    "coherent" => PhantomSpec::coherent(c),
                    "coherent_positive" => PhantomSpec::coherent_positive(c),
                    "bump" => PhantomSpec::bump(c),
                    _ => return Err(bad("unknown phantom")),
                }
            }
            "phantom.center" => {
                let c = parse_point(value).ok_or_else(|| bad("expected x,y, got"))?;
                self.phantom = self.phantom.with_center(c);
            }
            "phantom.amplitude" => {
                let a = float()?;
                self.phantom = self.phantom.with_amplitude(a);
            }
            "noise.kind" => {
                self.noise = match value {
                    "none" => NoiseSpec::None,
                    "gaussian" => NoiseSpec::Gaussian {
                        level: 0.17,
                        seed: self.seed,
                    },
                    "poisson" => NoiseSpec::Poisson {
                        peak: 10.0,
                        seed: self.seed,
                    },
                    _ => return Err(bad("unknown noise")),
                }
            }
            "noise.level" => match &mut self.noise {
                NoiseSpec::Gaussian { level, .. } => *level = float()?,
                _ => return Err(bad("only applies to gaussian noise, got")),
            },
            "noise.peak" => match &mut self.noise {
                NoiseSpec::Poisson { peak, .. } => *peak = float()?,
                _ => return Err(bad("only applies to poisson noise, got")),
            },
            "seed" => {
                self.seed = value.parse().map_err(|_| bad("expected an integer, got"))?;
                self.noise = match self.noise {
                    NoiseSpec::None => NoiseSpec::None,
                    NoiseSpec::Gaussian { level, .. } => NoiseSpec::Gaussian {
                        level,
                        seed: self.seed,
                    },
                    NoiseSpec::Poisson { peak, .. } => NoiseSpec::Poisson {
                        peak,
                        seed: self.seed,
                    },
                };
            }
            "landweber.gamma" => {
                self.gamma = if value == "auto" {
                    GammaMode::Auto {
                        safety: geoxray_core::landweber::DEFAULT_SAFETY,
                    }
                } else {
                    GammaMode::Fixed(float()?)
                }
            }
            "landweber.safety" => self.gamma = GammaMode::Auto { safety: float()? },
            "landweber.k_max" => self.k_max = uint()?,
            "landweber.snapshots" => {
                self.snapshots = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("expected a comma-separated list of integers, got"))?
            }
            "landweber.opnorm_iters" => self.opnorm_iters = uint()?,
            "cutoff.r_one" => self.cutoff.0 = float()?,
            "cutoff.r_zero" => self.cutoff.1 = float()?,
            "census.enabled" => {
                self.census = value.parse().map_err(|_| bad("expected true or false, got"))?
            }
            "mask.n_dirs" => self.mask_dirs = uint()?,
            "output.dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => return Err(RunError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let err = |m: String| Err(RunError::Config(m));
        if self.n < 8 {
            return err(format!("grid.n must be at least 8, got {}", self.n));
        }
        if self.n_beta < 8 || self.n_alpha < 8 {
            return err(format!(
                "rays must be at least 8 x 8, got {} x {}",
                self.n_beta, self.n_alpha
            ));
        }
        if self.k_max < 1 {
            return err("landweber.k_max must be at least 1".into());
        }
        match self.gamma {
            GammaMode::Auto { safety } if !(safety > 0.0 && safety < 1.0) => {
                return err(format!("landweber.safety must be in (0, 1), got {safety}"))
            }
            GammaMode::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                return err(format!("landweber.gamma must be positive, got {g}"))
            }
            _ => {}
        }
        if self.opnorm_iters < 20 {
            return err(format!("landweber.opnorm_iters must be at least 20, got {}", self.opnorm_iters));
        }
        let (r1, r0) = self.cutoff;
        if !(0.0 < r1 && r1 < r0 && r0 <= 1.0) {
            return err(format!("cutoff radii must satisfy 0 < r_one < r_zero <= 1, got ({r1}, {r0})"));
        }
        Ok(())
    }

    /// Snapshot iterations that fall within `k_max`, always including it.
    pub fn snapshot_list(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.snapshots.iter().copied().filter(|&k| k <= self.k_max).collect();
        s.push(self.k_max);
        s.sort_unstable();
        s.dedup();
        s
    }
}

fn parse_point(s: &str) -> Option<Vec2> {
    let (x, y) = s.split_once(',')?;
    Some(Vec2::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

/// Serializes every setting, so that a written config reproduces the run.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "grid.n = {}", self.n);
        let _ = writeln!(s, "rays.n_beta = {}", self.n_beta);
        let _ = writeln!(s, "rays.n_alpha = {}", self.n_alpha);
        let _ = writeln!(s, "speed.kind = {}", self.speed.name());
        let _ = writeln!(s, "speed.convention = {}", self.convention.name());
        let _ = writeln!(s, "attenuation.kind = {}", self.attenuation.name());
        match self.attenuation {
            AttenuationKind::GaussianBump { a0, center, .. } => {
                let _ = writeln!(s, "attenuation.a0 = {a0}");
                let _ = writeln!(s, "attenuation.center = {},{}", center.x, center.y);
            }
            AttenuationKind::Disk {
                value,
                center,
                radius,
                ..
            } => {
                let _ = writeln!(s, "attenuation.value = {value}");
                let _ = writeln!(s, "attenuation.radius = {radius}");
                let _ = writeln!(s, "attenuation.center = {},{}", center.x, center.y);
            }
            AttenuationKind::Zero => {}
        }
        let _ = writeln!(s, "phantom.kind = {}", self.phantom.name());
        if self.phantom != PhantomSpec::Zero {
            let c = self.phantom.center();
            let _ = writeln!(s, "phantom.center = {},{}", c.x, c.y);
            let _ = writeln!(s, "phantom.amplitude = {}", self.phantom.amplitude());
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "noise.kind = {}", self.noise.name());
        match self.noise {
            NoiseSpec::Gaussian { level, .. } => {
                let _ = writeln!(s, "noise.level = {level}");
            }
            NoiseSpec::Poisson { peak, .. } => {
                let _ = writeln!(s, "noise.peak = {peak}");
            }
            NoiseSpec::None => {}
        }
        match self.gamma {
            GammaMode::Auto { safety } => {
                let _ = writeln!(s, "landweber.safety = {safety}");
            }
            GammaMode::Fixed(g) => {
                let _ = writeln!(s, "landweber.gamma = {g}");
            }
        }
        let _ = writeln!(s, "landweber.k_max = {}", self.k_max);
        let snaps: Vec<String> = self.snapshots.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "landweber.snapshots = {}", snaps.join(","));
        let _ = writeln!(s, "landweber.opnorm_iters = {}", self.opnorm_iters);
        let _ = writeln!(s, "cutoff.r_one = {}", self.cutoff.0);
        let _ = writeln!(s, "cutoff.r_zero = {}", self.cutoff.1);
        let _ = writeln!(s, "census.enabled = {}", self.census);
        let _ = writeln!(s, "mask.n_dirs = {}", self.mask_dirs);
        if let Some(dir) = &self.out_dir {
            let _ = writeln!(s, "output.dir = {}", dir.display());
        }
        f.write_str(&s)
    }
}
