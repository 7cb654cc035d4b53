//! Run configuration: built-in defaults, overridden by command-line flags,
//! overridden in turn by a TOML config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use serde::Deserialize;

use xagent_core::causal::{CausalConfig, GProfile};
use xagent_core::control::{DEFAULT_EPS_WP, DEFAULT_KP, DEFAULT_TIME_LIMIT};
use xagent_core::demo::DEFAULT_STRIDE;
use xagent_core::maps;
use xagent_core::optimize::{DEFAULT_N_AVG, DEFAULT_RADIUS, DEFAULT_STEP};
use xagent_core::vision::DEFAULT_SIGMA;
use xagent_core::TileMap;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file whose values take precedence over flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Bundled map name (mission1, mission2, mission3) or path to a map file.
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Overrides the seed in the map header.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Blur width of the image distance, in pixels.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Half-width of the waypoint search window, in tiles.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Lattice spacing of the search window, in tiles.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Frames averaged per search candidate.
    #[arg(long, global = true)]
    pub n_avg: Option<usize>,
    /// Proportional gain of the waypoint controller.
    #[arg(long, global = true)]
    pub kp: Option<f64>,
    /// Arrival radius around a waypoint, in tiles.
    #[arg(long, global = true)]
    pub eps_wp: Option<f64>,
    /// Seconds allowed for waypoint tracking.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// Keep every n-th demonstrator step.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Extra camera noise of the demonstrator.
    #[arg(long, global = true)]
    pub demo_noise_sigma: Option<f64>,
    /// Render without observation noise.
    #[arg(long, global = true)]
    pub no_noise: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    map: Option<String>,
    seed: Option<u64>,
    sigma: Option<f64>,
    radius: Option<f64>,
    step: Option<f64>,
    n_avg: Option<usize>,
    kp: Option<f64>,
    eps_wp: Option<f64>,
    time_limit: Option<f64>,
    stride: Option<usize>,
    demo_noise_sigma: Option<f64>,
    noise: Option<bool>,
    out: Option<PathBuf>,
    causal: Option<CausalFile>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CausalFile {
    dt: Option<f64>,
    bin_width: Option<f64>,
    hp: Option<Vec<f64>>,
    target_hp: Option<f64>,
    profile: Option<GProfile>,
    duration: Option<f64>,
    k_fb: Option<f64>,
    description: Option<PathBuf>,
}

/// Flags of the `causal` subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CausalArgs {
    /// Description file; the built-in car description is used otherwise.
    #[arg(long)]
    pub description: Option<PathBuf>,
    /// Simulation time step, in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Width of the position bins of the learned road force.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Engine scales of the source cars, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hp: Option<Vec<f64>>,
    #[arg(long)]
    pub target_hp: Option<f64>,
    /// Road force profile: bumpy, flat or zero.
    #[arg(long)]
    pub profile: Option<GProfile>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub k_fb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: Option<String>,
    pub seed: Option<u64>,
    pub sigma: f64,
    pub radius: f64,
    pub step: f64,
    pub n_avg: usize,
    pub kp: f64,
    pub eps_wp: f64,
    pub time_limit: f64,
    pub stride: usize,
    pub demo_noise_sigma: f64,
    pub noise: bool,
    pub out: Option<PathBuf>,
    pub causal: CausalConfig,
    pub description: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: None,
            seed: None,
            sigma: DEFAULT_SIGMA,
            radius: DEFAULT_RADIUS,
            step: DEFAULT_STEP,
            n_avg: DEFAULT_N_AVG,
            kp: DEFAULT_KP,
            eps_wp: DEFAULT_EPS_WP,
            time_limit: DEFAULT_TIME_LIMIT,
            stride: DEFAULT_STRIDE,
            demo_noise_sigma: 0.0,
            noise: true,
            out: None,
            causal: CausalConfig::default(),
            description: None,
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs, causal: Option<&CausalArgs>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_flags(common, causal);
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let file: FileConfig =
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            cfg.apply_file(file);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_flags(&mut self, a: &CommonArgs, c: Option<&CausalArgs>) {
        if a.map.is_some() {
            self.map = a.map.clone();
        }
        if a.seed.is_some() {
            self.seed = a.seed;
        }
        set(&mut self.sigma, a.sigma);
        set(&mut self.radius, a.radius);
        set(&mut self.step, a.step);
        set(&mut self.n_avg, a.n_avg);
        set(&mut self.kp, a.kp);
        set(&mut self.eps_wp, a.eps_wp);
        set(&mut self.time_limit, a.time_limit);
        set(&mut self.stride, a.stride);
        set(&mut self.demo_noise_sigma, a.demo_noise_sigma);
        if a.no_noise {
            self.noise = false;
        }
        if a.out.is_some() {
            self.out = a.out.clone();
        }
        if let Some(c) = c {
            let k = &mut self.causal;
            set(&mut k.dt, c.dt);
            set(&mut k.bin_width, c.bin_width);
            set(&mut k.source_hp, c.hp.clone());
            set(&mut k.target_hp, c.target_hp);
            set(&mut k.profile, c.profile);
            set(&mut k.duration, c.duration);
            set(&mut k.k_fb, c.k_fb);
            if c.description.is_some() {
                self.description = c.description.clone();
            }
        }
    }

    fn apply_file(&mut self, f: FileConfig) {
        if f.map.is_some() {
            self.map = f.map;
        }
        if f.seed.is_some() {
            self.seed = f.seed;
        }
        set(&mut self.sigma, f.sigma);
        set(&mut self.radius, f.radius);
        set(&mut self.step, f.step);
        set(&mut self.n_avg, f.n_avg);
        set(&mut self.kp, f.kp);
        set(&mut self.eps_wp, f.eps_wp);
        set(&mut self.time_limit, f.time_limit);
        set(&mut self.stride, f.stride);
        set(&mut self.demo_noise_sigma, f.demo_noise_sigma);
        set(&mut self.noise, f.noise);
        if f.out.is_some() {
            self.out = f.out;
        }
        if let Some(c) = f.causal {
            let k = &mut self.causal;
            set(&mut k.dt, c.dt);
            set(&mut k.bin_width, c.bin_width);
            set(&mut k.source_hp, c.hp);
            set(&mut k.target_hp, c.target_hp);
            set(&mut k.profile, c.profile);
            set(&mut k.duration, c.duration);
            set(&mut k.k_fb, c.k_fb);
            if c.description.is_some() {
                self.description = c.description;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("radius", self.radius),
            ("step", self.step),
            ("kp", self.kp),
            ("eps_wp", self.eps_wp),
            ("time_limit", self.time_limit),
        ] {
            ensure!(v > 0.0 && v.is_finite(), "{name} must be positive, got {v}");
        }
        ensure!(self.n_avg > 0, "n_avg must be at least 1");
        ensure!(self.stride > 0, "stride must be at least 1");
        ensure!(
            self.demo_noise_sigma >= 0.0 && self.demo_noise_sigma.is_finite(),
            "demo_noise_sigma must be non-negative"
        );
        ensure!(self.step <= self.radius, "step must not exceed radius");
        self.causal.validate()?;
        Ok(())
    }

    pub fn out_dir(&self, fallback: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
    }

    /// Loads the configured map, applying the seed override. Returns the map
    /// and an identifier for reports.
    pub fn load_map(&self, fallback: Option<&str>) -> Result<(TileMap, String)> {
        let Some(name) = self.map.as_deref().or(fallback) else {
            bail!("no map given; pass --map or set `map` in the config file");
        };
        let (mut map, id) = match maps::bundled(name) {
            Some(parsed) => (
                parsed.with_context(|| format!("bundled map {name}"))?,
                name.trim_end_matches(".map").to_string(),
            ),
            None => {
                let path = Path::new(name);
                let map = TileMap::load(path).with_context(|| format!("loading map {name}"))?;
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| name.to_string());
                (map, id)
            }
        };
        if let Some(seed) = self.seed {
            let mut params = map.params();
            params.seed = seed;
            map.set_params(params);
        }
        Ok((map, id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_flags_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sigma = 2.5\n[causal]\ntarget_hp = 70.0\n").unwrap();
        let flags = CommonArgs {
            config: Some(path),
            sigma: Some(1.0),
            kp: Some(3.0),
            ..CommonArgs::default()
        };
        let cfg = RunConfig::resolve(&flags, None).unwrap();
        assert_eq!(cfg.sigma, 2.5);
        assert_eq!(cfg.kp, 3.0);
        assert_eq!(cfg.radius, DEFAULT_RADIUS);
        assert_eq!(cfg.causal.target_hp, 70.0);
    }

    #[test]
    fn rejects_non_positive_values() {
        let flags = CommonArgs {
            step: Some(0.0),
            ..CommonArgs::default()
        };
        assert!(RunConfig::resolve(&flags, None).is_err());
    }

    #[test]
    fn unknown_config_keys_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sigmaa = 2.5\n").unwrap();
        let flags = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        assert!(RunConfig::resolve(&flags, None).is_err());
    }

    #[test]
    fn seed_override_and_bundled_lookup() {
        let cfg = RunConfig {
            map: Some("mission1".into()),
            seed: Some(5),
            ..RunConfig::default()
        };
        let (map, id) = cfg.load_map(None).unwrap();
        assert_eq!(id, "mission1");
        assert_eq!(map.params().seed, 5);
        let missing = RunConfig {
            map: Some("/nonexistent/x.map".into()),
            ..RunConfig::default()
        };
        assert!(missing.load_map(None).is_err());
    }
}
