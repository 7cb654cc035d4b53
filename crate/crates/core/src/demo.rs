//! Scripted demonstrator and demonstration directories.
//!
//! A demonstration directory holds `meta.jsonl` (one record per frame) and
//! numbered 8-bit PGM frames:
//!
//! ```text
//! meta.jsonl
//! frame_00000.pgm
//! frame_00001.pgm
//! ...
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{PController, DEFAULT_TIME_LIMIT};
use crate::vision::Frame;
use crate::world::{Position, WorldError, WorldState, OBS_NOISE_SIGMA};

pub const DEFAULT_STRIDE: usize = 3;
pub const META_FILE: &str = "meta.jsonl";

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("demonstrator failed: {0}")]
    DemonstratorFailed(String),
    #[error("invalid demonstrator path: {0}")]
    InvalidPath(String),
    #[error("corrupt demonstration: {0}")]
    CorruptDemo(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Recorded frames `y*_0..y*_L` with the demonstrator's true positions.
/// Positions are ground truth for evaluation only; agents read `frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub frames: Vec<Frame>,
    pub positions: Vec<Position>,
    pub stride: usize,
    pub map_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    /// Record every `stride`-th control step.
    pub stride: usize,
    /// Whether the demonstrator's camera adds observation noise.
    pub noise: bool,
    /// Extra camera noise on top of the world's observation noise.
    pub extra_sigma: f64,
    pub time_limit: f64,
    pub ctl: PController,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            stride: DEFAULT_STRIDE,
            noise: true,
            extra_sigma: 0.0,
            time_limit: DEFAULT_TIME_LIMIT,
            ctl: PController::default(),
        }
    }
}

impl DemoConfig {
    fn sigma(&self) -> f64 {
        let base = if self.noise { OBS_NOISE_SIGMA } else { 0.0 };
        base.hypot(self.extra_sigma)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaRecord {
    i: usize,
    x: f64,
    y: f64,
    frame_file: String,
    stride: usize,
    map_id: String,
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.pgm")
}

/// Drives the demonstrator through `path` from spawn and records every
/// `stride`-th step, plus the final position. Frames are 8-bit quantized.
pub fn run_demonstrator(
    world: &mut WorldState,
    path: &[Position],
    config: &DemoConfig,
    map_id: &str,
) -> Result<Demonstration, DemoError> {
    if config.stride == 0 {
        return Err(DemoError::InvalidPath("stride must be at least 1".into()));
    }
    if let Some(last) = path.last() {
        if world.map().tile_at(*last) != crate::world::TileKind::Goal {
            return Err(DemoError::InvalidPath(format!("path ends at {last}, not on the goal")));
        }
    }
    world.restart();
    let sigma = config.sigma();
    let dt = world.dt();
    let mut demo = Demonstration {
        frames: vec![world.render_with_sigma(sigma).quantized()],
        positions: vec![world.pos()],
        stride: config.stride,
        map_id: map_id.to_string(),
    };
    let mut steps = 0usize;
    for wp in path {
        while !config.ctl.arrived(world.pos(), *wp) {
            if world.clock() >= config.time_limit - 1e-9 {
                return Err(DemoError::DemonstratorFailed(format!(
                    "time limit of {} s exceeded heading to {wp}",
                    config.time_limit
                )));
            }
            match world.step(config.ctl.action(world.pos(), *wp), dt) {
                Ok(()) => {}
                Err(WorldError::DeadAgent) => unreachable!("dead agents are caught below"),
                Err(e) => return Err(DemoError::DemonstratorFailed(e.to_string())),
            }
            if !world.alive() {
                return Err(DemoError::DemonstratorFailed(format!(
                    "died at {}",
                    world.pos()
                )));
            }
            steps += 1;
            if steps.is_multiple_of(config.stride) {
                demo.frames.push(world.render_with_sigma(sigma).quantized());
                demo.positions.push(world.pos());
            }
        }
    }
    if !steps.is_multiple_of(config.stride) {
        demo.frames.push(world.render_with_sigma(sigma).quantized());
        demo.positions.push(world.pos());
    }
    Ok(demo)
}

impl Demonstration {
    /// `L`: index of the last frame.
    pub fn len_l(&self) -> usize {
        self.frames.len() - 1
    }

    /// Largest distance between consecutive recorded positions.
    pub fn max_hop(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .fold(0.0, f64::max)
    }

    /// Per-frame reach bound for box-constrained actions: `stride` steps at
    /// full speed on both axes.
    pub fn reach_bound(&self, s_max: f64, dt: f64) -> f64 {
        self.stride as f64 * s_max * dt * std::f64::consts::SQRT_2
    }

    pub fn save(&self, dir: &Path) -> Result<(), DemoError> {
        fs::create_dir_all(dir)?;
        let mut meta = Vec::new();
        for (i, (frame, pos)) in self.frames.iter().zip(&self.positions).enumerate() {
            let name = frame_name(i);
            fs::write(dir.join(&name), frame.to_pgm())?;
            let rec = MetaRecord {
                i,
                x: pos.x,
                y: pos.y,
                frame_file: name,
                stride: self.stride,
                map_id: self.map_id.clone(),
            };
            let line = serde_json::to_string(&rec).map_err(std::io::Error::other)?;
            meta.extend_from_slice(line.as_bytes());
            meta.push(b'\n');
        }
        fs::File::create(dir.join(META_FILE))?.write_all(&meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Demonstration, DemoError> {
        let corrupt = |msg: String| DemoError::CorruptDemo(msg);
        let meta = fs::File::open(dir.join(META_FILE))
            .map_err(|e| corrupt(format!("{}: {e}", dir.join(META_FILE).display())))?;
        let mut frames = Vec::new();
        let mut positions = Vec::new();
        let mut header: Option<(usize, String)> = None;
        for (lineno, line) in BufReader::new(meta).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: MetaRecord = serde_json::from_str(&line)
                .map_err(|e| corrupt(format!("{META_FILE} line {}: {e}", lineno + 1)))?;
            if rec.i != frames.len() {
                return Err(corrupt(format!("expected record {}, found {}", frames.len(), rec.i)));
            }
            match &header {
                None => header = Some((rec.stride, rec.map_id.clone())),
                Some((stride, map_id)) if *stride != rec.stride || *map_id != rec.map_id => {
                    return Err(corrupt(format!("record {} disagrees on stride/map_id", rec.i)))
                }
                Some(_) => {}
            }
            if rec.frame_file.contains(['/', '\\']) {
                return Err(corrupt(format!("frame path {:?} escapes the directory", rec.frame_file)));
            }
            let frame = Frame::load_pgm(&dir.join(&rec.frame_file))
                .map_err(|e| corrupt(format!("{}: {e}", rec.frame_file)))?;
            if let Some(first) = frames.first() {
                let first: &Frame = first;
                if (first.width(), first.height()) != (frame.width(), frame.height()) {
                    return Err(corrupt(format!("{} has a different size", rec.frame_file)));
                }
            }
            frames.push(frame);
            positions.push(Position::new(rec.x, rec.y));
        }
        let (stride, map_id) = header.ok_or_else(|| corrupt("no records".into()))?;
        Ok(Demonstration {
            frames,
            positions,
            stride,
            map_id,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::TileMap;

    fn corridor() -> TileMap {
        TileMap::parse("9 3 4 0.1 5\n#########\n#S.....G#\n#########\nwp 7.5 1.5\n").unwrap()
    }

    #[test]
    fn corridor_demo_length_and_end() {
        let map = corridor();
        let path = map.path().to_vec();
        let mut world = WorldState::new(map);
        let cfg = DemoConfig {
            stride: 2,
            ..DemoConfig::default()
        };
        let demo = run_demonstrator(&mut world, &path, &cfg, "corridor").unwrap();
        // steps oracle: simulate the controller alone on the same corridor
        let mut pos = 1.5f64;
        let mut steps = 0usize;
        while (7.5 - pos).abs() > cfg.ctl.eps_wp() {
            let a = (cfg.ctl.kp() * (7.5 - pos)).clamp(-1.0, 1.0);
            pos += 0.4 * a;
            steps += 1;
        }
        assert_eq!(demo.len_l(), steps.div_ceil(2));
        let last = *demo.positions.last().unwrap();
        assert!(last.distance(Position::new(7.5, 1.5)) <= cfg.ctl.eps_wp());
        assert!(demo.max_hop() <= demo.reach_bound(4.0, 0.1) + 1e-12);
    }

    #[test]
    fn stride_two_is_subsequence_of_stride_one() {
        let map = corridor();
        let path = map.path().to_vec();
        let one = run_demonstrator(
            &mut WorldState::new(map.clone()),
            &path,
            &DemoConfig {
                stride: 1,
                ..DemoConfig::default()
            },
            "c",
        )
        .unwrap();
        let two = run_demonstrator(
            &mut WorldState::new(map),
            &path,
            &DemoConfig {
                stride: 2,
                ..DemoConfig::default()
            },
            "c",
        )
        .unwrap();
        let mut it = one.positions.iter();
        for p in &two.positions {
            assert!(it.any(|q| q == p), "{p} missing");
        }
    }

    #[test]
    fn lava_path_fails() {
        let map = TileMap::parse("9 3 4 0.1 5\n#########\n#S..L..G#\n#########\n").unwrap();
        let mut world = WorldState::new(map);
        let err = run_demonstrator(&mut world, &[Position::new(7.5, 1.5)], &DemoConfig::default(), "l");
        assert!(matches!(err, Err(DemoError::DemonstratorFailed(_))));
    }

    #[test]
    fn path_must_end_on_goal() {
        let map = corridor();
        let mut world = WorldState::new(map);
        let err = run_demonstrator(&mut world, &[Position::new(4.5, 1.5)], &DemoConfig::default(), "c");
        assert!(matches!(err, Err(DemoError::InvalidPath(_))));
    }

    #[test]
    fn save_load_roundtrip_and_corruption() {
        let map = corridor();
        let path = map.path().to_vec();
        let demo = run_demonstrator(&mut WorldState::new(map), &path, &DemoConfig::default(), "corridor").unwrap();
        let dir = tempfile::tempdir().unwrap();
        demo.save(dir.path()).unwrap();
        assert_eq!(Demonstration::load(dir.path()).unwrap(), demo);

        fs::remove_file(dir.path().join(frame_name(1))).unwrap();
        assert!(matches!(Demonstration::load(dir.path()), Err(DemoError::CorruptDemo(_))));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(Demonstration::load(empty.path()), Err(DemoError::CorruptDemo(_))));
        fs::write(empty.path().join(META_FILE), "").unwrap();
        assert!(matches!(Demonstration::load(empty.path()), Err(DemoError::CorruptDemo(_))));
    }

    #[test]
    fn frames_replay_under_seed() {
        let map = corridor();
        let path = map.path().to_vec();
        let a = run_demonstrator(&mut WorldState::new(map.clone()), &path, &DemoConfig::default(), "c").unwrap();
        let b = run_demonstrator(&mut WorldState::new(map.clone()), &path, &DemoConfig::default(), "c").unwrap();
        assert_eq!(a, b);
        let other = run_demonstrator(&mut WorldState::with_seed(map, 77), &path, &DemoConfig::default(), "c").unwrap();
        assert_eq!(a.positions, other.positions);
        assert_ne!(a.frames, other.frames);
    }
}
