//! Deterministic tile world with a continuous agent position.
//!
//! The agent never rotates: `forward` moves along +x, `strafe` along +y.
//! Every environment query (`step`, `render`, `teleport`) bumps the
//! interaction counter, including queries that fail.

pub mod map;
pub mod render;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use map::{MapError, MapParams, TileKind, TileMap, REPETITIVE, TEXTURE_COUNT};

use crate::vision::{Frame, FRAME_HEIGHT, FRAME_WIDTH};

/// Half extent of the agent's square collision box, in tiles.
pub const AGENT_RADIUS: f64 = 0.2;
/// Speed multiplier while standing in a web.
pub const WEB_SPEED_FACTOR: f64 = 0.3;
/// Standard deviation of the per-pixel observation noise.
pub const OBS_NOISE_SIGMA: f64 = 0.05;

const COLLISION_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("agent is dead")]
    DeadAgent,
    #[error("position ({x:.3}, {y:.3}) is not traversable")]
    Untraversable { x: f64, y: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),
}

/// Continuous position in tile units. Serializes as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(self, dx: f64, dy: f64) -> Position {
        Position::new(self.x + dx, self.y + dy)
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Position::new(x, y)
    }
}

impl From<Position> for [f64; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Forward/strafe command, each component clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    forward: f64,
    strafe: f64,
}

impl Action {
    pub fn new(forward: f64, strafe: f64) -> Self {
        let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Self {
            forward: clamp(forward),
            strafe: clamp(strafe),
        }
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn strafe(&self) -> f64 {
        self.strafe
    }
}

/// Multiplier applied to top speed on a given tile.
pub fn speed_factor(tile: TileKind) -> f64 {
    match tile {
        TileKind::Web => WEB_SPEED_FACTOR,
        _ => 1.0,
    }
}

fn body_cells(c: f64) -> (isize, isize) {
    (
        (c - AGENT_RADIUS + COLLISION_EPS).floor() as isize,
        (c + AGENT_RADIUS - COLLISION_EPS).floor() as isize,
    )
}

/// Whether the agent's collision box centered at `p` overlaps a wall tile.
pub fn body_hits_wall(map: &TileMap, p: Position) -> bool {
    let (x0, x1) = body_cells(p.x);
    let (y0, y1) = body_cells(p.y);
    (y0..=y1).any(|y| (x0..=x1).any(|x| map.tile(x, y).is_wall()))
}

/// Whether the agent can stand at `p`: inside the map, not on a wall or lava
/// tile and with its collision box clear of walls.
pub fn is_traversable(map: &TileMap, p: Position) -> bool {
    map.in_bounds(p) && map.tile_at(p).is_traversable() && !body_hits_wall(map, p)
}

/// Moves one axis by `delta`, stopping at the first wall face.
fn slide_axis(map: &TileMap, pos: Position, delta: f64, along_x: bool) -> Position {
    if delta == 0.0 {
        return pos;
    }
    let moved = if along_x {
        pos.offset(delta, 0.0)
    } else {
        pos.offset(0.0, delta)
    };
    let (c0, c1) = if along_x { body_cells(moved.x) } else { body_cells(moved.y) };
    let (o0, o1) = if along_x { body_cells(moved.y) } else { body_cells(moved.x) };
    let blocked = |c: isize| {
        (o0..=o1).any(|o| {
            let tile = if along_x { map.tile(c, o) } else { map.tile(o, c) };
            tile.is_wall()
        })
    };
    let coord = if delta > 0.0 {
        match (c0..=c1).find(|c| blocked(*c)) {
            Some(c) => c as f64 - AGENT_RADIUS,
            None => return moved,
        }
    } else {
        match (c0..=c1).rev().find(|c| blocked(*c)) {
            Some(c) => c as f64 + 1.0 + AGENT_RADIUS,
            None => return moved,
        }
    };
    if along_x {
        Position::new(coord, pos.y)
    } else {
        Position::new(pos.x, coord)
    }
}

/// Position after one step from `pos`, ignoring lava. Pure; used by
/// [`WorldState::step`] and by agents predicting their own motion.
pub fn kinematic_step(map: &TileMap, pos: Position, action: Action, dt: f64) -> Position {
    let speed = map.params().s_max * speed_factor(map.tile_at(pos));
    let after_x = slide_axis(map, pos, dt * speed * action.forward, true);
    slide_axis(map, after_x, dt * speed * action.strafe, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    map: TileMap,
    pos: Position,
    clock: f64,
    alive: bool,
    seed: u64,
    interactions: u64,
    rng: ChaCha8Rng,
}

impl WorldState {
    /// Fresh world at the map's spawn, seeded from the map header.
    pub fn new(map: TileMap) -> Self {
        let seed = map.params().seed;
        Self::with_seed(map, seed)
    }

    pub fn with_seed(map: TileMap, seed: u64) -> Self {
        Self {
            pos: map.spawn(),
            map,
            clock: 0.0,
            alive: true,
            seed,
            interactions: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn map(&self) -> &TileMap {
        &self.map
    }

    pub fn pos(&self) -> Position {
        self.pos
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn alive(&self) -> bool {
        self.alive
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    /// Control period from the map header.
    pub fn dt(&self) -> f64 {
        self.map.params().dt
    }

    pub fn s_max(&self) -> f64 {
        self.map.params().s_max
    }

    pub fn tile(&self) -> TileKind {
        self.map.tile_at(self.pos)
    }

    pub fn on_goal(&self) -> bool {
        self.tile() == TileKind::Goal
    }

    /// Advances the agent by one control period of length `dt`.
    pub fn step(&mut self, action: Action, dt: f64) -> Result<(), WorldError> {
        self.interactions += 1;
        if !self.alive {
            return Err(WorldError::DeadAgent);
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(WorldError::InvalidDt(dt));
        }
        self.pos = kinematic_step(&self.map, self.pos, action, dt);
        self.clock += dt;
        if self.map.tile_at(self.pos) == TileKind::Lava {
            self.alive = false;
        }
        Ok(())
    }

    /// Renders the current view, optionally with observation noise.
    pub fn render(&mut self, noise: bool) -> Frame {
        self.render_with_sigma(if noise { OBS_NOISE_SIGMA } else { 0.0 })
    }

    /// Renders with Gaussian pixel noise of the given standard deviation.
    /// A zero sigma draws nothing from the RNG.
    pub fn render_with_sigma(&mut self, sigma: f64) -> Frame {
        self.interactions += 1;
        let mut pixels = render::render_clean(&self.map, self.pos);
        if sigma > 0.0 {
            for p in &mut pixels {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                *p += sigma * z;
            }
        }
        Frame::from_clamped(FRAME_WIDTH, FRAME_HEIGHT, pixels)
    }

    pub fn teleport(&mut self, p: Position) -> Result<(), WorldError> {
        self.interactions += 1;
        if !is_traversable(&self.map, p) {
            return Err(WorldError::Untraversable { x: p.x, y: p.y });
        }
        self.pos = p;
        Ok(())
    }

    /// Back to spawn with a zeroed clock and a reseeded RNG. The interaction
    /// counter is cumulative and survives restarts.
    pub fn restart(&mut self) {
        self.pos = self.map.spawn();
        self.clock = 0.0;
        self.alive = true;
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }
}

/// Noise-free frame seen from `pos`; does not touch any world state.
pub fn view(map: &TileMap, pos: Position) -> Frame {
    Frame::from_clamped(FRAME_WIDTH, FRAME_HEIGHT, render::render_clean(map, pos))
}
